#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "p3dvd/geometry.hpp"
#include "p3dvd/records.hpp"

namespace p3dvd {

// IoU thresholds and the per-attribute error threshold sweeps. Defaults are
// the published schedules.
struct ThresholdSchedule {
  std::vector<double> lambdas;    // 0.5:0.05:0.95
  std::vector<double> lambda_b;   // 0.02:0.02:0.2, on 1 - IoU
  std::vector<double> lambda_r;   // 0.01:0.01:0.1, on |r| error
  std::vector<double> lambda_a;   // 0.01:0.01:0.1, on |theta_n| error
  std::vector<double> lambda_p;   // 2:2:20 px, on wheel-midpoint distance

  static ThresholdSchedule defaults();
};

// Matched (gt, pred) pair with everything the attribute metrics consume.
struct PairErrors {
  int gt_index = 0;
  int pred_index = 0;
  double iou = 0.0;
  double r_err = 0.0;
  bool pose_match = false;
  bool gt_has_spl = false;
  double theta_err = 0.0;  // |theta_n| difference
  double pwc_err = 0.0;    // Euclidean pixels
  double gt_area = 0.0;
};

struct MatchSet {
  std::vector<PairErrors> pairs;

  int n_t() const { return static_cast<int>(pairs.size()); }
  int n_t_prime() const;
};

// Greedy one-to-one matching within one image: predictions in descending
// score order each take the unmatched gt of highest IoU >= lambda
// (ties: lower gt index).
MatchSet match_pairs(const std::vector<AnnotationRecord>& gts,
                     const std::vector<AnnotationRecord>& preds, double lambda);

// Per-attribute precisions at one IoU threshold. Box-family metrics are
// undefined (nullopt) when the match set is empty; the SPL metrics when no
// matched gt carries an SPL.
struct AttributePrecisions {
  std::vector<std::optional<double>> abp;  // per lambda_b
  std::vector<std::optional<double>> arp;  // per lambda_r
  std::optional<double> pp;
  std::vector<std::optional<double>> aap;  // per lambda_a
  std::vector<std::optional<double>> app;  // per lambda_p
};

AttributePrecisions attribute_precisions(const MatchSet& ms,
                                         const ThresholdSchedule& schedule);

// Area buckets from the figure caption: small (0, 1024], medium
// (1024, 9216], large (9216, +inf).
enum class AreaBucket { All, Small, Medium, Large };

bool area_in_bucket(double area, AreaBucket bucket);
std::string to_string(AreaBucket bucket);

struct ApAr {
  std::optional<double> ap;  // fraction in [0, 1]
  std::optional<double> ar;
};

// COCO-style AP (101-point interpolation, averaged over the lambda set) and
// AR (mean max-recall at a 100-detections-per-image cap). Ground truths
// outside the bucket are ignored rather than counted, as are unmatched
// predictions whose own area falls outside it.
ApAr coco_ap_ar(const std::vector<AnnotationRecord>& gts,
                const std::vector<AnnotationRecord>& preds,
                const std::vector<double>& lambdas, AreaBucket bucket,
                int max_dets_per_image = 100);

// All values percentages in [0, 100].
struct HeadlineMetrics {
  std::optional<double> abp, arp, pp, aap, app, ap, ar;

  std::optional<double> score() const;
  std::array<std::optional<double>, 7> as_array() const {
    return {abp, arp, pp, aap, app, ap, ar};
  }
};

// Arithmetic mean of the seven headline metrics.
double score(const std::array<double, 7>& metrics);

struct PerLambdaReport {
  double lambda = 0.0;
  AttributePrecisions attrs;
};

struct BucketReport {
  AreaBucket bucket = AreaBucket::All;
  HeadlineMetrics headline;
  std::vector<PerLambdaReport> per_lambda;
};

struct MetricReport {
  ThresholdSchedule schedule;
  std::array<BucketReport, 4> buckets;  // all, small, medium, large

  const BucketReport& bucket(AreaBucket b) const;
};

// Full evaluation: per-image matching per IoU threshold, attribute
// precisions per area bucket, COCO AP/AR, composite Score.
MetricReport evaluate(const std::vector<AnnotationRecord>& gts,
                      const std::vector<AnnotationRecord>& preds,
                      const ThresholdSchedule& schedule = ThresholdSchedule::defaults());

std::string report_to_json(const MetricReport& report);
// Plain-text table mirroring the published column order:
// Area ABP ARP PP AAP APP AP AR Score.
std::string report_to_table(const MetricReport& report);

}  // namespace p3dvd
