#include "p3dvd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace p3dvd {

namespace {

Box record_box(const AnnotationRecord& r) { return r.box; }

// mean of the defined entries; nullopt when none are defined
template <typename It>
std::optional<double> mean_defined(It begin, It end) {
  double sum = 0.0;
  std::size_t n = 0;
  for (It it = begin; it != end; ++it) {
    if (it->has_value()) {
      sum += **it;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<std::size_t> score_descending_order(const std::vector<AnnotationRecord>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score.value_or(0.0) > preds[b].score.value_or(0.0);
  });
  return order;
}

}  // namespace

ThresholdSchedule ThresholdSchedule::defaults() {
  ThresholdSchedule s;
  for (int i = 0; i < 10; ++i) {
    s.lambdas.push_back((50 + 5 * i) / 100.0);
    s.lambda_b.push_back((2 + 2 * i) / 100.0);
    s.lambda_r.push_back((1 + i) / 100.0);
    s.lambda_a.push_back((1 + i) / 100.0);
    s.lambda_p.push_back(2.0 * (1 + i));
  }
  return s;
}

int MatchSet::n_t_prime() const {
  return static_cast<int>(
      std::count_if(pairs.begin(), pairs.end(), [](const PairErrors& p) { return p.gt_has_spl; }));
}

MatchSet match_pairs(const std::vector<AnnotationRecord>& gts,
                     const std::vector<AnnotationRecord>& preds, double lambda) {
  MatchSet ms;
  std::vector<bool> gt_taken(gts.size(), false);
  for (std::size_t pi : score_descending_order(preds)) {
    int best_gt = -1;
    double best_iou = 0.0;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_taken[gi]) continue;
      const double v = iou(record_box(preds[pi]), record_box(gts[gi]));
      if (v >= lambda && v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt < 0) continue;
    gt_taken[best_gt] = true;

    const AnnotationRecord& gt = gts[best_gt];
    const AnnotationRecord& pred = preds[pi];
    PairErrors pe;
    pe.gt_index = best_gt;
    pe.pred_index = static_cast<int>(pi);
    pe.iou = best_iou;
    pe.r_err = std::abs(pred.r - gt.r);
    pe.pose_match = pred.pose == gt.pose;
    pe.gt_has_spl = gt.spl_present;
    pe.theta_err = std::abs(pred.theta_n - gt.theta_n);
    pe.pwc_err = (pred.pwc - gt.pwc).norm();
    pe.gt_area = gt.box.area();
    ms.pairs.push_back(pe);
  }
  return ms;
}

AttributePrecisions attribute_precisions(const MatchSet& ms,
                                         const ThresholdSchedule& schedule) {
  AttributePrecisions out;
  const int nt = ms.n_t();
  const int ntp = ms.n_t_prime();

  auto sweep = [&](const std::vector<double>& thresholds, auto err_of, bool spl_only,
                   int denom) {
    std::vector<std::optional<double>> values;
    for (double thr : thresholds) {
      if (denom == 0) {
        values.push_back(std::nullopt);
        continue;
      }
      int hits = 0;
      for (const PairErrors& p : ms.pairs) {
        if (spl_only && !p.gt_has_spl) continue;
        if (err_of(p) <= thr) ++hits;
      }
      values.push_back(static_cast<double>(hits) / denom);
    }
    return values;
  };

  out.abp = sweep(schedule.lambda_b, [](const PairErrors& p) { return 1.0 - p.iou; },
                  false, nt);
  out.arp = sweep(schedule.lambda_r, [](const PairErrors& p) { return p.r_err; }, false, nt);
  out.aap = sweep(schedule.lambda_a, [](const PairErrors& p) { return p.theta_err; }, true, ntp);
  out.app = sweep(schedule.lambda_p, [](const PairErrors& p) { return p.pwc_err; }, true, ntp);
  if (nt == 0) {
    out.pp = std::nullopt;
  } else {
    int hits = 0;
    for (const PairErrors& p : ms.pairs)
      if (p.pose_match) ++hits;
    out.pp = static_cast<double>(hits) / nt;
  }
  return out;
}

bool area_in_bucket(double area, AreaBucket bucket) {
  switch (bucket) {
    case AreaBucket::All: return area > 0.0;
    case AreaBucket::Small: return area > 0.0 && area <= 1024.0;
    case AreaBucket::Medium: return area > 1024.0 && area <= 9216.0;
    case AreaBucket::Large: return area > 9216.0;
  }
  return false;
}

std::string to_string(AreaBucket bucket) {
  switch (bucket) {
    case AreaBucket::All: return "all";
    case AreaBucket::Small: return "small";
    case AreaBucket::Medium: return "medium";
    case AreaBucket::Large: return "large";
  }
  return "?";
}

namespace {

struct CocoDet {
  double score = 0.0;
  bool matched = false;
  bool ignored = false;
};

// one IoU threshold over all images; returns accumulated detections plus the
// non-ignored gt count
std::pair<std::vector<CocoDet>, int> coco_match_lambda(
    const std::map<std::string, std::pair<std::vector<AnnotationRecord>,
                                          std::vector<AnnotationRecord>>>& by_image,
    double lambda, AreaBucket bucket, int max_dets) {
  std::vector<CocoDet> all_dets;
  int npig = 0;

  for (const auto& [image_id, gp] : by_image) {
    const auto& [gts, preds] = gp;
    std::vector<bool> gt_ignored(gts.size());
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      gt_ignored[gi] = !area_in_bucket(gts[gi].box.area(), bucket);
      if (!gt_ignored[gi]) ++npig;
    }

    std::vector<std::size_t> order = score_descending_order(preds);
    if (static_cast<int>(order.size()) > max_dets) order.resize(max_dets);

    std::vector<bool> gt_taken(gts.size(), false);
    for (std::size_t pi : order) {
      // best IoU >= lambda, preferring non-ignored gts
      int best = -1;
      double best_iou = 0.0;
      bool best_ignored = false;
      for (std::size_t gi = 0; gi < gts.size(); ++gi) {
        if (gt_taken[gi]) continue;
        const double v = iou(record_box(preds[pi]), record_box(gts[gi]));
        if (v < lambda) continue;
        const bool candidate_better =
            best < 0 || (best_ignored && !gt_ignored[gi]) ||
            (best_ignored == gt_ignored[gi] && v > best_iou);
        if (candidate_better) {
          best = static_cast<int>(gi);
          best_iou = v;
          best_ignored = gt_ignored[gi];
        }
      }
      CocoDet det;
      det.score = preds[pi].score.value_or(0.0);
      if (best >= 0) {
        gt_taken[best] = true;
        det.matched = true;
        det.ignored = gt_ignored[best];
      } else {
        det.ignored = !area_in_bucket(preds[pi].box.area(), bucket);
      }
      all_dets.push_back(det);
    }
  }
  std::stable_sort(all_dets.begin(), all_dets.end(),
                   [](const CocoDet& a, const CocoDet& b) { return a.score > b.score; });
  return {all_dets, npig};
}

}  // namespace

ApAr coco_ap_ar(const std::vector<AnnotationRecord>& gts,
                const std::vector<AnnotationRecord>& preds,
                const std::vector<double>& lambdas, AreaBucket bucket,
                int max_dets_per_image) {
  std::map<std::string, std::pair<std::vector<AnnotationRecord>, std::vector<AnnotationRecord>>>
      by_image;
  for (const AnnotationRecord& g : gts) by_image[g.image_id].first.push_back(g);
  for (const AnnotationRecord& p : preds) by_image[p.image_id].second.push_back(p);

  double ap_sum = 0.0, ar_sum = 0.0;
  int defined = 0;
  for (double lambda : lambdas) {
    const auto [dets, npig] = coco_match_lambda(by_image, lambda, bucket, max_dets_per_image);
    if (npig == 0) continue;
    ++defined;

    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const CocoDet& d : dets) {
      if (d.ignored) continue;
      if (d.matched) ++tp;
      else ++fp;
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(static_cast<double>(tp) / npig);
    }

    // precision envelope, then 101-point interpolation
    for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
      precision[i] = std::max(precision[i], precision[i + 1]);
    double ap = 0.0;
    for (int j = 0; j <= 100; ++j) {
      const double rec_thr = j / 100.0;
      const auto it = std::lower_bound(recall.begin(), recall.end(), rec_thr);
      if (it != recall.end()) ap += precision[it - recall.begin()];
    }
    ap_sum += ap / 101.0;
    ar_sum += recall.empty() ? 0.0 : recall.back();
  }
  if (defined == 0) return {std::nullopt, std::nullopt};
  return {ap_sum / defined, ar_sum / defined};
}

std::optional<double> HeadlineMetrics::score() const {
  const auto metrics = as_array();
  double sum = 0.0;
  for (const auto& m : metrics) {
    if (!m) return std::nullopt;
    sum += *m;
  }
  return sum / 7.0;
}

double score(const std::array<double, 7>& metrics) {
  double sum = 0.0;
  for (double m : metrics) sum += m;
  return sum / 7.0;
}

const BucketReport& MetricReport::bucket(AreaBucket b) const {
  for (const BucketReport& br : buckets)
    if (br.bucket == b) return br;
  throw std::logic_error("MetricReport::bucket");
}

MetricReport evaluate(const std::vector<AnnotationRecord>& gts,
                      const std::vector<AnnotationRecord>& preds,
                      const ThresholdSchedule& schedule) {
  MetricReport report;
  report.schedule = schedule;

  std::map<std::string, std::pair<std::vector<AnnotationRecord>, std::vector<AnnotationRecord>>>
      by_image;
  for (const AnnotationRecord& g : gts) by_image[g.image_id].first.push_back(g);
  for (const AnnotationRecord& p : preds) by_image[p.image_id].second.push_back(p);

  // matched pairs per IoU threshold, across all images
  std::vector<std::vector<PairErrors>> pairs_per_lambda(schedule.lambdas.size());
  for (std::size_t li = 0; li < schedule.lambdas.size(); ++li) {
    for (const auto& [image_id, gp] : by_image) {
      const MatchSet ms = match_pairs(gp.first, gp.second, schedule.lambdas[li]);
      pairs_per_lambda[li].insert(pairs_per_lambda[li].end(), ms.pairs.begin(),
                                  ms.pairs.end());
    }
  }

  // same row order as the published table
  const std::array<AreaBucket, 4> bucket_kinds{AreaBucket::Small, AreaBucket::Medium,
                                               AreaBucket::Large, AreaBucket::All};
  for (std::size_t bi = 0; bi < bucket_kinds.size(); ++bi) {
    BucketReport& br = report.buckets[bi];
    br.bucket = bucket_kinds[bi];

    std::vector<std::optional<double>> abp_all, arp_all, pp_all, aap_all, app_all;
    for (std::size_t li = 0; li < schedule.lambdas.size(); ++li) {
      MatchSet ms;
      for (const PairErrors& p : pairs_per_lambda[li])
        if (area_in_bucket(p.gt_area, br.bucket)) ms.pairs.push_back(p);

      PerLambdaReport plr;
      plr.lambda = schedule.lambdas[li];
      plr.attrs = attribute_precisions(ms, schedule);
      abp_all.insert(abp_all.end(), plr.attrs.abp.begin(), plr.attrs.abp.end());
      arp_all.insert(arp_all.end(), plr.attrs.arp.begin(), plr.attrs.arp.end());
      aap_all.insert(aap_all.end(), plr.attrs.aap.begin(), plr.attrs.aap.end());
      app_all.insert(app_all.end(), plr.attrs.app.begin(), plr.attrs.app.end());
      pp_all.push_back(plr.attrs.pp);
      br.per_lambda.push_back(std::move(plr));
    }

    auto pct = [](std::optional<double> v) -> std::optional<double> {
      if (!v) return std::nullopt;
      return *v * 100.0;
    };
    br.headline.abp = pct(mean_defined(abp_all.begin(), abp_all.end()));
    br.headline.arp = pct(mean_defined(arp_all.begin(), arp_all.end()));
    br.headline.pp = pct(mean_defined(pp_all.begin(), pp_all.end()));
    br.headline.aap = pct(mean_defined(aap_all.begin(), aap_all.end()));
    br.headline.app = pct(mean_defined(app_all.begin(), app_all.end()));

    const ApAr apar = coco_ap_ar(gts, preds, schedule.lambdas, br.bucket);
    br.headline.ap = pct(apar.ap);
    br.headline.ar = pct(apar.ar);
  }
  return report;
}

namespace {

nlohmann::json optional_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
  nlohmann::json doc;
  doc["lambdas"] = report.schedule.lambdas;
  doc["lambda_b"] = report.schedule.lambda_b;
  doc["lambda_r"] = report.schedule.lambda_r;
  doc["lambda_a"] = report.schedule.lambda_a;
  doc["lambda_p"] = report.schedule.lambda_p;
  for (const BucketReport& br : report.buckets) {
    nlohmann::json b;
    b["abp"] = optional_to_json(br.headline.abp);
    b["arp"] = optional_to_json(br.headline.arp);
    b["pp"] = optional_to_json(br.headline.pp);
    b["aap"] = optional_to_json(br.headline.aap);
    b["app"] = optional_to_json(br.headline.app);
    b["ap"] = optional_to_json(br.headline.ap);
    b["ar"] = optional_to_json(br.headline.ar);
    b["score"] = optional_to_json(br.headline.score());
    nlohmann::json per_lambda = nlohmann::json::array();
    for (const PerLambdaReport& plr : br.per_lambda) {
      nlohmann::json l;
      l["lambda"] = plr.lambda;
      auto arr = [](const std::vector<std::optional<double>>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& x : v) a.push_back(optional_to_json(x));
        return a;
      };
      l["abp"] = arr(plr.attrs.abp);
      l["arp"] = arr(plr.attrs.arp);
      l["pp"] = optional_to_json(plr.attrs.pp);
      l["aap"] = arr(plr.attrs.aap);
      l["app"] = arr(plr.attrs.app);
      per_lambda.push_back(l);
    }
    b["per_lambda"] = per_lambda;
    doc[to_string(br.bucket)] = b;
  }
  return doc.dump(2);
}

std::string report_to_table(const MetricReport& report) {
  std::ostringstream out;
  auto cell = [&](const std::optional<double>& v) {
    char buf[32];
    if (v) std::snprintf(buf, sizeof(buf), "%8.2f", *v);
    else std::snprintf(buf, sizeof(buf), "%8s", "-");
    out << buf;
  };
  out << "Area      ABP     ARP      PP     AAP     APP      AP      AR   Score\n";
  for (const BucketReport& br : report.buckets) {
    char name[32];
    std::snprintf(name, sizeof(name), "%-6s", to_string(br.bucket).c_str());
    out << name;
    cell(br.headline.abp);
    cell(br.headline.arp);
    cell(br.headline.pp);
    cell(br.headline.aap);
    cell(br.headline.app);
    cell(br.headline.ap);
    cell(br.headline.ar);
    cell(br.headline.score());
    out << "\n";
  }
  return out.str();
}

}  // namespace p3dvd
