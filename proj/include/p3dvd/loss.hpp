#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "p3dvd/geometry.hpp"
#include "p3dvd/p3dvr.hpp"

namespace p3dvd {

// 2D Gaussian embedding of a P3DVR: mean at the wheel-contact midpoint,
// covariance R(theta) diag(w'/2, h') R(theta)^T.
struct Gaussian2 {
  Vec2 mu;
  Mat2 sigma;  // symmetric positive-definite
};

struct LossWeights {
  double alpha1 = 5.0;  // IoU loss
  double alpha2 = 1.0;  // split-ratio L1
  double alpha3 = 1.0;  // SPL angle L1
  double alpha4 = 1.0;  // wheel-midpoint L1
  double alpha5 = 1.0;  // shape-matching loss
};

// Probabilities are consumed post-sigmoid and clamped to
// [kProbEps, 1 - kProbEps] inside the cross-entropy terms.
inline constexpr double kProbEps = 1e-7;
inline constexpr double kIouEps = 1e-7;

struct LossBreakdown {
  // unweighted per-term batch means
  double l_o = 0.0;
  double l_iou = 0.0;
  double l_r = 0.0;
  double l_pose = 0.0;
  double l_theta = 0.0;
  double l_conf = 0.0;
  double l_pc = 0.0;
  double l_olc = 0.0;  // weighted by alpha5 and averaged over SPL targets
  // weighted aggregates
  double l_eod = 0.0;
  double l_spl = 0.0;
  double total = 0.0;
};

struct EodPrediction {
  double objectness = 0.0;  // post-sigmoid
  Box box;
  double r = 0.0;
  std::array<double, 8> pose_scores{};  // post-sigmoid, one per pose class
};

struct EodTarget {
  double objectness = 1.0;  // binary
  Box box;
  double r = 0.0;
  int pose = 0;  // one-hot index
};

struct EodGradient {
  double objectness = 0.0;
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
  double r = 0.0;
  std::array<double, 8> pose_scores{};
};

struct EodLossResult {
  double l_o = 0.0, l_iou = 0.0, l_r = 0.0, l_pose = 0.0;
  double total = 0.0;  // l_o + a1*l_iou + a2*l_r + l_pose
  EodGradient grad;    // d total / d prediction
  bool iou_saturated = false;  // IoU hit the lower clamp
};

struct SplPrediction {
  double theta_n = 0.0;  // normalized angle in [-1, 1]
  Vec2 pwc;              // pixel coordinates
  double conf = 0.0;     // post-sigmoid presence confidence
};

struct SplTarget {
  double theta_n = 0.0;
  Vec2 pwc;
  bool present = false;
};

struct SplGradient {
  double theta_n = 0.0;
  double pwc_x = 0.0, pwc_y = 0.0;
  double conf = 0.0;
};

struct SplLossResult {
  double l_theta = 0.0, l_conf = 0.0, l_pc = 0.0;
  double total = 0.0;  // a3*l_theta + l_conf + a4*l_pc
  SplGradient grad;
};

double binary_cross_entropy(double prob, double target);

// Intersection over union of two axis-aligned boxes; 0 when disjoint.
inline double box_iou(const Box& a, const Box& b) { return iou(a, b); }

EodLossResult eod_loss(const EodPrediction& pred, const EodTarget& gt,
                       const LossWeights& weights);

// Angle/point terms apply only when the target SPL is present; the
// confidence term always. L_PC is component-sum L1.
SplLossResult spl_loss(const SplPrediction& pred, const SplTarget& gt,
                       const LossWeights& weights);

// mu = pwc, sigma = R(theta) diag(w_prime/2, h_prime) R(theta)^T.
Gaussian2 gaussian_from_parts(const Vec2& pwc, double theta_deg, double w_prime,
                              double h_prime);

// Requires an SPL and a side face (w' and h' defined and > eps).
Gaussian2 to_gaussian(const P3DVR& p);

// Symmetrized Gaussian KL divergence: (KL(p||t) + KL(t||p)) / 2.
double bidirectional_kld(const Gaussian2& gp, const Gaussian2& gt);

// Per-pair squash of the shape-matching loss: 1 - 1/(1 + ln(d + 1)).
// Strictly increasing on (0, inf), bounded in [0, 1).
double olc_transform(double d_kl);

// A ground truth participates in the shape-matching loss when it has an SPL
// and a side face to define the Gaussian.
bool olc_eligible(const P3DVR& gt);

// d total / d (pred cx, cy, w, h, r, pwc_x, pwc_y, theta_deg)
struct OlcGradient {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0, r = 0.0;
  double pwc_x = 0.0, pwc_y = 0.0, theta_deg = 0.0;
};

struct OlcLossResult {
  double total = 0.0;               // alpha5 / N' * sum of transforms
  std::vector<double> pair_kld;     // bidirectional KLD per pair
  std::vector<OlcGradient> grads;   // per pair, already scaled by alpha5/N'
};

// Every pair's gt must satisfy olc_eligible (the caller filters first).
// Both Gaussians use the gt's side-face side so the predicted Gaussian stays
// well-defined and differentiable regardless of the predicted pose scores.
// Empty input yields 0.
OlcLossResult olc_loss(const std::vector<std::pair<P3DVR, P3DVR>>& pairs,
                       const LossWeights& weights);

struct PredSample {
  EodPrediction eod;
  SplPrediction spl;
  P3DVR p3dvr;  // decoded pixel-space representation, used by the OLC term
};

struct GtSample {
  EodTarget eod;
  SplTarget spl;
  P3DVR p3dvr;
};

// Per-term averages over the N matched positives (over the SPL-bearing
// subset for the OLC term), combined per the total-loss decomposition.
LossBreakdown total_loss(const std::vector<PredSample>& preds,
                         const std::vector<GtSample>& gts,
                         const LossWeights& weights);

// --- gradient verification ---------------------------------------------

struct DiffFunction {
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
  // Optional: true when the function is smooth along dim within +-step of
  // the point. Dimensions reported non-smooth are skipped, not failed.
  std::function<bool(const std::vector<double>&, std::size_t dim, double step)> smooth_at;
};

struct GradCheckEntry {
  std::size_t dim = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool skipped = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;  // over checked dimensions
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double tolerance = 0.0;

  bool pass() const { return checked == 0 || max_rel_err < tolerance; }
};

// Central finite differences against the analytic gradient.
GradCheckReport grad_check(const DiffFunction& f, const std::vector<double>& point,
                           double step, double tolerance);

}  // namespace p3dvd
