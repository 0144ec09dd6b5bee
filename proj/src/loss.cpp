#include "p3dvd/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "p3dvd/dual.hpp"

namespace p3dvd {

namespace {

template <typename T>
T clamp_prob(const T& p, double lo, double hi) {
  if (value_of(p) < lo) return T(lo);
  if (value_of(p) > hi) return T(hi);
  return p;
}

template <typename T>
T bce_k(const T& prob, double target) {
  using p3dvd::log;
  const T p = clamp_prob(prob, kProbEps, 1.0 - kProbEps);
  return T(-1.0) * (target * log(p) + (1.0 - target) * log(T(1.0) - p));
}

// IoU of (pred cx,cy,w,h) against a fixed gt box, scalar-generic.
template <typename T>
T iou_k(const T& cx, const T& cy, const T& w, const T& h, const Box& gt) {
  using p3dvd::max;
  using p3dvd::min;
  const T l = cx - 0.5 * w, r = cx + 0.5 * w;
  const T t = cy - 0.5 * h, b = cy + 0.5 * h;
  const T iw = min(r, T(gt.right())) - max(l, T(gt.left()));
  const T ih = min(b, T(gt.bottom())) - max(t, T(gt.top()));
  if (value_of(iw) <= 0.0 || value_of(ih) <= 0.0) return T(0.0);
  const T inter = iw * ih;
  const T uni = w * h + T(gt.area()) - inter;
  return inter / uni;
}

// sigma = R(theta) diag(a, d) R(theta)^T, flattened to (s11, s12, s22)
template <typename T>
struct Sym2 {
  T s11, s12, s22;
};

template <typename T>
Sym2<T> rotated_diag_k(const T& theta_rad, const T& a, const T& d) {
  using p3dvd::cos;
  using p3dvd::sin;
  const T c = cos(theta_rad), s = sin(theta_rad);
  return {c * c * a + s * s * d, c * s * (a - d), s * s * a + c * c * d};
}

// KL(N0 || N1) for 2D Gaussians in closed form.
template <typename T>
T kld_k(const T& m0x, const T& m0y, const Sym2<T>& s0, const T& m1x, const T& m1y,
        const Sym2<T>& s1) {
  using p3dvd::log;
  const T det0 = s0.s11 * s0.s22 - s0.s12 * s0.s12;
  const T det1 = s1.s11 * s1.s22 - s1.s12 * s1.s12;
  // inverse of s1
  const T i11 = s1.s22 / det1, i12 = T(-1.0) * s1.s12 / det1, i22 = s1.s11 / det1;
  const T tr = i11 * s0.s11 + 2.0 * i12 * s0.s12 + i22 * s0.s22;
  const T dx = m1x - m0x, dy = m1y - m0y;
  const T quad = i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy;
  return 0.5 * (tr + quad - 2.0 + log(det1 / det0));
}

template <typename T>
T bidirectional_kld_k(const T& m0x, const T& m0y, const Sym2<T>& s0, const T& m1x,
                      const T& m1y, const Sym2<T>& s1) {
  return 0.5 * (kld_k(m0x, m0y, s0, m1x, m1y, s1) + kld_k(m1x, m1y, s1, m0x, m0y, s0));
}

template <typename T>
T olc_transform_k(const T& d) {
  using p3dvd::log;
  return T(1.0) - T(1.0) / (T(1.0) + log(d + 1.0));
}

// Full per-pair shape-matching term as a function of the predicted
// parameters; the gt Gaussian is constant. theta enters in degrees.
template <typename T>
T olc_pair_k(const T& cx, const T& cy, const T& w, const T& h, const T& r,
             const T& pwc_x, const T& pwc_y, const T& theta_deg, bool side_on_left,
             const Gaussian2& gt) {
  const T theta = theta_deg * (kPi / 180.0);
  const T hp = detail::point_line_distance_k(cx, cy, pwc_x, pwc_y, theta);
  const T wp = detail::w_prime_k(cx, cy, w, h, r, side_on_left, pwc_x, pwc_y, theta);
  const Sym2<T> sp = rotated_diag_k(theta, 0.5 * wp, hp);
  const Sym2<T> st{T(gt.sigma.a), T(gt.sigma.b), T(gt.sigma.d)};
  const T d = bidirectional_kld_k(pwc_x, pwc_y, sp, T(gt.mu.x), T(gt.mu.y), st);
  return olc_transform_k(d);
}

void check_sigma(const Mat2& s, const char* who) {
  if (std::abs(s.b - s.c) > 1e-9) throw std::invalid_argument(std::string(who) + ": sigma not symmetric");
  if (!(s.a > 0.0) || !(s.det() > 0.0))
    throw std::invalid_argument(std::string(who) + ": sigma not positive-definite");
}

}  // namespace

double binary_cross_entropy(double prob, double target) { return bce_k(prob, target); }

EodLossResult eod_loss(const EodPrediction& pred, const EodTarget& gt,
                       const LossWeights& weights) {
  using D = Dual<14>;  // [objectness, cx, cy, w, h, r, pose 0..7]
  const D obj = D::seed(pred.objectness, 0);
  const D cx = D::seed(pred.box.cx, 1);
  const D cy = D::seed(pred.box.cy, 2);
  const D w = D::seed(pred.box.w, 3);
  const D h = D::seed(pred.box.h, 4);
  const D r = D::seed(pred.r, 5);

  const D l_o = bce_k(obj, gt.objectness);
  const D iou = iou_k(cx, cy, w, h, gt.box);
  const bool saturated = iou.v <= kIouEps;
  const D l_iou = D(-1.0) * log(clamp_prob(iou, kIouEps, 1.0));
  const D l_r = abs(r - D(gt.r));
  D l_pose(0.0);
  for (int k = 0; k < 8; ++k) {
    const D pk = D::seed(pred.pose_scores[k], static_cast<std::size_t>(6 + k));
    l_pose += bce_k(pk, k == gt.pose ? 1.0 : 0.0);
  }
  const D total = l_o + weights.alpha1 * l_iou + weights.alpha2 * l_r + l_pose;

  EodLossResult out;
  out.l_o = l_o.v;
  out.l_iou = l_iou.v;
  out.l_r = l_r.v;
  out.l_pose = l_pose.v;
  out.total = total.v;
  out.iou_saturated = saturated;
  out.grad.objectness = total.d[0];
  out.grad.cx = total.d[1];
  out.grad.cy = total.d[2];
  out.grad.w = total.d[3];
  out.grad.h = total.d[4];
  out.grad.r = total.d[5];
  for (int k = 0; k < 8; ++k) out.grad.pose_scores[k] = total.d[6 + k];
  return out;
}

SplLossResult spl_loss(const SplPrediction& pred, const SplTarget& gt,
                       const LossWeights& weights) {
  if (std::abs(pred.theta_n) > 1.0 || std::abs(gt.theta_n) > 1.0)
    throw std::invalid_argument("spl_loss: theta_n outside [-1, 1]");
  using D = Dual<4>;  // [theta_n, pwc_x, pwc_y, conf]
  const D theta = D::seed(pred.theta_n, 0);
  const D px = D::seed(pred.pwc.x, 1);
  const D py = D::seed(pred.pwc.y, 2);
  const D conf = D::seed(pred.conf, 3);

  const double present = gt.present ? 1.0 : 0.0;
  const D l_theta = present * abs(theta - D(gt.theta_n));
  const D l_pc = present * (abs(px - D(gt.pwc.x)) + abs(py - D(gt.pwc.y)));
  const D l_conf = bce_k(conf, present);
  const D total = weights.alpha3 * l_theta + l_conf + weights.alpha4 * l_pc;

  SplLossResult out;
  out.l_theta = l_theta.v;
  out.l_conf = l_conf.v;
  out.l_pc = l_pc.v;
  out.total = total.v;
  out.grad.theta_n = total.d[0];
  out.grad.pwc_x = total.d[1];
  out.grad.pwc_y = total.d[2];
  out.grad.conf = total.d[3];
  return out;
}

Gaussian2 gaussian_from_parts(const Vec2& pwc, double theta_deg, double w_prime,
                              double h_prime) {
  const auto s = rotated_diag_k<double>(deg_to_rad(theta_deg), 0.5 * w_prime, h_prime);
  Gaussian2 g;
  g.mu = pwc;
  g.sigma = {s.s11, s.s12, s.s12, s.s22};
  return g;
}

Gaussian2 to_gaussian(const P3DVR& p) {
  const double hp = h_prime(p);
  const double wp = w_prime(p);
  if (hp <= 1e-9 || wp <= 1e-9)
    throw std::invalid_argument("to_gaussian: degenerate w' or h'");
  return gaussian_from_parts({p.spl.pwc_x, p.spl.pwc_y}, p.spl.theta_deg, wp, hp);
}

double bidirectional_kld(const Gaussian2& gp, const Gaussian2& gt) {
  check_sigma(gp.sigma, "bidirectional_kld");
  check_sigma(gt.sigma, "bidirectional_kld");
  const Sym2<double> s0{gp.sigma.a, gp.sigma.b, gp.sigma.d};
  const Sym2<double> s1{gt.sigma.a, gt.sigma.b, gt.sigma.d};
  return bidirectional_kld_k(gp.mu.x, gp.mu.y, s0, gt.mu.x, gt.mu.y, s1);
}

double olc_transform(double d_kl) { return olc_transform_k(d_kl); }

bool olc_eligible(const P3DVR& gt) {
  return gt.spl.present && side_face_side(gt.eb.pose) != FaceSide::None;
}

OlcLossResult olc_loss(const std::vector<std::pair<P3DVR, P3DVR>>& pairs,
                       const LossWeights& weights) {
  OlcLossResult out;
  if (pairs.empty()) return out;

  const double scale = weights.alpha5 / static_cast<double>(pairs.size());
  double sum = 0.0;
  for (const auto& [pred, gt] : pairs) {
    if (!olc_eligible(gt))
      throw std::invalid_argument("olc_loss: gt without SPL/side face not excluded");
    const bool side_on_left = side_face_side(gt.eb.pose) == FaceSide::Left;
    const Gaussian2 gt_g = to_gaussian(gt);

    using D = Dual<8>;  // [cx, cy, w, h, r, pwc_x, pwc_y, theta_deg]
    const D term = olc_pair_k(D::seed(pred.eb.cx, 0), D::seed(pred.eb.cy, 1),
                              D::seed(pred.eb.w, 2), D::seed(pred.eb.h, 3),
                              D::seed(pred.eb.r, 4), D::seed(pred.spl.pwc_x, 5),
                              D::seed(pred.spl.pwc_y, 6), D::seed(pred.spl.theta_deg, 7),
                              side_on_left, gt_g);
    sum += term.v;

    // recompute the pair divergence on plain doubles for the report
    const double theta = deg_to_rad(pred.spl.theta_deg);
    const double hp = detail::point_line_distance_k(pred.eb.cx, pred.eb.cy,
                                                    pred.spl.pwc_x, pred.spl.pwc_y, theta);
    const double wp = detail::w_prime_k(pred.eb.cx, pred.eb.cy, pred.eb.w, pred.eb.h,
                                        pred.eb.r, side_on_left, pred.spl.pwc_x,
                                        pred.spl.pwc_y, theta);
    const auto sp = rotated_diag_k<double>(theta, 0.5 * wp, hp);
    const Sym2<double> st{gt_g.sigma.a, gt_g.sigma.b, gt_g.sigma.d};
    out.pair_kld.push_back(bidirectional_kld_k(pred.spl.pwc_x, pred.spl.pwc_y, sp,
                                               gt_g.mu.x, gt_g.mu.y, st));

    OlcGradient grad;
    grad.cx = scale * term.d[0];
    grad.cy = scale * term.d[1];
    grad.w = scale * term.d[2];
    grad.h = scale * term.d[3];
    grad.r = scale * term.d[4];
    grad.pwc_x = scale * term.d[5];
    grad.pwc_y = scale * term.d[6];
    grad.theta_deg = scale * term.d[7];
    out.grads.push_back(grad);
  }
  out.total = scale * sum;
  return out;
}

LossBreakdown total_loss(const std::vector<PredSample>& preds,
                         const std::vector<GtSample>& gts, const LossWeights& weights) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("total_loss: pred/gt size mismatch");
  if (preds.empty()) throw std::invalid_argument("total_loss: no positive samples");

  LossBreakdown out;
  std::vector<std::pair<P3DVR, P3DVR>> olc_pairs;
  const double n = static_cast<double>(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const EodLossResult e = eod_loss(preds[i].eod, gts[i].eod, weights);
    const SplLossResult s = spl_loss(preds[i].spl, gts[i].spl, weights);
    out.l_o += e.l_o / n;
    out.l_iou += e.l_iou / n;
    out.l_r += e.l_r / n;
    out.l_pose += e.l_pose / n;
    out.l_theta += s.l_theta / n;
    out.l_conf += s.l_conf / n;
    out.l_pc += s.l_pc / n;
    if (olc_eligible(gts[i].p3dvr)) olc_pairs.emplace_back(preds[i].p3dvr, gts[i].p3dvr);
  }
  out.l_olc = olc_loss(olc_pairs, weights).total;
  out.l_eod = out.l_o + weights.alpha1 * out.l_iou + weights.alpha2 * out.l_r + out.l_pose;
  out.l_spl = weights.alpha3 * out.l_theta + out.l_conf + weights.alpha4 * out.l_pc;
  out.total = out.l_eod + out.l_spl + out.l_olc;
  return out;
}

GradCheckReport grad_check(const DiffFunction& f, const std::vector<double>& point,
                           double step, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  const std::vector<double> analytic = f.gradient(point);
  if (analytic.size() != point.size())
    throw std::invalid_argument("grad_check: gradient size mismatch");

  for (std::size_t dim = 0; dim < point.size(); ++dim) {
    GradCheckEntry entry;
    entry.dim = dim;
    entry.analytic = analytic[dim];
    if (f.smooth_at && !f.smooth_at(point, dim, step)) {
      entry.skipped = true;
      report.skipped++;
      report.entries.push_back(entry);
      continue;
    }
    std::vector<double> lo = point, hi = point;
    lo[dim] -= step;
    hi[dim] += step;
    entry.numeric = (f.value(hi) - f.value(lo)) / (2.0 * step);
    // the floor keeps near-zero components well-posed against FD roundoff
    const double denom = std::max({std::abs(entry.analytic), std::abs(entry.numeric), 1e-2});
    entry.rel_err = std::abs(entry.analytic - entry.numeric) / denom;
    report.max_rel_err = std::max(report.max_rel_err, entry.rel_err);
    report.checked++;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace p3dvd
