#include "p3dvd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "p3dvd/rng.hpp"

namespace p3dvd {

namespace {

constexpr Color kBorder{114, 114, 114};

struct MarginBox {
  double x_lo, x_hi, y_lo, y_hi;

  bool contains(const Vec2& p) const {
    return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi;
  }
  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x, x_lo, x_hi), std::clamp(p.y, y_lo, y_hi)};
  }
};

MarginBox window_margin(const WindowSpec& spec, int width, int height) {
  MarginBox m{spec.cw_width / 2.0, width - spec.cw_width / 2.0, spec.cw_height / 2.0,
              height - spec.cw_height / 2.0};
  if (m.x_lo > m.x_hi || m.y_lo > m.y_hi)
    throw std::invalid_argument("window_following_apply: canvas smaller than the CW");
  return m;
}

// flip (optional), then scale+shear about the source center, then translate;
// out_center recenters the result on the output canvas
Affine2 sample_chain(Rng& rng, const AugmentConfig& cfg, double src_w, double src_h,
                     double base_scale, double out_w, double out_h) {
  const double u = rng.uniform(cfg.scale_lo, cfg.scale_hi) * base_scale;
  const double kx = std::tan(deg_to_rad(rng.uniform(-cfg.shear_deg, cfg.shear_deg)));
  const double ky = std::tan(deg_to_rad(rng.uniform(-cfg.shear_deg, cfg.shear_deg)));
  const double dx = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * out_w;
  const double dy = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * out_h;
  const bool flip = rng.bernoulli(cfg.hflip_prob);

  Affine2 a = Affine2::translation(-src_w / 2.0, -src_h / 2.0);
  if (flip) a = a.compose(Affine2::hflip(src_w));
  a = Affine2::shearing(kx, ky).compose(Affine2::scaling(u, u)).compose(a);
  a = Affine2::translation(out_w / 2.0 + dx, out_h / 2.0 + dy).compose(a);
  return a;
}

struct MosaicPlacement {
  std::array<Vec2, 4> offsets;  // per-source integer translation into the canvas
  Image canvas;
};

MosaicPlacement build_mosaic(const std::vector<LabeledImage>& inputs, Rng& rng) {
  const int w = inputs[0].image.width, h = inputs[0].image.height;
  MosaicPlacement mp;
  mp.canvas = Image(2 * w, 2 * h, kBorder[0]);
  const int jx = static_cast<int>(std::lround(rng.uniform(0.3, 0.7) * 2 * w));
  const int jy = static_cast<int>(std::lround(rng.uniform(0.3, 0.7) * 2 * h));

  for (int k = 0; k < 4; ++k) {
    const Image& src = inputs[k].image;
    int x1a, y1a, x2a, y2a, x1b, y1b;
    if (k == 0) {  // top-left, bottom-right corner at the joint
      x1a = std::max(jx - src.width, 0);
      y1a = std::max(jy - src.height, 0);
      x2a = jx;
      y2a = jy;
      x1b = src.width - (x2a - x1a);
      y1b = src.height - (y2a - y1a);
    } else if (k == 1) {  // top-right
      x1a = jx;
      y1a = std::max(jy - src.height, 0);
      x2a = std::min(jx + src.width, 2 * w);
      y2a = jy;
      x1b = 0;
      y1b = src.height - (y2a - y1a);
    } else if (k == 2) {  // bottom-left
      x1a = std::max(jx - src.width, 0);
      y1a = jy;
      x2a = jx;
      y2a = std::min(jy + src.height, 2 * h);
      x1b = src.width - (x2a - x1a);
      y1b = 0;
    } else {  // bottom-right
      x1a = jx;
      y1a = jy;
      x2a = std::min(jx + src.width, 2 * w);
      y2a = std::min(jy + src.height, 2 * h);
      x1b = 0;
      y1b = 0;
    }
    if (x2a > x1a && y2a > y1a)
      paste(mp.canvas, crop(src, x1b, y1b, x2a - x1a, y2a - y1a), x1a, y1a);
    mp.offsets[k] = {static_cast<double>(x1a - x1b), static_cast<double>(y1a - y1b)};
  }
  return mp;
}

}  // namespace

std::vector<Label> transform_labels(const std::vector<Label>& labels, const Affine2& a,
                                    int width, int height) {
  if (a.m.det() == 0.0)
    throw std::invalid_argument("transform_labels: singular linear part");
  const bool x_reversed = a.m.a < 0.0;

  std::vector<Label> out;
  for (const Label& label : labels) {
    const Box box = label.p3dvr.eb.box();
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (const Vec2& corner : {Vec2{box.left(), box.top()}, Vec2{box.right(), box.top()},
                               Vec2{box.right(), box.bottom()}, Vec2{box.left(), box.bottom()}}) {
      const Vec2 q = a.apply(corner);
      lo_x = std::min(lo_x, q.x);
      hi_x = std::max(hi_x, q.x);
      lo_y = std::min(lo_y, q.y);
      hi_y = std::max(hi_y, q.y);
    }
    const double cl_x = std::max(lo_x, 0.0), cl_y = std::max(lo_y, 0.0);
    const double ch_x = std::min(hi_x, static_cast<double>(width));
    const double ch_y = std::min(hi_y, static_cast<double>(height));
    if (ch_x - cl_x <= 0.0 || ch_y - cl_y <= 0.0) continue;  // fully outside

    Label t = label;
    t.truncated = label.truncated || cl_x != lo_x || cl_y != lo_y || ch_x != hi_x ||
                  ch_y != hi_y;
    const Box hull = Box::from_corners(cl_x, cl_y, ch_x, ch_y);
    t.p3dvr.eb.cx = hull.cx;
    t.p3dvr.eb.cy = hull.cy;
    t.p3dvr.eb.w = hull.w;
    t.p3dvr.eb.h = hull.h;

    const Vec2 pwc = a.apply({label.p3dvr.spl.pwc_x, label.p3dvr.spl.pwc_y});
    t.p3dvr.spl.pwc_x = pwc.x;
    t.p3dvr.spl.pwc_y = pwc.y;
    const double rad = deg_to_rad(label.p3dvr.spl.theta_deg);
    const Vec2 dir = a.m.apply({std::cos(rad), std::sin(rad)});
    t.p3dvr.spl.theta_deg = canonicalize_theta_deg(rad_to_deg(std::atan2(dir.y, dir.x)));

    if (x_reversed) {
      t.p3dvr.eb.r = 1.0 - label.p3dvr.eb.r;
      t.p3dvr.eb.pose = label.p3dvr.eb.pose.mirrored();
    }
    t.p3dvr = canonicalize(t.p3dvr);
    out.push_back(t);
  }
  return out;
}

AugmentResult window_following_apply(const std::vector<LabeledImage>& inputs,
                                     const AugmentConfig& cfg, const WindowSpec& spec,
                                     std::uint64_t draw_id) {
  if (inputs.size() != 1 && inputs.size() != 4)
    throw std::invalid_argument("window_following_apply: expected 1 or 4 inputs");
  Rng rng = Rng::stream(cfg.seed, draw_id);

  const int out_w = inputs[0].image.width;
  const int out_h = inputs[0].image.height;
  const MarginBox margin = window_margin(spec, out_w, out_h);

  AugmentResult result;

  if (inputs.size() == 1) {
    Affine2 a;
    Vec2 center;
    int attempt = 0;
    for (;; ++attempt) {
      a = sample_chain(rng, cfg, out_w, out_h, 1.0, out_w, out_h);
      center = a.apply(inputs[0].window_center);
      if (margin.contains(center) || attempt >= cfg.max_center_retries) break;
    }
    result.retries = attempt;
    if (!margin.contains(center)) {
      center = margin.clamp(center);
      result.center_clamped = true;
    }
    result.applied = a;
    result.output.image = warp_affine(inputs[0].image, a, out_w, out_h, kBorder);
    result.output.labels = transform_labels(inputs[0].labels, a, out_w, out_h);
    result.output.window_center = center;
    return result;
  }

  // mosaic: integer-paste four sources onto a 2x2 canvas, then one warp
  for (const LabeledImage& li : inputs) {
    if (li.image.width != out_w || li.image.height != out_h)
      throw std::invalid_argument("window_following_apply: mosaic inputs must share a size");
  }

  MosaicPlacement mp;
  Affine2 global;
  int selected = -1;
  Vec2 center;
  int attempt = 0;
  for (;; ++attempt) {
    mp = build_mosaic(inputs, rng);
    global = sample_chain(rng, cfg, 2.0 * out_w, 2.0 * out_h, 0.5, out_w, out_h);

    selected = -1;
    double best_dist = 1e300;
    const Vec2 canvas_center{out_w / 2.0, out_h / 2.0};
    for (int k = 0; k < 4; ++k) {
      const Vec2 ck = global.apply(inputs[k].window_center + mp.offsets[k]);
      const bool inside = ck.x >= 0.0 && ck.x < out_w && ck.y >= 0.0 && ck.y < out_h;
      const double dist = (ck - canvas_center).norm();
      if (inside && dist < best_dist) {
        best_dist = dist;
        selected = k;
        center = ck;
      }
    }
    if (selected >= 0 && margin.contains(center)) break;
    if (attempt >= cfg.max_center_retries) break;
  }
  result.retries = attempt;

  if (selected < 0) {
    // no transformed center landed on the canvas: take the nearest and clamp
    double best_dist = 1e300;
    const Vec2 canvas_center{out_w / 2.0, out_h / 2.0};
    for (int k = 0; k < 4; ++k) {
      const Vec2 ck = global.apply(inputs[k].window_center + mp.offsets[k]);
      const double dist = (ck - canvas_center).norm();
      if (dist < best_dist) {
        best_dist = dist;
        selected = k;
        center = ck;
      }
    }
  }
  if (!margin.contains(center)) {
    center = margin.clamp(center);
    result.center_clamped = true;
  }

  result.selected_source = selected;
  result.applied = global.compose(
      Affine2::translation(mp.offsets[selected].x, mp.offsets[selected].y));
  result.output.image = warp_affine(mp.canvas, global, out_w, out_h, kBorder);
  for (int k = 0; k < 4; ++k) {
    const Affine2 source_map =
        global.compose(Affine2::translation(mp.offsets[k].x, mp.offsets[k].y));
    const std::vector<Label> transformed =
        transform_labels(inputs[k].labels, source_map, out_w, out_h);
    result.output.labels.insert(result.output.labels.end(), transformed.begin(),
                                transformed.end());
  }
  result.output.window_center = center;
  return result;
}

}  // namespace p3dvd
