#pragma once

#include <cstdint>
#include <vector>

#include "p3dvd/dw.hpp"
#include "p3dvd/geometry.hpp"
#include "p3dvd/image.hpp"

namespace p3dvd {

struct AugmentConfig {
  double translate_frac = 0.1;  // max |shift| as a fraction of canvas size
  double shear_deg = 5.0;       // max shear angle per axis
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double hflip_prob = 0.5;
  double mosaic_prob = 0.0;  // consulted by pipeline drivers, not by apply()
  std::uint64_t seed = 0;
  int max_center_retries = 30;
};

// Image with labels and the CW center position; the center follows every
// geometric transform applied to the pixels.
struct LabeledImage {
  Image image;
  std::vector<Label> labels;
  Vec2 window_center;
};

// Applies the affine to every label: BBox becomes the axis-aligned hull of
// the transformed corners, the wheel midpoint maps pointwise, theta through
// the direction vector. A transform that reverses x-orientation additionally
// mirrors r and the pose class. Labels fully outside the canvas are dropped;
// border-clipped ones keep r/pose/SPL and set the truncation flag.
std::vector<Label> transform_labels(const std::vector<Label>& labels, const Affine2& a,
                                    int width, int height);

struct AugmentResult {
  LabeledImage output;
  Affine2 applied;          // input -> output map of the selected source
  int selected_source = 0;  // mosaic: which input supplied the window center
  bool center_clamped = false;
  int retries = 0;
};

// Samples an affine chain (flip, scale, shear, translate) and applies it
// identically to pixels, labels and window centers. One input transforms in
// place; four inputs go through a 2x2 mosaic whose output window center is
// the transformed source center that lands inside the canvas (tie-break:
// nearest to the canvas center). The transform is re-sampled until the
// output center keeps a cw_size/2 margin from every border, then clamped as
// a last resort. Deterministic given (cfg.seed, draw_id).
AugmentResult window_following_apply(const std::vector<LabeledImage>& inputs,
                                     const AugmentConfig& cfg, const WindowSpec& spec,
                                     std::uint64_t draw_id = 0);

}  // namespace p3dvd
