#pragma once

#include <string>
#include <vector>

#include "p3dvd/image.hpp"
#include "p3dvd/p3dvr.hpp"

namespace p3dvd {

// Geometric constants of the Double-Window synthesis: where the Center
// Window sits in the original frame, which rows feed the Global Window, and
// the GW downscale factor.
struct WindowSpec {
  Vec2 center{1840.0, 1248.0};  // CW midpoint, original-frame pixels
  int cw_width = 960;
  int cw_height = 384;
  int crop_top = 52;
  int crop_bottom = 60;
  int gw_scale = 4;
};

enum class Frame { CW, GW };

// All derived geometry binding the original, CW, GW and DW pixel frames.
// dw = CW stacked on top of GW; gw_offset_in_dw equals the CW height.
struct DwLayout {
  WindowSpec spec;
  int orig_width = 0;
  int orig_height = 0;
  Vec2 cw_origin_in_original;  // integer-valued
  int gw_width = 0;
  int gw_height = 0;
  int dw_width = 0;
  int dw_height = 0;
  int gw_offset_in_dw = 0;
};

// Validates the window constants against the original size and derives the
// layout. Throws std::invalid_argument naming the violated constraint.
DwLayout make_layout(const WindowSpec& spec, int orig_width, int orig_height);

struct DwSynthesis {
  Image dw;
  DwLayout layout;
};

// CW: bit-exact crop at the window. GW: rows [crop_top, H - crop_bottom)
// area-downsampled by gw_scale. DW: vertical concat, CW on top.
DwSynthesis synthesize_dw(const Image& original, const WindowSpec& spec);

struct OriginalPoint {
  Vec2 pt;
  Frame branch;
};

// Maps a DW-frame point back to the original frame. Exact inverse of the
// synthesis maps on lattice points. Throws on out-of-bounds input.
OriginalPoint dw_to_original(const Vec2& pt, const DwLayout& layout);

// Forward map into the requested branch's DW coordinates. Returns false when
// the point does not belong to that branch (outside the CW rectangle, or in
// the GW-cropped rows).
bool original_to_dw(const Vec2& pt, const DwLayout& layout, Frame branch, Vec2* out);

// P3DVR plus bookkeeping produced by the pipeline.
struct Label {
  P3DVR p3dvr;
  bool truncated = false;
};

struct FrameLabel {
  P3DVR p3dvr;
  Frame frame = Frame::GW;
  bool truncated = false;
};

struct TrainingSample {
  Image dw;
  DwLayout layout;
  std::vector<FrameLabel> labels;  // DW-frame coordinates
};

// Synthesizes the DW image around the given window center and duplicates
// each label into the frames it is visible in: a CW copy when its BBox
// intersects the CW rectangle, and a GW copy when it intersects the GW rows.
TrainingSample extract_training_sample(const Image& original,
                                       const std::vector<Label>& labels,
                                       const Vec2& window_center,
                                       const WindowSpec& spec);

}  // namespace p3dvd
