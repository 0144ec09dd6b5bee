#pragma once

#include <string>
#include <vector>

#include "p3dvd/dw.hpp"
#include "p3dvd/p3dvr.hpp"

namespace p3dvd {

// One of the five head scales: CW at window strides {8, 16}, GW at
// {8, 16, 32} (x gw_scale relative to the original frame).
struct ScaleSpec {
  Frame window = Frame::CW;
  int stride_in_window = 8;
  int stride_in_original = 8;
  int grid_rows = 0;
  int grid_cols = 0;
};

// The five scales implied by a DW layout.
std::vector<ScaleSpec> default_scale_set(const DwLayout& layout);

inline constexpr int kRawChannels = 18;

// Raw per-stride head output. Channel order per cell:
// [C_o; tx, ty, tw, th; r; p0..p7; theta_n; qx, qy; C_l].
struct RawGrid {
  ScaleSpec spec;
  std::vector<float> values;  // rows * cols * 18, row-major

  float at(int row, int col, int channel) const {
    return values[(static_cast<std::size_t>(row) * spec.grid_cols + col) * kRawChannels +
                  channel];
  }
  float& at(int row, int col, int channel) {
    return values[(static_cast<std::size_t>(row) * spec.grid_cols + col) * kRawChannels +
                  channel];
  }
};

// JSON document: {"window": "CW"|"GW", "stride": int, "shape":
// [rows, cols, 18], "data": [...]}. stride is the in-window stride.
RawGrid load_raw_grid(const std::string& path, const DwLayout& layout);
void save_raw_grid(const RawGrid& grid, const std::string& path);

struct Detection {
  P3DVR p3dvr;  // original-frame pixels
  double score = 0.0;     // objectness C_o
  double spl_conf = 0.0;  // C_l
  Frame source_window = Frame::CW;
  int source_stride = 0;  // in original-frame pixels
};

struct DecodeParams {
  double conf_thresh = 0.5;
  double iou_thresh = 0.65;
  double presence_thresh = 0.5;  // C_l threshold for spl.present
};

// Decodes every cell: window-frame center (gx + tx) * s, (gy + ty) * s, size
// exp(tw) * s x exp(th) * s, pose argmax, theta = 90 * theta_n, wheel
// midpoint at the cell anchor center plus (qx, qy) * s; coordinates are then
// mapped into the original frame.
std::vector<Detection> decode_grid(const RawGrid& grid, const DwLayout& layout,
                                   const DecodeParams& params = {});

// Inverse of decode_grid for one detection into the given cell; used to
// build raw-grid fixtures. Pose scores become one-hot.
void encode_detection(const Detection& det, const DwLayout& layout, RawGrid& grid,
                      int row, int col);

// Greedy score-descending suppression on BBox IoU across all scales.
// Deterministic tie-break: higher score, then smaller stride, then
// lexicographic center, then CW before GW.
std::vector<Detection> nms(std::vector<Detection> dets, double conf_thresh,
                           double iou_thresh);

// Area boundary between the medium and large buckets; a CW detection under
// it wins cross-window suppression against a GW detection because the CW
// path carries native resolution for small objects.
inline constexpr double kCwPreferenceArea = 9216.0;

std::vector<Detection> merge_windows(std::vector<Detection> dets, double iou_thresh);

}  // namespace p3dvd
