#include "p3dvd/decode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace p3dvd {

namespace {

using nlohmann::json;

// window-frame <-> original-frame point maps
Vec2 window_to_original(const Vec2& p, Frame window, const DwLayout& layout) {
  if (window == Frame::CW) return p + layout.cw_origin_in_original;
  const double s = layout.spec.gw_scale;
  return {p.x * s, p.y * s + layout.spec.crop_top};
}

Vec2 original_to_window(const Vec2& p, Frame window, const DwLayout& layout) {
  if (window == Frame::CW) return p - layout.cw_origin_in_original;
  const double s = layout.spec.gw_scale;
  return {p.x / s, (p.y - layout.spec.crop_top) / s};
}

double window_size_scale(Frame window, const DwLayout& layout) {
  return window == Frame::CW ? 1.0 : static_cast<double>(layout.spec.gw_scale);
}

bool cw_small(const Detection& d) {
  return d.source_window == Frame::CW && d.p3dvr.eb.box().area() < kCwPreferenceArea;
}

// canonical candidate order: score desc, smaller stride, lexicographic
// center, CW before GW
bool canonical_less(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.source_stride != b.source_stride) return a.source_stride < b.source_stride;
  if (a.p3dvr.eb.cx != b.p3dvr.eb.cx) return a.p3dvr.eb.cx < b.p3dvr.eb.cx;
  if (a.p3dvr.eb.cy != b.p3dvr.eb.cy) return a.p3dvr.eb.cy < b.p3dvr.eb.cy;
  return static_cast<int>(a.source_window) < static_cast<int>(b.source_window);
}

std::vector<Detection> greedy_suppress(std::vector<Detection> sorted, double iou_thresh) {
  std::vector<Detection> kept;
  for (const Detection& cand : sorted) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (iou(cand.p3dvr.eb.box(), k.p3dvr.eb.box()) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace

std::vector<ScaleSpec> default_scale_set(const DwLayout& layout) {
  std::vector<ScaleSpec> out;
  for (int s : {8, 16}) {
    out.push_back({Frame::CW, s, s, layout.spec.cw_height / s, layout.spec.cw_width / s});
  }
  for (int s : {8, 16, 32}) {
    out.push_back({Frame::GW, s, s * layout.spec.gw_scale, layout.gw_height / s,
                   layout.gw_width / s});
  }
  return out;
}

RawGrid load_raw_grid(const std::string& path, const DwLayout& layout) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }

  RawGrid grid;
  const std::string window = doc.at("window").get<std::string>();
  if (window == "CW") grid.spec.window = Frame::CW;
  else if (window == "GW") grid.spec.window = Frame::GW;
  else throw std::runtime_error(path + ": window must be CW or GW");

  grid.spec.stride_in_window = doc.at("stride").get<int>();
  const bool cw_ok = grid.spec.window == Frame::CW &&
                     (grid.spec.stride_in_window == 8 || grid.spec.stride_in_window == 16);
  const bool gw_ok = grid.spec.window == Frame::GW &&
                     (grid.spec.stride_in_window == 8 || grid.spec.stride_in_window == 16 ||
                      grid.spec.stride_in_window == 32);
  if (!cw_ok && !gw_ok)
    throw std::runtime_error(path + ": stride invalid for window " + window);
  grid.spec.stride_in_original =
      grid.spec.stride_in_window *
      (grid.spec.window == Frame::CW ? 1 : layout.spec.gw_scale);

  const auto shape = doc.at("shape");
  if (!shape.is_array() || shape.size() != 3 || shape[2].get<int>() != kRawChannels)
    throw std::runtime_error(path + ": shape must be [rows, cols, 18]");
  grid.spec.grid_rows = shape[0].get<int>();
  grid.spec.grid_cols = shape[1].get<int>();
  if (grid.spec.grid_rows <= 0 || grid.spec.grid_cols <= 0)
    throw std::runtime_error(path + ": empty grid");

  const auto& data = doc.at("data");
  const std::size_t expected = static_cast<std::size_t>(grid.spec.grid_rows) *
                               grid.spec.grid_cols * kRawChannels;
  if (!data.is_array() || data.size() != expected)
    throw std::runtime_error(path + ": data length does not match shape");
  grid.values.reserve(expected);
  for (const auto& v : data) grid.values.push_back(v.get<float>());

  // channel invariants
  for (int row = 0; row < grid.spec.grid_rows; ++row) {
    for (int col = 0; col < grid.spec.grid_cols; ++col) {
      auto prob = [&](int ch) {
        const float v = grid.at(row, col, ch);
        return v >= 0.0f && v <= 1.0f;
      };
      const bool probs_ok = prob(0) && prob(5) && prob(17) && prob(6) && prob(7) &&
                            prob(8) && prob(9) && prob(10) && prob(11) && prob(12) &&
                            prob(13);
      const float theta_n = grid.at(row, col, 14);
      const bool finite_ok = std::isfinite(grid.at(row, col, 3)) &&
                             std::isfinite(grid.at(row, col, 4)) &&
                             std::isfinite(grid.at(row, col, 1)) &&
                             std::isfinite(grid.at(row, col, 2)) &&
                             std::isfinite(grid.at(row, col, 15)) &&
                             std::isfinite(grid.at(row, col, 16));
      if (!probs_ok || theta_n < -1.0f || theta_n > 1.0f || !finite_ok)
        throw std::runtime_error(path + ": channel invariants violated at cell (" +
                                 std::to_string(row) + ", " + std::to_string(col) + ")");
    }
  }
  return grid;
}

void save_raw_grid(const RawGrid& grid, const std::string& path) {
  json doc;
  doc["window"] = grid.spec.window == Frame::CW ? "CW" : "GW";
  doc["stride"] = grid.spec.stride_in_window;
  doc["shape"] = {grid.spec.grid_rows, grid.spec.grid_cols, kRawChannels};
  doc["data"] = grid.values;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump() << "\n";
}

std::vector<Detection> decode_grid(const RawGrid& grid, const DwLayout& layout,
                                   const DecodeParams& params) {
  const std::size_t expected = static_cast<std::size_t>(grid.spec.grid_rows) *
                               grid.spec.grid_cols * kRawChannels;
  if (grid.values.size() != expected)
    throw std::invalid_argument("decode_grid: malformed channel count");

  const double s = grid.spec.stride_in_window;
  const double size_scale = window_size_scale(grid.spec.window, layout);
  std::vector<Detection> out;
  out.reserve(static_cast<std::size_t>(grid.spec.grid_rows) * grid.spec.grid_cols);

  for (int row = 0; row < grid.spec.grid_rows; ++row) {
    for (int col = 0; col < grid.spec.grid_cols; ++col) {
      Detection det;
      det.score = grid.at(row, col, 0);
      det.spl_conf = grid.at(row, col, 17);
      det.source_window = grid.spec.window;
      det.source_stride = grid.spec.stride_in_original;

      const Vec2 center_w{(col + static_cast<double>(grid.at(row, col, 1))) * s,
                          (row + static_cast<double>(grid.at(row, col, 2))) * s};
      const double w_w = std::exp(static_cast<double>(grid.at(row, col, 3))) * s;
      const double h_w = std::exp(static_cast<double>(grid.at(row, col, 4))) * s;
      const Vec2 center_o = window_to_original(center_w, grid.spec.window, layout);

      det.p3dvr.eb.cx = center_o.x;
      det.p3dvr.eb.cy = center_o.y;
      det.p3dvr.eb.w = w_w * size_scale;
      det.p3dvr.eb.h = h_w * size_scale;
      det.p3dvr.eb.r = grid.at(row, col, 5);

      int best = 0;
      for (int k = 1; k < 8; ++k)
        if (grid.at(row, col, 6 + k) > grid.at(row, col, 6 + best)) best = k;
      det.p3dvr.eb.pose = {best};

      det.p3dvr.spl.theta_deg = 90.0 * grid.at(row, col, 14);
      const Vec2 anchor_w{(col + 0.5) * s, (row + 0.5) * s};
      const Vec2 pwc_w = anchor_w + Vec2{grid.at(row, col, 15) * s, grid.at(row, col, 16) * s};
      const Vec2 pwc_o = window_to_original(pwc_w, grid.spec.window, layout);
      det.p3dvr.spl.pwc_x = pwc_o.x;
      det.p3dvr.spl.pwc_y = pwc_o.y;
      det.p3dvr.spl.present = det.spl_conf >= params.presence_thresh;

      out.push_back(det);
    }
  }
  return out;
}

void encode_detection(const Detection& det, const DwLayout& layout, RawGrid& grid,
                      int row, int col) {
  if (row < 0 || row >= grid.spec.grid_rows || col < 0 || col >= grid.spec.grid_cols)
    throw std::invalid_argument("encode_detection: cell outside grid");
  const double s = grid.spec.stride_in_window;
  const double size_scale = window_size_scale(grid.spec.window, layout);

  const Vec2 center_w = original_to_window({det.p3dvr.eb.cx, det.p3dvr.eb.cy},
                                           grid.spec.window, layout);
  grid.at(row, col, 0) = static_cast<float>(det.score);
  grid.at(row, col, 1) = static_cast<float>(center_w.x / s - col);
  grid.at(row, col, 2) = static_cast<float>(center_w.y / s - row);
  grid.at(row, col, 3) = static_cast<float>(std::log(det.p3dvr.eb.w / size_scale / s));
  grid.at(row, col, 4) = static_cast<float>(std::log(det.p3dvr.eb.h / size_scale / s));
  grid.at(row, col, 5) = static_cast<float>(det.p3dvr.eb.r);
  for (int k = 0; k < 8; ++k)
    grid.at(row, col, 6 + k) = det.p3dvr.eb.pose.value == k ? 1.0f : 0.0f;
  grid.at(row, col, 14) = static_cast<float>(det.p3dvr.spl.theta_deg / 90.0);
  const Vec2 pwc_w = original_to_window({det.p3dvr.spl.pwc_x, det.p3dvr.spl.pwc_y},
                                        grid.spec.window, layout);
  grid.at(row, col, 15) = static_cast<float>(pwc_w.x / s - (col + 0.5));
  grid.at(row, col, 16) = static_cast<float>(pwc_w.y / s - (row + 0.5));
  grid.at(row, col, 17) = static_cast<float>(det.spl_conf);
}

std::vector<Detection> nms(std::vector<Detection> dets, double conf_thresh,
                           double iou_thresh) {
  std::erase_if(dets, [&](const Detection& d) { return d.score < conf_thresh; });
  std::sort(dets.begin(), dets.end(), canonical_less);
  return greedy_suppress(std::move(dets), iou_thresh);
}

std::vector<Detection> merge_windows(std::vector<Detection> dets, double iou_thresh) {
  // Small CW detections outrank everything they overlap: the CW window holds
  // the native-resolution pixels for them. Remaining conflicts go to score.
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    const bool pa = cw_small(a), pb = cw_small(b);
    if (pa != pb) return pa;
    return canonical_less(a, b);
  });
  return greedy_suppress(std::move(dets), iou_thresh);
}

}  // namespace p3dvd
