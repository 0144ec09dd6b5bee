#include "p3dvd/decode.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "p3dvd/rng.hpp"
#include "p3dvd/synth.hpp"

using namespace p3dvd;

namespace {

DwLayout paper_layout() { return make_layout(WindowSpec{}, 3840, 2160); }

RawGrid neutral_grid(Frame window, int stride, int rows, int cols, const DwLayout& layout) {
  RawGrid g;
  g.spec.window = window;
  g.spec.stride_in_window = stride;
  g.spec.stride_in_original = stride * (window == Frame::CW ? 1 : layout.spec.gw_scale);
  g.spec.grid_rows = rows;
  g.spec.grid_cols = cols;
  g.values.assign(static_cast<std::size_t>(rows) * cols * kRawChannels, 0.0f);
  return g;
}

Detection make_det(double cx, double cy, double w, double h, double score,
                   Frame window = Frame::CW, int stride = 8) {
  Detection d;
  d.p3dvr.eb = {cx, cy, w, h, 0.5, {1}};
  d.p3dvr.spl = {cx, cy + h / 4.0, 5.0, true};
  d.score = score;
  d.spl_conf = 0.8;
  d.source_window = window;
  d.source_stride = stride;
  return d;
}

}  // namespace

TEST_SUITE("decode") {

TEST_CASE("decode formula at neutral values") {
  const DwLayout layout = paper_layout();
  RawGrid g = neutral_grid(Frame::CW, 8, 1, 1, layout);
  g.at(0, 0, 0) = 0.9f;   // C_o
  g.at(0, 0, 1) = 0.5f;   // tx
  g.at(0, 0, 2) = 0.5f;   // ty
  g.at(0, 0, 6 + 3) = 1.0f;  // pose 3
  g.at(0, 0, 17) = 0.7f;  // C_l

  const auto dets = decode_grid(g, layout);
  REQUIRE(dets.size() == 1);
  const Detection& d = dets[0];
  // window-frame (4, 4) size (8, 8), then shifted by the CW origin
  CHECK(d.p3dvr.eb.cx == doctest::Approx(1360.0 + 4.0));
  CHECK(d.p3dvr.eb.cy == doctest::Approx(1056.0 + 4.0));
  CHECK(d.p3dvr.eb.w == doctest::Approx(8.0));
  CHECK(d.p3dvr.eb.h == doctest::Approx(8.0));
  CHECK(d.p3dvr.eb.pose.value == 3);
  CHECK(d.score == doctest::Approx(0.9));
  CHECK(d.p3dvr.spl.present);  // 0.7 >= 0.5
  CHECK(d.source_stride == 8);
}

TEST_CASE("theta decode endpoints") {
  const DwLayout layout = paper_layout();
  RawGrid g = neutral_grid(Frame::GW, 32, 1, 1, layout);
  g.at(0, 0, 14) = -1.0f;
  auto dets = decode_grid(g, layout);
  CHECK(dets[0].p3dvr.spl.theta_deg == doctest::Approx(-90.0));
  g.at(0, 0, 14) = 0.5f;
  dets = decode_grid(g, layout);
  CHECK(dets[0].p3dvr.spl.theta_deg == doctest::Approx(45.0));
  CHECK(dets[0].source_stride == 128);
}

TEST_CASE("gw decode maps through the downscale and crop") {
  const DwLayout layout = paper_layout();
  RawGrid g = neutral_grid(Frame::GW, 8, 2, 3, layout);
  for (int row = 0; row < 2; ++row)
    for (int col = 0; col < 3; ++col) {
      g.at(row, col, 1) = 0.5f;
      g.at(row, col, 2) = 0.5f;
    }
  const auto dets = decode_grid(g, layout);
  REQUIRE(dets.size() == 6);
  // cell (0,0): gw-frame (4, 4) -> original (16, 16 + 52)
  CHECK(dets[0].p3dvr.eb.cx == doctest::Approx(16.0));
  CHECK(dets[0].p3dvr.eb.cy == doctest::Approx(68.0));
  CHECK(dets[0].p3dvr.eb.w == doctest::Approx(32.0));
  CHECK(dets[0].source_stride == 32);
}

TEST_CASE("decode/encode round-trip reproduces the raw cells") {
  const DwLayout layout = paper_layout();
  Rng rng(61);
  for (Frame window : {Frame::CW, Frame::GW}) {
    for (int stride : window == Frame::CW ? std::vector<int>{8, 16}
                                          : std::vector<int>{8, 16, 32}) {
      RawGrid g = neutral_grid(window, stride, 4, 5, layout);
      for (int row = 0; row < 4; ++row) {
        for (int col = 0; col < 5; ++col) {
          g.at(row, col, 0) = static_cast<float>(rng.uniform(0.05, 0.95));
          g.at(row, col, 1) = static_cast<float>(rng.uniform(0.0, 1.0));
          g.at(row, col, 2) = static_cast<float>(rng.uniform(0.0, 1.0));
          g.at(row, col, 3) = static_cast<float>(rng.uniform(-1.0, 2.5));
          g.at(row, col, 4) = static_cast<float>(rng.uniform(-1.0, 2.5));
          g.at(row, col, 5) = static_cast<float>(rng.uniform(0.0, 1.0));
          const int pose = static_cast<int>(rng.uniform_int(0, 7));
          for (int k = 0; k < 8; ++k) g.at(row, col, 6 + k) = k == pose ? 1.0f : 0.0f;
          g.at(row, col, 14) = static_cast<float>(rng.uniform(-0.99, 0.99));
          g.at(row, col, 15) = static_cast<float>(rng.uniform(-2.0, 2.0));
          g.at(row, col, 16) = static_cast<float>(rng.uniform(-2.0, 2.0));
          g.at(row, col, 17) = static_cast<float>(rng.uniform(0.05, 0.95));
        }
      }
      const auto dets = decode_grid(g, layout);
      RawGrid back = neutral_grid(window, stride, 4, 5, layout);
      std::size_t i = 0;
      for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 5; ++col) encode_detection(dets[i++], layout, back, row, col);
      for (std::size_t k = 0; k < g.values.size(); ++k) {
        CHECK(std::abs(back.values[k] - g.values[k]) < 1e-5);
      }
    }
  }
}

TEST_CASE("nms basics") {
  SUBCASE("identical boxes keep the higher score") {
    const auto out = nms({make_det(100, 100, 20, 20, 0.9), make_det(100, 100, 20, 20, 0.8)},
                         0.5, 0.65);
    REQUIRE(out.size() == 1);
    CHECK(out[0].score == doctest::Approx(0.9));
  }
  SUBCASE("disjoint boxes are both kept") {
    const auto out = nms({make_det(100, 100, 20, 20, 0.9), make_det(300, 100, 20, 20, 0.8)},
                         0.5, 0.65);
    CHECK(out.size() == 2);
  }
  SUBCASE("low confidence dropped") {
    const auto out = nms({make_det(100, 100, 20, 20, 0.4)}, 0.5, 0.65);
    CHECK(out.empty());
  }
}

TEST_CASE("suppression chain keeps the two ends") {
  // A-B-C with IoU(A,B) = IoU(B,C) = 2/3 > 0.65 and IoU(A,C) = 3/7 <= 0.65
  const Detection a = make_det(100, 100, 10, 10, 0.9);
  const Detection b = make_det(102, 100, 10, 10, 0.8);
  const Detection c = make_det(104, 100, 10, 10, 0.7);
  CHECK(iou(a.p3dvr.eb.box(), b.p3dvr.eb.box()) == doctest::Approx(2.0 / 3.0));
  CHECK(iou(b.p3dvr.eb.box(), c.p3dvr.eb.box()) == doctest::Approx(2.0 / 3.0));
  CHECK(iou(a.p3dvr.eb.box(), c.p3dvr.eb.box()) == doctest::Approx(3.0 / 7.0));

  const auto out = nms({a, b, c}, 0.5, 0.65);
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == doctest::Approx(0.9));
  CHECK(out[1].score == doctest::Approx(0.7));
}

TEST_CASE("nms output is independent of the input order") {
  Rng rng(62);
  std::vector<Detection> dets;
  for (int i = 0; i < 60; ++i)
    dets.push_back(make_det(rng.uniform(0, 400), rng.uniform(0, 300), rng.uniform(10, 60),
                            rng.uniform(10, 60), rng.uniform(0.3, 1.0)));
  const auto baseline = nms(dets, 0.5, 0.65);
  // every output pair respects the threshold
  for (std::size_t i = 0; i < baseline.size(); ++i)
    for (std::size_t j = i + 1; j < baseline.size(); ++j)
      CHECK(iou(baseline[i].p3dvr.eb.box(), baseline[j].p3dvr.eb.box()) <= 0.65);

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Detection> shuffled = dets;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.uniform_int(0, static_cast<int>(i) - 1)]);
    const auto out = nms(shuffled, 0.5, 0.65);
    REQUIRE(out.size() == baseline.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].p3dvr.eb.cx == baseline[i].p3dvr.eb.cx);
      CHECK(out[i].score == baseline[i].score);
    }
  }
}

TEST_CASE("merge_windows prefers the small CW copy") {
  SUBCASE("small object: CW wins regardless of score") {
    Detection cw = make_det(100, 100, 20, 20, 0.7, Frame::CW, 8);
    Detection gw = make_det(100, 101, 20, 20, 0.9, Frame::GW, 32);
    const auto out = merge_windows({gw, cw}, 0.65);
    REQUIRE(out.size() == 1);
    CHECK(out[0].source_window == Frame::CW);
  }
  SUBCASE("large object: score wins") {
    Detection cw = make_det(500, 500, 200, 200, 0.7, Frame::CW, 8);
    Detection gw = make_det(500, 501, 200, 200, 0.9, Frame::GW, 32);
    const auto out = merge_windows({cw, gw}, 0.65);
    REQUIRE(out.size() == 1);
    CHECK(out[0].source_window == Frame::GW);
  }
  SUBCASE("cw-only detection passes through") {
    const auto out = merge_windows({make_det(100, 100, 20, 20, 0.7)}, 0.65);
    CHECK(out.size() == 1);
  }
  SUBCASE("output count never exceeds input and respects the threshold") {
    Rng rng(63);
    std::vector<Detection> dets;
    for (int i = 0; i < 40; ++i)
      dets.push_back(make_det(rng.uniform(0, 300), rng.uniform(0, 300),
                              rng.uniform(10, 120), rng.uniform(10, 120),
                              rng.uniform(0.3, 1.0),
                              rng.bernoulli(0.5) ? Frame::CW : Frame::GW,
                              rng.bernoulli(0.5) ? 8 : 32));
    const auto out = merge_windows(dets, 0.65);
    CHECK(out.size() <= dets.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = i + 1; j < out.size(); ++j)
        CHECK(iou(out[i].p3dvr.eb.box(), out[j].p3dvr.eb.box()) <= 0.65);
  }
}

TEST_CASE("malformed channel count rejected") {
  const DwLayout layout = paper_layout();
  RawGrid g = neutral_grid(Frame::CW, 8, 2, 2, layout);
  g.values.pop_back();
  CHECK_THROWS_AS(decode_grid(g, layout), std::invalid_argument);
}

// end to end against the projection oracle: every vehicle rendered into both
// windows must come out of the merge exactly once
TEST_CASE("oracle scene merges to one detection per vehicle") {
  const DwLayout layout = paper_layout();
  const Camera cam = Camera::default_camera();
  const Scene scene = gen_scene(99, 12, cam);
  REQUIRE(scene.labels.size() == 12);

  RawGrid cw = neutral_grid(Frame::CW, 8, layout.spec.cw_height / 8,
                            layout.spec.cw_width / 8, layout);
  RawGrid gw = neutral_grid(Frame::GW, 8, layout.gw_height / 8, layout.gw_width / 8, layout);
  // background cells would decode as score-0 detections; NMS drops them
  int encoded_cw = 0;
  for (std::size_t i = 0; i < scene.labels.size(); ++i) {
    Detection det;
    det.p3dvr = scene.labels[i].p3dvr;
    det.score = 0.95 - 0.01 * static_cast<double>(i);
    det.spl_conf = det.p3dvr.spl.present ? 0.9 : 0.1;

    // GW copy always exists
    det.source_window = Frame::GW;
    det.source_stride = 32;
    const double s_gw = 8.0 * layout.spec.gw_scale;
    const int gcol = std::clamp(static_cast<int>(det.p3dvr.eb.cx / s_gw), 0,
                                gw.spec.grid_cols - 1);
    const int grow = std::clamp(
        static_cast<int>((det.p3dvr.eb.cy - layout.spec.crop_top) / s_gw), 0,
        gw.spec.grid_rows - 1);
    encode_detection(det, layout, gw, grow, gcol);

    // CW copy when the center lies inside the window
    Vec2 cw_pt;
    if (original_to_dw({det.p3dvr.eb.cx, det.p3dvr.eb.cy}, layout, Frame::CW, &cw_pt)) {
      det.source_window = Frame::CW;
      det.source_stride = 8;
      encode_detection(det, layout, cw,
                       std::clamp(static_cast<int>(cw_pt.y / 8.0), 0, cw.spec.grid_rows - 1),
                       std::clamp(static_cast<int>(cw_pt.x / 8.0), 0, cw.spec.grid_cols - 1));
      ++encoded_cw;
    }
  }

  const DecodeParams params;
  auto cw_dets = nms(decode_grid(cw, layout, params), params.conf_thresh, params.iou_thresh);
  auto gw_dets = nms(decode_grid(gw, layout, params), params.conf_thresh, params.iou_thresh);
  cw_dets.insert(cw_dets.end(), gw_dets.begin(), gw_dets.end());
  const auto merged = merge_windows(std::move(cw_dets), params.iou_thresh);
  CHECK(merged.size() == scene.labels.size());
}

TEST_CASE("raw grid json io") {
  const DwLayout layout = paper_layout();
  const std::string path = (std::filesystem::temp_directory_path() / "grid.json").string();

  RawGrid g = neutral_grid(Frame::CW, 16, 2, 2, layout);
  g.at(0, 0, 0) = 0.75f;
  g.at(1, 1, 14) = -0.5f;
  save_raw_grid(g, path);
  const RawGrid loaded = load_raw_grid(path, layout);
  CHECK(loaded.spec.window == Frame::CW);
  CHECK(loaded.spec.stride_in_window == 16);
  CHECK(loaded.spec.stride_in_original == 16);
  CHECK(loaded.values == g.values);

  SUBCASE("invalid stride rejected") {
    std::ofstream out(path);
    out << R"({"window":"CW","stride":32,"shape":[1,1,18],"data":[0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]})";
    out.close();
    CHECK_THROWS_WITH_AS(load_raw_grid(path, layout), doctest::Contains("stride"),
                         std::runtime_error);
  }
  SUBCASE("length mismatch rejected") {
    std::ofstream out(path);
    out << R"({"window":"GW","stride":8,"shape":[1,1,18],"data":[0,0,0]})";
    out.close();
    CHECK_THROWS_WITH_AS(load_raw_grid(path, layout), doctest::Contains("length"),
                         std::runtime_error);
  }
  SUBCASE("channel invariant violations rejected") {
    std::ofstream out(path);
    out << R"({"window":"GW","stride":8,"shape":[1,1,18],"data":[1.5,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]})";
    out.close();
    CHECK_THROWS_WITH_AS(load_raw_grid(path, layout), doctest::Contains("invariants"),
                         std::runtime_error);
  }
}

TEST_CASE("default scale set") {
  const auto scales = default_scale_set(paper_layout());
  REQUIRE(scales.size() == 5);
  CHECK(scales[0].window == Frame::CW);
  CHECK(scales[0].stride_in_original == 8);
  CHECK(scales[0].grid_rows == 48);
  CHECK(scales[0].grid_cols == 120);
  CHECK(scales[4].window == Frame::GW);
  CHECK(scales[4].stride_in_original == 128);
  CHECK(scales[4].grid_rows == 16);
  CHECK(scales[4].grid_cols == 30);
}

}  // TEST_SUITE
