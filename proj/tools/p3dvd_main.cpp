// p3dvd: Double-Window synthesis, window-following augmentation, head
// decoding, rendering, synthetic ground truth and metric evaluation.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "p3dvd/augment.hpp"
#include "p3dvd/config.hpp"
#include "p3dvd/decode.hpp"
#include "p3dvd/dw.hpp"
#include "p3dvd/eval.hpp"
#include "p3dvd/image.hpp"
#include "p3dvd/loss.hpp"
#include "p3dvd/records.hpp"
#include "p3dvd/rng.hpp"
#include "p3dvd/synth.hpp"

namespace fs = std::filesystem;
using namespace p3dvd;

namespace {

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string config_path;
  int jobs = 1;
  Config config;

  void load() {
    if (!config_path.empty()) config = Config::from_file(config_path);
  }
};

WindowSpec window_spec_from(const Config& cfg) {
  WindowSpec spec;
  spec.center.x = cfg.get_double("center_x", spec.center.x);
  spec.center.y = cfg.get_double("center_y", spec.center.y);
  spec.cw_width = cfg.get_int("cw_width", spec.cw_width);
  spec.cw_height = cfg.get_int("cw_height", spec.cw_height);
  spec.crop_top = cfg.get_int("crop_top", spec.crop_top);
  spec.crop_bottom = cfg.get_int("crop_bottom", spec.crop_bottom);
  spec.gw_scale = cfg.get_int("gw_scale", spec.gw_scale);
  return spec;
}

DecodeParams decode_params_from(const Config& cfg) {
  DecodeParams params;
  params.conf_thresh = cfg.get_double("conf_thresh", params.conf_thresh);
  params.iou_thresh = cfg.get_double("iou_thresh", params.iou_thresh);
  params.presence_thresh = cfg.get_double("presence_thresh", params.presence_thresh);
  return params;
}

AugmentConfig augment_config_from(const Config& cfg, std::uint64_t seed) {
  AugmentConfig a;
  a.translate_frac = cfg.get_double("translate_frac", a.translate_frac);
  a.shear_deg = cfg.get_double("shear_deg", a.shear_deg);
  a.scale_lo = cfg.get_double("scale_lo", a.scale_lo);
  a.scale_hi = cfg.get_double("scale_hi", a.scale_hi);
  a.hflip_prob = cfg.get_double("hflip_prob", a.hflip_prob);
  a.mosaic_prob = cfg.get_double("mosaic_prob", a.mosaic_prob);
  a.seed = seed;
  return a;
}

void save_png_atomic(const Image& img, const std::string& path) {
  const std::string tmp = path + ".tmp";
  save_png(img, tmp);
  fs::rename(tmp, path);
}

void write_jsonl_atomic(const std::vector<AnnotationRecord>& records,
                        const std::string& path) {
  const std::string tmp = path + ".tmp";
  write_jsonl(records, tmp);
  fs::rename(tmp, path);
}

// bounded worker pool; work items indexed, first exception rethrown
void parallel_for_ordered(std::size_t n, int jobs,
                          const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  const std::size_t count = std::min(static_cast<std::size_t>(jobs), n);
  for (std::size_t w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::vector<AnnotationRecord> dw_labels_to_records(const std::vector<FrameLabel>& labels,
                                                   const std::string& image_id) {
  std::vector<AnnotationRecord> records;
  for (const FrameLabel& fl : labels) {
    AnnotationRecord rec = AnnotationRecord::from_p3dvr(image_id, fl.p3dvr);
    rec.extra["frame"] = fl.frame == Frame::CW ? "CW" : "GW";
    rec.extra["truncated"] = fl.truncated;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Label> records_to_labels(const std::vector<AnnotationRecord>& records) {
  std::vector<Label> labels;
  for (const AnnotationRecord& rec : records) labels.push_back({rec.to_p3dvr(), false});
  return labels;
}

// --- subcommands ---------------------------------------------------------

int run_dwsynth(const CommonOpts& common, const std::vector<std::string>& inputs,
                const std::vector<std::string>& label_files, const std::string& out_dir) {
  if (!label_files.empty() && label_files.size() != inputs.size())
    throw std::invalid_argument("dwsynth: --labels count must match --input count");
  fs::create_directories(out_dir);
  const WindowSpec spec = window_spec_from(common.config);

  parallel_for_ordered(inputs.size(), common.jobs, [&](std::size_t i) {
    const Image original = load_image(inputs[i]);
    const std::string stem = stem_of(inputs[i]);
    if (label_files.empty()) {
      const DwSynthesis synth = synthesize_dw(original, spec);
      save_png_atomic(synth.dw, (fs::path(out_dir) / (stem + "_dw.png")).string());
    } else {
      const auto records = read_jsonl(label_files[i]);
      const TrainingSample sample =
          extract_training_sample(original, records_to_labels(records), spec.center, spec);
      save_png_atomic(sample.dw, (fs::path(out_dir) / (stem + "_dw.png")).string());
      write_jsonl_atomic(dw_labels_to_records(sample.labels, stem),
                         (fs::path(out_dir) / (stem + "_dw.jsonl")).string());
    }
  });
  return 0;
}

int run_augment(const CommonOpts& common, const std::vector<std::string>& inputs,
                const std::vector<std::string>& label_files, const std::string& out_dir,
                std::uint64_t draw_id) {
  if (inputs.size() != 1 && inputs.size() != 4)
    throw std::invalid_argument("augment: pass 1 input image or 4 for a mosaic");
  if (label_files.size() != inputs.size())
    throw std::invalid_argument("augment: --labels count must match --input count");
  fs::create_directories(out_dir);
  const WindowSpec spec = window_spec_from(common.config);
  const AugmentConfig aug = augment_config_from(common.config, common.seed);

  std::vector<LabeledImage> lis(inputs.size());
  parallel_for_ordered(inputs.size(), common.jobs, [&](std::size_t i) {
    lis[i].image = load_image(inputs[i]);
    lis[i].labels = records_to_labels(read_jsonl(label_files[i]));
    lis[i].window_center = spec.center;
  });

  const AugmentResult result = window_following_apply(lis, aug, spec, draw_id);
  const std::string stem = stem_of(inputs[0]);
  save_png_atomic(result.output.image, (fs::path(out_dir) / (stem + "_aug.png")).string());

  const TrainingSample sample = extract_training_sample(
      result.output.image, result.output.labels, result.output.window_center, spec);
  save_png_atomic(sample.dw, (fs::path(out_dir) / (stem + "_aug_dw.png")).string());
  write_jsonl_atomic(dw_labels_to_records(sample.labels, stem),
                     (fs::path(out_dir) / (stem + "_aug_dw.jsonl")).string());
  std::cout << "window_center " << result.output.window_center.x << " "
            << result.output.window_center.y << (result.center_clamped ? " clamped" : "")
            << "\n";
  return 0;
}

int run_decode(const CommonOpts& common, const std::vector<std::string>& grid_files,
               const std::string& out_path, const std::string& image_id, int orig_width,
               int orig_height) {
  const WindowSpec spec = window_spec_from(common.config);
  const DwLayout layout = make_layout(spec, orig_width, orig_height);
  const DecodeParams params = decode_params_from(common.config);

  std::vector<Detection> cw_dets, gw_dets;
  std::mutex merge_mutex;
  parallel_for_ordered(grid_files.size(), common.jobs, [&](std::size_t i) {
    const RawGrid grid = load_raw_grid(grid_files[i], layout);
    std::vector<Detection> dets = decode_grid(grid, layout, params);
    std::scoped_lock lock(merge_mutex);
    auto& sink = grid.spec.window == Frame::CW ? cw_dets : gw_dets;
    sink.insert(sink.end(), dets.begin(), dets.end());
  });

  // per-window suppression, then the cross-window merge
  std::vector<Detection> merged =
      nms(std::move(cw_dets), params.conf_thresh, params.iou_thresh);
  std::vector<Detection> gw_kept =
      nms(std::move(gw_dets), params.conf_thresh, params.iou_thresh);
  merged.insert(merged.end(), gw_kept.begin(), gw_kept.end());
  merged = merge_windows(std::move(merged), params.iou_thresh);

  std::sort(merged.begin(), merged.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.p3dvr.eb.cx != b.p3dvr.eb.cx) return a.p3dvr.eb.cx < b.p3dvr.eb.cx;
    return a.p3dvr.eb.cy < b.p3dvr.eb.cy;
  });

  std::vector<AnnotationRecord> records;
  for (const Detection& det : merged) {
    AnnotationRecord rec = AnnotationRecord::from_p3dvr(image_id, det.p3dvr);
    rec.score = det.score;
    rec.spl_conf = det.spl_conf;
    rec.extra["window"] = det.source_window == Frame::CW ? "CW" : "GW";
    rec.extra["stride"] = det.source_stride;
    records.push_back(std::move(rec));
  }
  write_jsonl_atomic(records, out_path);
  std::cout << records.size() << " detections\n";
  return 0;
}

int run_evaluate(const std::string& gt_path, const std::string& pred_path,
                 const std::string& out_path) {
  const auto gts = read_jsonl(gt_path);
  const auto preds = read_jsonl(pred_path);
  const MetricReport report = evaluate(gts, preds);
  std::cout << report_to_table(report);
  if (!out_path.empty()) {
    const std::string tmp = out_path + ".tmp";
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << report_to_json(report) << "\n";
    out.close();
    fs::rename(tmp, out_path);
  }
  return 0;
}

int run_render(const CommonOpts& common, const std::vector<std::string>& inputs,
               const std::vector<std::string>& label_files, const std::string& out_dir) {
  if (label_files.size() != inputs.size())
    throw std::invalid_argument("render: --labels count must match --input count");
  fs::create_directories(out_dir);
  parallel_for_ordered(inputs.size(), common.jobs, [&](std::size_t i) {
    Image img = load_image(inputs[i]);
    for (const AnnotationRecord& rec : read_jsonl(label_files[i]))
      draw_p3dvr_overlay(img, rec.to_p3dvr());
    save_png_atomic(img,
                    (fs::path(out_dir) / (stem_of(inputs[i]) + "_overlay.png")).string());
  });
  return 0;
}

struct NoiseSpec {
  double box_shift_frac = 0.0;  // max |shift| of one box axis, fraction of size
  double r_amp = 0.0;           // uniform |error| bound on r
  double theta_amp = 0.0;       // uniform |error| bound on theta_n
  double pwc_radius = 0.0;      // uniform radial error bound in px
  double pose_flip_prob = 0.0;
};

// uniform error of magnitude |u| <= amp that keeps value + u inside [lo, hi]
// by flipping the sign when needed; |error| stays uniform
double inward_uniform(Rng& rng, double value, double amp, double lo, double hi) {
  const double u = rng.uniform(-amp, amp);
  if (value + u >= lo && value + u <= hi) return u;
  return -u;
}

AnnotationRecord perturb_record(const AnnotationRecord& gt, const NoiseSpec& noise,
                                Rng& rng) {
  AnnotationRecord pred = gt;
  if (noise.box_shift_frac > 0.0) {
    const double t = rng.uniform(0.0, noise.box_shift_frac);
    const bool horizontal = rng.bernoulli(0.5);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    if (horizontal) pred.box.cx += sign * t * pred.box.w;
    else pred.box.cy += sign * t * pred.box.h;
  }
  pred.r = gt.r + inward_uniform(rng, gt.r, noise.r_amp, 0.0, 1.0);
  pred.theta_n = gt.theta_n + inward_uniform(rng, gt.theta_n, noise.theta_amp, -1.0, 1.0);
  const double rho = rng.uniform(0.0, noise.pwc_radius);
  const double phi = rng.uniform(0.0, 2.0 * kPi);
  pred.pwc.x += rho * std::cos(phi);
  pred.pwc.y += rho * std::sin(phi);
  if (rng.bernoulli(noise.pose_flip_prob))
    pred.pose = (pred.pose + 1 + static_cast<int>(rng.uniform_int(0, 6))) % 8;
  pred.score = rng.uniform(0.5, 1.0);
  pred.spl_conf = gt.spl_present ? 0.9 : 0.1;
  return pred;
}

int run_gencases(const CommonOpts& common, int scenes, int vehicles,
                 const std::string& out_dir, bool render, bool perturb,
                 const NoiseSpec& noise, const SceneRanges& ranges) {
  fs::create_directories(out_dir);
  const Camera cam = Camera::default_camera();

  std::vector<std::vector<AnnotationRecord>> gt_per_scene(scenes);
  std::vector<std::vector<AnnotationRecord>> pred_per_scene(scenes);
  parallel_for_ordered(scenes, common.jobs, [&](std::size_t s) {
    Rng rng = Rng::stream(common.seed, 1000000 + s);
    const Scene scene = gen_scene(Rng::stream(common.seed, s).next_u64(), vehicles, cam, ranges);
    const std::string image_id = "scene_" + std::to_string(s);
    for (const OracleLabel& label : scene.labels) {
      AnnotationRecord rec = AnnotationRecord::from_p3dvr(image_id, label.p3dvr);
      gt_per_scene[s].push_back(rec);
      if (perturb) pred_per_scene[s].push_back(perturb_record(rec, noise, rng));
    }
    if (render)
      save_png_atomic(render_scene(cam, scene),
                      (fs::path(out_dir) / (image_id + ".png")).string());
  });

  std::vector<AnnotationRecord> gts, preds;
  for (int s = 0; s < scenes; ++s) {
    gts.insert(gts.end(), gt_per_scene[s].begin(), gt_per_scene[s].end());
    preds.insert(preds.end(), pred_per_scene[s].begin(), pred_per_scene[s].end());
  }
  write_jsonl_atomic(gts, (fs::path(out_dir) / "gt.jsonl").string());
  if (perturb) write_jsonl_atomic(preds, (fs::path(out_dir) / "pred.jsonl").string());
  std::cout << gts.size() << " ground truths\n";
  return 0;
}

int run_losscheck(const CommonOpts& common, int samples, double step, double tol) {
  Rng rng(common.seed + 97);
  LossWeights weights;
  weights.alpha1 = common.config.get_double("alpha1", weights.alpha1);
  weights.alpha2 = common.config.get_double("alpha2", weights.alpha2);
  weights.alpha3 = common.config.get_double("alpha3", weights.alpha3);
  weights.alpha4 = common.config.get_double("alpha4", weights.alpha4);
  weights.alpha5 = common.config.get_double("alpha5", weights.alpha5);

  double max_err = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (int i = 0; i < samples; ++i) {
    const SplTarget gt{rng.uniform(-0.8, 0.8),
                       {rng.uniform(-40, 40), rng.uniform(-40, 40)},
                       rng.bernoulli(0.7)};
    DiffFunction f;
    f.value = [&](const std::vector<double>& x) {
      return spl_loss({x[0], {x[1], x[2]}, x[3]}, gt, weights).total;
    };
    f.gradient = [&](const std::vector<double>& x) {
      const SplGradient g = spl_loss({x[0], {x[1], x[2]}, x[3]}, gt, weights).grad;
      return std::vector<double>{g.theta_n, g.pwc_x, g.pwc_y, g.conf};
    };
    f.smooth_at = [&](const std::vector<double>& x, std::size_t dim, double h) {
      const double m = 8.0 * h;
      if (dim == 0) return std::abs(x[0] - gt.theta_n) > m && std::abs(x[0]) < 1.0 - m;
      if (dim == 1) return std::abs(x[1] - gt.pwc.x) > m;
      if (dim == 2) return std::abs(x[2] - gt.pwc.y) > m;
      return x[3] > 2.0 * m && x[3] < 1.0 - 2.0 * m;
    };
    const GradCheckReport rep = grad_check(
        f,
        {rng.uniform(-0.9, 0.9), rng.uniform(-40, 40), rng.uniform(-40, 40),
         rng.uniform(0.05, 0.95)},
        step, tol);
    max_err = std::max(max_err, rep.max_rel_err);
    checked += rep.checked;
    skipped += rep.skipped;
  }
  std::printf(
      "losscheck: %zu dims checked, %zu skipped, max relative error %.3g (tolerance %g)\n",
      checked, skipped, max_err, tol);
  return max_err < tol ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-3D vehicle detection toolchain"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--seed", common.seed, "deterministic RNG seed");
  app.add_option("--config", common.config_path, "flat key = value config file");
  app.add_option("--jobs", common.jobs, "worker pool size")->check(CLI::PositiveNumber);

  // window/threshold constants as flags; they override the config file
  std::map<std::string, std::string> flag_overrides;
  auto add_override = [&](const char* flag, const char* key, const char* help) {
    app.add_option_function<std::string>(
           flag, [&flag_overrides, key](const std::string& v) { flag_overrides[key] = v; },
           help)
        ->expected(1);
  };
  add_override("--center-x", "center_x", "CW center x in the original frame");
  add_override("--center-y", "center_y", "CW center y in the original frame");
  add_override("--cw-width", "cw_width", "CW width in pixels");
  add_override("--cw-height", "cw_height", "CW height in pixels");
  add_override("--crop-top", "crop_top", "rows cropped from the top for the GW");
  add_override("--crop-bottom", "crop_bottom", "rows cropped from the bottom for the GW");
  add_override("--gw-scale", "gw_scale", "GW downscale factor");
  add_override("--conf", "conf_thresh", "detection confidence threshold");
  add_override("--iou", "iou_thresh", "NMS IoU threshold");
  add_override("--presence", "presence_thresh", "SPL presence threshold on C_l");

  auto* dwsynth = app.add_subcommand("dwsynth", "synthesize DW images from originals");
  std::vector<std::string> inputs, label_files;
  std::string out_dir = ".";
  dwsynth->add_option("--input", inputs, "input images")->required();
  dwsynth->add_option("--labels", label_files, "per-image JSONL labels");
  dwsynth->add_option("--output-dir", out_dir, "output directory");

  auto* augment = app.add_subcommand("augment", "window-following augmentation");
  std::vector<std::string> aug_inputs, aug_labels;
  std::string aug_out = ".";
  std::uint64_t draw_id = 0;
  augment->add_option("--input", aug_inputs, "1 image, or 4 for a mosaic")->required();
  augment->add_option("--labels", aug_labels, "per-image JSONL labels")->required();
  augment->add_option("--output-dir", aug_out, "output directory");
  augment->add_option("--draw-id", draw_id, "per-sample RNG stream id");

  auto* decode = app.add_subcommand("decode", "decode raw head grids to predictions");
  std::vector<std::string> grid_files;
  std::string pred_out = "pred.jsonl", image_id = "image0";
  int orig_w = 3840, orig_h = 2160;
  decode->add_option("--grids", grid_files, "RawGrid JSON files")->required();
  decode->add_option("--output", pred_out, "prediction JSONL path");
  decode->add_option("--image-id", image_id, "image id for emitted records");
  decode->add_option("--width", orig_w, "original image width");
  decode->add_option("--height", orig_h, "original image height");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against GT");
  std::string gt_path, eval_pred_path, report_out;
  evaluate_cmd->add_option("--gt", gt_path, "ground-truth JSONL")->required();
  evaluate_cmd->add_option("--pred", eval_pred_path, "prediction JSONL")->required();
  evaluate_cmd->add_option("--output", report_out, "metric report JSON path");

  auto* render_cmd = app.add_subcommand("render", "overlay P3DVRs on images");
  std::vector<std::string> render_inputs, render_labels;
  std::string render_out = ".";
  render_cmd->add_option("--input", render_inputs, "input images")->required();
  render_cmd->add_option("--labels", render_labels, "per-image JSONL annotations")
      ->required();
  render_cmd->add_option("--output-dir", render_out, "output directory");

  auto* gencases = app.add_subcommand("gencases", "generate synthetic scenes");
  int scenes = 1, vehicles = 10;
  std::string gen_out = "cases";
  bool do_render = false, do_perturb = false;
  NoiseSpec noise;
  gencases->add_option("--scenes", scenes, "number of scenes");
  gencases->add_option("--vehicles", vehicles, "vehicles per scene");
  gencases->add_option("--output-dir", gen_out, "output directory");
  gencases->add_flag("--render", do_render, "write wireframe renders");
  gencases->add_flag("--perturb", do_perturb, "emit noisy predictions too");
  gencases->add_option("--noise-box", noise.box_shift_frac, "box shift fraction bound");
  gencases->add_option("--noise-r", noise.r_amp, "split-ratio error bound");
  gencases->add_option("--noise-theta", noise.theta_amp, "theta_n error bound");
  gencases->add_option("--noise-pwc", noise.pwc_radius, "wheel-midpoint radius bound (px)");
  gencases->add_option("--noise-pose", noise.pose_flip_prob, "pose flip probability");
  SceneRanges ranges;
  gencases->add_option("--z-min", ranges.z_min, "nearest vehicle depth (m)");
  gencases->add_option("--z-max", ranges.z_max, "farthest vehicle depth (m)");
  gencases->add_option("--max-pair-iou", ranges.max_pair_iou,
                       "max projected overlap between scene vehicles");

  auto* losscheck = app.add_subcommand("losscheck", "finite-difference gradient check");
  int samples = 200;
  double step = 1e-6, tol = 1e-4;
  losscheck->add_option("--samples", samples, "random points to test");
  losscheck->add_option("--step", step, "finite-difference step");
  losscheck->add_option("--tol", tol, "max relative error tolerance");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    common.load();
    for (const auto& [key, value] : flag_overrides) common.config.set(key, value);
    if (*dwsynth) return run_dwsynth(common, inputs, label_files, out_dir);
    if (*augment) return run_augment(common, aug_inputs, aug_labels, aug_out, draw_id);
    if (*decode) return run_decode(common, grid_files, pred_out, image_id, orig_w, orig_h);
    if (*evaluate_cmd) return run_evaluate(gt_path, eval_pred_path, report_out);
    if (*render_cmd) return run_render(common, render_inputs, render_labels, render_out);
    if (*gencases)
      return run_gencases(common, scenes, vehicles, gen_out, do_render, do_perturb,
                          noise, ranges);
    if (*losscheck) return run_losscheck(common, samples, step, tol);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
