#include "p3dvd/dw.hpp"

#include <cmath>
#include <stdexcept>

namespace p3dvd {

namespace {

int round_i(double v) { return static_cast<int>(std::lround(v)); }

// Clips box to [x0, x1) x [y0, y1). Returns false when nothing remains.
bool clip_box(Box& box, double x0, double y0, double x1, double y1, bool* truncated) {
  const double l = std::max(box.left(), x0);
  const double t = std::max(box.top(), y0);
  const double r = std::min(box.right(), x1);
  const double b = std::min(box.bottom(), y1);
  if (r - l <= 0.0 || b - t <= 0.0) return false;
  if (l != box.left() || t != box.top() || r != box.right() || b != box.bottom())
    *truncated = true;
  box = Box::from_corners(l, t, r, b);
  return true;
}

}  // namespace

DwLayout make_layout(const WindowSpec& spec, int orig_width, int orig_height) {
  if (spec.cw_width <= 0 || spec.cw_height <= 0)
    throw std::invalid_argument("WindowSpec: CW size must be positive");
  if (spec.gw_scale <= 0) throw std::invalid_argument("WindowSpec: gw_scale must be positive");
  if (spec.crop_top < 0 || spec.crop_bottom < 0)
    throw std::invalid_argument("WindowSpec: crops must be nonnegative");

  DwLayout layout;
  layout.spec = spec;
  layout.orig_width = orig_width;
  layout.orig_height = orig_height;

  const int ox = round_i(spec.center.x - spec.cw_width / 2.0);
  const int oy = round_i(spec.center.y - spec.cw_height / 2.0);
  if (ox < 0 || oy < 0 || ox + spec.cw_width > orig_width || oy + spec.cw_height > orig_height)
    throw std::invalid_argument("WindowSpec: CW rectangle outside the original image");
  layout.cw_origin_in_original = {static_cast<double>(ox), static_cast<double>(oy)};

  const int gw_rows = orig_height - spec.crop_top - spec.crop_bottom;
  if (gw_rows <= 0)
    throw std::invalid_argument("WindowSpec: crops leave no rows for the GW");
  if (gw_rows % spec.gw_scale != 0)
    throw std::invalid_argument("WindowSpec: cropped height not divisible by gw_scale");
  if (orig_width % spec.gw_scale != 0)
    throw std::invalid_argument("WindowSpec: width not divisible by gw_scale");

  layout.gw_width = orig_width / spec.gw_scale;
  layout.gw_height = gw_rows / spec.gw_scale;
  if (layout.gw_width != spec.cw_width)
    throw std::invalid_argument("WindowSpec: GW width must equal CW width");
  layout.dw_width = spec.cw_width;
  layout.dw_height = spec.cw_height + layout.gw_height;
  layout.gw_offset_in_dw = spec.cw_height;
  return layout;
}

DwSynthesis synthesize_dw(const Image& original, const WindowSpec& spec) {
  DwSynthesis out;
  out.layout = make_layout(spec, original.width, original.height);
  const Image cw = crop(original, static_cast<int>(out.layout.cw_origin_in_original.x),
                        static_cast<int>(out.layout.cw_origin_in_original.y),
                        spec.cw_width, spec.cw_height);
  const Image gw_full = crop(original, 0, spec.crop_top, original.width,
                             original.height - spec.crop_top - spec.crop_bottom);
  const Image gw = box_downsample(gw_full, spec.gw_scale);
  out.dw = vconcat(cw, gw);
  return out;
}

OriginalPoint dw_to_original(const Vec2& pt, const DwLayout& layout) {
  if (pt.x < 0.0 || pt.x >= layout.dw_width || pt.y < 0.0 || pt.y >= layout.dw_height)
    throw std::invalid_argument("dw_to_original: point outside the DW image");
  if (pt.y < layout.spec.cw_height) {
    return {{pt.x + layout.cw_origin_in_original.x, pt.y + layout.cw_origin_in_original.y},
            Frame::CW};
  }
  const double s = layout.spec.gw_scale;
  return {{pt.x * s, (pt.y - layout.gw_offset_in_dw) * s + layout.spec.crop_top}, Frame::GW};
}

bool original_to_dw(const Vec2& pt, const DwLayout& layout, Frame branch, Vec2* out) {
  if (branch == Frame::CW) {
    const Vec2 q = pt - layout.cw_origin_in_original;
    *out = q;
    return q.x >= 0.0 && q.x < layout.spec.cw_width && q.y >= 0.0 &&
           q.y < layout.spec.cw_height;
  }
  const double s = layout.spec.gw_scale;
  *out = {pt.x / s, (pt.y - layout.spec.crop_top) / s + layout.gw_offset_in_dw};
  return pt.x >= 0.0 && pt.x < layout.orig_width && pt.y >= layout.spec.crop_top &&
         pt.y < layout.orig_height - layout.spec.crop_bottom;
}

TrainingSample extract_training_sample(const Image& original,
                                       const std::vector<Label>& labels,
                                       const Vec2& window_center,
                                       const WindowSpec& spec) {
  WindowSpec centered = spec;
  centered.center = window_center;
  DwSynthesis synth = synthesize_dw(original, centered);
  const DwLayout& layout = synth.layout;

  TrainingSample sample;
  sample.dw = std::move(synth.dw);
  sample.layout = layout;

  for (const Label& label : labels) {
    const P3DVR& p = label.p3dvr;

    // CW copy: native-resolution translate into the window
    {
      P3DVR q = p;
      q.eb.cx -= layout.cw_origin_in_original.x;
      q.eb.cy -= layout.cw_origin_in_original.y;
      q.spl.pwc_x -= layout.cw_origin_in_original.x;
      q.spl.pwc_y -= layout.cw_origin_in_original.y;
      Box box = q.eb.box();
      bool truncated = label.truncated;
      if (clip_box(box, 0.0, 0.0, layout.spec.cw_width, layout.spec.cw_height, &truncated)) {
        q.eb.cx = box.cx;
        q.eb.cy = box.cy;
        q.eb.w = box.w;
        q.eb.h = box.h;
        sample.labels.push_back({q, Frame::CW, truncated});
      }
    }

    // GW copy: 1/gw_scale in both axes, then offset below the CW rows
    {
      const double s = layout.spec.gw_scale;
      P3DVR q = p;
      q.eb.cx = p.eb.cx / s;
      q.eb.cy = (p.eb.cy - layout.spec.crop_top) / s + layout.gw_offset_in_dw;
      q.eb.w = p.eb.w / s;
      q.eb.h = p.eb.h / s;
      q.spl.pwc_x = p.spl.pwc_x / s;
      q.spl.pwc_y = (p.spl.pwc_y - layout.spec.crop_top) / s + layout.gw_offset_in_dw;
      Box box = q.eb.box();
      bool truncated = label.truncated;
      if (clip_box(box, 0.0, layout.gw_offset_in_dw, layout.dw_width, layout.dw_height,
                   &truncated)) {
        q.eb.cx = box.cx;
        q.eb.cy = box.cy;
        q.eb.w = box.w;
        q.eb.h = box.h;
        sample.labels.push_back({q, Frame::GW, truncated});
      }
    }
  }
  return sample;
}

}  // namespace p3dvd
