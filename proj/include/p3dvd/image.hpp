#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "p3dvd/geometry.hpp"

namespace p3dvd {

// 8-bit RGB image, row-major interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool contains(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  bool operator==(const Image&) const = default;
};

using Color = std::array<std::uint8_t, 3>;

// PNG or JPEG by file extension (.png/.jpg/.jpeg); decodes to RGB.
Image load_image(const std::string& path);
// PNG only.
void save_png(const Image& img, const std::string& path);

Image crop(const Image& src, int x0, int y0, int w, int h);

// Vertical concatenation, a on top. Widths must match.
Image vconcat(const Image& a, const Image& b);

// Area average over s x s blocks, rounded half-up. Dimensions must divide.
Image box_downsample(const Image& src, int s);

// Copies src pixels into dst with dst top-left at (x0, y0); clips to dst.
void paste(Image& dst, const Image& src, int x0, int y0);

// Samples out(x, y) = src(map.inverse()(x, y)) with bilinear interpolation;
// map takes input pixel coordinates to output pixel coordinates. Samples
// falling outside src use the border color.
Image warp_affine(const Image& src, const Affine2& map, int out_w, int out_h,
                  Color border = {114, 114, 114});

void draw_line(Image& img, Vec2 a, Vec2 b, Color color);
void draw_rect(Image& img, const Box& box, Color color);
void draw_cross(Image& img, Vec2 center, int arm, Color color);
void fill_rect(Image& img, int x0, int y0, int w, int h, Color color);

}  // namespace p3dvd
