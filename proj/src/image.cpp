#include "p3dvd/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace p3dvd {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool ends_with_ci(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    const char a = static_cast<char>(std::tolower(s[s.size() - suffix.size() + i]));
    if (a != suffix[i]) return false;
  }
  return true;
}

Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png read init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png decode failed: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(png_get_image_width(png, info)),
            static_cast<int>(png_get_image_height(png, info)));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png unexpected row size: " + path);
  }
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = &img.data[static_cast<std::size_t>(y) * img.width * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Image load_jpeg(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);

  jpeg_decompress_struct cinfo{};
  jpeg_error_mgr jerr{};
  cinfo.err = jpeg_std_error(&jerr);
  jerr.error_exit = [](j_common_ptr ci) {
    char msg[JMSG_LENGTH_MAX];
    (*ci->err->format_message)(ci, msg);
    throw std::runtime_error(std::string("jpeg decode failed: ") + msg);
  };
  jpeg_create_decompress(&cinfo);
  try {
    jpeg_stdio_src(&cinfo, fp.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    Image img(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = &img.data[static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3];
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
  } catch (...) {
    jpeg_destroy_decompress(&cinfo);
    throw;
  }
}

}  // namespace

Image load_image(const std::string& path) {
  if (ends_with_ci(path, ".png")) return load_png(path);
  if (ends_with_ci(path, ".jpg") || ends_with_ci(path, ".jpeg")) return load_jpeg(path);
  throw std::runtime_error("unsupported image format: " + path);
}

void save_png(const Image& img, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png write init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png encode failed: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&img.data[static_cast<std::size_t>(y) * img.width * 3]));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

Image crop(const Image& src, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > src.width || y0 + h > src.height)
    throw std::invalid_argument("crop: region outside image");
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    std::memcpy(&out.data[static_cast<std::size_t>(y) * w * 3],
                &src.data[(static_cast<std::size_t>(y0 + y) * src.width + x0) * 3],
                static_cast<std::size_t>(w) * 3);
  }
  return out;
}

Image vconcat(const Image& a, const Image& b) {
  if (a.width != b.width) throw std::invalid_argument("vconcat: width mismatch");
  Image out(a.width, a.height + b.height);
  std::memcpy(out.data.data(), a.data.data(), a.data.size());
  std::memcpy(out.data.data() + a.data.size(), b.data.data(), b.data.size());
  return out;
}

Image box_downsample(const Image& src, int s) {
  if (s <= 0 || src.width % s != 0 || src.height % s != 0)
    throw std::invalid_argument("box_downsample: size not divisible by scale");
  Image out(src.width / s, src.height / s);
  const unsigned block = static_cast<unsigned>(s) * static_cast<unsigned>(s);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        unsigned sum = 0;
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx) sum += src.at(x * s + dx, y * s + dy, c);
        out.at(x, y, c) = static_cast<std::uint8_t>((sum + block / 2) / block);
      }
    }
  }
  return out;
}

void paste(Image& dst, const Image& src, int x0, int y0) {
  const int xs = std::max(0, -x0), ys = std::max(0, -y0);
  const int xe = std::min(src.width, dst.width - x0);
  const int ye = std::min(src.height, dst.height - y0);
  for (int y = ys; y < ye; ++y) {
    std::memcpy(&dst.data[(static_cast<std::size_t>(y0 + y) * dst.width + x0 + xs) * 3],
                &src.data[(static_cast<std::size_t>(y) * src.width + xs) * 3],
                static_cast<std::size_t>(xe - xs) * 3);
  }
}

Image warp_affine(const Image& src, const Affine2& map, int out_w, int out_h, Color border) {
  const Affine2 inv = map.inverse();
  Image out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Vec2 p = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      const double fx = std::floor(p.x), fy = std::floor(p.y);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const double ax = p.x - fx, ay = p.y - fy;
      for (int c = 0; c < 3; ++c) {
        auto sample = [&](int sx, int sy) -> double {
          return src.contains(sx, sy) ? src.at(sx, sy, c) : border[c];
        };
        const double v = (1.0 - ax) * (1.0 - ay) * sample(x0, y0) +
                         ax * (1.0 - ay) * sample(x0 + 1, y0) +
                         (1.0 - ax) * ay * sample(x0, y0 + 1) +
                         ax * ay * sample(x0 + 1, y0 + 1);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

void draw_line(Image& img, Vec2 a, Vec2 b, Color color) {
  const double len = std::max(std::abs(b.x - a.x), std::abs(b.y - a.y));
  const int steps = std::max(1, static_cast<int>(std::ceil(len)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(a.x + (b.x - a.x) * t));
    const int y = static_cast<int>(std::lround(a.y + (b.y - a.y) * t));
    if (!img.contains(x, y)) continue;
    for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
  }
}

void draw_rect(Image& img, const Box& box, Color color) {
  const Vec2 tl{box.left(), box.top()}, tr{box.right(), box.top()};
  const Vec2 bl{box.left(), box.bottom()}, br{box.right(), box.bottom()};
  draw_line(img, tl, tr, color);
  draw_line(img, tr, br, color);
  draw_line(img, br, bl, color);
  draw_line(img, bl, tl, color);
}

void draw_cross(Image& img, Vec2 center, int arm, Color color) {
  draw_line(img, {center.x - arm, center.y}, {center.x + arm, center.y}, color);
  draw_line(img, {center.x, center.y - arm}, {center.x, center.y + arm}, color);
}

void fill_rect(Image& img, int x0, int y0, int w, int h, Color color) {
  for (int y = std::max(0, y0); y < std::min(img.height, y0 + h); ++y)
    for (int x = std::max(0, x0); x < std::min(img.width, x0 + w); ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
}

}  // namespace p3dvd
