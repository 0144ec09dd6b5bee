#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace p3dvd {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// 2x2 matrix, row-major.
struct Mat2 {
  double a = 1.0, b = 0.0;
  double c = 0.0, d = 1.0;

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }

  Vec2 apply(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }

  Mat2 transposed() const { return {a, c, b, d}; }

  Mat2 inverse() const {
    const double dt = det();
    if (dt == 0.0) throw std::invalid_argument("Mat2::inverse: singular matrix");
    return {d / dt, -b / dt, -c / dt, a / dt};
  }

  static Mat2 rotation(double rad) {
    const double cs = std::cos(rad), sn = std::sin(rad);
    return {cs, -sn, sn, cs};
  }

  static Mat2 diagonal(double dx, double dy) { return {dx, 0.0, 0.0, dy}; }

  // Eigenvalues of a symmetric matrix, ascending.
  std::array<double, 2> symmetric_eigenvalues() const {
    const double mean = 0.5 * (a + d);
    const double disc = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
    return {mean - disc, mean + disc};
  }
};

// Affine map p -> m*p + t on image coordinates.
struct Affine2 {
  Mat2 m;
  Vec2 t;

  Vec2 apply(const Vec2& p) const { return m.apply(p) + t; }

  // this ∘ other: apply other first.
  Affine2 compose(const Affine2& other) const {
    return {m * other.m, m.apply(other.t) + t};
  }

  Affine2 inverse() const {
    const Mat2 mi = m.inverse();
    return {mi, mi.apply(t) * -1.0};
  }

  static Affine2 identity() { return {}; }
  static Affine2 translation(double dx, double dy) { return {Mat2{}, {dx, dy}}; }
  static Affine2 scaling(double sx, double sy) { return {Mat2::diagonal(sx, sy), {}}; }
  // x' = x + kx*y, y' = ky*x + y.
  static Affine2 shearing(double kx, double ky) { return {Mat2{1.0, kx, ky, 1.0}, {}}; }
  // Mirror about the pixel-center axis of an image of the given width: x' = (w-1) - x.
  static Affine2 hflip(double image_width) {
    return {Mat2{-1.0, 0.0, 0.0, 1.0}, {image_width - 1.0, 0.0}};
  }
};

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Wraps a line inclination in degrees into (-90, 90]. A line's direction is
// defined modulo 180 degrees.
inline double canonicalize_theta_deg(double deg) {
  double t = std::fmod(deg, 180.0);
  if (t <= -90.0) t += 180.0;
  if (t > 90.0) t -= 180.0;
  return t;
}

// Axis-aligned box given by center and size. Width/height in pixels.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double right() const { return cx + 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  static Box from_corners(double x0, double y0, double x1, double y1) {
    return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
  }
};

inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace p3dvd
