#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "p3dvd/dual.hpp"
#include "p3dvd/geometry.hpp"

namespace p3dvd {

// Vehicle heading from the camera's viewpoint, quantized into 8 bins
// counterclockwise. Bin 0 is heading straight away from the camera.
struct PoseClass {
  int value = 0;

  bool is_cardinal() const { return value % 2 == 0; }
  bool is_diagonal() const { return value % 2 == 1; }
  PoseClass mirrored() const { return {(8 - value) % 8}; }

  bool operator==(const PoseClass&) const = default;
};

enum class FaceSide { None, Left, Right };

// Which side of the split line holds the vehicle's side face (the face with
// both same-side wheels). Cardinal poses 0/4 face directly away/toward the
// camera and expose no side face; for the side-on poses 2/6 the side face
// spans the whole box.
FaceSide side_face_side(PoseClass pose);

// Axis-aligned box extended with the split ratio r and the 8-way pose class.
// The split line at x = left + r*w separates the side face from the end face.
struct ExtendedBBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double r = 0.0;
  PoseClass pose;

  Box box() const { return {cx, cy, w, h}; }
};

// Image line through the same-side front/rear wheel ground-contact points,
// as midpoint + inclination. When present is false the fields are advisory
// only (e.g. raw decoder output) and are excluded from SPL losses/metrics.
struct SideProjectionLine {
  double pwc_x = 0.0;
  double pwc_y = 0.0;
  double theta_deg = 0.0;
  bool present = false;
};

struct P3DVR {
  ExtendedBBox eb;
  SideProjectionLine spl;
};

// The two trapezoids a P3DVR induces on the image: the vehicle side face and
// the end face (front or rear). side_face is empty when the pose exposes a
// single face. Points are ordered bottom-at-split, bottom-at-outer,
// top-at-outer, top-at-split.
struct FacePair {
  std::optional<std::array<Vec2, 4>> side_face;
  std::array<Vec2, 4> end_face{};
  bool side_on_left = false;
};

enum class Violation {
  NonFiniteField,
  WidthNotPositive,
  HeightNotPositive,
  RatioOutOfRange,
  PoseOutOfRange,
  CardinalRatioNotBoundary,
  ThetaOutOfRange,
  PwcOutsideBox,
};

std::string to_string(Violation v);

// x coordinate of the split line: cx - w/2 + r*w.
double split_line_x(const ExtendedBBox& eb);

// Perpendicular distance from the BBox center to the SPL. Requires the SPL
// to be present.
double h_prime(const P3DVR& p);

// Diagonal of the side-face trapezoid, from its bottom corner on the split
// line to its top corner on the outer BBox edge. Requires an SPL and a side
// face.
double w_prime(const P3DVR& p);

// Constructs the side/end face trapezoids. Without an SPL or a side face the
// P3DVR degenerates to a single rectangle: end_face = BBox, side_face empty.
// Rejects SPLs within kDegenerateThetaEpsDeg of vertical.
FacePair derive_faces(const P3DVR& p);

inline constexpr double kDegenerateThetaEpsDeg = 1e-3;

// Empty iff all type invariants hold.
std::vector<Violation> validate(const P3DVR& p);

// Wraps theta into (-90, 90] and snaps r of cardinal poses to the labeling
// convention: poses 0/2/4 use r = 1, pose 6 uses r = 0 (the side face of the
// side-on poses spans the whole box; which endpoint follows from the side
// table). Idempotent.
P3DVR canonicalize(const P3DVR& p);

namespace detail {

// Scalar-generic kernels shared by the geometry API (T = double) and the
// loss gradients (T = Dual). theta is in radians here.

template <typename T>
T split_line_x_k(const T& cx, const T& w, const T& r) {
  return cx - 0.5 * w + r * w;
}

// Distance from (px, py) to the line through (lx, ly) with direction angle
// theta_rad.
template <typename T>
T point_line_distance_k(const T& px, const T& py, const T& lx, const T& ly,
                        const T& theta_rad) {
  using p3dvd::abs;  // ADL picks Dual overloads
  using p3dvd::cos;
  using p3dvd::sin;
  return abs(cos(theta_rad) * (py - ly) - sin(theta_rad) * (px - lx));
}

// Side-face diagonal corners: bottom corner on the split line (on the SPL)
// and top corner on the outer BBox edge.
template <typename T>
struct SideDiagonal {
  T split_x, split_bottom_y;  // bottom corner at the split line
  T outer_x, outer_top_y;     // top corner at the outer edge
};

template <typename T>
SideDiagonal<T> side_diagonal_k(const T& cx, const T& cy, const T& w, const T& h,
                                const T& r, bool side_on_left, const T& pwc_x,
                                const T& pwc_y, const T& theta_rad) {
  using p3dvd::tan;
  SideDiagonal<T> sd;
  sd.split_x = split_line_x_k(cx, w, r);
  sd.outer_x = side_on_left ? cx - 0.5 * w : cx + 0.5 * w;
  sd.split_bottom_y = pwc_y + tan(theta_rad) * (sd.split_x - pwc_x);
  sd.outer_top_y = cy - 0.5 * h;
  return sd;
}

template <typename T>
T w_prime_k(const T& cx, const T& cy, const T& w, const T& h, const T& r,
            bool side_on_left, const T& pwc_x, const T& pwc_y, const T& theta_rad) {
  using p3dvd::hypot;
  const SideDiagonal<T> sd =
      side_diagonal_k(cx, cy, w, h, r, side_on_left, pwc_x, pwc_y, theta_rad);
  return hypot(sd.outer_x - sd.split_x, sd.outer_top_y - sd.split_bottom_y);
}

}  // namespace detail

}  // namespace p3dvd
