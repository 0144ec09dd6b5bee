#include "p3dvd/p3dvr.hpp"

#include <cmath>
#include <stdexcept>

namespace p3dvd {

FaceSide side_face_side(PoseClass pose) {
  // Derived from projecting cuboids at each pose bin and checking which
  // partition of the BBox the wheel-bearing flank lands in: rear-visible
  // diagonals (1, 7) put the flank on the heading's lateral side, front-
  // visible diagonals (3, 5) on the opposite side. 2/6 are the side-on
  // conventions.
  switch (pose.value) {
    case 1:
    case 2:
    case 5:
      return FaceSide::Left;
    case 3:
    case 6:
    case 7:
      return FaceSide::Right;
    case 0:
    case 4:
      return FaceSide::None;
    default:
      throw std::invalid_argument("side_face_side: pose out of range");
  }
}

std::string to_string(Violation v) {
  switch (v) {
    case Violation::NonFiniteField: return "NonFiniteField";
    case Violation::WidthNotPositive: return "WidthNotPositive";
    case Violation::HeightNotPositive: return "HeightNotPositive";
    case Violation::RatioOutOfRange: return "RatioOutOfRange";
    case Violation::PoseOutOfRange: return "PoseOutOfRange";
    case Violation::CardinalRatioNotBoundary: return "CardinalRatioNotBoundary";
    case Violation::ThetaOutOfRange: return "ThetaOutOfRange";
    case Violation::PwcOutsideBox: return "PwcOutsideBox";
  }
  return "Unknown";
}

double split_line_x(const ExtendedBBox& eb) {
  return detail::split_line_x_k(eb.cx, eb.w, eb.r);
}

double h_prime(const P3DVR& p) {
  if (!p.spl.present) throw std::invalid_argument("h_prime: SPL absent");
  return detail::point_line_distance_k(p.eb.cx, p.eb.cy, p.spl.pwc_x, p.spl.pwc_y,
                                       deg_to_rad(p.spl.theta_deg));
}

double w_prime(const P3DVR& p) {
  if (!p.spl.present) throw std::invalid_argument("w_prime: SPL absent");
  const FaceSide side = side_face_side(p.eb.pose);
  if (side == FaceSide::None) throw std::invalid_argument("w_prime: no side face");
  return detail::w_prime_k(p.eb.cx, p.eb.cy, p.eb.w, p.eb.h, p.eb.r,
                           side == FaceSide::Left, p.spl.pwc_x, p.spl.pwc_y,
                           deg_to_rad(p.spl.theta_deg));
}

FacePair derive_faces(const P3DVR& p) {
  const ExtendedBBox& eb = p.eb;
  const FaceSide side = side_face_side(eb.pose);
  FacePair out;

  if (!p.spl.present || side == FaceSide::None) {
    out.end_face = {Vec2{eb.box().left(), eb.box().bottom()},
                    Vec2{eb.box().right(), eb.box().bottom()},
                    Vec2{eb.box().right(), eb.box().top()},
                    Vec2{eb.box().left(), eb.box().top()}};
    out.side_on_left = false;
    return out;
  }

  if (90.0 - std::abs(canonicalize_theta_deg(p.spl.theta_deg)) < kDegenerateThetaEpsDeg)
    throw std::invalid_argument("derive_faces: SPL nearly vertical");

  out.side_on_left = (side == FaceSide::Left);
  const double theta = deg_to_rad(p.spl.theta_deg);
  const auto sd = detail::side_diagonal_k(eb.cx, eb.cy, eb.w, eb.h, eb.r,
                                          out.side_on_left, p.spl.pwc_x,
                                          p.spl.pwc_y, theta);
  const double slope = std::tan(theta);
  const double outer_bottom_y = p.spl.pwc_y + slope * (sd.outer_x - p.spl.pwc_x);
  // side-face top edge: parallel to the SPL through the outer-top corner
  const double split_top_y = sd.outer_top_y + slope * (sd.split_x - sd.outer_x);

  out.side_face = {Vec2{sd.split_x, sd.split_bottom_y},
                   Vec2{sd.outer_x, outer_bottom_y},
                   Vec2{sd.outer_x, sd.outer_top_y},
                   Vec2{sd.split_x, split_top_y}};

  const double end_x = out.side_on_left ? eb.box().right() : eb.box().left();
  out.end_face = {Vec2{sd.split_x, sd.split_bottom_y},
                  Vec2{end_x, eb.box().bottom()},
                  Vec2{end_x, eb.box().top()},
                  Vec2{sd.split_x, split_top_y}};
  return out;
}

namespace {

bool all_finite(const P3DVR& p) {
  return std::isfinite(p.eb.cx) && std::isfinite(p.eb.cy) && std::isfinite(p.eb.w) &&
         std::isfinite(p.eb.h) && std::isfinite(p.eb.r) && std::isfinite(p.spl.pwc_x) &&
         std::isfinite(p.spl.pwc_y) && std::isfinite(p.spl.theta_deg);
}

}  // namespace

std::vector<Violation> validate(const P3DVR& p) {
  std::vector<Violation> out;
  if (!all_finite(p)) {
    out.push_back(Violation::NonFiniteField);
    return out;
  }
  if (!(p.eb.w > 0.0)) out.push_back(Violation::WidthNotPositive);
  if (!(p.eb.h > 0.0)) out.push_back(Violation::HeightNotPositive);
  if (p.eb.r < 0.0 || p.eb.r > 1.0) out.push_back(Violation::RatioOutOfRange);
  if (p.eb.pose.value < 0 || p.eb.pose.value > 7) out.push_back(Violation::PoseOutOfRange);
  else if (p.eb.pose.is_cardinal() && p.eb.r >= 0.0 && p.eb.r <= 1.0 &&
           std::min(p.eb.r, 1.0 - p.eb.r) > 1e-9)
    out.push_back(Violation::CardinalRatioNotBoundary);
  // -90 is tolerated as the pre-canonical sentinel endpoint (theta_n = -1).
  if (p.spl.theta_deg < -90.0 || p.spl.theta_deg > 90.0)
    out.push_back(Violation::ThetaOutOfRange);
  if (p.spl.present && p.eb.w > 0.0 &&
      (p.spl.pwc_x < p.eb.box().left() || p.spl.pwc_x > p.eb.box().right()))
    out.push_back(Violation::PwcOutsideBox);
  return out;
}

P3DVR canonicalize(const P3DVR& p) {
  P3DVR out = p;
  out.spl.theta_deg = canonicalize_theta_deg(p.spl.theta_deg);
  if (p.eb.pose.is_cardinal()) out.eb.r = (p.eb.pose.value == 6) ? 0.0 : 1.0;
  return out;
}

}  // namespace p3dvd
