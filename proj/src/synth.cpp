#include "p3dvd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace p3dvd {

namespace {

struct Plan {  // plan-view (x, z) helpers
  double x = 0.0, z = 0.0;
  Plan operator+(const Plan& o) const { return {x + o.x, z + o.z}; }
  Plan operator-(const Plan& o) const { return {x - o.x, z - o.z}; }
  Plan operator*(double s) const { return {x * s, z * s}; }
  double dot(const Plan& o) const { return x * o.x + z * o.z; }
};

Plan heading_of(double yaw) { return {-std::sin(yaw), std::cos(yaw)}; }

// Vehicle's right-hand direction: for a vehicle heading away, its right side
// is at larger x.
Plan right_of(const Plan& t) { return {t.z, -t.x}; }

double wrap_angle(double a) {
  // odd-symmetric wrap into (-pi, pi]
  double w = std::remainder(a, 2.0 * kPi);
  return w;
}

}  // namespace

Camera Camera::default_camera() {
  // 3840x2160 with a 120-degree horizontal FOV; principal point centered on
  // the pixel grid so mirroring about the optical axis equals an hflip.
  Camera cam;
  cam.image_width = 3840;
  cam.image_height = 2160;
  cam.fx = (3840.0 / 2.0) / std::tan(deg_to_rad(120.0 / 2.0));
  cam.fy = cam.fx;
  cam.cx = (3840.0 - 1.0) / 2.0;
  cam.cy = (2160.0 - 1.0) / 2.0;
  cam.height_above_ground = 1.4;
  return cam;
}

Vec2 project_point(const Camera& cam, const Vec3& p) {
  if (!(p.z > 0.0)) throw std::invalid_argument("project_point: z <= 0");
  return {cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy};
}

std::array<Vec3, 8> cuboid_corners(const Camera& cam, const GroundVehicle& v) {
  const Plan t = heading_of(v.yaw);
  const Plan r = right_of(t);
  const Plan c{v.x, v.z};
  const double yg = cam.height_above_ground;
  const double yt = yg - v.height;
  std::array<Vec3, 8> out;
  int i = 0;
  for (double sl : {-0.5, 0.5}) {
    for (double sw : {-0.5, 0.5}) {
      const Plan p = c + t * (sl * v.length) + r * (sw * v.width);
      out[i++] = {p.x, yg, p.z};
      out[i++] = {p.x, yt, p.z};
    }
  }
  return out;
}

PoseClass pose_bin(const GroundVehicle& v) {
  // yaw of the camera ray through the vehicle center, in the same
  // heading-away convention
  const double azimuth = std::atan2(-v.x, v.z);
  const double rel = wrap_angle(v.yaw - azimuth);
  int bin = static_cast<int>(std::lround(rel / (kPi / 4.0)));
  bin %= 8;
  if (bin < 0) bin += 8;
  return {bin};
}

OracleLabel vehicle_to_p3dvr(const Camera& cam, const GroundVehicle& v) {
  const auto corners = cuboid_corners(cam, v);
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Vec3& c : corners) {
    const Vec2 q = project_point(cam, c);
    lo_x = std::min(lo_x, q.x);
    hi_x = std::max(hi_x, q.x);
    lo_y = std::min(lo_y, q.y);
    hi_y = std::max(hi_y, q.y);
  }

  OracleLabel out;
  out.p3dvr.eb.cx = 0.5 * (lo_x + hi_x);
  out.p3dvr.eb.cy = 0.5 * (lo_y + hi_y);
  out.p3dvr.eb.w = hi_x - lo_x;
  out.p3dvr.eb.h = hi_y - lo_y;
  out.p3dvr.eb.pose = pose_bin(v);

  const Plan t = heading_of(v.yaw);
  const Plan rdir = right_of(t);
  const Plan c{v.x, v.z};

  // face visibility: outward normal against the ray to the face center
  auto face_visible = [&](const Plan& normal, const Plan& center) {
    return normal.dot(center) < 0.0;
  };
  const bool right_vis = face_visible(rdir, c + rdir * (0.5 * v.width));
  const bool left_vis = face_visible(rdir * -1.0, c - rdir * (0.5 * v.width));
  const bool front_vis = face_visible(t, c + t * (0.5 * v.length));
  const bool rear_vis = face_visible(t * -1.0, c - t * (0.5 * v.length));
  out.vis.front_visible = front_vis;
  out.vis.rear_visible = rear_vis;
  out.vis.visible_flank = right_vis  ? FaceSide::Right
                          : left_vis ? FaceSide::Left
                                     : FaceSide::None;

  // split ratio
  const PoseClass pose = out.p3dvr.eb.pose;
  if (pose.is_cardinal()) {
    out.p3dvr.eb.r = (pose.value == 6) ? 0.0 : 1.0;
  } else {
    // shared vertical edge between the visible flank and the visible end
    // face; vertical cuboid edges project to vertical image lines
    const double sl = (front_vis ? 0.5 : -0.5) * v.length;
    const double sw = (right_vis ? 0.5 : -0.5) * v.width;
    const Plan edge = c + t * sl + rdir * sw;
    const Vec2 q = project_point(cam, {edge.x, cam.height_above_ground, edge.z});
    out.p3dvr.eb.r = std::clamp((q.x - lo_x) / (hi_x - lo_x), 0.0, 1.0);
  }

  // wheel ground-contact points on the visible flank
  out.p3dvr.spl.present = false;
  if (out.vis.visible_flank != FaceSide::None) {
    const double sw = (out.vis.visible_flank == FaceSide::Right ? 0.5 : -0.5) * v.width;
    const Plan rear_corner = c - t * (0.5 * v.length) + rdir * sw;
    const Plan wheel_r = rear_corner + t * (v.rear_axle_frac * v.length);
    const Plan wheel_f = rear_corner + t * (v.front_axle_frac * v.length);
    const Vec2 qr = project_point(cam, {wheel_r.x, cam.height_above_ground, wheel_r.z});
    const Vec2 qf = project_point(cam, {wheel_f.x, cam.height_above_ground, wheel_f.z});
    const bool in_image = qr.x >= 0.0 && qr.x < cam.image_width && qr.y >= 0.0 &&
                          qr.y < cam.image_height && qf.x >= 0.0 &&
                          qf.x < cam.image_width && qf.y >= 0.0 && qf.y < cam.image_height;
    out.vis.wheels_in_image = in_image;
    const Vec2 d = qf - qr;
    if (in_image && (std::abs(d.x) > 1e-12 || std::abs(d.y) > 1e-12)) {
      out.p3dvr.spl.present = true;
      out.p3dvr.spl.pwc_x = 0.5 * (qr.x + qf.x);
      out.p3dvr.spl.pwc_y = 0.5 * (qr.y + qf.y);
      out.p3dvr.spl.theta_deg = canonicalize_theta_deg(rad_to_deg(std::atan2(d.y, d.x)));
    }
  }
  if (!out.p3dvr.spl.present) {
    // advisory placeholders matching the network's theta_n = -1 convention
    out.p3dvr.spl.pwc_x = out.p3dvr.eb.cx;
    out.p3dvr.spl.pwc_y = out.p3dvr.eb.cy + 0.5 * out.p3dvr.eb.h;
    out.p3dvr.spl.theta_deg = -90.0;
  }

  out.vis.fully_inside_image = lo_x >= 0.0 && lo_y >= 0.0 &&
                               hi_x < cam.image_width && hi_y < cam.image_height;
  return out;
}

Scene gen_scene(std::uint64_t seed, int n_vehicles, const Camera& cam,
                const SceneRanges& ranges) {
  Rng rng(seed);
  Scene scene;
  for (int i = 0; i < n_vehicles; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < ranges.max_tries_per_vehicle && !placed; ++attempt) {
      GroundVehicle v;
      v.z = rng.uniform(ranges.z_min, ranges.z_max);
      const double half_span = v.z * (cam.image_width / 2.0) / cam.fx;
      v.x = rng.uniform(ranges.x_frac_min, ranges.x_frac_max) * half_span;
      v.yaw = rng.uniform(-kPi, kPi);
      v.length = rng.uniform(ranges.length_min, ranges.length_max);
      v.width = rng.uniform(ranges.width_min, ranges.width_max);
      v.height = rng.uniform(ranges.height_min, ranges.height_max);

      OracleLabel label = vehicle_to_p3dvr(cam, v);
      if (ranges.require_fully_inside && !label.vis.fully_inside_image) continue;
      bool overlaps = false;
      for (const OracleLabel& other : scene.labels) {
        if (iou(label.p3dvr.eb.box(), other.p3dvr.eb.box()) > ranges.max_pair_iou) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      scene.vehicles.push_back(v);
      scene.labels.push_back(label);
      placed = true;
    }
  }
  return scene;
}

void draw_p3dvr_overlay(Image& img, const P3DVR& p) {
  const Color box_color{80, 200, 255};
  const Color side_color{255, 80, 80};
  const Color end_color{255, 220, 60};
  const Color spl_color{80, 255, 120};

  draw_rect(img, p.eb.box(), box_color);
  const FacePair faces = [&] {
    try {
      return derive_faces(p);
    } catch (const std::exception&) {
      return FacePair{};
    }
  }();
  auto draw_quad = [&](const std::array<Vec2, 4>& q, Color c) {
    for (int i = 0; i < 4; ++i) draw_line(img, q[i], q[(i + 1) % 4], c);
  };
  if (faces.side_face) draw_quad(*faces.side_face, side_color);
  draw_quad(faces.end_face, end_color);

  if (p.spl.present) {
    const double rad = deg_to_rad(p.spl.theta_deg);
    const Vec2 d{std::cos(rad), std::sin(rad)};
    const double half = 0.5 * p.eb.w;
    const Vec2 pwc{p.spl.pwc_x, p.spl.pwc_y};
    draw_line(img, pwc - d * half, pwc + d * half, spl_color);
    draw_cross(img, pwc, 4, spl_color);
  }
}

Image render_scene(const Camera& cam, const Scene& scene) {
  Image img(cam.image_width, cam.image_height, 24);
  const Color wire{160, 160, 160};
  static constexpr int kEdges[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7},
                                        {0, 2}, {1, 3}, {4, 6}, {5, 7},
                                        {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (const GroundVehicle& v : scene.vehicles) {
    const auto corners = cuboid_corners(cam, v);
    for (const auto& e : kEdges) {
      draw_line(img, project_point(cam, corners[e[0]]), project_point(cam, corners[e[1]]), wire);
    }
  }
  for (const OracleLabel& label : scene.labels) draw_p3dvr_overlay(img, label.p3dvr);
  return img;
}

}  // namespace p3dvd
