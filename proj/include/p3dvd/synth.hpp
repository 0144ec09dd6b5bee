#pragma once

#include <cstdint>
#include <vector>

#include "p3dvd/image.hpp"
#include "p3dvd/p3dvr.hpp"
#include "p3dvd/rng.hpp"

namespace p3dvd {

// Pinhole camera, zero pitch/roll. Frame: x right, y down, z forward;
// ground plane at y = +height_above_ground.
struct Camera {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int image_width = 0;
  int image_height = 0;
  double height_above_ground = 1.4;  // meters

  static Camera default_camera();
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Cuboid vehicle standing on the ground plane. yaw = 0 heads straight away
// from the camera; positive yaw turns the heading toward image-left,
// matching the counterclockwise pose encoding. Axle positions are fractions
// of the length measured from the rear end.
struct GroundVehicle {
  double x = 0.0;  // meters, camera frame
  double z = 10.0;
  double yaw = 0.0;  // radians
  double length = 4.5;
  double width = 1.8;
  double height = 1.5;
  double rear_axle_frac = 0.2;
  double front_axle_frac = 0.8;
};

struct VisibilityFlags {
  FaceSide visible_flank = FaceSide::None;  // vehicle's Left or Right flank
  bool rear_visible = false;
  bool front_visible = false;
  bool wheels_in_image = false;
  bool fully_inside_image = false;
};

Vec2 project_point(const Camera& cam, const Vec3& p);

std::array<Vec3, 8> cuboid_corners(const Camera& cam, const GroundVehicle& v);

// Pose bin of the vehicle's yaw relative to the camera ray through its
// center, 45-degree sectors centered on multiples of 45 degrees.
PoseClass pose_bin(const GroundVehicle& v);

struct OracleLabel {
  P3DVR p3dvr;
  VisibilityFlags vis;
};

// Projects the vehicle and assembles the ground-truth P3DVR: BBox from the
// corner hull, pose from the relative yaw, r from the projected split edge
// (snapped to the 0/1 convention for cardinal poses), SPL from the wheel
// ground-contact points of the visible flank.
OracleLabel vehicle_to_p3dvr(const Camera& cam, const GroundVehicle& v);

struct SceneRanges {
  double z_min = 8.0, z_max = 110.0;
  // lateral position as a fraction of the half image width back-projected
  // to the vehicle's depth
  double x_frac_min = -0.7, x_frac_max = 0.7;
  double length_min = 3.6, length_max = 5.4;
  double width_min = 1.6, width_max = 2.1;
  double height_min = 1.3, height_max = 2.0;
  double max_pair_iou = 0.3;  // reject heavily overlapping projections
  bool require_fully_inside = true;
  int max_tries_per_vehicle = 200;
};

struct Scene {
  std::vector<GroundVehicle> vehicles;
  std::vector<OracleLabel> labels;
};

Scene gen_scene(std::uint64_t seed, int n_vehicles, const Camera& cam,
                const SceneRanges& ranges = {});

// Wireframe render of the cuboids plus P3DVR overlays (BBox, split line,
// faces, SPL, wheel midpoint).
Image render_scene(const Camera& cam, const Scene& scene);

void draw_p3dvr_overlay(Image& img, const P3DVR& p);

}  // namespace p3dvd
