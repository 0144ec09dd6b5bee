#include "p3dvd/p3dvr.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "p3dvd/rng.hpp"

using namespace p3dvd;

namespace {

P3DVR base_p3dvr() {
  P3DVR p;
  p.eb = {100.0, 100.0, 50.0, 40.0, 0.4, {1}};
  p.spl = {95.0, 115.0, 10.0, true};
  return p;
}

}  // namespace

TEST_SUITE("p3dvr") {

TEST_CASE("split_line_x definition and boundaries") {
  ExtendedBBox eb{100.0, 0.0, 50.0, 10.0, 0.4, {1}};
  CHECK(split_line_x(eb) == doctest::Approx(95.0));
  eb.r = 0.0;
  CHECK(split_line_x(eb) == doctest::Approx(75.0));
  eb.r = 1.0;
  CHECK(split_line_x(eb) == doctest::Approx(125.0));
}

TEST_CASE("split_line_x is monotone in r and translation-equivariant") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    ExtendedBBox eb{rng.uniform(-100, 100), 0.0, rng.uniform(1.0, 80.0), 10.0,
                    rng.uniform(0.0, 0.5), {1}};
    ExtendedBBox wider = eb;
    wider.r = eb.r + rng.uniform(0.0, 0.5);
    CHECK(split_line_x(wider) >= split_line_x(eb));
    const double dx = rng.uniform(-50.0, 50.0);
    ExtendedBBox shifted = eb;
    shifted.cx += dx;
    CHECK(split_line_x(shifted) == doctest::Approx(split_line_x(eb) + dx).epsilon(1e-12));
  }
}

TEST_CASE("side_face_side table") {
  // projection-derived: see the synth-oracle suite for the derivation
  CHECK(side_face_side({0}) == FaceSide::None);
  CHECK(side_face_side({4}) == FaceSide::None);
  CHECK(side_face_side({1}) == FaceSide::Left);
  CHECK(side_face_side({2}) == FaceSide::Left);
  CHECK(side_face_side({5}) == FaceSide::Left);
  CHECK(side_face_side({3}) == FaceSide::Right);
  CHECK(side_face_side({6}) == FaceSide::Right);
  CHECK(side_face_side({7}) == FaceSide::Right);
}

TEST_CASE("h_prime examples") {
  P3DVR p = base_p3dvr();
  SUBCASE("horizontal line below the center") {
    p.spl = {100.0, 120.0, 0.0, true};
    CHECK(h_prime(p) == doctest::Approx(20.0));
  }
  SUBCASE("center on the line") {
    p.spl = {100.0, 100.0, 0.0, true};
    CHECK(h_prime(p) == doctest::Approx(0.0));
  }
  SUBCASE("45-degree line") {
    p.eb.cx = 0.0;
    p.eb.cy = 0.0;
    p.spl = {10.0, 0.0, 45.0, true};
    CHECK(h_prime(p) == doctest::Approx(10.0 * std::sin(deg_to_rad(45.0))).epsilon(1e-9));
    // dense sampling on the line: the minimum point distance matches
    double best = 1e300;
    for (int i = -4000; i <= 4000; ++i) {
      const double t = i * 0.01;
      const double lx = 10.0 + t * std::cos(deg_to_rad(45.0));
      const double ly = t * std::sin(deg_to_rad(45.0));
      best = std::min(best, std::hypot(lx, ly));
    }
    CHECK(h_prime(p) == doctest::Approx(best).epsilon(1e-4));
  }
  SUBCASE("absent SPL rejected") {
    p.spl.present = false;
    CHECK_THROWS_AS(h_prime(p), std::invalid_argument);
  }
}

TEST_CASE("h_prime invariance under translation and scaling") {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    P3DVR p = oracles::random_p3dvr(rng);
    const double h0 = h_prime(p);
    P3DVR shifted = p;
    const double dx = rng.uniform(-30, 30), dy = rng.uniform(-30, 30);
    shifted.eb.cx += dx;
    shifted.eb.cy += dy;
    shifted.spl.pwc_x += dx;
    shifted.spl.pwc_y += dy;
    CHECK(h_prime(shifted) == doctest::Approx(h0).epsilon(1e-9));

    P3DVR scaled = p;
    const double s = rng.uniform(0.5, 3.0);
    scaled.eb.cx *= s;
    scaled.eb.cy *= s;
    scaled.eb.w *= s;
    scaled.eb.h *= s;
    scaled.spl.pwc_x *= s;
    scaled.spl.pwc_y *= s;
    CHECK(h_prime(scaled) == doctest::Approx(h0 * s).epsilon(1e-9));
  }
}

TEST_CASE("w_prime examples") {
  SUBCASE("3-4-5 rectangle diagonal") {
    // pose 2: side face = whole box, split on the right edge, flat SPL
    P3DVR p;
    p.eb = {15.0, 80.0, 30.0, 40.0, 1.0, {2}};
    p.spl = {15.0, 100.0, 0.0, true};
    CHECK(w_prime(p) == doctest::Approx(50.0));
  }
  SUBCASE("zero-width side face degenerates to the vertical edge") {
    P3DVR p;
    p.eb = {15.0, 80.0, 30.0, 40.0, 0.0, {1}};  // split on the left = outer edge
    p.spl = {15.0, 100.0, 0.0, true};
    CHECK(w_prime(p) == doctest::Approx(100.0 - 60.0));
  }
  SUBCASE("no side face rejected") {
    P3DVR p = base_p3dvr();
    p.eb.pose = {0};
    p.eb.r = 1.0;
    CHECK_THROWS_AS(w_prime(p), std::invalid_argument);
  }
}

TEST_CASE("w_prime equals the corner distance from derive_faces") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const P3DVR p = oracles::random_p3dvr(rng);
    const FacePair faces = derive_faces(p);
    REQUIRE(faces.side_face.has_value());
    const Vec2 bottom_split = (*faces.side_face)[0];
    const Vec2 top_outer = (*faces.side_face)[2];
    CHECK(w_prime(p) ==
          doctest::Approx((top_outer - bottom_split).norm()).epsilon(1e-12));
  }
}

TEST_CASE("derive_faces flat-SPL halves") {
  P3DVR p;
  p.eb = {50.0, 50.0, 40.0, 20.0, 0.5, {1}};  // split at x = 50
  p.spl = {50.0, 60.0, 0.0, true};            // SPL along the bottom edge
  const FacePair faces = derive_faces(p);
  REQUIRE(faces.side_face.has_value());
  CHECK(faces.side_on_left);
  const auto& side = *faces.side_face;
  CHECK(side[0].x == doctest::Approx(50.0));
  CHECK(side[0].y == doctest::Approx(60.0));
  CHECK(side[1].x == doctest::Approx(30.0));
  CHECK(side[1].y == doctest::Approx(60.0));
  CHECK(side[2].x == doctest::Approx(30.0));
  CHECK(side[2].y == doctest::Approx(40.0));
  CHECK(side[3].x == doctest::Approx(50.0));
  CHECK(side[3].y == doctest::Approx(40.0));
  const auto& end = faces.end_face;
  CHECK(end[1].x == doctest::Approx(70.0));
  CHECK(end[1].y == doctest::Approx(60.0));
  CHECK(end[2].x == doctest::Approx(70.0));
  CHECK(end[2].y == doctest::Approx(40.0));
}

TEST_CASE("derive_faces single-face degeneration") {
  P3DVR p;
  p.eb = {50.0, 50.0, 40.0, 20.0, 1.0, {0}};
  p.spl.present = false;
  const FacePair faces = derive_faces(p);
  CHECK(!faces.side_face.has_value());
  CHECK(faces.end_face[0].x == doctest::Approx(30.0));
  CHECK(faces.end_face[1].x == doctest::Approx(70.0));
}

TEST_CASE("derive_faces rejects a near-vertical SPL") {
  P3DVR p = base_p3dvr();
  p.spl.theta_deg = 90.0;
  CHECK_THROWS_AS(derive_faces(p), std::invalid_argument);
}

TEST_CASE("derive_faces trapezoids tile the box x-extent") {
  Rng rng(14);
  for (int i = 0; i < 500; ++i) {
    const P3DVR p = oracles::random_p3dvr(rng);
    const FacePair faces = derive_faces(p);
    REQUIRE(faces.side_face.has_value());
    const double split = split_line_x(p.eb);
    // shared vertical edge on the split line
    CHECK(std::abs((*faces.side_face)[0].x - split) < 1e-9);
    CHECK(std::abs((*faces.side_face)[3].x - split) < 1e-9);
    CHECK(std::abs(faces.end_face[0].x - split) < 1e-9);
    // outer edges on the box edges
    const double lo = std::min((*faces.side_face)[1].x, faces.end_face[1].x);
    const double hi = std::max((*faces.side_face)[1].x, faces.end_face[1].x);
    CHECK(lo == doctest::Approx(p.eb.box().left()).epsilon(1e-12));
    CHECK(hi == doctest::Approx(p.eb.box().right()).epsilon(1e-12));
  }
}

TEST_CASE("validate") {
  P3DVR good = base_p3dvr();
  CHECK(validate(good).empty());

  P3DVR bad_r = good;
  bad_r.eb.r = 1.2;
  auto v = validate(bad_r);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == Violation::RatioOutOfRange);

  P3DVR bad_pwc = good;
  bad_pwc.spl.pwc_x = 500.0;
  v = validate(bad_pwc);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == Violation::PwcOutsideBox);

  P3DVR absent_pwc = bad_pwc;
  absent_pwc.spl.present = false;  // advisory fields are not checked
  CHECK(validate(absent_pwc).empty());

  P3DVR bad_w = good;
  bad_w.eb.w = 0.0;
  v = validate(bad_w);
  CHECK(std::count(v.begin(), v.end(), Violation::WidthNotPositive) == 1);

  P3DVR cardinal = good;
  cardinal.eb.pose = {4};
  cardinal.eb.r = 0.5;
  v = validate(cardinal);
  CHECK(std::count(v.begin(), v.end(), Violation::CardinalRatioNotBoundary) == 1);

  P3DVR nan_field = good;
  nan_field.eb.cx = std::nan("");
  v = validate(nan_field);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == Violation::NonFiniteField);
}

TEST_CASE("canonicalization idempotence and 180-degree identification") {
  Rng rng(15);
  for (int i = 0; i < 300; ++i) {
    const double theta = rng.uniform(-720.0, 720.0);
    const double once = canonicalize_theta_deg(theta);
    CHECK(once > -90.0);
    CHECK(once <= 90.0);
    CHECK(canonicalize_theta_deg(once) == doctest::Approx(once).epsilon(1e-12));
    CHECK(canonicalize_theta_deg(theta + 180.0) == doctest::Approx(once).epsilon(1e-9));
    CHECK(canonicalize_theta_deg(theta - 180.0) == doctest::Approx(once).epsilon(1e-9));
  }

  P3DVR p = base_p3dvr();
  p.eb.pose = {0};
  p.eb.r = 0.0;  // the flip image of the pose-0 convention
  const P3DVR canon = canonicalize(p);
  CHECK(canon.eb.r == 1.0);
  P3DVR q = base_p3dvr();
  q.eb.pose = {6};
  q.eb.r = 1.0;
  CHECK(canonicalize(q).eb.r == 0.0);
}

}  // TEST_SUITE
