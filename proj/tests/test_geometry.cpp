#include "retriever/geometry.hpp"

#include <doctest.h>

using namespace retriever;

TEST_CASE("aabb basics") {
  const Aabb b{{0, 0, 0}, {1, 2, 3}};
  CHECK(b.volume() == doctest::Approx(6.0));
  CHECK(b.footprint_area() == doctest::Approx(2.0));
  CHECK(b.contains(Vec3(0.5, 1, 1)));
  CHECK_FALSE(b.contains(Vec3(1.5, 1, 1)));
  CHECK(b.contains(Vec3(1.05, 1, 1), 0.1));
  CHECK(Aabb().empty());
  CHECK(Aabb::of({Vec3(1, 1, 1), Vec3(-1, 0, 2)}) == Aabb{{-1, 0, 1}, {1, 1, 2}});
  CHECK(b.inflated(0.5).min.isApprox(Vec3(-0.5, -0.5, -0.5)));
  const Aabb c{{0.5, 1, 0}, {2, 3, 1}};
  CHECK(b.overlaps(c));
  CHECK(b.footprint_overlap(c) == doctest::Approx(0.5 * 1.0));
  CHECK(b.distance_to(Vec3(3, 1, 1)) == doctest::Approx(2.0));
}

TEST_CASE("segment clipping") {
  const Aabb b{{-1, -1, -1}, {1, 1, 1}};
  auto hit = clip_segment(b, Vec3(-2, 0, 0), Vec3(2, 0, 0));
  REQUIRE(hit);
  CHECK(hit->first == doctest::Approx(0.25));
  CHECK(hit->second == doctest::Approx(0.75));
  CHECK_FALSE(clip_segment(b, Vec3(-2, 2, 0), Vec3(2, 2, 0)));
  CHECK(segment_blocked(b, Vec3(-2, 0, 0), Vec3(2, 0, 0)));
  // Touching only at an endpoint does not count.
  CHECK_FALSE(segment_blocked(b, Vec3(1.0, 0, 0), Vec3(2, 0, 0)));
}

TEST_CASE("oriented box follows yaw") {
  Pose p;
  p.yaw = kPi / 2;
  OrientedBox box{Vec3::Zero(), p.rotation(), Vec3(0.2, 0.05, 0.05)};
  CHECK(box.contains(Vec3(0.0, 0.15, 0.0)));
  CHECK_FALSE(box.contains(Vec3(0.15, 0.0, 0.0)));
  CHECK(box.bounds().max.y() == doctest::Approx(0.2));
}

TEST_CASE("look_at gives an orthonormal frame aimed at the target") {
  const CameraPose c = CameraPose::look_at(Vec3(1, 2, 3), Vec3(0, 0, 0));
  CHECK(c.valid());
  CHECK(c.forward.isApprox(Vec3(-1, -2, -3).normalized()));
  CHECK(std::abs(c.forward.dot(c.up)) < 1e-12);
  CHECK(c.to_camera(Vec3::Zero()).z() == doctest::Approx(std::sqrt(14.0)));
  // Straight down still has a valid up vector.
  CHECK(CameraPose::look_at(Vec3(0, 0, 1), Vec3::Zero()).valid());
}

TEST_CASE("facets") {
  CHECK(facet_towards(Vec3(0.1, -2, 0.3)) == Facet::NegY);
  CHECK(facet_normal(Facet::PosZ) == Vec3::UnitZ());
  for (Facet f : kAllFacets) CHECK(parse_facet(facet_name(f)) == f);
  CHECK(angle_between(Vec3::UnitX(), Vec3::UnitY()) == doctest::Approx(kPi / 2));
}
