#include "retriever/active_perception.hpp"
#include "retriever/errors.hpp"
#include "retriever/reasoner.hpp"

#include <doctest.h>

using namespace retriever;

namespace {

CameraIntrinsics square_fov(double deg) {
  CameraIntrinsics i;
  i.fov_h = i.fov_v = deg2rad(deg);
  return i;
}

}  // namespace

TEST_CASE("sphere radius") {
  const CameraPose cur = CameraPose::look_at(Vec3(1, 0, 1), Vec3::Zero());
  CHECK(build_sphere({Vec3(0.1, 0.2, 0.3)}, square_fov(60), cur).radius == doctest::Approx(0.25));
  const PointSet cube = {Vec3(0, 0, 0), Vec3(0.2, 0.2, 0.2)};
  const auto s = build_sphere(cube, square_fov(60), cur);
  CHECK(s.radius == doctest::Approx(0.26).epsilon(1e-3 / 0.26));
  CHECK(s.center.isApprox(Vec3(0.1, 0.1, 0.1)));
  CHECK(build_sphere({Vec3::Zero(), Vec3(2, 0, 0)}, square_fov(60), cur).radius == doctest::Approx(1.0));
  CHECK_THROWS_AS(build_sphere({}, square_fov(60), cur), EmptyTarget);
}

TEST_CASE("directions around the top pole") {
  const PerceptionSphere s{Vec3::Zero(), 0.5};
  const CameraPose top = CameraPose::look_at(Vec3(0, 0, 2), Vec3::Zero());
  const auto d = sample_directions(s, top, 8);
  REQUIRE(d.size() == 8);
  for (int k = 0; k < 8; ++k) {
    CHECK(d[k].azimuth == doctest::Approx(k * kPi / 4));
    CHECK(d[k].polar == doctest::Approx(deg2rad(30)));
    CHECK(d[k].pose.position.norm() == doctest::Approx(0.5));
    CHECK(angle_between(d[k].pose.position, Vec3::UnitZ()) == doctest::Approx(deg2rad(30)));
    CHECK(d[k].pose.forward.isApprox(-d[k].pose.position.normalized()));
  }
  const auto one = sample_directions(s, top, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].azimuth == doctest::Approx(0.0));
  CHECK_THROWS(sample_directions(s, top, 0));
}

TEST_CASE("blocked directions are culled") {
  const PerceptionSphere s{Vec3::Zero(), 0.5};
  const CameraPose side = CameraPose::look_at(Vec3(2, 0, 0), Vec3::Zero());
  ViewObstacles wall;
  wall.support_z = -10;
  wall.boxes.push_back(Aabb{{-5, -5, -5}, {5, 5, 0}});  // everything below z = 0
  const auto d = sample_directions(s, side, 8, wall);
  CHECK(d.size() < 8);
  CHECK_FALSE(d.empty());
  for (const auto& c : d) CHECK(c.pose.position.z() >= 0.0);

  ViewObstacles all;
  all.boxes.push_back(Aabb{{-5, -5, -5}, {5, 5, 5}});
  CHECK_THROWS_AS(sample_directions(s, side, 8, all), NoFeasibleCandidate);
}

TEST_CASE("poses along a direction") {
  const PerceptionSphere s{Vec3(0.1, 0.2, 0.3), 0.4};
  const CameraPose cur = CameraPose::look_at(Vec3(1.0, 0.2, 0.3), s.center);
  const auto dirs = sample_directions(s, cur, 8);
  const auto p = sample_poses_along(s, dirs[2], 4);
  REQUIRE(p.size() == 4);
  const Vec3 axis = (cur.position - s.center).normalized();
  for (int j = 0; j < 4; ++j) {
    CHECK(angle_between(p[j].pose.position - s.center, axis) == doctest::Approx(deg2rad(22.5 * (j + 1))));
    CHECK((p[j].pose.position - s.center).norm() == doctest::Approx(0.4));
  }
  const auto single = sample_poses_along(s, dirs[0], 1);
  REQUIRE(single.size() == 1);
  CHECK(angle_between(single[0].pose.position - s.center, axis) == doctest::Approx(kPi / 2));
}

TEST_CASE("coverage respects frustum, blockers and openings") {
  const CameraIntrinsics intr;
  const CameraPose cam = CameraPose::look_at(Vec3(0, -1, 0), Vec3::Zero());
  std::vector<CoverageProbe> probes(1);
  CHECK(coverage(cam, intr, probes, {}) == doctest::Approx(1.0));
  CHECK(coverage(cam, intr, probes, {Aabb{{-0.1, -0.6, -0.1}, {0.1, -0.5, 0.1}}}) == doctest::Approx(0.0));
  probes[0].facing = Vec3::UnitY();  // only visible from +y
  CHECK(coverage(cam, intr, probes, {}) == doctest::Approx(0.0));

  // A probe inside a box open towards -y is only seen through that side.
  const Aabb body{{-0.2, -0.2, -0.2}, {0.2, 0.2, 0.2}};
  CoverageProbe inside;
  inside.through = &body;
  inside.aperture = -Vec3::UnitY();
  CHECK(coverage(cam, intr, {inside}, {body}) == doctest::Approx(1.0));
  const CameraPose above = CameraPose::look_at(Vec3(0, 0, 1), Vec3::Zero());
  CHECK(coverage(above, intr, {inside}, {body}) == doctest::Approx(0.0));
}

TEST_CASE("look closer halves the distance") {
  const CameraIntrinsics intr;
  const CameraPose cam = CameraPose::look_at(Vec3(0, -1, 0), Vec3::Zero());
  const CameraPose c = look_closer(cam, Vec3::Zero(), intr);
  CHECK(c.position.norm() == doctest::Approx(0.5));
  CHECK(c.forward.isApprox(cam.forward));
  const CameraPose near = look_closer(CameraPose::look_at(Vec3(0, -0.12, 0), Vec3::Zero()), Vec3::Zero(), intr);
  CHECK(near.position.norm() == doctest::Approx(intr.near + 0.05));
}

TEST_CASE("heuristic view selection prefers the opening") {
  HeuristicReasoner r;
  const Aabb body{{-0.1, -0.1, 0.0}, {0.1, 0.1, 0.2}};
  ViewContext ctx;
  ctx.sphere = PerceptionSphere{body.center(), 0.5};
  ctx.current = CameraPose::look_at(body.center() + Vec3(0.5, 0, 0), body.center());
  ctx.goal_text = "inspect cabinet interior";
  ctx.target = "u1";
  std::vector<CoverageProbe> probes;
  for (double x : {-0.05, 0.0, 0.05}) {
    CoverageProbe p;
    p.point = Vec3(x, 0, 0.1);
    p.through = &body;
    p.aperture = -Vec3::UnitY();
    probes.push_back(p);
  }
  ctx.score = [&](const CameraPose& p) { return coverage(p, ctx.intr, probes, {body}); };
  const ViewChoice v = select_view(ctx, r);
  CHECK(v.pose.position.y() < body.min.y());
  CHECK(ctx.score(v.pose) > 0.5);
}
