#include "fixtures.hpp"
#include "oracles.hpp"
#include "retriever/errors.hpp"
#include "retriever/observation.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>

using namespace retriever;

namespace {

const Detection* find(const Observation& o, const std::string& id) {
  for (const auto& d : o.detections)
    if (d.truth_id == id) return &d;
  return nullptr;
}

}  // namespace

TEST_CASE("cube on the optical axis") {
  WorldState w;
  w.objects.push_back(fixture::object("cube", "box", Vec3(0.5, 0, 0), Vec3(0.05, 0.05, 0.05)));
  const CameraPose cam = CameraPose::look_at(Vec3::Zero(), Vec3(1, 0, 0));
  const Observation o = observe(w, cam, CameraIntrinsics{}, NoiseModel{}, 0);
  REQUIRE(o.detections.size() == 1);
  CHECK(o.detections[0].visible_fraction >= 0.45);
  CHECK_FALSE(o.detections[0].frustum_clipped);
  CHECK(o.detections[0].observed_label == "box");
}

TEST_CASE("closed containers hide their contents") {
  WorldState w = fixture::cabinet_world();
  const Observation closed = observe(w, w.camera, CameraIntrinsics{}, NoiseModel{}, 0);
  CHECK(find(closed, "cabinet"));
  CHECK_FALSE(find(closed, "lotion"));
  const Detection* cab = find(closed, "cabinet");
  REQUIRE(cab->container);
  CHECK(cab->container->handle_visible);
  CHECK(cab->container->state == ContainerState::Closed);

  w.container("cabinet")->state = ContainerState::Open;
  const Observation open = observe(w, w.camera, CameraIntrinsics{}, NoiseModel{}, 0);
  CHECK(find(open, "lotion"));
}

TEST_CASE("object behind the camera or beyond far is not seen") {
  WorldState w;
  w.objects.push_back(fixture::object("cube", "box", Vec3(-0.5, 0, 0), Vec3(0.05, 0.05, 0.05)));
  w.objects.push_back(fixture::object("far", "box", Vec3(4.0, 0, 0), Vec3(0.05, 0.05, 0.05)));
  const CameraPose cam = CameraPose::look_at(Vec3::Zero(), Vec3(1, 0, 0));
  CHECK(observe(w, cam, CameraIntrinsics{}, NoiseModel{}, 0).detections.empty());
}

TEST_CASE("partly outside the frustum sets the clipped flag") {
  WorldState w;
  w.objects.push_back(fixture::object("wide", "box", Vec3(0.5, 0.3, 0), Vec3(0.05, 0.1, 0.05)));
  const CameraPose cam = CameraPose::look_at(Vec3::Zero(), Vec3(1, 0, 0));
  const Observation o = observe(w, cam, CameraIntrinsics{}, NoiseModel{}, 0);
  REQUIRE(o.detections.size() == 1);
  CHECK(o.detections[0].frustum_clipped);
}

TEST_CASE("removing an occluder never lowers visibility") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    auto rw = oracle::random_world(rng);
    const WorldState& w = rw.world;
    const auto all = w.occluders();
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
      const double before = object_visibility(w, i, all, w.camera, CameraIntrinsics{}).fraction();
      for (std::size_t drop = 0; drop < w.objects.size(); ++drop) {
        if (drop == i) continue;
        std::vector<Occluder> fewer;
        for (const auto& o : all)
          if (o.object_index != drop) fewer.push_back(o);
        CHECK(object_visibility(w, i, fewer, w.camera, CameraIntrinsics{}).fraction() >= before - 1e-12);
      }
    }
  }
}

TEST_CASE("visible points agree with an independent ray march") {
  std::mt19937_64 rng(9);
  const CameraIntrinsics intr;
  for (int k = 0; k < 30; ++k) {
    auto rw = oracle::random_world(rng);
    const WorldState& w = rw.world;
    const Observation o = observe(w, w.camera, intr, NoiseModel{}, 0);
    for (const auto& d : o.detections) {
      CHECK(d.visible_fraction >= intr.min_visible_fraction);
      const std::size_t self = *w.index_of(d.truth_id);
      for (const auto& p : d.visible_points) {
        CHECK(oracle::in_frustum(w.camera, intr, p));
        CHECK_FALSE(oracle::ray_clearly_blocked(w, self, p, w.camera.position));
      }
    }
  }
}

TEST_CASE("noise is deterministic per seed") {
  const WorldState w = fixture::cabinet_world();
  const NoiseModel n = NoiseModel::profile("high");
  const Observation a = observe(w, w.camera, CameraIntrinsics{}, n, 42);
  const Observation b = observe(w, w.camera, CameraIntrinsics{}, n, 42);
  CHECK(a == b);
  CHECK(NoiseModel::profile("none").zero());
  CHECK_THROWS_AS(NoiseModel::profile("loud"), ValidationError);
}

TEST_CASE("merging views keeps one detection per object") {
  const WorldState w = fixture::cabinet_world();
  const Observation a = observe(w, w.camera, CameraIntrinsics{}, NoiseModel{}, 0);
  const Observation b = observe(w, CameraPose::look_at(Vec3(0.6, -0.5, 0.4), Vec3(0, 0, 0.05)), CameraIntrinsics{},
                                NoiseModel{}, 0);
  const Observation m = merge_observations({a, b}, 3);
  CHECK(m.step == 3);
  std::set<std::string> ids;
  for (const auto& d : m.detections) CHECK(ids.insert(d.truth_id).second);
  for (const auto& d : a.detections) CHECK(ids.count(d.truth_id));
  for (const auto& d : b.detections) CHECK(ids.count(d.truth_id));
}

TEST_CASE("canonical views and pgm files") {
  const PointSet pts = {Vec3(0, 0, 0), Vec3(0.1, 0.1, 0.1), Vec3(0.05, 0.2, 0.0)};
  const CanonicalViews v = render_canonical_views(pts, {Vec3(0.1, 0.1, 0.1)}, 16, 12);
  CHECK(v.front.width == 16);
  CHECK(v.front.depth.size() == 16u * 12u);
  CHECK(std::count(v.front.mask.begin(), v.front.mask.end(), 255) >= 1);
  CHECK(std::count_if(v.left.depth.begin(), v.left.depth.end(), [](auto d) { return d > 0; }) >= 1);

  const auto path = std::filesystem::temp_directory_path() / "retriever_test.pgm";
  write_pgm(path, v.front.width, v.front.height, v.front.depth);
  auto [wd, ht, data] = read_pgm(path);
  CHECK(wd == 16);
  CHECK(ht == 12);
  CHECK(data == v.front.depth);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_pgm("/nonexistent/x.pgm"), ParseError);
}
