#include "fixtures.hpp"
#include "retriever/actions.hpp"
#include "retriever/memory.hpp"
#include "retriever/observation.hpp"
#include "retriever/reasoner.hpp"

#include <doctest.h>

using namespace retriever;

namespace {

// Memory after one zero-noise look from the world's camera.
Memory seen(const WorldState& w, const CameraPose& cam) {
  HeuristicReasoner r;
  return update_memory(Memory{}, observe(w, cam, CameraIntrinsics{}, NoiseModel{}, 0, 0), r);
}

std::string node_for(const Memory& m, const std::string& truth) {
  for (const auto& [id, idx] : m.detection_of)
    if (m.last_observation.detections[idx].truth_id == truth) return id;
  return "";
}

Primitive prim(PrimitiveKind k, const std::string& node) {
  Primitive p;
  p.kind = k;
  p.target = node;
  return p;
}

}  // namespace

TEST_CASE("open and close a cabinet") {
  const WorldState w = fixture::cabinet_world();
  const Memory m = seen(w, w.camera);
  const std::string cab = node_for(m, "cabinet");
  REQUIRE_FALSE(cab.empty());

  auto [opened, o1] = execute_primitive(w, prim(PrimitiveKind::Open, cab), m);
  CHECK(o1.success);
  CHECK(o1.reason == ActionReason::Ok);
  CHECK(opened.container("cabinet")->state == ContainerState::Open);

  auto [again, o2] = execute_primitive(opened, prim(PrimitiveKind::Open, cab), m);
  CHECK(o2.reason == ActionReason::AlreadyOpen);
  CHECK(again == opened);

  auto [closed, o3] = execute_primitive(opened, prim(PrimitiveKind::Close, cab), m);
  CHECK(o3.success);
  CHECK(closed == w);  // open then close is the identity
}

TEST_CASE("open preconditions") {
  const WorldState w = fixture::cabinet_world();
  const Memory m = seen(w, w.camera);
  CHECK(execute_primitive(w, prim(PrimitiveKind::Open, node_for(m, "mug")), m).second.reason ==
        ActionReason::NotAContainer);
  CHECK(execute_primitive(w, prim(PrimitiveKind::Open, "n999"), m).second.reason == ActionReason::NotObserved);

  // Seen from behind: the handle is not visible.
  const Memory back = seen(w, CameraPose::look_at(Vec3(0.0, 0.9, 0.5), Vec3(0, 0.2, 0.05)));
  const std::string cab = node_for(back, "cabinet");
  REQUIRE_FALSE(cab.empty());
  CHECK(execute_primitive(w, prim(PrimitiveKind::Open, cab), back).second.reason == ActionReason::NotObserved);

  ActionConfig short_arm;
  short_arm.reach = 0.3;
  CHECK(execute_primitive(w, prim(PrimitiveKind::Open, node_for(m, "cabinet")), m, short_arm).second.reason ==
        ActionReason::OutOfReach);
}

TEST_CASE("pick and place") {
  const WorldState w = fixture::cabinet_world();
  const Memory m = seen(w, w.camera);
  Primitive p = prim(PrimitiveKind::PickPlace, node_for(m, "mug"));
  p.destination = Pose{Vec3(0.2, -0.2, 0.3)};
  auto [moved, o] = execute_primitive(w, p, m);
  CHECK(o.success);
  const SimObject* mug = moved.find("mug");
  CHECK(mug->pose.position.x() == doctest::Approx(0.2));
  CHECK(mug->aabb().min.z() == doctest::Approx(0.0).epsilon(1e-9));  // settles on the table
  CHECK_NOTHROW(check_world_invariants(moved));

  p.destination = Pose{Vec3(0.0, 0.2, 0.3)};  // lands on the cabinet top
  auto [stacked, o2] = execute_primitive(w, p, m);
  CHECK(o2.success);
  CHECK(stacked.on_top_of.at("mug") == "cabinet");

  p.destination = Pose{Vec3(3.0, 0.0, 0.3)};  // off the table
  auto [same, o3] = execute_primitive(w, p, m);
  CHECK(o3.reason == ActionReason::DestinationBlocked);
  CHECK(same == w);

  Primitive fixed = prim(PrimitiveKind::PickPlace, node_for(m, "cabinet"));
  fixed.destination = Pose{Vec3(0.2, -0.2, 0.3)};
  CHECK(execute_primitive(w, fixed, m).second.reason == ActionReason::NotMovable);
}

TEST_CASE("pick and place of an enclosed object is refused") {
  WorldState w = fixture::cabinet_world();
  // Look at it with the cabinet open, then close it again.
  w.container("cabinet")->state = ContainerState::Open;
  const Memory m = seen(w, CameraPose::look_at(Vec3(0.0, -0.15, 0.12), Vec3(0.0, 0.2, 0.05)));
  w.container("cabinet")->state = ContainerState::Closed;
  Primitive p = prim(PrimitiveKind::PickPlace, node_for(m, "lotion"));
  REQUIRE_FALSE(p.target.empty());
  p.destination = Pose{Vec3(0.2, -0.2, 0.3)};
  CHECK(execute_primitive(w, p, m).second.reason == ActionReason::NotExposed);
}

TEST_CASE("rotating a box shows its rear label") {
  WorldState w;
  w.objects.push_back(fixture::table());
  SimObject box = fixture::object("box", "box", Vec3(0, 0, 0.07), Vec3(0.04, 0.025, 0.07));
  box.fine_label = "tea box";
  box.facet(Facet::PosY).tag = "tea";
  box.reset_facet_descriptors();
  w.objects.push_back(box);
  w.camera = CameraPose::look_at(Vec3(0, -0.5, 0.3), Vec3(0, 0, 0.05));
  w.recompute_relations();

  const Observation before = observe(w, w.camera, CameraIntrinsics{}, NoiseModel{}, 0);
  const Memory m = seen(w, w.camera);
  Primitive p = prim(PrimitiveKind::Rotate, node_for(m, "box"));
  p.angle = kPi;
  auto [turned, o] = execute_primitive(w, p, m);
  CHECK(o.success);
  const Observation after = observe(turned, turned.camera, CameraIntrinsics{}, NoiseModel{}, 0);
  auto label = [](const Observation& ob) {
    for (const auto& d : ob.detections)
      if (d.truth_id == "box") return d.observed_label;
    return std::string();
  };
  CHECK(label(before) == "box");
  CHECK(label(after) == "tea box");
}

TEST_CASE("retrieve") {
  const WorldState w = fixture::cabinet_world();
  const Memory m = seen(w, w.camera);
  auto [done, o] = retrieve(w, node_for(m, "mug"), w.goal_region, m);
  CHECK(o.success);
  CHECK(w.goal_region.contains(done.find("mug")->pose.position));
  CHECK(retrieve(w, "n404", w.goal_region, m).second.reason == ActionReason::NotObserved);

  // The lower object of a stack is not exposed.
  WorldState tower = w;
  tower.objects.push_back(fixture::object("apple", "apple", Vec3(-0.25, -0.1, 0.1), Vec3(0.02, 0.02, 0.02)));
  tower.recompute_relations();
  const Memory tm = seen(tower, tower.camera);
  CHECK(retrieve(tower, node_for(tm, "mug"), tower.goal_region, tm).second.reason == ActionReason::NotExposed);
}

TEST_CASE("primitive parameters must fit the kind") {
  Primitive p = prim(PrimitiveKind::PickPlace, "n1");
  CHECK_THROWS_AS(check_params(p), std::invalid_argument);
  p.destination = Pose{};
  CHECK_NOTHROW(check_params(p));
  Primitive o = prim(PrimitiveKind::Open, "n1");
  o.angle = 1.0;
  CHECK_THROWS_AS(check_params(o), std::invalid_argument);
}
