#include "fixtures.hpp"
#include "oracles.hpp"
#include "retriever/errors.hpp"
#include "retriever/memory.hpp"
#include "retriever/observation.hpp"
#include "retriever/reasoner.hpp"

#include <doctest.h>

using namespace retriever;

namespace {

Detection scripted(const std::string& label, const Vec3& center, double vf, bool clipped) {
  Detection d;
  d.observed_label = label;
  d.truth_id = label;
  d.visible_fraction = vf;
  d.frustum_clipped = clipped;
  const SimObject o = fixture::object(label, label, center, Vec3(0.03, 0.03, 0.03));
  d.descriptor = o.facet(Facet::NegY).descriptor;
  for (const auto& s : surface_samples(o))
    if (s.facet == Facet::NegY || s.facet == Facet::PosZ) d.visible_points.push_back(s.point);
  return d;
}

Observation frame(int step, std::vector<Detection> ds) {
  Observation o;
  o.step = step;
  o.camera = CameraPose::look_at(Vec3(0, -0.6, 0.4), Vec3(0, 0, 0));
  o.detections = std::move(ds);
  return o;
}

const SceneNode* named(const Memory& m, const std::string& name) {
  for (const auto& [id, n] : m.graph.nodes)
    if (n.kind == NodeKind::Known && n.attrs.name == name) return &n;
  return nullptr;
}

}  // namespace

TEST_CASE("attribute heuristic on a unanimous history") {
  InferAttributesRequest req;
  AttributeItem it;
  it.node_id = "n0";
  for (int k = 0; k < 3; ++k) it.history.push_back({k, {}, "mug", 0.9, false, {}});
  req.items.push_back(it);
  const auto a = heuristic_attributes(req).attributes.at(0);
  CHECK(a.name == "mug");
  CHECK(a.conf == doctest::Approx(1.0));
  CHECK_FALSE(a.occl);
  CHECK_FALSE(a.view);
  CHECK(a.movable);
}

TEST_CASE("occl and view flags follow their definitions over a scripted sequence") {
  HeuristicReasoner r;
  const Vec3 c(0.1, 0.0, 0.03);
  // (visible fraction, clipped) per step, with the expected flags afterwards.
  struct Step {
    double vf;
    bool clipped;
    bool occl;
    bool view;
  };
  const std::vector<Step> seq = {
      {0.3, false, true, false},   // occluded so far
      {0.4, false, true, false},   // still below the full-view threshold
      {0.2, true, false, false},   // clipped entry breaks occl; not all clipped
      {0.9, false, false, false},
  };
  Memory m;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    m = update_memory(m, frame(static_cast<int>(k), {scripted("mug", c, seq[k].vf, seq[k].clipped)}), r);
    const SceneNode* n = named(m, "mug");
    REQUIRE(n);
    CHECK(n->obs_history.size() == k + 1);
    CHECK(n->attrs.occl == seq[k].occl);
    CHECK(n->attrs.view == seq[k].view);
  }

  Memory v;
  for (int k = 0; k < 3; ++k) {
    v = update_memory(v, frame(k, {scripted("cup", c, 0.5, true)}), r);
    CHECK(named(v, "cup")->attrs.view);
    CHECK_FALSE(named(v, "cup")->attrs.occl);
  }
}

TEST_CASE("every closed container has exactly one unknown inside child") {
  HeuristicReasoner r;
  WorldState w = fixture::cabinet_world();
  Memory m = update_memory(Memory{}, observe(w, w.camera, CameraIntrinsics{}, NoiseModel{}, 0, 0), r);
  m.graph.check_invariants();
  const SceneNode* cab = named(m, "cabinet");
  REQUIRE(cab);
  int inside = 0;
  for (const auto* e : m.graph.edges_to(cab->node_id))
    if (e->relation == Relation::Inside && m.graph.find(e->src)->kind == NodeKind::Unknown) ++inside;
  CHECK(inside == 1);

  // Opening and looking in resolves the hypothesis and finds the lotion.
  w.container("cabinet")->state = ContainerState::Open;
  const CameraPose in = CameraPose::look_at(Vec3(0.0, -0.15, 0.12), Vec3(0.0, 0.2, 0.05));
  m = update_memory(m, observe(w, in, CameraIntrinsics{}, NoiseModel{}, 0, 1), r);
  REQUIRE(named(m, "lotion"));
  cab = named(m, "cabinet");
  REQUIRE(cab->container);
  CHECK(cab->container->state == ContainerState::Open);
  CHECK(m.graph.has_edge(named(m, "lotion")->node_id, cab->node_id, Relation::Inside));
}

TEST_CASE("applying the same observation twice changes nothing") {
  HeuristicReasoner r;
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    const auto rw = oracle::random_world(rng);
    const Observation o = observe(rw.world, rw.world.camera, CameraIntrinsics{}, NoiseModel{}, 0, 0);
    const Memory once = update_memory(Memory{}, o, r);
    const Memory twice = update_memory(once, o, r);
    CHECK(twice.graph == once.graph);
  }
}

TEST_CASE("update_memory leaves its input alone") {
  HeuristicReasoner r;
  const WorldState w = fixture::cabinet_world();
  const Memory empty;
  const Memory m = update_memory(empty, observe(w, w.camera, CameraIntrinsics{}, NoiseModel{}, 0, 0), r);
  CHECK(empty.graph.nodes.empty());
  CHECK(m.graph.known_count() >= 3);
}

TEST_CASE("point merging keeps one centroid per voxel") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-0.1, 0.1);
  PointSet a, b;
  for (int k = 0; k < 300; ++k) a.emplace_back(U(rng), U(rng), U(rng));
  for (int k = 0; k < 300; ++k) b.emplace_back(U(rng), U(rng), U(rng));
  auto got = merge_point_sets(a, b, 0.02);
  auto want = oracle::voxel_merge(a, b, 0.02);
  REQUIRE(got.size() == want.size());
  auto less = [](const Vec3& x, const Vec3& y) { return std::lexicographical_compare(x.data(), x.data() + 3, y.data(), y.data() + 3); };
  std::sort(got.begin(), got.end(), less);
  std::sort(want.begin(), want.end(), less);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK((got[i] - want[i]).norm() < 1e-12);
  CHECK_THROWS(merge_point_sets(a, b, 0.0));
}

TEST_CASE("instances are matched across views and new ones get new nodes") {
  HeuristicReasoner r;
  Memory m = update_memory(Memory{}, frame(0, {scripted("mug", Vec3(0.1, 0, 0.03), 0.9, false)}), r);
  const std::string id = named(m, "mug")->node_id;
  m = update_memory(m, frame(1, {scripted("mug", Vec3(0.1, 0, 0.03), 0.9, false),
                                 scripted("bowl", Vec3(-0.2, 0, 0.03), 0.9, false)}),
                    r);
  CHECK(named(m, "mug")->node_id == id);
  CHECK(named(m, "bowl"));
  CHECK(m.graph.known_count() == 2);
}

TEST_CASE("matching heuristic respects the threshold") {
  MatchInstancesRequest req;
  Descriptor d{};
  d[0] = 1.0;
  req.nodes.push_back({"n0", "mug", {d}});
  MatchDetection near;
  near.descriptor = d;
  near.label = "mug";
  near.centroid_distance = {0.0};
  MatchDetection far = near;
  far.centroid_distance = {1.0};
  req.detections = {near, far};
  const auto res = heuristic_match(req);
  CHECK(res.assignment[0] == 0);
  CHECK(res.assignment[1] == -1);
}

TEST_CASE("decide request reflects the graph") {
  HeuristicReasoner r;
  const WorldState w = fixture::cabinet_world();
  const Memory m = update_memory(Memory{}, observe(w, w.camera, CameraIntrinsics{}, NoiseModel{}, 0, 0), r);
  const DecideRequest req = make_decide_request(m, "find the lotion", 0);
  CHECK(req.instruction == "find the lotion");
  CHECK(req.nodes.size() == m.graph.nodes.size());
  bool cabinet = false;
  for (const auto& n : req.nodes)
    if (n.name == "cabinet") {
      cabinet = true;
      CHECK(n.container_state == ContainerState::Closed);
      CHECK(n.handle_seen);
      CHECK(n.detected_last);
    }
  CHECK(cabinet);
}
