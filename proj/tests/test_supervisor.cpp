#include "fixtures.hpp"

#include "retriever/errors.hpp"
#include "retriever/supervisor.hpp"

#include <doctest.h>

using namespace retriever;

namespace {

EpisodeResult run(const Scenario& s, Ablation ablation = Ablation::None) {
  HeuristicReasoner h;
  EpisodeConfig cfg;
  cfg.ablation = ablation;
  return run_episode(s, h, CameraIntrinsics{}, NoiseModel{}, cfg);
}

const SceneNode* node_named(const Memory& m, const std::string& name) {
  for (const auto& [id, n] : m.graph.nodes)
    if (n.kind == NodeKind::Known && n.attrs.name == name) return &n;
  return nullptr;
}

// Reasoner that answers Decide with a fixed decision.
struct Scripted : Reasoner {
  Decision answer;
  ReasonerResponse respond(const ReasonerRequest& req) override {
    if (std::holds_alternative<DecideRequest>(req)) return answer;
    return HeuristicReasoner().respond(req);
  }
};

}  // namespace

TEST_CASE("lotion in a closed cabinet is retrieved") {
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  const EpisodeResult r = run(s);
  const Transcript& t = r.transcript;
  CHECK(t.status == EpisodeStatus::Success);
  REQUIRE(t.instructions.size() == 1);
  CHECK(t.instructions[0].steps == static_cast<int>(t.steps.size()));
  CHECK(t.graphs.size() == t.steps.size());
  CHECK(r.world.goal_region.contains(r.world.find("lotion")->pose.position));
  // The cabinet had to be opened on the way.
  bool opened = false;
  for (const auto& st : t.steps) opened |= st.low_level == "Open " + st.decision.target && st.success;
  CHECK(opened);
  r.memory.graph.check_invariants();
}

TEST_CASE("transcripts are deterministic and round trip") {
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  const std::string a = transcript_json(run(s).transcript);
  const std::string b = transcript_json(run(s).transcript);
  CHECK(a == b);
  CHECK(transcript_json(transcript_from_json(a)) == a);
  CHECK_THROWS_AS(transcript_from_json("{\"steps\": 3}"), ParseError);
}

TEST_CASE("step budget") {
  Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  s.budgets.max_steps = 1;
  const Transcript t = run(s).transcript;
  CHECK(t.status == EpisodeStatus::BudgetExhausted);
  CHECK(t.steps.size() == 1);
}

TEST_CASE("reasoner call budget") {
  Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  s.budgets.max_reasoner_calls = 2;
  const Transcript t = run(s).transcript;
  CHECK(t.status == EpisodeStatus::BudgetExhausted);
  CHECK(t.instructions[0].reason == "ReasonerCalls");
}

TEST_CASE("an object the user took away cannot be retrieved") {
  Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  InterventionScript gone;
  gone.kind = InterventionScript::Kind::RemoveObject;
  gone.id = "lotion";
  s.interventions.push_back({1, gone});
  const Transcript t = run(s).transcript;
  CHECK(t.status != EpisodeStatus::Success);
}

TEST_CASE("the no-memory ablation still runs") {
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  const EpisodeResult r = run(s, Ablation::NoMemory);
  CHECK(!r.transcript.steps.empty());
  CHECK(r.memory.history.size() + 1 >= r.transcript.steps.size());
}

TEST_CASE("fixed camera never moves") {
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  const Transcript t = run(s, Ablation::FixedCamera).transcript;
  for (const auto& st : t.steps) CHECK(st.camera.position.isApprox(t.steps[0].camera.position, 1e-12));
}

TEST_CASE("decisions are validated against memory") {
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  const Memory mem = run(s).memory;
  const DecideRequest req = make_decide_request(mem, "find the lotion", 0);
  Scripted bad;
  bad.answer.target = "nowhere";
  bad.answer.action = ActionKind::Manipulation;
  CHECK_THROWS_AS(decide(req, mem, bad), SchemaError);
  bad.answer.target = mem.graph.nodes.begin()->first;
  bad.answer.action = ActionKind::InteractivePerception;
  CHECK_THROWS_AS(decide(req, mem, bad), SchemaError);

  Scripted ok;
  ok.answer.declare_failure = "because";
  CHECK(decide(req, mem, ok).declare_failure == "because");
}

TEST_CASE("scripted failure ends the episode") {
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  Scripted give_up;
  give_up.answer.declare_failure = "NoIdea";
  const Transcript t = run_episode(s, give_up, CameraIntrinsics{}, NoiseModel{}).transcript;
  CHECK(t.status == EpisodeStatus::Failure);
  CHECK(t.reason == "NoIdea");
  CHECK(t.steps.size() == 1);
}

TEST_CASE("place spots keep clear of known objects") {
  const Scenario s = fixture::scenario_of(fixture::cabinet_world(), "find the lotion", "lotion");
  const Memory mem = run(s).memory;
  const SceneNode* mug = node_named(mem, "mug");
  REQUIRE(mug);
  const Aabb avoid{{0.40, -0.40, 0.0}, {0.60, -0.25, 0.25}};
  const auto spot = find_place_spot(mem, mug->node_id, avoid);
  REQUIRE(spot);
  const Vec3 half = 0.5 * mug->bounds().size();
  const Aabb footprint{spot->position - half, spot->position + half};
  for (const auto& [id, n] : mem.graph.nodes) {
    if (n.kind != NodeKind::Known || id == mug->node_id || n.attrs.name == "table") continue;
    const Aabb b = n.bounds();
    const bool apart = footprint.max.x() <= b.min.x() || b.max.x() <= footprint.min.x() ||
                       footprint.max.y() <= b.min.y() || b.max.y() <= footprint.min.y();
    CHECK(apart);
  }
  CHECK(!find_place_spot(mem, "missing", avoid));
}
