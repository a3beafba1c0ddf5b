#include "retriever/errors.hpp"
#include "retriever/lexicon.hpp"
#include "retriever/reasoner.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>

using namespace retriever;
using nlohmann::json;

namespace {

NodeView known(const std::string& id, const std::string& name) {
  NodeView n;
  n.id = id;
  n.name = name;
  n.detected_last = true;
  n.movable = true;
  n.conf = 1.0;
  n.bounds = Aabb{{0, 0, 0}, {0.05, 0.05, 0.05}};
  return n;
}

NodeView unknown(const std::string& id, Relation rel, const std::string& parent, double volume) {
  NodeView n;
  n.id = id;
  n.known = false;
  n.name = "unknown";
  n.region_relation = rel;
  n.region_parent = parent;
  n.region_volume = volume;
  return n;
}

NodeView cabinet(const std::string& id, bool handle) {
  NodeView c = known(id, "cabinet");
  c.movable = false;
  c.container_state = ContainerState::Closed;
  c.handle_seen = handle;
  return c;
}

}  // namespace

TEST_CASE("instruction tokens") {
  CHECK(target_tokens("bring me the toy cars") == std::vector<std::string>{"toy", "car"});
  CHECK(target_tokens("I need the glass") == std::vector<std::string>{"glass"});
  CHECK(semantic_relevance({"Toiletries"}, target_tokens("find the lotion")) == 1);
  CHECK(semantic_relevance({"Tools"}, target_tokens("find the lotion")) == -1);
  CHECK(semantic_relevance({}, target_tokens("find the lotion")) == 0);
}

TEST_CASE("decide: retrieve a visible match") {
  DecideRequest req;
  req.instruction = "find the lotion";
  req.nodes = {known("n0", "table"), known("n1", "lotion")};
  const Decision d = heuristic_decide(req);
  CHECK(d.action == ActionKind::Manipulation);
  CHECK(d.target == "n1");
}

TEST_CASE("decide: open a closed container before looking inside") {
  DecideRequest req;
  req.instruction = "find the lotion";
  req.nodes = {known("n0", "table"), cabinet("n1", true), unknown("u2", Relation::Inside, "n1", 0.004)};
  req.edges = {SceneEdge{"u2", "n1", Relation::Inside}};
  Decision d = heuristic_decide(req);
  CHECK(d.action == ActionKind::InteractivePerception);
  CHECK(d.primitive == PrimitiveKind::Open);
  CHECK(d.target == "n1");

  // Without a visible handle, look for it first.
  req.nodes[1] = cabinet("n1", false);
  d = heuristic_decide(req);
  CHECK(d.action == ActionKind::ActivePerception);
  CHECK(d.target == "n1");
}

TEST_CASE("decide: semantic labels order the search") {
  DecideRequest req;
  req.instruction = "I want the lotion";
  NodeView tools = cabinet("n1", true);
  tools.tags = {"Tools"};
  NodeView toiletries = cabinet("n2", true);
  toiletries.tags = {"Toiletries"};
  req.nodes = {known("n0", "table"), tools, toiletries, unknown("u3", Relation::Inside, "n1", 0.01),
               unknown("u4", Relation::Inside, "n2", 0.002)};
  const Decision d = heuristic_decide(req);
  CHECK(d.target == "n2");
}

TEST_CASE("decide: move what sits on the target") {
  DecideRequest req;
  req.instruction = "get me the stapler";
  req.nodes = {known("n0", "table"), known("n1", "stapler"), known("n2", "book")};
  req.edges = {SceneEdge{"n2", "n1", Relation::On}};
  const Decision d = heuristic_decide(req);
  CHECK(d.primitive == PrimitiveKind::PickPlace);
  CHECK(d.target == "n2");
}

TEST_CASE("decide: turn look-alikes to read them") {
  DecideRequest req;
  req.instruction = "bring me the tea box";
  req.nodes = {known("n0", "table"), known("n1", "box"), known("n2", "box")};
  Decision d = heuristic_decide(req);
  CHECK(d.primitive == PrimitiveKind::Rotate);
  CHECK(d.target == "n1");
  CHECK(d.angle == doctest::Approx(kPi));
  req.history.push_back(ActionRecord{0, "n1", "Rotate", "", true, "Ok", {}});
  d = heuristic_decide(req);
  CHECK(d.target == "n2");
}

TEST_CASE("decide: give up when nothing is left") {
  DecideRequest req;
  req.instruction = "find the lotion";
  req.nodes = {known("n0", "table")};
  CHECK(heuristic_decide(req).declare_failure == "Exhausted");
  req.instruction = "";
  CHECK(heuristic_decide(req).declare_failure.has_value());
}

TEST_CASE("counting reasoner enforces its budget") {
  HeuristicReasoner h;
  CountingReasoner c(h, 2);
  KeepResult k = ask<KeepResult>(c, InferRelationsVetoRequest{});
  CHECK(k.keep.empty());
  ask<KeepResult>(c, InferRelationsVetoRequest{});
  CHECK(c.calls() == 2);
  CHECK_THROWS_AS(ask<KeepResult>(c, InferRelationsVetoRequest{}), BudgetExceeded);
  c.reset(1);
  CHECK_NOTHROW(ask<KeepResult>(c, InferRelationsVetoRequest{}));
}

TEST_CASE("ask rejects the wrong response type") {
  HeuristicReasoner h;
  CHECK_THROWS_AS(ask<IndexResult>(h, InferRelationsVetoRequest{}), SchemaError);
}

TEST_CASE("wire format round trips every variant") {
  const auto dir = std::filesystem::temp_directory_path() / "retriever_wire_test";
  std::filesystem::create_directories(dir);

  MatchInstancesRequest match;
  match.nodes.push_back({"n0", "mug", {Descriptor{}}});
  MatchDetection md;
  md.label = "mug";
  md.centroid_distance = {0.1};
  match.detections.push_back(md);

  InferAttributesRequest attrs;
  attrs.items.push_back({"n0", {{1, {}, "mug", 0.7, false, {"x"}}}});

  InferRelationsVetoRequest veto;
  veto.edges.push_back({"n1", "mug", "n0", "table", Relation::On});

  HypothesizeUnknownRequest hyp;
  hyp.proposals.push_back({"n1", "cabinet", Relation::Inside, 0.003});

  SelectDirectionRequest dir_req;
  dir_req.goal_text = "look";
  dir_req.target = "u2";
  dir_req.center = Vec3(0.1, 0.2, 0.3);
  dir_req.radius = 0.4;
  dir_req.candidates.push_back({0, Vec3(1, 2, 3), 0.5, 0.25, 0.75});

  SelectPoseRequest pose_req;
  pose_req.candidates = dir_req.candidates;
  pose_req.current = CameraPose::look_at(Vec3(1, 0, 1), Vec3::Zero());

  DecideRequest decide;
  decide.instruction = "find the lotion";
  decide.nodes = {known("n0", "table"), unknown("u1", Relation::Behind, "n0", 0.01)};
  decide.edges = {SceneEdge{"u1", "n0", Relation::Behind}};
  decide.history.push_back(ActionRecord{0, "n0", "ActivePerception", "look", true, "Ok", {}});

  const std::vector<ReasonerRequest> all = {match, attrs, veto, hyp, dir_req, pose_req, decide};
  HeuristicReasoner h;
  for (const auto& req : all) {
    const json payload = json::parse(request_to_json(req, dir, "t").dump());
    const ReasonerRequest back = request_from_json(std::string(variant_name(req)), payload);
    CHECK(variant_name(back) == variant_name(req));
    const ReasonerResponse resp = h.respond(req);
    const ReasonerResponse again = response_from_json(req, json::parse(response_to_json(resp).dump()));
    CHECK(again == resp);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed responses raise schema errors") {
  MatchInstancesRequest match;
  match.detections.resize(2);
  CHECK_THROWS_AS(response_from_json(match, json{{"assignment", {0}}}), SchemaError);
  CHECK_THROWS_AS(response_from_json(match, json::array()), SchemaError);
  SelectPoseRequest pose;
  pose.allow_look_closer = false;
  CHECK_THROWS_AS(response_from_json(pose, json{{"index", 0}, {"look_closer", true}}), SchemaError);
  CHECK_THROWS_AS(response_from_json(DecideRequest{}, json{{"target", 5}}), SchemaError);
}
