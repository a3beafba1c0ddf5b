#pragma once

#include "retriever/decision.hpp"
#include "retriever/errors.hpp"
#include "retriever/observation.hpp"
#include "retriever/scene_graph.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace retriever {

// --- MatchInstances -------------------------------------------------------

struct MatchNode {
  std::string node_id;
  std::string name;
  std::vector<Descriptor> history;
  bool operator==(const MatchNode&) const = default;
};

struct MatchDetection {
  Descriptor descriptor{};
  std::string label;
  std::vector<double> centroid_distance;  // one per node, meters
  bool operator==(const MatchDetection&) const = default;
};

struct MatchInstancesRequest {
  std::vector<MatchNode> nodes;
  std::vector<MatchDetection> detections;
  double lambda = 3.0;
  double theta = 0.6;
  std::size_t exact_limit = 10;
  bool operator==(const MatchInstancesRequest&) const = default;
};

struct MatchInstancesResult {
  std::vector<int> assignment;  // node index, or -1 for a new instance
  bool operator==(const MatchInstancesResult&) const = default;
};

// --- InferAttributes --------------------------------------------------------

struct AttributeItem {
  std::string node_id;
  std::vector<ObservationRecord> history;
  bool operator==(const AttributeItem&) const = default;
};

struct InferAttributesRequest {
  std::vector<AttributeItem> items;
  double theta_full = 0.6;
  bool operator==(const InferAttributesRequest&) const = default;
};

struct InferAttributesResult {
  std::vector<NodeAttributes> attributes;
  bool operator==(const InferAttributesResult&) const = default;
};

// --- InferRelationsVeto -----------------------------------------------------

struct ProposedEdge {
  std::string src;
  std::string src_name;
  std::string dst;
  std::string dst_name;
  Relation relation = Relation::On;
  bool operator==(const ProposedEdge&) const = default;
};

struct InferRelationsVetoRequest {
  std::vector<ProposedEdge> edges;
  bool operator==(const InferRelationsVetoRequest&) const = default;
};

struct KeepResult {
  std::vector<bool> keep;
  bool operator==(const KeepResult&) const = default;
};

// --- HypothesizeUnknown -----------------------------------------------------

struct UnknownProposal {
  std::string parent;
  std::string parent_name;
  Relation relation = Relation::Inside;
  double volume = 0.0;  // cubic meters
  bool operator==(const UnknownProposal&) const = default;
};

struct HypothesizeUnknownRequest {
  std::vector<UnknownProposal> proposals;
  bool operator==(const HypothesizeUnknownRequest&) const = default;
};

// --- SelectDirection / SelectPose -------------------------------------------

struct CandidateInfo {
  int index = 0;
  Vec3 position = Vec3::Zero();
  double polar = 0.0;    // angle from the radial axis through the current camera
  double azimuth = 0.0;  // around that axis
  double score = 0.0;    // predicted coverage
  bool operator==(const CandidateInfo&) const = default;
};

struct SelectDirectionRequest {
  std::string goal_text;
  std::string target;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  std::vector<CandidateInfo> candidates;
  CanonicalViews views;
  bool operator==(const SelectDirectionRequest&) const = default;
};

struct SelectPoseRequest {
  std::string goal_text;
  std::string target;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  std::vector<CandidateInfo> candidates;
  CanonicalViews views;
  bool allow_look_closer = true;
  // No candidates: the reasoner must propose an absolute pose itself.
  bool generative = false;
  CameraPose current;
  bool operator==(const SelectPoseRequest&) const = default;
};

struct IndexResult {
  int index = 0;
  bool operator==(const IndexResult&) const = default;
};

struct PoseChoice {
  int index = 0;
  bool look_closer = false;
  std::optional<CameraPose> pose;  // generative answers only
  bool operator==(const PoseChoice&) const = default;
};

// --- Decide -----------------------------------------------------------------

struct NodeView {
  std::string id;
  bool known = true;
  std::string name;
  std::vector<std::string> tags;
  bool movable = false;
  double conf = 0.0;
  bool occl = false;
  bool view = false;
  int last_seen_step = -1;
  bool detected_last = false;
  std::optional<ContainerState> container_state;
  bool handle_seen = false;
  std::optional<Relation> region_relation;
  std::string region_parent;
  double region_volume = 0.0;
  double explored_fraction = 0.0;
  Aabb bounds;
  int ap_attempts = 0;
  bool operator==(const NodeView&) const = default;
};

struct DecideRequest {
  std::string instruction;
  int step = 0;
  std::vector<NodeView> nodes;
  std::vector<SceneEdge> edges;
  std::vector<ActionRecord> history;
  bool operator==(const DecideRequest&) const = default;
};

using ReasonerRequest = std::variant<MatchInstancesRequest, InferAttributesRequest, InferRelationsVetoRequest,
                                     HypothesizeUnknownRequest, SelectDirectionRequest, SelectPoseRequest,
                                     DecideRequest>;
using ReasonerResponse =
    std::variant<MatchInstancesResult, InferAttributesResult, KeepResult, IndexResult, PoseChoice, Decision>;

std::string_view variant_name(const ReasonerRequest& req);

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual ReasonerResponse respond(const ReasonerRequest& req) = 0;
};

/// Sends `req` and checks the response carries the expected alternative.
template <class Result>
Result ask(Reasoner& r, const ReasonerRequest& req) {
  ReasonerResponse resp = r.respond(req);
  if (auto* p = std::get_if<Result>(&resp)) return std::move(*p);
  throw SchemaError("response does not match request variant " + std::string(variant_name(req)));
}

/// Deterministic rule-based stand-in for the language models; a pure function
/// of each request.
class HeuristicReasoner : public Reasoner {
 public:
  ReasonerResponse respond(const ReasonerRequest& req) override;
};

MatchInstancesResult heuristic_match(const MatchInstancesRequest& req);
InferAttributesResult heuristic_attributes(const InferAttributesRequest& req);
/// Extra priority hook lets the oracle reorder Unknown regions; higher first.
Decision heuristic_decide(const DecideRequest& req,
                          const std::function<double(const NodeView&)>& priority = {});
PoseChoice heuristic_select_pose(const SelectPoseRequest& req);
int heuristic_select_direction(const SelectDirectionRequest& req);

/// Counts calls and enforces a budget; throws BudgetExceeded past the limit.
class CountingReasoner : public Reasoner {
 public:
  CountingReasoner(Reasoner& inner, int limit) : inner_(inner), limit_(limit) {}
  ReasonerResponse respond(const ReasonerRequest& req) override;
  int calls() const { return calls_; }
  void reset(int limit) {
    calls_ = 0;
    limit_ = limit;
  }

 private:
  Reasoner& inner_;
  int limit_;
  int calls_ = 0;
};

/// Child process speaking newline-delimited JSON on stdin/stdout.
class ExternalReasoner : public Reasoner {
 public:
  explicit ExternalReasoner(std::string command, double timeout_s = 60.0);
  ~ExternalReasoner() override;
  ExternalReasoner(const ExternalReasoner&) = delete;
  ExternalReasoner& operator=(const ExternalReasoner&) = delete;

  ReasonerResponse respond(const ReasonerRequest& req) override;
  const std::filesystem::path& sidecar_dir() const { return dir_; }

 private:
  void start();
  void stop();
  std::string exchange(const std::string& line);

  std::string command_;
  double timeout_s_;
  std::filesystem::path dir_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  long next_id_ = 1;
  int raster_serial_ = 0;
};

// --- Wire format ------------------------------------------------------------

/// Request payload as JSON. Rasters are written as PGM files under
/// `sidecar_dir` and referenced by path.
nlohmann::json request_to_json(const ReasonerRequest& req, const std::filesystem::path& sidecar_dir,
                               const std::string& prefix);
ReasonerRequest request_from_json(const std::string& variant, const nlohmann::json& payload);
nlohmann::json response_to_json(const ReasonerResponse& resp);
/// Parses a response for the given request variant; throws SchemaError.
ReasonerResponse response_from_json(const ReasonerRequest& req, const nlohmann::json& result);

}  // namespace retriever
