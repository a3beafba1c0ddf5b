#pragma once

#include "retriever/geometry.hpp"
#include "retriever/observation.hpp"
#include "retriever/relations.hpp"
#include "retriever/world.hpp"

#include <nlohmann/json_fwd.hpp>

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace retriever {

/// Integer coordinates of an exploration cell.
struct CellKey {
  int x = 0;
  int y = 0;
  int z = 0;
  auto operator<=>(const CellKey&) const = default;
};

struct NodeAttributes {
  std::string name = "unknown";
  bool movable = false;
  double conf = 0.0;
  bool occl = false;
  bool view = false;
  std::string desc;
  bool operator==(const NodeAttributes&) const = default;
};

struct ObservationRecord {
  int step = 0;
  Descriptor descriptor{};
  std::string label;
  double visible_fraction = 0.0;
  bool frustum_clipped = false;
  std::vector<std::string> facet_tags;
  bool operator==(const ObservationRecord&) const = default;
};

struct ContainerBelief {
  ContainerState state = ContainerState::Closed;
  Vec3 aperture_normal = Vec3::Zero();
  Vec3 handle_normal = Vec3::Zero();
  Vec3 handle_point = Vec3::Zero();
  Aabb body;
  int handle_seen_step = -1;
  bool operator==(const ContainerBelief&) const = default;
};

/// Region an Unknown node stands for, as exploration cells.
struct UnknownRegion {
  Relation relation = Relation::Inside;
  std::string parent;
  std::vector<CellKey> cells;
  bool operator==(const UnknownRegion&) const = default;
};

enum class NodeKind { Known, Unknown };

struct SceneNode {
  std::string node_id;
  NodeKind kind = NodeKind::Known;
  std::vector<ObservationRecord> obs_history;
  PointSet merged_points;
  PointSet last_points;
  NodeAttributes attrs;
  int created_step = 0;
  int last_seen_step = -1;
  std::set<std::string> tags;
  std::optional<ContainerBelief> container;
  std::optional<UnknownRegion> region;
  int ap_attempts = 0;
  int stale_step = -1;  // last step the vanished rule fired

  /// Container body when known, otherwise the bounds of the merged points.
  Aabb bounds() const;
  Vec3 center() const;
  bool operator==(const SceneNode&) const = default;
};

enum class Provenance { Geometric, Semantic, Action };
std::string_view provenance_name(Provenance p);

struct SceneEdge {
  std::string src;
  std::string dst;
  Relation relation = Relation::On;
  Provenance provenance = Provenance::Geometric;
  int created_step = 0;

  auto key() const { return std::tie(src, dst, relation); }
  bool operator==(const SceneEdge&) const = default;
};

/// Nodes are kept ordered by id; edges ordered by (src, dst, relation), unique.
struct SceneGraph {
  std::map<std::string, SceneNode> nodes;
  std::vector<SceneEdge> edges;

  SceneNode* find(const std::string& id);
  const SceneNode* find(const std::string& id) const;
  void add_node(SceneNode node);
  /// Removes the node and every incident edge.
  void remove_node(const std::string& id);
  /// Returns false (and does nothing) on self-loops, dangling ids or duplicates.
  bool add_edge(SceneEdge edge);
  bool has_edge(const std::string& src, const std::string& dst, Relation r) const;
  std::vector<const SceneEdge*> edges_from(const std::string& id) const;
  std::vector<const SceneEdge*> edges_to(const std::string& id) const;
  std::size_t known_count() const;

  /// Throws InvariantViolation on dangling edges, self-loops, duplicates or
  /// Inside/On cycles, and on malformed Known/Unknown nodes.
  void check_invariants() const;
  bool operator==(const SceneGraph&) const = default;
};

void to_json(nlohmann::json& j, const CellKey& c);
void from_json(const nlohmann::json& j, CellKey& c);
void to_json(nlohmann::json& j, const NodeAttributes& a);
void from_json(const nlohmann::json& j, NodeAttributes& a);
void to_json(nlohmann::json& j, const ObservationRecord& r);
void from_json(const nlohmann::json& j, ObservationRecord& r);
void to_json(nlohmann::json& j, const SceneNode& n);
void from_json(const nlohmann::json& j, SceneNode& n);
void to_json(nlohmann::json& j, const SceneEdge& e);
void from_json(const nlohmann::json& j, SceneEdge& e);
void to_json(nlohmann::json& j, const SceneGraph& g);
void from_json(const nlohmann::json& j, SceneGraph& g);
void to_json(nlohmann::json& j, const Detection& d);
void from_json(const nlohmann::json& j, Detection& d);
void to_json(nlohmann::json& j, const Observation& o);
void from_json(const nlohmann::json& j, Observation& o);
void to_json(nlohmann::json& j, const CameraPose& p);
void from_json(const nlohmann::json& j, CameraPose& p);
void to_json(nlohmann::json& j, const Aabb& b);
void from_json(const nlohmann::json& j, Aabb& b);

/// Node/edge summary without point data, for transcripts and diffs.
nlohmann::json graph_summary(const SceneGraph& g);

}  // namespace retriever
