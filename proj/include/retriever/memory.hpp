#pragma once

#include "retriever/decision.hpp"
#include "retriever/observation.hpp"
#include "retriever/reasoner.hpp"
#include "retriever/relations.hpp"
#include "retriever/scene_graph.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace retriever {

struct MemoryConfig {
  double theta_match = 0.6;
  double lambda = 3.0;  // per meter of centroid-to-box distance
  double delta = 0.01;  // voxel size for merging
  double theta_full = 0.6;
  double v_min = 0.001;  // 1 liter
  double theta_explored = 0.8;
  double gamma_stale = 0.5;
  std::size_t exact_match_limit = 10;
  double cell = 0.04;  // exploration cell edge
  Aabb workspace{Vec3(-0.6, -0.4, 0.0), Vec3(0.6, 0.4, 0.32)};
  RelationConfig relations;
};

struct Memory {
  SceneGraph graph;
  Observation last_observation;
  std::vector<ActionRecord> history;
  std::set<CellKey> explored;
  /// Node matched to each detection of last_observation.
  std::map<std::string, std::size_t> detection_of;
  int next_serial = 0;
  /// (parent, relation) pairs no longer worth hypothesizing.
  std::set<std::pair<std::string, Relation>> retired;

  bool operator==(const Memory&) const = default;
};

// --- Exploration cells --------------------------------------------------------

CellKey cell_of(const Vec3& p, double cell);
Vec3 cell_center(const CellKey& c, double cell);
std::vector<CellKey> workspace_cells(const MemoryConfig& cfg);
double explored_fraction(const Memory& mem, const UnknownRegion& region);
Vec3 region_centroid(const UnknownRegion& region, double cell);
Aabb region_bounds(const UnknownRegion& region, double cell);

// --- Pipeline stages ------------------------------------------------------------

/// Detection index -> node id, or "" for a new instance.
std::vector<std::string> match_detections(const SceneGraph& graph, const Observation& obs, Reasoner& reasoner,
                                          const MemoryConfig& cfg = {});

/// One representative (centroid) per occupied voxel of the union.
PointSet merge_point_sets(const PointSet& existing, const PointSet& incoming, double delta);

NodeAttributes update_attributes(const SceneNode& node, Reasoner& reasoner, const MemoryConfig& cfg = {});

/// Geometric + semantic edges between Known nodes, plus action-rule edges
/// derived from `history`. Returns the full replacement edge list for Known
/// pairs (Action-provenance edges from the input graph persist).
std::vector<SceneEdge> infer_relations(const SceneGraph& graph, const CameraPose& camera,
                                       const std::vector<ActionRecord>& history, int step,
                                       const MemoryConfig& cfg = {});

/// Carves cells seen from `camera` into mem.explored.
void carve_explored(Memory& mem, const CameraPose& camera, const CameraIntrinsics& intr, const MemoryConfig& cfg);

void hypothesize_unknowns(Memory& mem, const CameraPose& camera, const CameraIntrinsics& intr, Reasoner& reasoner,
                          int step, const MemoryConfig& cfg = {});

/// Full update; returns the new memory and leaves `mem` untouched.
Memory update_memory(const Memory& mem, const Observation& obs, Reasoner& reasoner,
                     const CameraIntrinsics& intr = {}, const MemoryConfig& cfg = {});

/// Compact view of the graph for the Decide request.
DecideRequest make_decide_request(const Memory& mem, const std::string& instruction, int step,
                                  const MemoryConfig& cfg = {});

/// Known-only copy of the graph (Unknown nodes and their edges dropped).
SceneGraph known_subgraph(const SceneGraph& g);

}  // namespace retriever
