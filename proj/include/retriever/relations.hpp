#pragma once

#include "retriever/geometry.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace retriever {

enum class Relation { Behind, Belong, Inside, On, Under };
inline constexpr std::array<Relation, 5> kAllRelations = {Relation::Behind, Relation::Belong, Relation::Inside,
                                                          Relation::On, Relation::Under};

std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view s);

/// Thresholds of the deterministic geometric relation rules.
struct RelationConfig {
  double contact_eps = 0.005;      // On: gap between A's bottom and B's top
  double on_overlap = 0.30;        // On: fraction of A's footprint over B
  double inside_fraction = 0.80;   // Inside: fraction of A's points in B's volume
  double belong_distance = 0.05;   // Belong: part-to-whole gap
};

/// Everything the relation rules need to know about one node.
struct RelationNode {
  std::string label;
  bool movable = true;
  bool container = false;
  Aabb box;        // bounds of the node's points (for containers: full body)
  const PointSet* points = nullptr;
  Vec3 centroid = Vec3::Zero();
};

struct GeomEdge {
  std::size_t src;
  std::size_t dst;
  Relation relation;
  auto operator<=>(const GeomEdge&) const = default;
};

/// Applies the On / Under / Inside / Behind / Belong rules; edges are figure -> ground.
std::vector<GeomEdge> geometric_relations(std::span<const RelationNode> nodes, const CameraPose& camera,
                                          const RelationConfig& cfg = {});

bool is_support_label(std::string_view label);
bool is_container_label(std::string_view label);
/// Label-table lookup used for v^movable.
bool label_is_movable(std::string_view label);

}  // namespace retriever
