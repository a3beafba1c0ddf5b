#pragma once

#include "retriever/geometry.hpp"
#include "retriever/relations.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace retriever {

struct SceneGraph;

inline constexpr int kDescriptorDim = 16;
using Descriptor = std::array<double, kDescriptorDim>;

/// Surface grid resolution per face (edge-inclusive), 6 x 8 x 8 samples per box.
inline constexpr int kSurfaceGrid = 8;
/// Wall thickness of container bodies; the interior is the body shrunk by this.
inline constexpr double kContainerWall = 0.01;

struct FacetInfo {
  Descriptor descriptor{};
  std::string tag;
  bool operator==(const FacetInfo&) const = default;
};

/// Descriptor of a facet: hash embedding of the label (mixed with the facet tag
/// when present) plus three size features.
Descriptor make_facet_descriptor(const std::string& label, const std::string& tag, const Vec3& extent);

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;  // outward, base frame
  Facet facet;  // object frame
};

struct Placement {
  Relation relation;
  std::string ref;
  bool operator==(const Placement&) const = default;
};

struct SimObject {
  std::string id;
  std::string class_label;
  std::string fine_label;
  Pose pose;
  Vec3 extent = Vec3::Constant(0.05);  // half-sizes
  bool movable = true;
  std::array<FacetInfo, 6> facets{};
  std::string semantic_tag;
  std::optional<Placement> placement;  // declared in scenario files, verified on load

  OrientedBox box() const { return {pose.position, pose.rotation(), extent}; }
  Aabb aabb() const { return box().bounds(); }
  const FacetInfo& facet(Facet f) const { return facets[static_cast<int>(f)]; }
  FacetInfo& facet(Facet f) { return facets[static_cast<int>(f)]; }
  bool has_tagged_facet() const;
  /// Regenerates descriptors for every facet from labels and tags.
  void reset_facet_descriptors();
  bool operator==(const SimObject&) const = default;
};

std::vector<SurfaceSample> surface_samples(const SimObject& obj);
PointSet surface_points(const SimObject& obj);

enum class ContainerState { Open, Closed };
enum class ContainerKind { Drawer, Cabinet };

struct Container {
  std::string object_id;
  ContainerState state = ContainerState::Closed;
  Aabb interior_region;
  Vec3 handle_point = Vec3::Zero();
  ContainerKind kind = ContainerKind::Cabinet;
  Facet aperture = Facet::NegY;  // object-frame face removed when Open
  bool operator==(const Container&) const = default;
};

/// Facet of the owner box whose plane holds the handle point.
Facet handle_facet(const SimObject& owner, const Container& c);

struct Occluder {
  std::size_t object_index;
  OrientedBox box;
};

struct WorldState {
  std::vector<SimObject> objects;
  std::vector<Container> containers;
  std::map<std::string, std::string> inside_of;   // object -> container owner id
  std::map<std::string, std::string> on_top_of;   // object -> support object id
  CameraPose camera;
  std::optional<std::string> held;
  Aabb goal_region;
  Vec3 robot_base = Vec3(0.0, -0.6, 0.0);
  int step = 0;

  const SimObject* find(const std::string& id) const;
  SimObject* find(const std::string& id);
  std::optional<std::size_t> index_of(const std::string& id) const;
  const Container* container(const std::string& owner_id) const;
  Container* container(const std::string& owner_id);

  /// True if the object sits inside a Closed container.
  bool enclosed(const std::string& id) const;
  /// Recomputes inside_of / on_top_of from current geometry.
  void recompute_relations();
  /// Solid boxes for ordinary objects and closed containers; open containers
  /// contribute their five remaining walls.
  std::vector<Occluder> occluders() const;

  bool operator==(const WorldState&) const = default;
};

/// Throws InvariantViolation describing the first broken invariant.
void check_world_invariants(const WorldState& world);

struct InterventionScript {
  enum class Kind { MoveObject, SetContainer, RemoveObject };
  Kind kind = Kind::MoveObject;
  std::string id;
  Pose pose;                                         // MoveObject
  ContainerState state = ContainerState::Closed;     // SetContainer
  bool operator==(const InterventionScript&) const = default;
};

/// Edits the world state in place of a human; the agent's memory is not told.
WorldState apply_intervention(WorldState world, const InterventionScript& script);

enum class Category {
  HiddenInside,
  RecursiveSearch,
  RepositionToReveal,
  SequentialRetrieval,
  SemanticTargeting,
  CompositionalReasoning
};
inline constexpr std::array<Category, 6> kAllCategories = {
    Category::HiddenInside,        Category::RecursiveSearch,   Category::RepositionToReveal,
    Category::SequentialRetrieval, Category::SemanticTargeting, Category::CompositionalReasoning};

std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view s);

struct ScheduledIntervention {
  int trigger_step = 0;
  InterventionScript script;
  bool operator==(const ScheduledIntervention&) const = default;
};

struct Budgets {
  int max_steps = 30;
  int max_reasoner_calls = 120;
  bool operator==(const Budgets&) const = default;
};

struct Scenario {
  std::string name;
  Category category = Category::HiddenInside;
  std::uint64_t seed = 0;
  WorldState initial_world;
  std::vector<std::string> instructions;
  std::vector<std::string> target_ids;
  std::vector<ScheduledIntervention> interventions;
  Budgets budgets;
  bool operator==(const Scenario&) const = default;
};

/// Ground-truth graph over `discovered` objects using the same geometric rules
/// as the memory, applied to full surface samples at true poses.
SceneGraph ground_truth_graph(const WorldState& world, const std::vector<std::string>& discovered);

}  // namespace retriever
