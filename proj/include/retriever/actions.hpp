#pragma once

#include "retriever/decision.hpp"
#include "retriever/memory.hpp"
#include "retriever/world.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace retriever {

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Open;
  std::string target;                // memory node id
  std::optional<Pose> destination;   // PickPlace: release point, the object keeps its orientation
  std::optional<double> angle;       // Rotate, radians
  std::optional<Aabb> goal_region;   // Retrieve
};

/// Throws std::invalid_argument when params do not fit the kind.
void check_params(const Primitive& p);

enum class ActionReason {
  Ok,
  NotAContainer,
  AlreadyOpen,
  AlreadyClosed,
  NotMovable,
  NotExposed,
  NotObserved,
  OutOfReach,
  DestinationBlocked,
  GripperOccupied,
};
std::string_view reason_name(ActionReason r);

struct ActionOutcome {
  bool success = false;
  ActionReason reason = ActionReason::Ok;
  std::vector<std::string> changed;  // object ids whose state changed
  std::string object_id;             // ground-truth object the node was bound to
};

struct ActionConfig {
  double reach = 0.9;
};

/// The object the node stands for, via the node's detection in the latest
/// observation; empty when the node was not detected there.
std::optional<std::string> bind_node(const Memory& mem, const std::string& node_id);

/// Applies one primitive; on failure the returned world equals the input.
std::pair<WorldState, ActionOutcome> execute_primitive(const WorldState& world, const Primitive& p, const Memory& mem,
                                                       const ActionConfig& cfg = {});

std::pair<WorldState, ActionOutcome> retrieve(const WorldState& world, const std::string& node_id,
                                              const Aabb& goal_region, const Memory& mem,
                                              const ActionConfig& cfg = {});

}  // namespace retriever
