#pragma once

#include "retriever/geometry.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace retriever {

enum class PrimitiveKind { Open, Close, PickPlace, Rotate, Retrieve };
std::string_view primitive_name(PrimitiveKind k);
std::optional<PrimitiveKind> parse_primitive(std::string_view s);

enum class ActionKind { None, ActivePerception, InteractivePerception, Manipulation };
std::string_view action_kind_name(ActionKind k);
std::optional<ActionKind> parse_action_kind(std::string_view s);

struct Decision {
  std::string target;  // memory node id
  ActionKind action = ActionKind::None;
  std::optional<PrimitiveKind> primitive;  // InteractivePerception only
  double angle = 0.0;                      // Rotate
  std::string goal_text;
  bool declare_done = false;
  std::optional<std::string> declare_failure;
  bool operator==(const Decision&) const = default;
};

/// One executed high-level action, as remembered by the agent.
struct ActionRecord {
  int step = 0;
  std::string target;
  std::string action;  // primitive or action kind name
  std::string goal_text;
  bool success = false;
  std::string outcome;
  Aabb target_bounds;  // believed bounds of the target before the action
  bool operator==(const ActionRecord&) const = default;
};

}  // namespace retriever
