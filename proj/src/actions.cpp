#include "retriever/actions.hpp"

#include "retriever/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace retriever {

std::string_view reason_name(ActionReason r) {
  switch (r) {
    case ActionReason::Ok: return "Ok";
    case ActionReason::NotAContainer: return "NotAContainer";
    case ActionReason::AlreadyOpen: return "AlreadyOpen";
    case ActionReason::AlreadyClosed: return "AlreadyClosed";
    case ActionReason::NotMovable: return "NotMovable";
    case ActionReason::NotExposed: return "NotExposed";
    case ActionReason::NotObserved: return "NotObserved";
    case ActionReason::OutOfReach: return "OutOfReach";
    case ActionReason::DestinationBlocked: return "DestinationBlocked";
    case ActionReason::GripperOccupied: return "GripperOccupied";
  }
  return "?";
}

void check_params(const Primitive& p) {
  const bool dest = p.kind == PrimitiveKind::PickPlace;
  const bool angle = p.kind == PrimitiveKind::Rotate;
  const bool goal = p.kind == PrimitiveKind::Retrieve;
  if (dest != p.destination.has_value() || angle != p.angle.has_value() || goal != p.goal_region.has_value())
    throw std::invalid_argument("parameters do not match primitive " + std::string(primitive_name(p.kind)));
}

std::optional<std::string> bind_node(const Memory& mem, const std::string& node_id) {
  auto it = mem.detection_of.find(node_id);
  if (it == mem.detection_of.end() || it->second >= mem.last_observation.detections.size()) return std::nullopt;
  const std::string& id = mem.last_observation.detections[it->second].truth_id;
  if (id.empty()) return std::nullopt;
  return id;
}

namespace {

using Result = std::pair<WorldState, ActionOutcome>;

Result fail(const WorldState& w, ActionReason r, const std::string& id = {}) {
  ActionOutcome o;
  o.success = false;
  o.reason = r;
  o.object_id = id;
  return {w, o};
}

bool has_load(const WorldState& w, const std::string& id) {
  return std::any_of(w.on_top_of.begin(), w.on_top_of.end(), [&](const auto& kv) { return kv.second == id; });
}

/// Interpenetration with any other object (touching is allowed).
bool collides(const WorldState& w, const std::string& id, const Aabb& box) {
  for (const auto& o : w.objects) {
    if (o.id == id) continue;
    const Aabb b = o.aabb();
    bool inter = true;
    for (int i = 0; i < 3; ++i) inter = inter && box.min[i] < b.max[i] - 1e-6 && box.max[i] > b.min[i] + 1e-6;
    if (!inter) continue;
    // Objects may sit inside open container bodies.
    if (const Container* c = w.container(o.id); c && c->interior_region.contains(box, 1e-6)) continue;
    return true;
  }
  return false;
}

Result commit(WorldState w, const std::string& id, const WorldState& original) {
  w.recompute_relations();
  try {
    check_world_invariants(w);
  } catch (const InvariantViolation&) {
    return fail(original, ActionReason::DestinationBlocked, id);
  }
  ActionOutcome o;
  o.success = true;
  o.reason = ActionReason::Ok;
  o.changed = {id};
  o.object_id = id;
  return {std::move(w), o};
}

}  // namespace

Result execute_primitive(const WorldState& world, const Primitive& p, const Memory& mem, const ActionConfig& cfg) {
  check_params(p);
  if (p.kind == PrimitiveKind::Retrieve) return retrieve(world, p.target, *p.goal_region, mem, cfg);

  const auto bound = bind_node(mem, p.target);
  if (!bound) return fail(world, ActionReason::NotObserved);
  const std::string& id = *bound;
  const SimObject* obj = world.find(id);
  if (!obj) return fail(world, ActionReason::NotObserved, id);

  switch (p.kind) {
    case PrimitiveKind::Open:
    case PrimitiveKind::Close: {
      const Container* c = world.container(id);
      if (!c) return fail(world, ActionReason::NotAContainer, id);
      const bool open = p.kind == PrimitiveKind::Open;
      if (open && c->state == ContainerState::Open) return fail(world, ActionReason::AlreadyOpen, id);
      if (!open && c->state == ContainerState::Closed) return fail(world, ActionReason::AlreadyClosed, id);
      const Detection& d = mem.last_observation.detections[mem.detection_of.at(p.target)];
      if (!d.container || !d.container->handle_visible) return fail(world, ActionReason::NotObserved, id);
      if ((c->handle_point - world.robot_base).norm() > cfg.reach) return fail(world, ActionReason::OutOfReach, id);
      WorldState w = world;
      w.container(id)->state = open ? ContainerState::Open : ContainerState::Closed;
      return commit(std::move(w), id, world);
    }
    case PrimitiveKind::PickPlace: {
      if (!obj->movable) return fail(world, ActionReason::NotMovable, id);
      if (world.enclosed(id) || has_load(world, id)) return fail(world, ActionReason::NotExposed, id);
      // Carried without turning, released at the destination and dropped onto
      // the highest surface under it.
      SimObject moved = *obj;
      moved.pose.position = p.destination->position;
      const Aabb b = moved.aabb();
      double top = -std::numeric_limits<double>::infinity();
      for (const auto& o : world.objects) {
        if (o.id == id) continue;
        const Aabb ob = o.aabb();
        const bool over = b.min.x() < ob.max.x() && b.max.x() > ob.min.x() && b.min.y() < ob.max.y() &&
                          b.max.y() > ob.min.y();
        if (over && ob.max.z() <= b.min.z() + 1e-6) top = std::max(top, ob.max.z());
      }
      if (!std::isfinite(top)) return fail(world, ActionReason::DestinationBlocked, id);
      moved.pose.position.z() += top - b.min.z();
      if (collides(world, id, moved.aabb())) return fail(world, ActionReason::DestinationBlocked, id);
      WorldState w = world;
      w.find(id)->pose = moved.pose;
      return commit(std::move(w), id, world);
    }
    case PrimitiveKind::Rotate: {
      if (!obj->movable) return fail(world, ActionReason::NotMovable, id);
      if (world.enclosed(id) || has_load(world, id)) return fail(world, ActionReason::NotExposed, id);
      SimObject moved = *obj;
      moved.pose.yaw = std::remainder(moved.pose.yaw + *p.angle, 2.0 * kPi);
      if (collides(world, id, moved.aabb())) return fail(world, ActionReason::DestinationBlocked, id);
      WorldState w = world;
      w.find(id)->pose = moved.pose;
      return commit(std::move(w), id, world);
    }
    case PrimitiveKind::Retrieve: break;
  }
  return fail(world, ActionReason::NotObserved, id);
}

Result retrieve(const WorldState& world, const std::string& node_id, const Aabb& goal_region, const Memory& mem,
                const ActionConfig&) {
  const auto bound = bind_node(mem, node_id);
  if (!bound) return fail(world, ActionReason::NotObserved);
  const std::string& id = *bound;
  const SimObject* obj = world.find(id);
  if (!obj) return fail(world, ActionReason::NotObserved, id);
  if (!obj->movable) return fail(world, ActionReason::NotMovable, id);
  if (world.enclosed(id) || has_load(world, id)) return fail(world, ActionReason::NotExposed, id);
  if (world.held && *world.held != id) return fail(world, ActionReason::GripperOccupied, id);

  // Rest on the goal floor; shift within the region if something is there.
  const Aabb half = obj->aabb();
  const Vec3 h = 0.5 * half.size();
  const Vec3 c = goal_region.center();
  const double z = goal_region.min.z() + h.z();
  const double sx = std::max(0.0, 0.5 * goal_region.size().x() - 1e-3);
  const double sy = std::max(0.0, 0.5 * goal_region.size().y() - 1e-3);
  for (int ring = 0; ring <= 4; ++ring) {
    for (int ix = -ring; ix <= ring; ++ix) {
      for (int iy = -ring; iy <= ring; ++iy) {
        if (std::max(std::abs(ix), std::abs(iy)) != ring) continue;
        const Vec3 pos(c.x() + sx * ix / 4.0, c.y() + sy * iy / 4.0, z);
        if (!goal_region.contains(pos)) continue;
        SimObject moved = *obj;
        moved.pose.position = pos;
        if (collides(world, id, moved.aabb())) continue;
        WorldState w = world;
        w.find(id)->pose.position = pos;
        w.held.reset();
        return commit(std::move(w), id, world);
      }
    }
  }
  return fail(world, ActionReason::DestinationBlocked, id);
}

}  // namespace retriever
