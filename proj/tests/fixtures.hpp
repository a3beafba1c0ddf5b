// Small hand-built worlds shared by the unit tests.
#pragma once

#include "retriever/world.hpp"

namespace fixture {

using namespace retriever;

inline SimObject object(const std::string& id, const std::string& label, const Vec3& center, const Vec3& half,
                        bool movable = true) {
  SimObject o;
  o.id = id;
  o.class_label = o.fine_label = label;
  o.pose.position = center;
  o.extent = half;
  o.movable = movable;
  o.reset_facet_descriptors();
  return o;
}

inline SimObject table() { return object("table", "table", Vec3(0, 0, -0.02), Vec3(0.6, 0.4, 0.02), false); }

inline Container container_for(const SimObject& owner, ContainerKind kind) {
  Container c;
  c.object_id = owner.id;
  c.kind = kind;
  c.aperture = kind == ContainerKind::Drawer ? Facet::PosZ : Facet::NegY;
  c.interior_region = owner.aabb().inflated(-kContainerWall);
  c.handle_point = Vec3(owner.pose.position.x(), owner.aabb().min.y(), owner.pose.position.z());
  return c;
}

/// Table, a closed cabinet holding a lotion, a free mug in front and a camera
/// looking at the front of the table.
inline WorldState cabinet_world() {
  WorldState w;
  w.objects.push_back(table());
  SimObject cab = object("cabinet", "cabinet", Vec3(0.0, 0.2, 0.09), Vec3(0.12, 0.09, 0.09), false);
  w.containers.push_back(container_for(cab, ContainerKind::Cabinet));
  w.objects.push_back(cab);
  w.objects.push_back(object("lotion", "lotion", Vec3(0.0, 0.2, 0.045), Vec3(0.03, 0.025, 0.035)));
  w.objects.push_back(object("mug", "mug", Vec3(-0.25, -0.1, 0.04), Vec3(0.04, 0.04, 0.04)));
  w.goal_region = Aabb{{0.40, -0.40, 0.0}, {0.60, -0.25, 0.25}};
  w.camera = CameraPose::look_at(Vec3(0.0, -0.6, 0.45), Vec3(0.0, 0.0, 0.05));
  w.recompute_relations();
  return w;
}

inline Scenario scenario_of(const WorldState& w, const std::string& instruction, const std::string& target) {
  Scenario s;
  s.name = "fixture";
  s.initial_world = w;
  s.instructions = {instruction};
  s.target_ids = {target};
  return s;
}

}  // namespace fixture
