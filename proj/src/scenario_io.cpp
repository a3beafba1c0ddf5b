#include "retriever/scenario_io.hpp"

#include "retriever/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace retriever {

using nlohmann::json;

namespace {

std::string at(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }
std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

void reject_unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError(at(path, key), "unknown key");
  }
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(at(path, key), "missing required key");
  return *it;
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "expected a string");
  return j.get<std::string>();
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  return j.get<double>();
}

std::vector<double> get_numbers(const json& j, std::size_t n, const std::string& path) {
  if (!j.is_array() || j.size() != n) throw ValidationError(path, "expected an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(get_number(j[i], idx(path, i)));
  return out;
}

Vec3 get_vec3(const json& j, const std::string& path) {
  auto v = get_numbers(j, 3, path);
  return {v[0], v[1], v[2]};
}

Pose get_pose(const json& j, const std::string& path) {
  auto v = get_numbers(j, 6, path);
  Pose p;
  p.position = {v[0], v[1], v[2]};
  p.yaw = v[3];
  p.pitch = v[4];
  p.roll = v[5];
  return p;
}

Aabb get_box(const json& j, const std::string& path) {
  auto v = get_numbers(j, 6, path);
  Aabb b{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
  if (b.empty()) throw ValidationError(path, "box min exceeds max");
  return b;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json box_json(const Aabb& b) { return json::array({b.min.x(), b.min.y(), b.min.z(), b.max.x(), b.max.y(), b.max.z()}); }
json pose_json(const Pose& p) {
  return json::array({p.position.x(), p.position.y(), p.position.z(), p.yaw, p.pitch, p.roll});
}

ContainerState parse_state(const json& j, const std::string& path) {
  const std::string s = get_string(j, path);
  if (s == "Open") return ContainerState::Open;
  if (s == "Closed") return ContainerState::Closed;
  throw ValidationError(path, "unknown container state '" + s + "'");
}

SimObject parse_object(const json& j, const std::string& path) {
  reject_unknown_keys(j, path, {"id", "class_label", "fine_label", "pose", "extent", "movable", "facets",
                                "semantic_tag", "placement"});
  SimObject o;
  o.id = get_string(require(j, "id", path), at(path, "id"));
  if (o.id.empty()) throw ValidationError(at(path, "id"), "empty id");
  o.class_label = get_string(require(j, "class_label", path), at(path, "class_label"));
  o.fine_label = j.contains("fine_label") ? get_string(j["fine_label"], at(path, "fine_label")) : o.class_label;
  o.pose = get_pose(require(j, "pose", path), at(path, "pose"));
  o.extent = get_vec3(require(j, "extent", path), at(path, "extent"));
  if ((o.extent.array() <= 0.0).any()) throw ValidationError(at(path, "extent"), "extent components must be > 0");
  if (j.contains("movable")) {
    if (!j["movable"].is_boolean()) throw ValidationError(at(path, "movable"), "expected a boolean");
    o.movable = j["movable"].get<bool>();
  } else {
    o.movable = label_is_movable(o.class_label);
  }
  if (j.contains("semantic_tag")) o.semantic_tag = get_string(j["semantic_tag"], at(path, "semantic_tag"));
  std::array<std::optional<Descriptor>, 6> overrides;
  if (j.contains("facets")) {
    const std::string fpath = at(path, "facets");
    if (!j["facets"].is_object()) throw ValidationError(fpath, "expected an object");
    for (const auto& [key, val] : j["facets"].items()) {
      const std::string kpath = at(fpath, key);
      auto f = parse_facet(key);
      if (!f) throw ValidationError(kpath, "unknown facet direction");
      reject_unknown_keys(val, kpath, {"tag", "descriptor"});
      if (val.contains("tag")) o.facet(*f).tag = get_string(val["tag"], at(kpath, "tag"));
      if (val.contains("descriptor")) {
        auto d = get_numbers(val["descriptor"], kDescriptorDim, at(kpath, "descriptor"));
        Descriptor desc{};
        std::copy(d.begin(), d.end(), desc.begin());
        overrides[static_cast<int>(*f)] = desc;
      }
    }
  }
  o.reset_facet_descriptors();
  for (int i = 0; i < 6; ++i)
    if (overrides[i]) o.facets[i].descriptor = *overrides[i];
  if (j.contains("placement")) {
    const std::string ppath = at(path, "placement");
    const json& pj = j["placement"];
    reject_unknown_keys(pj, ppath, {"relation", "ref"});
    const std::string rel = get_string(require(pj, "relation", ppath), at(ppath, "relation"));
    auto r = parse_relation(rel);
    if (!r) throw ValidationError(at(ppath, "relation"), "unknown relation '" + rel + "'");
    o.placement = Placement{*r, get_string(require(pj, "ref", ppath), at(ppath, "ref"))};
  }
  return o;
}

Container parse_container(const json& j, const std::string& path, const WorldState& w) {
  reject_unknown_keys(j, path, {"object_id", "state", "kind", "interior", "handle", "aperture"});
  Container c;
  c.object_id = get_string(require(j, "object_id", path), at(path, "object_id"));
  const SimObject* owner = w.find(c.object_id);
  if (!owner) throw ValidationError(at(path, "object_id"), "no object with id '" + c.object_id + "'");
  c.state = parse_state(require(j, "state", path), at(path, "state"));
  const std::string kind = get_string(require(j, "kind", path), at(path, "kind"));
  if (kind == "Drawer") {
    c.kind = ContainerKind::Drawer;
    c.aperture = Facet::PosZ;
  } else if (kind == "Cabinet") {
    c.kind = ContainerKind::Cabinet;
    c.aperture = Facet::NegY;
  } else {
    throw ValidationError(at(path, "kind"), "unknown container kind '" + kind + "'");
  }
  if (j.contains("aperture")) {
    const std::string a = get_string(j["aperture"], at(path, "aperture"));
    auto f = parse_facet(a);
    if (!f) throw ValidationError(at(path, "aperture"), "unknown facet direction '" + a + "'");
    c.aperture = *f;
  }
  const Aabb body = owner->aabb();
  c.interior_region = j.contains("interior") ? get_box(j["interior"], at(path, "interior"))
                                             : body.inflated(-kContainerWall);
  if (j.contains("handle")) {
    c.handle_point = get_vec3(j["handle"], at(path, "handle"));
  } else {
    const OrientedBox box = owner->box();
    c.handle_point = box.to_world(Vec3(0.0, -box.half.y(), 0.0));
  }
  return c;
}

InterventionScript parse_intervention(const json& j, const std::string& path, int& trigger) {
  reject_unknown_keys(j, path, {"trigger_step", "kind", "id", "pose", "state"});
  const json& t = require(j, "trigger_step", path);
  if (!t.is_number_integer()) throw ValidationError(at(path, "trigger_step"), "expected an integer");
  trigger = t.get<int>();
  InterventionScript s;
  const std::string kind = get_string(require(j, "kind", path), at(path, "kind"));
  s.id = get_string(require(j, "id", path), at(path, "id"));
  if (kind == "MoveObject") {
    s.kind = InterventionScript::Kind::MoveObject;
    s.pose = get_pose(require(j, "pose", path), at(path, "pose"));
  } else if (kind == "SetContainer") {
    s.kind = InterventionScript::Kind::SetContainer;
    s.state = parse_state(require(j, "state", path), at(path, "state"));
  } else if (kind == "RemoveObject") {
    s.kind = InterventionScript::Kind::RemoveObject;
  } else {
    throw ValidationError(at(path, "kind"), "unknown intervention kind '" + kind + "'");
  }
  return s;
}

void verify_placements(const WorldState& w) {
  for (std::size_t i = 0; i < w.objects.size(); ++i) {
    const SimObject& o = w.objects[i];
    if (!o.placement) continue;
    const std::string path = idx("objects", i) + ".placement";
    if (!w.find(o.placement->ref)) throw ValidationError(path + ".ref", "no object with id '" + o.placement->ref + "'");
    const auto holds = [&](const std::map<std::string, std::string>& m) {
      auto it = m.find(o.id);
      return it != m.end() && it->second == o.placement->ref;
    };
    if (o.placement->relation == Relation::On && !holds(w.on_top_of))
      throw ValidationError(path, "'" + o.id + "' does not rest on '" + o.placement->ref + "'");
    if (o.placement->relation == Relation::Inside && !holds(w.inside_of))
      throw ValidationError(path, "'" + o.id + "' is not inside '" + o.placement->ref + "'");
  }
}

}  // namespace

CameraPose default_initial_camera() {
  return CameraPose::look_at(Vec3(-0.32, -0.40, 0.55), Vec3(-0.30, -0.15, 0.0));
}

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  reject_unknown_keys(root, "", {"name", "category", "seed", "camera", "goal_region", "robot_base", "objects",
                                 "containers", "instructions", "targets", "interventions", "budgets"});
  Scenario s;
  s.name = get_string(require(root, "name", ""), "name");
  const std::string cat = get_string(require(root, "category", ""), "category");
  auto c = parse_category(cat);
  if (!c) throw ValidationError("category", "unknown category '" + cat + "'");
  s.category = *c;
  const json& seed = require(root, "seed", "");
  if (!seed.is_number_integer()) throw ValidationError("seed", "expected an integer");
  s.seed = seed.get<std::uint64_t>();

  WorldState& w = s.initial_world;
  if (root.contains("camera")) {
    const json& cj = root["camera"];
    reject_unknown_keys(cj, "camera", {"position", "forward", "up", "look_at"});
    const Vec3 pos = get_vec3(require(cj, "position", "camera"), "camera.position");
    if (cj.contains("look_at")) {
      w.camera = CameraPose::look_at(pos, get_vec3(cj["look_at"], "camera.look_at"));
    } else {
      w.camera.position = pos;
      w.camera.forward = get_vec3(require(cj, "forward", "camera"), "camera.forward");
      w.camera.up = get_vec3(require(cj, "up", "camera"), "camera.up");
    }
  } else {
    w.camera = default_initial_camera();
  }
  w.goal_region = root.contains("goal_region") ? get_box(root["goal_region"], "goal_region")
                                               : Aabb{{0.40, -0.40, 0.0}, {0.60, -0.25, 0.25}};
  if (root.contains("robot_base")) w.robot_base = get_vec3(root["robot_base"], "robot_base");

  const json& objs = require(root, "objects", "");
  if (!objs.is_array()) throw ValidationError("objects", "expected an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    SimObject o = parse_object(objs[i], idx("objects", i));
    if (!ids.insert(o.id).second) throw ValidationError(idx("objects", i) + ".id", "duplicate id '" + o.id + "'");
    w.objects.push_back(std::move(o));
  }
  if (root.contains("containers")) {
    const json& cs = root["containers"];
    if (!cs.is_array()) throw ValidationError("containers", "expected an array");
    std::set<std::string> owners;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      Container ct = parse_container(cs[i], idx("containers", i), w);
      if (!owners.insert(ct.object_id).second)
        throw ValidationError(idx("containers", i) + ".object_id", "object already has a container");
      w.containers.push_back(ct);
    }
  }
  w.recompute_relations();

  const json& ins = require(root, "instructions", "");
  if (!ins.is_array()) throw ValidationError("instructions", "expected an array");
  for (std::size_t i = 0; i < ins.size(); ++i) s.instructions.push_back(get_string(ins[i], idx("instructions", i)));
  const json& tg = require(root, "targets", "");
  if (!tg.is_array()) throw ValidationError("targets", "expected an array");
  for (std::size_t i = 0; i < tg.size(); ++i) {
    std::string t = get_string(tg[i], idx("targets", i));
    if (!w.find(t)) throw ValidationError(idx("targets", i), "no object with id '" + t + "'");
    s.target_ids.push_back(std::move(t));
  }
  if (s.target_ids.size() != s.instructions.size())
    throw ValidationError("targets", "expected one target per instruction");

  if (root.contains("interventions")) {
    const json& iv = root["interventions"];
    if (!iv.is_array()) throw ValidationError("interventions", "expected an array");
    for (std::size_t i = 0; i < iv.size(); ++i) {
      ScheduledIntervention si;
      si.script = parse_intervention(iv[i], idx("interventions", i), si.trigger_step);
      const bool known = si.script.kind == InterventionScript::Kind::SetContainer ? w.container(si.script.id) != nullptr
                                                                                  : w.find(si.script.id) != nullptr;
      if (!known) throw ValidationError(idx("interventions", i) + ".id", "unknown entity '" + si.script.id + "'");
      s.interventions.push_back(si);
    }
  }
  if (root.contains("budgets")) {
    const json& b = root["budgets"];
    reject_unknown_keys(b, "budgets", {"max_steps", "max_reasoner_calls"});
    if (b.contains("max_steps")) s.budgets.max_steps = static_cast<int>(get_number(b["max_steps"], "budgets.max_steps"));
    if (b.contains("max_reasoner_calls"))
      s.budgets.max_reasoner_calls =
          static_cast<int>(get_number(b["max_reasoner_calls"], "budgets.max_reasoner_calls"));
    if (s.budgets.max_steps < 0 || s.budgets.max_reasoner_calls < 0)
      throw ValidationError("budgets", "budgets must be non-negative");
  }

  verify_placements(w);
  try {
    check_world_invariants(w);
  } catch (const InvariantViolation& e) {
    throw ValidationError("objects", e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_string(const Scenario& s) {
  const WorldState& w = s.initial_world;
  json root;
  root["name"] = s.name;
  root["category"] = std::string(category_name(s.category));
  root["seed"] = s.seed;
  root["camera"] = {{"position", vec_json(w.camera.position)},
                    {"forward", vec_json(w.camera.forward)},
                    {"up", vec_json(w.camera.up)}};
  root["goal_region"] = box_json(w.goal_region);
  root["robot_base"] = vec_json(w.robot_base);
  json objs = json::array();
  for (const auto& o : w.objects) {
    json j = {{"id", o.id},
              {"class_label", o.class_label},
              {"fine_label", o.fine_label},
              {"pose", pose_json(o.pose)},
              {"extent", vec_json(o.extent)},
              {"movable", o.movable}};
    json facets = json::object();
    for (Facet f : kAllFacets)
      if (!o.facet(f).tag.empty()) facets[std::string(facet_name(f))] = {{"tag", o.facet(f).tag}};
    if (!facets.empty()) j["facets"] = facets;
    if (!o.semantic_tag.empty()) j["semantic_tag"] = o.semantic_tag;
    if (o.placement)
      j["placement"] = {{"relation", std::string(relation_name(o.placement->relation))}, {"ref", o.placement->ref}};
    objs.push_back(j);
  }
  root["objects"] = objs;
  json cs = json::array();
  for (const auto& c : w.containers) {
    cs.push_back({{"object_id", c.object_id},
                  {"state", c.state == ContainerState::Open ? "Open" : "Closed"},
                  {"kind", c.kind == ContainerKind::Drawer ? "Drawer" : "Cabinet"},
                  {"interior", box_json(c.interior_region)},
                  {"handle", vec_json(c.handle_point)},
                  {"aperture", std::string(facet_name(c.aperture))}});
  }
  root["containers"] = cs;
  root["instructions"] = s.instructions;
  root["targets"] = s.target_ids;
  json iv = json::array();
  for (const auto& si : s.interventions) {
    json j = {{"trigger_step", si.trigger_step}, {"id", si.script.id}};
    switch (si.script.kind) {
      case InterventionScript::Kind::MoveObject:
        j["kind"] = "MoveObject";
        j["pose"] = pose_json(si.script.pose);
        break;
      case InterventionScript::Kind::SetContainer:
        j["kind"] = "SetContainer";
        j["state"] = si.script.state == ContainerState::Open ? "Open" : "Closed";
        break;
      case InterventionScript::Kind::RemoveObject: j["kind"] = "RemoveObject"; break;
    }
    iv.push_back(j);
  }
  root["interventions"] = iv;
  root["budgets"] = {{"max_steps", s.budgets.max_steps}, {"max_reasoner_calls", s.budgets.max_reasoner_calls}};
  return root.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << scenario_to_string(scenario);
}

}  // namespace retriever
