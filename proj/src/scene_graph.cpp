#include "retriever/scene_graph.hpp"

#include "retriever/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <functional>

namespace retriever {

using nlohmann::json;

Aabb SceneNode::bounds() const {
  if (container && !container->body.empty()) return container->body;
  return Aabb::of(merged_points);
}

Vec3 SceneNode::center() const {
  const Aabb b = bounds();
  return b.empty() ? Vec3::Zero() : b.center();
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Geometric: return "Geometric";
    case Provenance::Semantic: return "Semantic";
    case Provenance::Action: return "Action";
  }
  return "?";
}

SceneNode* SceneGraph::find(const std::string& id) {
  auto it = nodes.find(id);
  return it == nodes.end() ? nullptr : &it->second;
}

const SceneNode* SceneGraph::find(const std::string& id) const {
  auto it = nodes.find(id);
  return it == nodes.end() ? nullptr : &it->second;
}

void SceneGraph::add_node(SceneNode node) {
  const std::string id = node.node_id;
  nodes[id] = std::move(node);
}

void SceneGraph::remove_node(const std::string& id) {
  nodes.erase(id);
  std::erase_if(edges, [&](const SceneEdge& e) { return e.src == id || e.dst == id; });
}

bool SceneGraph::add_edge(SceneEdge edge) {
  if (edge.src == edge.dst || !find(edge.src) || !find(edge.dst)) return false;
  auto pos = std::lower_bound(edges.begin(), edges.end(), edge,
                              [](const SceneEdge& a, const SceneEdge& b) { return a.key() < b.key(); });
  if (pos != edges.end() && pos->key() == edge.key()) return false;
  edges.insert(pos, std::move(edge));
  return true;
}

bool SceneGraph::has_edge(const std::string& src, const std::string& dst, Relation r) const {
  return std::any_of(edges.begin(), edges.end(),
                     [&](const SceneEdge& e) { return e.src == src && e.dst == dst && e.relation == r; });
}

std::vector<const SceneEdge*> SceneGraph::edges_from(const std::string& id) const {
  std::vector<const SceneEdge*> out;
  for (const auto& e : edges)
    if (e.src == id) out.push_back(&e);
  return out;
}

std::vector<const SceneEdge*> SceneGraph::edges_to(const std::string& id) const {
  std::vector<const SceneEdge*> out;
  for (const auto& e : edges)
    if (e.dst == id) out.push_back(&e);
  return out;
}

std::size_t SceneGraph::known_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const auto& kv) { return kv.second.kind == NodeKind::Known; }));
}

namespace {

bool has_cycle(const SceneGraph& g, Relation rel) {
  std::map<std::string, int> color;
  std::function<bool(const std::string&)> visit = [&](const std::string& n) {
    color[n] = 1;
    for (const auto& e : g.edges) {
      if (e.src != n || e.relation != rel) continue;
      const int c = color[e.dst];
      if (c == 1) return true;
      if (c == 0 && visit(e.dst)) return true;
    }
    color[n] = 2;
    return false;
  };
  for (const auto& [id, _] : g.nodes)
    if (color[id] == 0 && visit(id)) return true;
  return false;
}

}  // namespace

void SceneGraph::check_invariants() const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const SceneEdge& e = edges[i];
    if (e.src == e.dst) throw InvariantViolation("self-loop edge on " + e.src);
    if (!find(e.src) || !find(e.dst)) throw InvariantViolation("dangling edge " + e.src + "->" + e.dst);
    if (i > 0 && !(edges[i - 1].key() < e.key())) throw InvariantViolation("duplicate or unsorted edge");
  }
  if (has_cycle(*this, Relation::Inside)) throw InvariantViolation("Inside edges form a cycle");
  if (has_cycle(*this, Relation::On)) throw InvariantViolation("On edges form a cycle");
  for (const auto& [id, n] : nodes) {
    if (id != n.node_id) throw InvariantViolation("node key mismatch for " + id);
    if (n.attrs.conf < 0.0 || n.attrs.conf > 1.0) throw InvariantViolation("confidence out of range on " + id);
    if (n.kind == NodeKind::Known) {
      if (n.obs_history.empty() || n.merged_points.empty())
        throw InvariantViolation("known node without observations: " + id);
    } else {
      if (!n.obs_history.empty() || !n.merged_points.empty() || n.attrs.name != "unknown")
        throw InvariantViolation("unknown node carries observations: " + id);
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json points(const PointSet& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(vec(p));
  return a;
}

PointSet points(const json& j) {
  PointSet out;
  for (const auto& p : j) out.push_back(vec(p));
  return out;
}

json state_json(ContainerState s) { return s == ContainerState::Open ? "Open" : "Closed"; }
ContainerState state_from(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "Open") return ContainerState::Open;
  if (s == "Closed") return ContainerState::Closed;
  throw json::type_error::create(302, "bad container state " + s, nullptr);
}

Relation relation_from(const json& j) {
  auto r = parse_relation(j.get<std::string>());
  if (!r) throw json::type_error::create(302, "bad relation " + j.get<std::string>(), nullptr);
  return *r;
}

}  // namespace

void to_json(json& j, const Aabb& b) {
  if (b.empty()) {
    j = nullptr;
    return;
  }
  j = json::array({b.min.x(), b.min.y(), b.min.z(), b.max.x(), b.max.y(), b.max.z()});
}

void from_json(const json& j, Aabb& b) {
  if (j.is_null()) {
    b = Aabb{};
    return;
  }
  b = Aabb{{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()},
           {j.at(3).get<double>(), j.at(4).get<double>(), j.at(5).get<double>()}};
}

void to_json(json& j, const CameraPose& p) {
  j = {{"position", vec(p.position)}, {"forward", vec(p.forward)}, {"up", vec(p.up)}};
}

void from_json(const json& j, CameraPose& p) {
  p.position = vec(j.at("position"));
  p.forward = vec(j.at("forward"));
  p.up = vec(j.at("up"));
}

void to_json(json& j, const CellKey& c) { j = json::array({c.x, c.y, c.z}); }
void from_json(const json& j, CellKey& c) {
  c.x = j.at(0).get<int>();
  c.y = j.at(1).get<int>();
  c.z = j.at(2).get<int>();
}

void to_json(json& j, const NodeAttributes& a) {
  j = {{"name", a.name}, {"movable", a.movable}, {"conf", a.conf},
       {"occl", a.occl}, {"view", a.view},       {"desc", a.desc}};
}

void from_json(const json& j, NodeAttributes& a) {
  a.name = j.at("name").get<std::string>();
  a.movable = j.at("movable").get<bool>();
  a.conf = j.at("conf").get<double>();
  a.occl = j.at("occl").get<bool>();
  a.view = j.at("view").get<bool>();
  a.desc = j.at("desc").get<std::string>();
}

void to_json(json& j, const ObservationRecord& r) {
  j = {{"step", r.step},
       {"descriptor", r.descriptor},
       {"label", r.label},
       {"visible_fraction", r.visible_fraction},
       {"frustum_clipped", r.frustum_clipped},
       {"facet_tags", r.facet_tags}};
}

void from_json(const json& j, ObservationRecord& r) {
  r.step = j.at("step").get<int>();
  r.descriptor = j.at("descriptor").get<Descriptor>();
  r.label = j.at("label").get<std::string>();
  r.visible_fraction = j.at("visible_fraction").get<double>();
  r.frustum_clipped = j.at("frustum_clipped").get<bool>();
  r.facet_tags = j.at("facet_tags").get<std::vector<std::string>>();
}

void to_json(json& j, const SceneNode& n) {
  j = {{"node_id", n.node_id},
       {"kind", n.kind == NodeKind::Known ? "Known" : "Unknown"},
       {"obs_history", n.obs_history},
       {"merged_points", points(n.merged_points)},
       {"last_points", points(n.last_points)},
       {"attrs", n.attrs},
       {"created_step", n.created_step},
       {"last_seen_step", n.last_seen_step},
       {"tags", n.tags},
       {"ap_attempts", n.ap_attempts},
       {"stale_step", n.stale_step}};
  if (n.container) {
    const auto& c = *n.container;
    j["container"] = {{"state", state_json(c.state)},
                      {"aperture_normal", vec(c.aperture_normal)},
                      {"handle_normal", vec(c.handle_normal)},
                      {"handle_point", vec(c.handle_point)},
                      {"body", c.body},
                      {"handle_seen_step", c.handle_seen_step}};
  }
  if (n.region) {
    j["region"] = {{"relation", std::string(relation_name(n.region->relation))},
                   {"parent", n.region->parent},
                   {"cells", n.region->cells}};
  }
}

void from_json(const json& j, SceneNode& n) {
  n.node_id = j.at("node_id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "Known" && kind != "Unknown") throw json::type_error::create(302, "bad node kind " + kind, nullptr);
  n.kind = kind == "Known" ? NodeKind::Known : NodeKind::Unknown;
  n.obs_history = j.at("obs_history").get<std::vector<ObservationRecord>>();
  n.merged_points = points(j.at("merged_points"));
  n.last_points = points(j.at("last_points"));
  n.attrs = j.at("attrs").get<NodeAttributes>();
  n.created_step = j.at("created_step").get<int>();
  n.last_seen_step = j.at("last_seen_step").get<int>();
  n.tags = j.at("tags").get<std::set<std::string>>();
  n.ap_attempts = j.at("ap_attempts").get<int>();
  n.stale_step = j.value("stale_step", -1);
  n.container.reset();
  if (j.contains("container")) {
    const json& c = j["container"];
    ContainerBelief b;
    b.state = state_from(c.at("state"));
    b.aperture_normal = vec(c.at("aperture_normal"));
    b.handle_normal = vec(c.at("handle_normal"));
    b.handle_point = vec(c.at("handle_point"));
    b.body = c.at("body").get<Aabb>();
    b.handle_seen_step = c.at("handle_seen_step").get<int>();
    n.container = b;
  }
  n.region.reset();
  if (j.contains("region")) {
    const json& r = j["region"];
    UnknownRegion reg;
    reg.relation = relation_from(r.at("relation"));
    reg.parent = r.at("parent").get<std::string>();
    reg.cells = r.at("cells").get<std::vector<CellKey>>();
    n.region = reg;
  }
}

void to_json(json& j, const SceneEdge& e) {
  j = {{"src", e.src},
       {"dst", e.dst},
       {"relation", std::string(relation_name(e.relation))},
       {"provenance", std::string(provenance_name(e.provenance))},
       {"created_step", e.created_step}};
}

void from_json(const json& j, SceneEdge& e) {
  e.src = j.at("src").get<std::string>();
  e.dst = j.at("dst").get<std::string>();
  e.relation = relation_from(j.at("relation"));
  const auto p = j.at("provenance").get<std::string>();
  if (p == "Geometric") e.provenance = Provenance::Geometric;
  else if (p == "Semantic") e.provenance = Provenance::Semantic;
  else if (p == "Action") e.provenance = Provenance::Action;
  else throw json::type_error::create(302, "bad provenance " + p, nullptr);
  e.created_step = j.at("created_step").get<int>();
}

void to_json(json& j, const SceneGraph& g) {
  json nodes = json::array();
  for (const auto& [_, n] : g.nodes) nodes.push_back(n);
  j = {{"nodes", nodes}, {"edges", g.edges}};
}

void from_json(const json& j, SceneGraph& g) {
  g = SceneGraph{};
  for (const auto& n : j.at("nodes")) g.add_node(n.get<SceneNode>());
  for (const auto& e : j.at("edges")) g.edges.push_back(e.get<SceneEdge>());
  std::sort(g.edges.begin(), g.edges.end(), [](const SceneEdge& a, const SceneEdge& b) { return a.key() < b.key(); });
}

void to_json(json& j, const Detection& d) {
  j = {{"visible_points", points(d.visible_points)},
       {"descriptor", d.descriptor},
       {"observed_label", d.observed_label},
       {"visible_fraction", d.visible_fraction},
       {"frustum_clipped", d.frustum_clipped},
       {"facet_tags", d.facet_tags},
       {"truth_id", d.truth_id}};
  if (d.container) {
    const auto& c = *d.container;
    j["container"] = {{"state", state_json(c.state)},
                      {"aperture_normal", vec(c.aperture_normal)},
                      {"handle_normal", vec(c.handle_normal)},
                      {"handle_point", vec(c.handle_point)},
                      {"handle_visible", c.handle_visible},
                      {"body", c.body}};
  }
}

void from_json(const json& j, Detection& d) {
  d.visible_points = points(j.at("visible_points"));
  d.descriptor = j.at("descriptor").get<Descriptor>();
  d.observed_label = j.at("observed_label").get<std::string>();
  d.visible_fraction = j.at("visible_fraction").get<double>();
  d.frustum_clipped = j.at("frustum_clipped").get<bool>();
  d.facet_tags = j.at("facet_tags").get<std::vector<std::string>>();
  d.truth_id = j.value("truth_id", std::string{});
  d.container.reset();
  if (j.contains("container")) {
    const json& c = j["container"];
    ContainerCue cue;
    cue.state = state_from(c.at("state"));
    cue.aperture_normal = vec(c.at("aperture_normal"));
    cue.handle_normal = vec(c.at("handle_normal"));
    cue.handle_point = vec(c.at("handle_point"));
    cue.handle_visible = c.at("handle_visible").get<bool>();
    cue.body = c.at("body").get<Aabb>();
    d.container = cue;
  }
}

void to_json(json& j, const Observation& o) {
  j = {{"step", o.step}, {"camera", o.camera}, {"detections", o.detections}};
}

void from_json(const json& j, Observation& o) {
  o.step = j.at("step").get<int>();
  o.camera = j.at("camera").get<CameraPose>();
  o.detections = j.at("detections").get<std::vector<Detection>>();
}

json graph_summary(const SceneGraph& g) {
  json nodes = json::array();
  for (const auto& [id, n] : g.nodes) {
    json jn = {{"id", id}, {"kind", n.kind == NodeKind::Known ? "Known" : "Unknown"}, {"name", n.attrs.name}};
    if (n.region) jn["region"] = std::string(relation_name(n.region->relation)) + ":" + n.region->parent;
    nodes.push_back(jn);
  }
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back(json::array({e.src, std::string(relation_name(e.relation)), e.dst}));
  return {{"nodes", nodes}, {"edges", edges}};
}

}  // namespace retriever
