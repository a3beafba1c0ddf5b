#include "retriever/memory.hpp"

#include "retriever/errors.hpp"
#include "retriever/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace retriever {

// ---------------------------------------------------------------------------
// Cells

CellKey cell_of(const Vec3& p, double cell) {
  return {static_cast<int>(std::floor(p.x() / cell)), static_cast<int>(std::floor(p.y() / cell)),
          static_cast<int>(std::floor(p.z() / cell))};
}

Vec3 cell_center(const CellKey& c, double cell) {
  return {(c.x + 0.5) * cell, (c.y + 0.5) * cell, (c.z + 0.5) * cell};
}

std::vector<CellKey> workspace_cells(const MemoryConfig& cfg) {
  const CellKey lo = cell_of(cfg.workspace.min + Vec3::Constant(1e-9), cfg.cell);
  const CellKey hi = cell_of(cfg.workspace.max - Vec3::Constant(1e-9), cfg.cell);
  std::vector<CellKey> out;
  for (int x = lo.x; x <= hi.x; ++x)
    for (int y = lo.y; y <= hi.y; ++y)
      for (int z = lo.z; z <= hi.z; ++z) out.push_back({x, y, z});
  return out;
}

double explored_fraction(const Memory& mem, const UnknownRegion& region) {
  if (region.cells.empty()) return 1.0;
  std::size_t n = 0;
  for (const auto& c : region.cells) n += mem.explored.count(c);
  return static_cast<double>(n) / static_cast<double>(region.cells.size());
}

Vec3 region_centroid(const UnknownRegion& region, double cell) {
  Vec3 s = Vec3::Zero();
  for (const auto& c : region.cells) s += cell_center(c, cell);
  return region.cells.empty() ? s : Vec3(s / static_cast<double>(region.cells.size()));
}

Aabb region_bounds(const UnknownRegion& region, double cell) {
  Aabb b;
  for (const auto& c : region.cells) {
    b.expand(cell_center(c, cell) - Vec3::Constant(0.5 * cell));
    b.expand(cell_center(c, cell) + Vec3::Constant(0.5 * cell));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Matching

namespace {

std::vector<const SceneNode*> known_nodes(const SceneGraph& g) {
  std::vector<const SceneNode*> out;
  for (const auto& [_, n] : g.nodes)
    if (n.kind == NodeKind::Known) out.push_back(&n);
  return out;
}

}  // namespace

std::vector<std::string> match_detections(const SceneGraph& graph, const Observation& obs, Reasoner& reasoner,
                                          const MemoryConfig& cfg) {
  std::vector<std::string> out(obs.detections.size());
  const auto nodes = known_nodes(graph);
  if (nodes.empty() || obs.detections.empty()) return out;

  MatchInstancesRequest req;
  req.lambda = cfg.lambda;
  req.theta = cfg.theta_match;
  req.exact_limit = cfg.exact_match_limit;
  std::vector<Aabb> boxes;
  for (const SceneNode* n : nodes) {
    MatchNode mn;
    mn.node_id = n->node_id;
    mn.name = n->attrs.name;
    for (const auto& r : n->obs_history) mn.history.push_back(r.descriptor);
    req.nodes.push_back(std::move(mn));
    boxes.push_back(n->bounds());
  }
  for (const auto& d : obs.detections) {
    MatchDetection md;
    md.descriptor = d.descriptor;
    md.label = d.observed_label;
    const Vec3 c = centroid(d.visible_points);
    for (const auto& b : boxes) md.centroid_distance.push_back(b.distance_to(c));
    req.detections.push_back(std::move(md));
  }

  const auto res = ask<MatchInstancesResult>(reasoner, req);
  if (res.assignment.size() != obs.detections.size()) throw SchemaError("MatchInstances: assignment length mismatch");
  std::set<int> used;
  for (std::size_t i = 0; i < res.assignment.size(); ++i) {
    const int a = res.assignment[i];
    if (a < -1 || a >= static_cast<int>(nodes.size())) throw OutOfRange("MatchInstances: node index out of range");
    if (a >= 0) {
      if (!used.insert(a).second) throw SchemaError("MatchInstances: node assigned twice");
      out[i] = nodes[static_cast<std::size_t>(a)]->node_id;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Point sets

PointSet merge_point_sets(const PointSet& existing, const PointSet& incoming, double delta) {
  if (delta <= 0) throw std::invalid_argument("merge_point_sets: delta must be positive");
  std::map<CellKey, std::pair<Vec3, int>> voxels;
  auto add = [&](const Vec3& p) {
    auto& [sum, n] = voxels.try_emplace(cell_of(p, delta), Vec3::Zero(), 0).first->second;
    sum += p;
    ++n;
  };
  for (const auto& p : existing) add(p);
  for (const auto& p : incoming) add(p);
  PointSet out;
  out.reserve(voxels.size());
  for (const auto& [_, v] : voxels) out.push_back(v.first / v.second);
  return out;
}

// ---------------------------------------------------------------------------
// Attributes

NodeAttributes update_attributes(const SceneNode& node, Reasoner& reasoner, const MemoryConfig& cfg) {
  InferAttributesRequest req;
  req.theta_full = cfg.theta_full;
  req.items.push_back({node.node_id, node.obs_history});
  const auto res = ask<InferAttributesResult>(reasoner, req);
  if (res.attributes.size() != 1) throw SchemaError("InferAttributes: expected one attribute set");
  NodeAttributes a = res.attributes.front();
  a.conf = std::clamp(a.conf, 0.0, 1.0);
  return a;
}

// ---------------------------------------------------------------------------
// Relations

namespace {

bool replaceable(const SceneEdge& e) {
  return e.provenance == Provenance::Geometric ||
         (e.provenance == Provenance::Semantic && e.relation == Relation::Belong);
}

}  // namespace

std::vector<SceneEdge> infer_relations(const SceneGraph& graph, const CameraPose& camera,
                                       const std::vector<ActionRecord>& history, int step,
                                       const MemoryConfig& cfg) {
  const auto nodes = known_nodes(graph);
  std::vector<RelationNode> rn;
  rn.reserve(nodes.size());
  for (const SceneNode* n : nodes) {
    RelationNode r;
    r.label = n->attrs.name;
    r.movable = n->attrs.movable;
    r.container = n->container.has_value();
    r.box = n->bounds();
    r.points = &n->merged_points;
    r.centroid = r.box.center();
    rn.push_back(std::move(r));
  }

  std::map<std::tuple<std::string, std::string, Relation>, int> previous;
  for (const auto& e : graph.edges) previous[{e.src, e.dst, e.relation}] = e.created_step;

  std::vector<SceneEdge> out;
  for (const auto& ge : geometric_relations(rn, camera, cfg.relations)) {
    SceneEdge e;
    e.src = nodes[ge.src]->node_id;
    e.dst = nodes[ge.dst]->node_id;
    e.relation = ge.relation;
    e.provenance = ge.relation == Relation::Belong ? Provenance::Semantic : Provenance::Geometric;
    auto it = previous.find({e.src, e.dst, e.relation});
    e.created_step = it == previous.end() ? step : it->second;
    out.push_back(std::move(e));
  }

  // Lifting one object to reveal another: the revealed one was under it.
  for (const auto& rec : history) {
    if (rec.action != "PickPlace" || !rec.success || rec.target_bounds.empty()) continue;
    if (!graph.find(rec.target)) continue;
    const Aabb& before = rec.target_bounds;
    for (const SceneNode* n : nodes) {
      if (n->node_id == rec.target || n->created_step <= rec.step) continue;
      const Aabb b = n->bounds();
      if (b.empty() || b.footprint_area() <= 0) continue;
      if (b.max.z() > before.min.z() + cfg.relations.contact_eps) continue;
      if (b.footprint_overlap(before) < cfg.relations.on_overlap * b.footprint_area()) continue;
      SceneEdge e{n->node_id, rec.target, Relation::Under, Provenance::Action, rec.step + 1};
      auto it = previous.find({e.src, e.dst, e.relation});
      if (it != previous.end()) e.created_step = it->second;
      out.push_back(std::move(e));
    }
  }

  // Edges the recomputation does not own survive untouched.
  for (const auto& e : graph.edges) {
    const SceneNode* s = graph.find(e.src);
    const SceneNode* d = graph.find(e.dst);
    const bool known_pair = s && d && s->kind == NodeKind::Known && d->kind == NodeKind::Known;
    if (known_pair && replaceable(e)) continue;
    out.push_back(e);
  }

  std::stable_sort(out.begin(), out.end(), [](const SceneEdge& a, const SceneEdge& b) { return a.key() < b.key(); });
  out.erase(std::unique(out.begin(), out.end(), [](const SceneEdge& a, const SceneEdge& b) { return a.key() == b.key(); }),
            out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Exploration

namespace {

struct Body {
  const SceneNode* node;
  Aabb box;
};

/// Axis index and sign of the dominant component of `n`.
std::pair<int, int> dominant_axis(const Vec3& n) {
  int k = 0;
  n.cwiseAbs().maxCoeff(&k);
  return {k, n[k] >= 0 ? 1 : -1};
}

/// True if the segment from `p` (inside `box`) towards `cam` leaves the box
/// through the face pointed at by `normal`.
bool exits_through(const Aabb& box, const Vec3& p, const Vec3& cam, const Vec3& normal) {
  const Vec3 d = cam - p;
  double t_exit = std::numeric_limits<double>::infinity();
  int axis = -1;
  int sign = 0;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-12) continue;
    const double t = d[i] > 0 ? (box.max[i] - p[i]) / d[i] : (box.min[i] - p[i]) / d[i];
    if (t < t_exit) {
      t_exit = t;
      axis = i;
      sign = d[i] > 0 ? 1 : -1;
    }
  }
  const auto [k, s] = dominant_axis(normal);
  return axis == k && sign == s;
}

struct CellContext {
  std::vector<Body> solids;      // Known, non-container
  std::vector<Body> containers;  // Known containers (body boxes)
};

CellContext cell_context(const SceneGraph& g) {
  CellContext ctx;
  for (const auto& [_, n] : g.nodes) {
    if (n.kind != NodeKind::Known) continue;
    const Aabb b = n.bounds();
    if (b.empty()) continue;
    (n.container ? ctx.containers : ctx.solids).push_back({&n, b});
  }
  return ctx;
}

enum class CellClass { Occupied, ClosedInterior, Free };

struct CellInfo {
  CellClass cls = CellClass::Free;
  const Body* container = nullptr;  // for interior cells of open containers
};

CellInfo classify(const CellContext& ctx, const Vec3& p) {
  for (const auto& s : ctx.solids)
    if (s.box.contains(p)) return {CellClass::Occupied, nullptr};
  for (const auto& c : ctx.containers) {
    if (!c.box.contains(p)) continue;
    if (c.node->container->state == ContainerState::Closed) return {CellClass::ClosedInterior, &c};
    return {CellClass::Free, &c};
  }
  return {};
}

/// Line of sight from a free cell centre to the camera, honouring apertures.
bool cell_visible(const CellContext& ctx, const CellInfo& info, const Vec3& p, const Vec3& cam,
                  const Body* ignore = nullptr) {
  if (info.container && !exits_through(info.container->box, p, cam, info.container->node->container->aperture_normal))
    return false;
  for (const auto& s : ctx.solids)
    if (&s != ignore && segment_blocked(s.box, p, cam)) return false;
  for (const auto& c : ctx.containers)
    if (&c != info.container && &c != ignore && segment_blocked(c.box, p, cam)) return false;
  return true;
}

std::vector<CellKey> interior_cells(const Aabb& body, const MemoryConfig& cfg) {
  const Aabb inner{body.min + Vec3::Constant(kContainerWall), body.max - Vec3::Constant(kContainerWall)};
  std::vector<CellKey> out;
  if (inner.empty()) return out;
  const CellKey lo = cell_of(inner.min, cfg.cell);
  const CellKey hi = cell_of(inner.max, cfg.cell);
  for (int x = lo.x; x <= hi.x; ++x)
    for (int y = lo.y; y <= hi.y; ++y)
      for (int z = lo.z; z <= hi.z; ++z) {
        const CellKey k{x, y, z};
        if (inner.contains(cell_center(k, cfg.cell))) out.push_back(k);
      }
  if (out.empty()) out.push_back(cell_of(inner.center(), cfg.cell));
  return out;
}

}  // namespace

void carve_explored(Memory& mem, const CameraPose& camera, const CameraIntrinsics& intr, const MemoryConfig& cfg) {
  const CellContext ctx = cell_context(mem.graph);
  // A closed container may have been refilled; forget what was seen inside.
  for (const auto& c : ctx.containers)
    if (c.node->container->state == ContainerState::Closed)
      for (const auto& k : interior_cells(c.box, cfg)) mem.explored.erase(k);

  for (const auto& k : workspace_cells(cfg)) {
    if (mem.explored.count(k)) continue;
    const Vec3 p = cell_center(k, cfg.cell);
    if (!intr.in_frustum(camera, p)) continue;
    const CellInfo info = classify(ctx, p);
    if (info.cls == CellClass::ClosedInterior) continue;
    if (info.cls == CellClass::Occupied || cell_visible(ctx, info, p, camera.position)) mem.explored.insert(k);
  }
}

// ---------------------------------------------------------------------------
// Unknown nodes

namespace {

std::string make_id(Memory& mem, char prefix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%03d", prefix, mem.next_serial++);
  return buf;
}

bool reaches(const SceneGraph& g, Relation rel, const std::string& from, const std::string& to) {
  std::vector<std::string> stack{from};
  std::set<std::string> seen;
  while (!stack.empty()) {
    const std::string n = stack.back();
    stack.pop_back();
    if (n == to) return true;
    if (!seen.insert(n).second) continue;
    for (const auto& e : g.edges)
      if (e.relation == rel && e.src == n) stack.push_back(e.dst);
  }
  return false;
}

bool add_edge_acyclic(SceneGraph& g, SceneEdge e) {
  if ((e.relation == Relation::On || e.relation == Relation::Inside) && reaches(g, e.relation, e.dst, e.src))
    return false;
  return g.add_edge(std::move(e));
}

const SceneNode* unknown_child(const SceneGraph& g, const std::string& parent, Relation rel) {
  for (const auto& [_, n] : g.nodes)
    if (n.kind == NodeKind::Unknown && n.region && n.region->parent == parent && n.region->relation == rel) return &n;
  return nullptr;
}

const SceneNode* table_node(const SceneGraph& g) {
  const SceneNode* best = nullptr;
  for (const auto& [_, n] : g.nodes)
    if (n.kind == NodeKind::Known && n.attrs.name == "table") {
      if (!best || n.merged_points.size() > best->merged_points.size()) best = &n;
    }
  return best;
}

struct Proposal {
  UnknownProposal info;
  std::vector<CellKey> cells;
  bool mandatory = false;
};

}  // namespace

void hypothesize_unknowns(Memory& mem, const CameraPose& camera, const CameraIntrinsics& intr, Reasoner& reasoner,
                          int step, const MemoryConfig& cfg) {
  SceneGraph& g = mem.graph;
  const CellContext ctx = cell_context(g);
  const double cell_volume = cfg.cell * cfg.cell * cfg.cell;

  // Resolve, refresh or drop existing Unknown nodes.
  std::vector<std::string> unknown_ids;
  for (const auto& [id, n] : g.nodes)
    if (n.kind == NodeKind::Unknown) unknown_ids.push_back(id);
  for (const auto& id : unknown_ids) {
    SceneNode& u = g.nodes.at(id);
    UnknownRegion& region = *u.region;
    const SceneNode* parent = g.find(region.parent);
    if (!parent || parent->kind != NodeKind::Known) {
      g.remove_node(id);
      continue;
    }
    const bool closed_interior = region.relation == Relation::Inside && parent->container &&
                                 parent->container->state == ContainerState::Closed;
    if (closed_interior) {
      region.cells = interior_cells(parent->bounds(), cfg);
      continue;
    }
    if (region.relation == Relation::Inside && !parent->container) {
      g.remove_node(id);
      continue;
    }
    if (region.relation != Relation::Inside) {
      std::erase_if(region.cells,
                    [&](const CellKey& k) { return classify(ctx, cell_center(k, cfg.cell)).cls == CellClass::Occupied; });
    }
    const bool explored = explored_fraction(mem, region) >= cfg.theta_explored;
    if (!explored && u.ap_attempts < 3 && !region.cells.empty()) continue;

    if (explored && region.relation == Relation::Inside) {
      const Aabb rb = region_bounds(region, cfg.cell);
      for (const auto& [kid, k] : g.nodes) {
        if (k.kind != NodeKind::Known || kid == region.parent || k.created_step < u.created_step) continue;
        if (!rb.contains(k.center())) continue;
        if (g.has_edge(kid, region.parent, Relation::Inside)) continue;
        add_edge_acyclic(g, {kid, region.parent, Relation::Inside, Provenance::Semantic, step});
      }
    }
    mem.retired.insert({region.parent, region.relation});
    g.remove_node(id);
  }

  std::vector<Proposal> proposals;

  // Containers.
  for (const auto& c : ctx.containers) {
    const SceneNode& n = *c.node;
    if (unknown_child(g, n.node_id, Relation::Inside)) continue;
    Proposal p;
    p.info = {n.node_id, n.attrs.name, Relation::Inside, 0.0};
    p.cells = interior_cells(c.box, cfg);
    p.info.volume = static_cast<double>(p.cells.size()) * cell_volume;
    if (n.container->state == ContainerState::Closed) {
      p.mandatory = true;
      proposals.push_back(std::move(p));
    } else if (!mem.retired.count({n.node_id, Relation::Inside})) {
      UnknownRegion r{Relation::Inside, n.node_id, p.cells};
      if (explored_fraction(mem, r) < cfg.theta_explored) proposals.push_back(std::move(p));
    }
  }

  // Camera shadows, under-regions and the unexplored frontier.
  // Keyed by id: pointer order would make proposal order depend on the heap.
  std::map<std::string, std::vector<CellKey>> shadows;
  std::map<std::string, std::vector<CellKey>> unders;
  std::vector<CellKey> frontier;
  const Vec3& cam = camera.position;
  for (const auto& k : workspace_cells(cfg)) {
    if (mem.explored.count(k)) continue;
    const Vec3 p = cell_center(k, cfg.cell);
    const CellInfo info = classify(ctx, p);
    if (info.cls != CellClass::Free) continue;
    if (!info.container) frontier.push_back(k);

    for (const auto& s : ctx.solids) {
      const SceneNode& n = *s.node;
      if (!n.attrs.movable || s.box.min.z() < cfg.cell) continue;
      if (p.z() < s.box.min.z() && p.x() >= s.box.min.x() && p.x() <= s.box.max.x() && p.y() >= s.box.min.y() &&
          p.y() <= s.box.max.y())
        unders[n.node_id].push_back(k);
    }

    if (!intr.in_frustum(camera, p)) continue;
    if (info.container && !exits_through(info.container->box, p, cam, info.container->node->container->aperture_normal))
      continue;
    const Body* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](const Body& b) {
      if (&b == info.container || is_support_label(b.node->attrs.name)) return;
      if (!segment_blocked(b.box, p, cam)) return;
      const double d = b.box.distance_to(p);
      if (d < best) {
        best = d;
        nearest = &b;
      }
    };
    for (const auto& s : ctx.solids) consider(s);
    for (const auto& c : ctx.containers) consider(c);
    if (nearest) shadows[nearest->node->node_id].push_back(k);
  }

  auto propose_region = [&](const SceneNode& parent, Relation rel, std::vector<CellKey> cells) {
    const double volume = static_cast<double>(cells.size()) * cell_volume;
    if (volume <= cfg.v_min) return;
    if (unknown_child(g, parent.node_id, rel) || mem.retired.count({parent.node_id, rel})) return;
    Proposal p;
    p.info = {parent.node_id, parent.attrs.name, rel, volume};
    p.cells = std::move(cells);
    proposals.push_back(std::move(p));
  };
  for (auto& [id, cells] : shadows) propose_region(g.nodes.at(id), Relation::Behind, std::move(cells));
  for (auto& [id, cells] : unders) propose_region(g.nodes.at(id), Relation::Under, std::move(cells));
  if (const SceneNode* table = table_node(g)) propose_region(*table, Relation::On, std::move(frontier));

  std::vector<std::size_t> optional;
  HypothesizeUnknownRequest req;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (proposals[i].mandatory) continue;
    optional.push_back(i);
    req.proposals.push_back(proposals[i].info);
  }
  std::vector<bool> accept(proposals.size(), true);
  if (!req.proposals.empty()) {
    const auto res = ask<KeepResult>(reasoner, req);
    if (res.keep.size() != req.proposals.size()) throw SchemaError("HypothesizeUnknown: answer length mismatch");
    for (std::size_t j = 0; j < optional.size(); ++j) accept[optional[j]] = res.keep[j];
  }

  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (!accept[i]) continue;
    Proposal& p = proposals[i];
    SceneNode u;
    u.node_id = make_id(mem, 'u');
    u.kind = NodeKind::Unknown;
    u.attrs.name = "unknown";
    u.attrs.desc = "unexplored region " + std::string(relation_name(p.info.relation)) + " " + p.info.parent_name;
    u.created_step = step;
    u.region = UnknownRegion{p.info.relation, p.info.parent, std::move(p.cells)};
    const std::string id = u.node_id;
    g.add_node(std::move(u));
    g.add_edge({id, p.info.parent, p.info.relation, Provenance::Semantic, step});
  }
}

// ---------------------------------------------------------------------------
// Full update

namespace {

/// Fraction of the node's points that the camera should see, judged against
/// the other believed bodies.
double expected_visible(const SceneNode& node, const CellContext& ctx, const CameraPose& camera,
                        const CameraIntrinsics& intr) {
  if (node.merged_points.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& p : node.merged_points) {
    if (!intr.in_frustum(camera, p)) continue;
    bool blocked = false;
    for (const auto* list : {&ctx.solids, &ctx.containers}) {
      for (const auto& b : *list) {
        if (b.node == &node || b.box.contains(p, 1e-3)) continue;
        if (segment_blocked(b.box, p, camera.position)) {
          blocked = true;
          break;
        }
      }
      if (blocked) break;
    }
    if (!blocked) ++n;
  }
  return static_cast<double>(n) / static_cast<double>(node.merged_points.size());
}

void apply_detection(SceneNode& node, const Detection& d, int step, double delta) {
  ObservationRecord rec{step, d.descriptor, d.observed_label, d.visible_fraction, d.frustum_clipped, d.facet_tags};
  if (!node.obs_history.empty() && node.obs_history.back().step == step) node.obs_history.back() = rec;
  else node.obs_history.push_back(rec);

  if (node.last_points != d.visible_points || node.merged_points.empty()) {
    const Aabb seen = Aabb::of(d.visible_points);
    const Aabb before = Aabb::of(node.merged_points);
    // Moved object: the old voxels no longer describe it.
    if (!before.empty() && !before.overlaps(seen, 0.01)) node.merged_points = merge_point_sets({}, d.visible_points, delta);
    else node.merged_points = merge_point_sets(node.merged_points, d.visible_points, delta);
    node.last_points = d.visible_points;
  }
  node.last_seen_step = step;
  node.tags.insert(d.facet_tags.begin(), d.facet_tags.end());
  if (d.container) {
    ContainerBelief b = node.container.value_or(ContainerBelief{});
    b.state = d.container->state;
    b.aperture_normal = d.container->aperture_normal;
    b.handle_normal = d.container->handle_normal;
    b.handle_point = d.container->handle_point;
    b.body = d.container->body;
    if (d.container->handle_visible) b.handle_seen_step = step;
    node.container = b;
  }
}

}  // namespace

Memory update_memory(const Memory& prev, const Observation& obs, Reasoner& reasoner, const CameraIntrinsics& intr,
                     const MemoryConfig& cfg) {
  Memory mem = prev;
  SceneGraph& g = mem.graph;
  const int step = obs.step;

  const auto assignment = match_detections(g, obs, reasoner, cfg);

  std::vector<std::string> updated;
  mem.detection_of.clear();
  for (std::size_t i = 0; i < obs.detections.size(); ++i) {
    const Detection& d = obs.detections[i];
    std::string id = assignment[i];
    if (id.empty()) {
      SceneNode n;
      n.node_id = make_id(mem, 'n');
      n.kind = NodeKind::Known;
      n.created_step = step;
      n.attrs.name = d.observed_label;
      id = n.node_id;
      g.add_node(std::move(n));
    }
    apply_detection(g.nodes.at(id), d, step, cfg.delta);
    mem.detection_of[id] = i;
    updated.push_back(id);
  }

  if (!updated.empty()) {
    InferAttributesRequest req;
    req.theta_full = cfg.theta_full;
    for (const auto& id : updated) req.items.push_back({id, g.nodes.at(id).obs_history});
    const auto res = ask<InferAttributesResult>(reasoner, req);
    if (res.attributes.size() != updated.size()) throw SchemaError("InferAttributes: answer length mismatch");
    for (std::size_t i = 0; i < updated.size(); ++i) {
      NodeAttributes a = res.attributes[i];
      a.conf = std::clamp(a.conf, 0.0, 1.0);
      SceneNode& n = g.nodes.at(updated[i]);
      if (n.stale_step >= 0 && n.last_seen_step == step) n.stale_step = -1;
      n.attrs = a;
    }
  }

  // Vanished objects: expected in plain view but not detected.
  {
    const CellContext ctx = cell_context(g);
    for (auto& [id, n] : g.nodes) {
      if (n.kind != NodeKind::Known || mem.detection_of.count(id) || n.stale_step == step) continue;
      if (expected_visible(n, ctx, obs.camera, intr) < cfg.theta_full) continue;
      n.stale_step = step;
      n.attrs.conf *= cfg.gamma_stale;
      std::erase_if(g.edges, [&](const SceneEdge& e) {
        return e.provenance == Provenance::Geometric && (e.src == id || e.dst == id);
      });
    }
  }

  std::vector<SceneEdge> edges = infer_relations(g, obs.camera, mem.history, step, cfg);
  // Geometric edges of stale nodes stay dropped until they are seen again.
  std::erase_if(edges, [&](const SceneEdge& e) {
    if (e.provenance != Provenance::Geometric) return false;
    const SceneNode* s = g.find(e.src);
    const SceneNode* d = g.find(e.dst);
    return (s && s->stale_step >= 0) || (d && d->stale_step >= 0);
  });
  std::vector<std::size_t> fresh;
  InferRelationsVetoRequest veto;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const SceneEdge& e = edges[i];
    if (g.has_edge(e.src, e.dst, e.relation)) continue;
    fresh.push_back(i);
    veto.edges.push_back({e.src, g.nodes.at(e.src).attrs.name, e.dst, g.nodes.at(e.dst).attrs.name, e.relation});
  }
  std::vector<bool> keep(edges.size(), true);
  if (!veto.edges.empty()) {
    const auto res = ask<KeepResult>(reasoner, veto);
    if (res.keep.size() != veto.edges.size()) throw SchemaError("InferRelationsVeto: answer length mismatch");
    for (std::size_t j = 0; j < fresh.size(); ++j) keep[fresh[j]] = res.keep[j];
  }
  g.edges.clear();
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (keep[i]) add_edge_acyclic(g, edges[i]);

  carve_explored(mem, obs.camera, intr, cfg);
  hypothesize_unknowns(mem, obs.camera, intr, reasoner, step, cfg);

  mem.last_observation = obs;
  g.check_invariants();
  return mem;
}

// ---------------------------------------------------------------------------
// Views

DecideRequest make_decide_request(const Memory& mem, const std::string& instruction, int step,
                                  const MemoryConfig& cfg) {
  DecideRequest req;
  req.instruction = instruction;
  req.step = step;
  req.edges = mem.graph.edges;
  req.history = mem.history;
  for (const auto& [id, n] : mem.graph.nodes) {
    NodeView v;
    v.id = id;
    v.known = n.kind == NodeKind::Known;
    v.name = n.attrs.name;
    v.tags.assign(n.tags.begin(), n.tags.end());
    v.movable = n.attrs.movable;
    v.conf = n.attrs.conf;
    v.occl = n.attrs.occl;
    v.view = n.attrs.view;
    v.last_seen_step = n.last_seen_step;
    v.detected_last = mem.detection_of.count(id) > 0 && mem.last_observation.step == step;
    if (n.container) {
      v.container_state = n.container->state;
      // Only a handle in the current view can be grabbed.
      if (v.detected_last) {
        const Detection& d = mem.last_observation.detections[mem.detection_of.at(id)];
        v.handle_seen = d.container && d.container->handle_visible;
      }
    }
    v.ap_attempts = n.ap_attempts;
    if (n.region) {
      v.region_relation = n.region->relation;
      v.region_parent = n.region->parent;
      v.region_volume = static_cast<double>(n.region->cells.size()) * cfg.cell * cfg.cell * cfg.cell;
      v.explored_fraction = explored_fraction(mem, *n.region);
      v.bounds = region_bounds(*n.region, cfg.cell);
    } else {
      v.bounds = n.bounds();
    }
    req.nodes.push_back(std::move(v));
  }
  return req;
}

SceneGraph known_subgraph(const SceneGraph& g) {
  SceneGraph out;
  for (const auto& [id, n] : g.nodes)
    if (n.kind == NodeKind::Known) out.nodes.emplace(id, n);
  for (const auto& e : g.edges)
    if (out.find(e.src) && out.find(e.dst)) out.edges.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth

SceneGraph ground_truth_graph(const WorldState& world, const std::vector<std::string>& discovered) {
  std::set<std::string> ids(discovered.begin(), discovered.end());
  std::vector<const SimObject*> objs;
  for (const auto& o : world.objects)
    if (ids.count(o.id)) objs.push_back(&o);
  for (const auto& id : ids)
    if (!world.find(id)) throw UnknownEntity(id);

  std::vector<PointSet> pts;
  pts.reserve(objs.size());
  for (const auto* o : objs) pts.push_back(surface_points(*o));
  std::vector<RelationNode> rn;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    RelationNode r;
    r.label = objs[i]->fine_label;
    r.movable = objs[i]->movable;
    r.container = world.container(objs[i]->id) != nullptr;
    r.box = objs[i]->aabb();
    r.points = &pts[i];
    r.centroid = r.box.center();
    rn.push_back(std::move(r));
  }

  SceneGraph g;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    SceneNode n;
    n.node_id = objs[i]->id;
    n.kind = NodeKind::Known;
    n.attrs.name = objs[i]->fine_label;
    n.attrs.movable = objs[i]->movable;
    n.attrs.conf = 1.0;
    n.obs_history.push_back({world.step, {}, objs[i]->fine_label, 1.0, false, {}});
    n.merged_points = pts[i];
    g.add_node(std::move(n));
  }
  for (const auto& e : geometric_relations(rn, world.camera))
    g.add_edge({objs[e.src]->id, objs[e.dst]->id, e.relation,
                e.relation == Relation::Belong ? Provenance::Semantic : Provenance::Geometric, world.step});
  return g;
}

}  // namespace retriever
