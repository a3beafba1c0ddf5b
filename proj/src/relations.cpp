#include "retriever/relations.hpp"

#include <algorithm>
#include <set>

namespace retriever {

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::Behind: return "Behind";
    case Relation::Belong: return "Belong";
    case Relation::Inside: return "Inside";
    case Relation::On: return "On";
    case Relation::Under: return "Under";
  }
  return "?";
}

std::optional<Relation> parse_relation(std::string_view s) {
  for (Relation r : kAllRelations)
    if (relation_name(r) == s) return r;
  return std::nullopt;
}

namespace {

bool contains_word(std::string_view label, std::string_view word) {
  return label.find(word) != std::string_view::npos;
}

bool reaches(const std::vector<GeomEdge>& edges, Relation rel, std::size_t from, std::size_t to) {
  std::vector<std::size_t> stack{from};
  std::set<std::size_t> seen;
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (n == to) return true;
    if (!seen.insert(n).second) continue;
    for (const auto& e : edges)
      if (e.relation == rel && e.src == n) stack.push_back(e.dst);
  }
  return false;
}

bool add_acyclic(std::vector<GeomEdge>& edges, GeomEdge e) {
  if ((e.relation == Relation::On || e.relation == Relation::Inside) && reaches(edges, e.relation, e.dst, e.src))
    return false;
  edges.push_back(e);
  return true;
}

double fraction_inside(const PointSet& pts, const Aabb& box, double pad) {
  if (pts.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& p : pts) n += box.contains(p, pad) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(pts.size());
}

}  // namespace

std::vector<GeomEdge> geometric_relations(std::span<const RelationNode> nodes, const CameraPose& camera,
                                          const RelationConfig& cfg) {
  std::vector<GeomEdge> edges;
  const std::size_t n = nodes.size();

  // Inside first so that On/Behind can be suppressed between nested pairs.
  std::vector<std::vector<bool>> inside(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || !nodes[b].container || !nodes[a].points || nodes[a].box.empty()) continue;
      if (nodes[a].box.volume() >= nodes[b].box.volume()) continue;
      if (fraction_inside(*nodes[a].points, nodes[b].box, cfg.contact_eps) >= cfg.inside_fraction) {
        inside[a][b] = true;
        add_acyclic(edges, {a, b, Relation::Inside});
      }
    }
  }

  for (std::size_t a = 0; a < n; ++a) {
    const Aabb& ba = nodes[a].box;
    if (ba.empty() || ba.footprint_area() <= 0.0) continue;
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || inside[a][b] || inside[b][a]) continue;
      const Aabb& bb = nodes[b].box;
      if (bb.empty()) continue;
      const double gap = ba.min.z() - bb.max.z();
      if (gap < -cfg.contact_eps || gap > cfg.contact_eps) continue;
      if (ba.footprint_overlap(bb) < cfg.on_overlap * ba.footprint_area()) continue;
      if (add_acyclic(edges, {a, b, Relation::On}) && nodes[b].movable) edges.push_back({b, a, Relation::Under});
    }
  }

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t a = 0; a < n; ++a) {
      if (a == b || inside[a][b] || inside[b][a]) continue;
      if (is_support_label(nodes[a].label) || is_support_label(nodes[b].label)) continue;
      if (nodes[a].box.empty() || nodes[b].box.empty()) continue;
      const Vec3& cb = nodes[b].centroid;
      if (nodes[a].box.contains(cb)) continue;
      if ((cb - camera.position).norm() <= (nodes[a].centroid - camera.position).norm()) continue;
      if (!segment_blocked(nodes[a].box, camera.position, cb, 1e-3)) continue;
      // Stacked pairs are already described by On/Under.
      const bool stacked = std::any_of(edges.begin(), edges.end(), [&](const GeomEdge& e) {
        return e.relation == Relation::On && ((e.src == a && e.dst == b) || (e.src == b && e.dst == a));
      });
      if (!stacked) edges.push_back({b, a, Relation::Behind});
    }
  }

  for (std::size_t a = 0; a < n; ++a) {
    if (!contains_word(nodes[a].label, "handle")) continue;
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || !(nodes[b].container || is_container_label(nodes[b].label))) continue;
      if (nodes[a].box.distance_to(nodes[b].box) <= cfg.belong_distance) edges.push_back({a, b, Relation::Belong});
    }
  }

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

bool is_support_label(std::string_view label) { return label == "table" || contains_word(label, "wall"); }

bool is_container_label(std::string_view label) {
  return contains_word(label, "cabinet") || contains_word(label, "drawer");
}

bool label_is_movable(std::string_view label) {
  static constexpr std::array<std::string_view, 6> kStatic = {"table", "cabinet", "drawer", "shelf", "wall", "stand"};
  return std::none_of(kStatic.begin(), kStatic.end(), [&](std::string_view s) { return contains_word(label, s); });
}

}  // namespace retriever
