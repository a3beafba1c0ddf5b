// Independent reference implementations the tests compare against. They are
// deliberately slow and simple.
#pragma once

#include "retriever/ged.hpp"
#include "retriever/geometry.hpp"
#include "retriever/observation.hpp"
#include "retriever/world.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <tuple>

namespace oracle {

using namespace retriever;

// --- graph edit distance ------------------------------------------------------

inline LabeledGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes, std::size_t max_edges,
                                 int alphabet = 3) {
  std::uniform_int_distribution<std::size_t> nn(0, max_nodes);
  const std::size_t n = nn(rng);
  LabeledGraph g;
  g.resize(n);
  std::uniform_int_distribution<int> lab(0, alphabet - 1);
  for (auto& l : g.labels) l = std::string(1, static_cast<char>('a' + lab(rng)));
  if (n < 2) return g;
  std::uniform_int_distribution<std::size_t> ne(0, max_edges), node(0, n - 1);
  std::uniform_int_distribution<int> rel(0, static_cast<int>(kAllRelations.size()) - 1);
  const std::size_t m = ne(rng);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t a = node(rng), b = node(rng);
    if (a == b) continue;
    g.add_edge(a, b, kAllRelations[static_cast<std::size_t>(rel(rng))]);
  }
  return g;
}

// Edges of an ordered pair as a set of relation ids.
inline std::vector<int> rel_set(const LabeledGraph& g, int a, int b) {
  std::vector<int> out;
  if (a < 0 || b < 0) return out;
  const auto bits = g.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  for (int r = 0; r < 8; ++r)
    if (bits & (1 << r)) out.push_back(r);
  return out;
}

// Cost of an edit path induced by a node mapping: node substitutions,
// deletions and insertions, then per ordered pair the cheapest way to turn
// one relation set into the other (relabel pairs up a deletion with an
// insertion).
inline int induced_cost(const LabeledGraph& a, const LabeledGraph& b, const std::vector<int>& map) {
  int cost = 0;
  std::vector<int> preimage(b.size(), -1);
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (map[u] < 0) {
      cost += 1;
    } else {
      preimage[static_cast<std::size_t>(map[u])] = static_cast<int>(u);
      if (a.labels[u] != b.labels[static_cast<std::size_t>(map[u])]) cost += 1;
    }
  }
  for (int p : preimage)
    if (p < 0) cost += 1;
  auto pair_edits = [](const std::vector<int>& x, const std::vector<int>& y) {
    int only_x = 0, only_y = 0;
    for (int r : x)
      if (std::find(y.begin(), y.end(), r) == y.end()) ++only_x;
    for (int r : y)
      if (std::find(x.begin(), x.end(), r) == x.end()) ++only_y;
    return only_x + only_y - std::min(only_x, only_y);
  };
  // Pairs of a, compared with their images in b.
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t w = 0; w < a.size(); ++w)
      cost += pair_edits(rel_set(a, static_cast<int>(u), static_cast<int>(w)), rel_set(b, map[u], map[w]));
  // Pairs of b not covered above (an endpoint was inserted).
  for (std::size_t v = 0; v < b.size(); ++v)
    for (std::size_t x = 0; x < b.size(); ++x)
      if (preimage[v] < 0 || preimage[x] < 0)
        cost += static_cast<int>(rel_set(b, static_cast<int>(v), static_cast<int>(x)).size());
  return cost;
}

// Minimum over every injective partial mapping a -> b.
inline int brute_force_ged(const LabeledGraph& a, const LabeledGraph& b) {
  std::vector<int> map(a.size(), -1);
  std::vector<bool> used(b.size(), false);
  int best = std::numeric_limits<int>::max();
  std::function<void(std::size_t)> rec = [&](std::size_t u) {
    if (u == a.size()) {
      best = std::min(best, induced_cost(a, b, map));
      return;
    }
    map[u] = -1;
    rec(u + 1);
    for (std::size_t v = 0; v < b.size(); ++v) {
      if (used[v]) continue;
      used[v] = true;
      map[u] = static_cast<int>(v);
      rec(u + 1);
      used[v] = false;
    }
    map[u] = -1;
  };
  rec(0);
  return best;
}

// --- visibility ---------------------------------------------------------------

// Camera-frame test written out from the pinhole model.
inline bool in_frustum(const CameraPose& cam, const CameraIntrinsics& intr, const Vec3& p) {
  const Vec3 f = cam.forward.normalized();
  const Vec3 u = cam.up.normalized();
  const Vec3 r = f.cross(u);
  const Vec3 d = p - cam.position;
  const double z = d.dot(f);
  if (z < intr.near || z > intr.far) return false;
  return std::abs(d.dot(r)) <= z * std::tan(0.5 * intr.fov_h) + 1e-9 &&
         std::abs(d.dot(u)) <= z * std::tan(0.5 * intr.fov_v) + 1e-9;
}

// Solid pieces of one object as the camera sees them: the whole box, or for an
// open container the box minus its aperture face (five slabs).
inline std::vector<OrientedBox> solids(const WorldState& w, std::size_t i) {
  const SimObject& o = w.objects[i];
  const OrientedBox box = o.box();
  const Container* c = w.container(o.id);
  if (!c || c->state == ContainerState::Closed) return {box};
  std::vector<OrientedBox> out;
  for (Facet f : kAllFacets) {
    if (f == c->aperture) continue;
    const Vec3 n = facet_normal(f);
    int k = 0;
    n.cwiseAbs().maxCoeff(&k);
    OrientedBox slab = box;
    slab.half[k] = 0.5 * kContainerWall;
    Vec3 off = Vec3::Zero();
    off[k] = n[k] * (box.half[k] - 0.5 * kContainerWall);
    slab.center = box.to_world(off);
    out.push_back(slab);
  }
  return out;
}

// Marches the segment in 1 mm steps and reports whether it passes clearly
// (deeper than `margin`) through any other object's solid.
inline bool ray_clearly_blocked(const WorldState& w, std::size_t self, const Vec3& from, const Vec3& to,
                                double margin = 0.002) {
  const double len = (to - from).norm();
  const int steps = std::max(2, static_cast<int>(len / 0.001));
  for (std::size_t j = 0; j < w.objects.size(); ++j) {
    if (j == self || w.held == w.objects[j].id) continue;
    for (const auto& s : solids(w, j)) {
      OrientedBox shrunk = s;
      shrunk.half = (s.half.array() - margin).max(0.0).matrix();
      if ((shrunk.half.array() <= 0.0).any()) continue;
      for (int k = 1; k < steps; ++k) {
        const Vec3 p = from + (to - from) * (static_cast<double>(k) / steps);
        if (shrunk.contains(p)) return true;
      }
    }
  }
  return false;
}

// --- point merging --------------------------------------------------------------

inline PointSet voxel_merge(const PointSet& a, const PointSet& b, double delta) {
  std::map<std::tuple<long, long, long>, std::pair<Vec3, int>> cells;
  auto add = [&](const Vec3& p) {
    const auto key = std::make_tuple(static_cast<long>(std::floor(p.x() / delta)),
                                     static_cast<long>(std::floor(p.y() / delta)),
                                     static_cast<long>(std::floor(p.z() / delta)));
    auto& c = cells.try_emplace(key, Vec3::Zero(), 0).first->second;
    c.first += p;
    c.second += 1;
  };
  for (const auto& p : a) add(p);
  for (const auto& p : b) add(p);
  PointSet out;
  for (auto& [k, c] : cells) out.push_back(c.first / c.second);
  return out;
}

// --- random worlds ----------------------------------------------------------------

struct RandomWorld {
  WorldState world;
  std::string container;          // owner id of the single container
  std::vector<std::string> inner;  // objects inside it
};

// A table, one closed container holding 1-2 objects side by side, and a few
// free objects, some possibly stacked.
inline RandomWorld random_world(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
  RandomWorld rw;
  WorldState& w = rw.world;
  w.goal_region = Aabb{{0.40, -0.40, 0.0}, {0.60, -0.25, 0.25}};

  SimObject table;
  table.id = "table";
  table.class_label = table.fine_label = "table";
  table.pose.position = Vec3(0, 0, -0.02);
  table.extent = Vec3(0.6, 0.4, 0.02);
  table.movable = false;
  table.reset_facet_descriptors();
  w.objects.push_back(table);

  const bool drawer = U(rng) < 0.5;
  SimObject box;
  box.id = drawer ? "drawer" : "cabinet";
  box.class_label = box.fine_label = box.id;
  box.extent = Vec3(uni(0.10, 0.14), uni(0.08, 0.10), drawer ? uni(0.05, 0.06) : uni(0.08, 0.10));
  box.pose.position = Vec3(uni(-0.2, 0.2), uni(0.15, 0.25), box.extent.z());
  box.movable = false;
  box.reset_facet_descriptors();
  Container c;
  c.object_id = box.id;
  c.kind = drawer ? ContainerKind::Drawer : ContainerKind::Cabinet;
  c.aperture = drawer ? Facet::PosZ : Facet::NegY;
  c.interior_region = box.aabb().inflated(-kContainerWall);
  c.handle_point = Vec3(box.pose.position.x(), box.aabb().min.y(), box.pose.position.z());
  w.containers.push_back(c);
  w.objects.push_back(box);
  rw.container = box.id;

  const Aabb in = c.interior_region;
  const int n_in = U(rng) < 0.5 ? 1 : 2;
  for (int k = 0; k < n_in; ++k) {
    SimObject o;
    o.id = "inner_" + std::to_string(k);
    o.class_label = o.fine_label = k == 0 ? "lotion" : "soap";
    const double slot = (in.max.x() - in.min.x()) / n_in;
    o.extent = Vec3(std::min(0.03, 0.5 * slot - 0.01), uni(0.015, 0.025), std::min(0.03, 0.5 * (in.max.z() - in.min.z()) - 0.002));
    o.pose.position = Vec3(in.min.x() + slot * (k + 0.5), in.center().y(), in.min.z() + o.extent.z());
    o.reset_facet_descriptors();
    w.objects.push_back(o);
    rw.inner.push_back(o.id);
  }

  const int n_free = 2 + static_cast<int>(U(rng) * 4);
  std::vector<Aabb> used = {w.objects[1].aabb().inflated(0.02)};
  for (int k = 0; k < n_free; ++k) {
    for (int tries = 0; tries < 40; ++tries) {
      SimObject o;
      o.id = "free_" + std::to_string(k);
      o.class_label = o.fine_label = "mug";
      o.extent = Vec3(uni(0.02, 0.05), uni(0.02, 0.05), uni(0.02, 0.06));
      o.pose.position = Vec3(uni(-0.5, 0.5), uni(-0.35, 0.0), o.extent.z());
      o.pose.yaw = U(rng) < 0.3 ? uni(-1.0, 1.0) : 0.0;
      o.reset_facet_descriptors();
      const Aabb b = o.aabb();
      if (std::any_of(used.begin(), used.end(), [&](const Aabb& u) { return u.overlaps(b, 0.01); })) continue;
      used.push_back(b);
      w.objects.push_back(o);
      // Sometimes a small object on top.
      if (U(rng) < 0.3 && o.pose.yaw == 0.0) {
        SimObject t;
        t.id = o.id + "_top";
        t.class_label = t.fine_label = "apple";
        t.extent = Vec3(0.015, 0.015, 0.015);
        t.pose.position = Vec3(o.pose.position.x(), o.pose.position.y(), 2 * o.extent.z() + t.extent.z());
        t.reset_facet_descriptors();
        w.objects.push_back(t);
      }
      break;
    }
  }
  w.camera = CameraPose::look_at(Vec3(uni(-0.6, 0.6), uni(-0.7, -0.3), uni(0.2, 0.7)),
                                 Vec3(uni(-0.3, 0.3), uni(-0.1, 0.2), 0.0));
  w.recompute_relations();
  return rw;
}

// Camera outside the container's opening, looking at the interior.
inline CameraPose aperture_pose(const WorldState& w, const std::string& container) {
  const Container* c = w.container(container);
  const Aabb in = c->interior_region;
  const Vec3 n = w.find(container)->pose.rotation() * facet_normal(c->aperture);
  const Vec3 at = in.center();
  const double back = 0.5 * (in.size().cwiseAbs().maxCoeff()) / std::tan(0.5 * deg2rad(45.0)) + 0.12;
  return CameraPose::look_at(at + back * n, at);
}

// Poses on the aperture normal, framing distance first, then stepping closer
// and farther by 2 cm. Free objects may stand in front of the opening.
inline std::vector<CameraPose> aperture_poses(const WorldState& w, const std::string& container) {
  const CameraPose framing = aperture_pose(w, container);
  const Vec3 at = w.container(container)->interior_region.center();
  const Vec3 n = (framing.position - at).normalized();
  const double base = (framing.position - at).norm();
  std::vector<CameraPose> out = {framing};
  for (int k = 1; k <= 20; ++k)
    for (double d : {base - 0.02 * k, base + 0.02 * k})
      if (d > 0.05) out.push_back(CameraPose::look_at(at + d * n, at));
  return out;
}

}  // namespace oracle
