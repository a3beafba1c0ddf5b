#include "retriever/world.hpp"

#include "retriever/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace retriever {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr int kLabelDims = kDescriptorDim - 3;

Eigen::Matrix<double, kLabelDims, 1> embed(const std::string& text) {
  Eigen::Matrix<double, kLabelDims, 1> v;
  std::uint64_t state = fnv1a(text);
  for (int i = 0; i < kLabelDims; ++i) v[i] = static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  return v.normalized();
}

}  // namespace

Descriptor make_facet_descriptor(const std::string& label, const std::string& tag, const Vec3& extent) {
  Eigen::Matrix<double, kLabelDims, 1> v = embed(label);
  if (!tag.empty()) v = (v + 0.4 * embed(tag)).normalized();
  Descriptor d{};
  for (int i = 0; i < kLabelDims; ++i) d[i] = v[i];
  std::array<double, 3> sizes = {2 * extent.x(), 2 * extent.y(), 2 * extent.z()};
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  for (int i = 0; i < 3; ++i) d[kLabelDims + i] = 2.0 * sizes[i];
  return d;
}

bool SimObject::has_tagged_facet() const {
  return std::any_of(facets.begin(), facets.end(), [](const FacetInfo& f) { return !f.tag.empty(); });
}

void SimObject::reset_facet_descriptors() {
  for (auto& f : facets) f.descriptor = make_facet_descriptor(class_label, f.tag, extent);
}

std::vector<SurfaceSample> surface_samples(const SimObject& obj) {
  std::vector<SurfaceSample> out;
  out.reserve(6 * kSurfaceGrid * kSurfaceGrid);
  const Mat3 R = obj.pose.rotation();
  const Vec3& h = obj.extent;
  for (Facet f : kAllFacets) {
    const Vec3 n = facet_normal(f);
    int k = 0;
    n.cwiseAbs().maxCoeff(&k);
    const int a = (k + 1) % 3;
    const int b = (k + 2) % 3;
    for (int i = 0; i < kSurfaceGrid; ++i) {
      for (int j = 0; j < kSurfaceGrid; ++j) {
        Vec3 local;
        local[k] = n[k] * h[k];
        local[a] = (-1.0 + 2.0 * i / (kSurfaceGrid - 1)) * h[a];
        local[b] = (-1.0 + 2.0 * j / (kSurfaceGrid - 1)) * h[b];
        out.push_back({R * local + obj.pose.position, R * n, f});
      }
    }
  }
  return out;
}

PointSet surface_points(const SimObject& obj) {
  PointSet pts;
  for (const auto& s : surface_samples(obj)) pts.push_back(s.point);
  return pts;
}

Facet handle_facet(const SimObject& owner, const Container& c) {
  const OrientedBox box = owner.box();
  const Vec3 l = box.to_local(c.handle_point);
  Facet best = Facet::NegY;
  double best_gap = std::numeric_limits<double>::infinity();
  for (Facet f : kAllFacets) {
    const Vec3 n = facet_normal(f);
    const double gap = std::abs(n.dot(l) - n.cwiseAbs().dot(box.half));
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      best = f;
    }
  }
  return best;
}

const SimObject* WorldState::find(const std::string& id) const {
  auto it = std::find_if(objects.begin(), objects.end(), [&](const SimObject& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

SimObject* WorldState::find(const std::string& id) {
  auto it = std::find_if(objects.begin(), objects.end(), [&](const SimObject& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

std::optional<std::size_t> WorldState::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].id == id) return i;
  return std::nullopt;
}

const Container* WorldState::container(const std::string& owner_id) const {
  auto it = std::find_if(containers.begin(), containers.end(),
                         [&](const Container& c) { return c.object_id == owner_id; });
  return it == containers.end() ? nullptr : &*it;
}

Container* WorldState::container(const std::string& owner_id) {
  auto it = std::find_if(containers.begin(), containers.end(),
                         [&](const Container& c) { return c.object_id == owner_id; });
  return it == containers.end() ? nullptr : &*it;
}

bool WorldState::enclosed(const std::string& id) const {
  auto it = inside_of.find(id);
  if (it == inside_of.end()) return false;
  const Container* c = container(it->second);
  return c && c->state == ContainerState::Closed;
}

void WorldState::recompute_relations() {
  inside_of.clear();
  on_top_of.clear();
  for (const auto& o : objects) {
    if (container(o.id)) continue;
    const Vec3 c = o.pose.position;
    for (const auto& ct : containers) {
      if (ct.interior_region.contains(c, 1e-6)) {
        inside_of[o.id] = ct.object_id;
        break;
      }
    }
  }
  for (const auto& a : objects) {
    const Aabb ba = a.aabb();
    const std::string* best = nullptr;
    double best_top = -std::numeric_limits<double>::infinity();
    for (const auto& b : objects) {
      if (a.id == b.id) continue;
      const Aabb bb = b.aabb();
      const double gap = ba.min.z() - bb.max.z();
      if (std::abs(gap) > 0.005) continue;
      if (ba.footprint_overlap(bb) < 0.3 * ba.footprint_area()) continue;
      if (bb.max.z() > best_top) {
        best_top = bb.max.z();
        best = &b.id;
      }
    }
    if (best) on_top_of[a.id] = *best;
  }
}

std::vector<Occluder> WorldState::occluders() const {
  std::vector<Occluder> out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const SimObject& o = objects[i];
    const OrientedBox box = o.box();
    const Container* c = container(o.id);
    if (!c || c->state == ContainerState::Closed) {
      out.push_back({i, box});
      continue;
    }
    for (Facet f : kAllFacets) {
      if (f == c->aperture) continue;
      const Vec3 n = facet_normal(f);
      int k = 0;
      n.cwiseAbs().maxCoeff(&k);
      OrientedBox wall = box;
      Vec3 half = box.half;
      half[k] = 0.5 * kContainerWall;
      Vec3 offset = Vec3::Zero();
      offset[k] = n[k] * (box.half[k] - 0.5 * kContainerWall);
      wall.half = half;
      wall.center = box.to_world(offset);
      out.push_back({i, wall});
    }
  }
  return out;
}

namespace {

bool chain_has_cycle(const std::map<std::string, std::string>& rel) {
  for (const auto& [start, _] : rel) {
    std::set<std::string> seen{start};
    auto it = rel.find(start);
    while (it != rel.end()) {
      if (!seen.insert(it->second).second) return true;
      it = rel.find(it->second);
    }
  }
  return false;
}

double distance_to_surface(const OrientedBox& box, const Vec3& p) {
  const Vec3 l = box.to_local(p);
  const Vec3 excess = (l.cwiseAbs() - box.half).cwiseMax(0.0);
  if (excess.squaredNorm() > 0) return excess.norm();
  return (box.half - l.cwiseAbs()).minCoeff();
}

}  // namespace

void check_world_invariants(const WorldState& w) {
  std::set<std::string> ids;
  for (const auto& o : w.objects) {
    if (!ids.insert(o.id).second) throw InvariantViolation("duplicate object id '" + o.id + "'");
    if ((o.extent.array() <= 0.0).any()) throw InvariantViolation("non-positive extent on '" + o.id + "'");
  }
  for (const auto& c : w.containers) {
    const SimObject* owner = w.find(c.object_id);
    if (!owner) throw InvariantViolation("container references missing object '" + c.object_id + "'");
    if (!owner->aabb().contains(c.interior_region, 1e-6))
      throw InvariantViolation("interior of '" + c.object_id + "' exceeds its body");
    if (distance_to_surface(owner->box(), c.handle_point) > 0.005)
      throw InvariantViolation("handle of '" + c.object_id + "' is off the surface");
  }
  if (chain_has_cycle(w.inside_of)) throw InvariantViolation("inside_of has a cycle");
  if (chain_has_cycle(w.on_top_of)) throw InvariantViolation("on_top_of has a cycle");
  if (w.held && w.enclosed(*w.held)) throw InvariantViolation("held object is inside a closed container");
  if (!w.camera.valid(1e-9)) throw InvariantViolation("camera frame is not orthonormal");
}

WorldState apply_intervention(WorldState world, const InterventionScript& script) {
  using Kind = InterventionScript::Kind;
  switch (script.kind) {
    case Kind::MoveObject: {
      SimObject* o = world.find(script.id);
      if (!o) throw UnknownEntity(script.id);
      o->pose = script.pose;
      break;
    }
    case Kind::SetContainer: {
      Container* c = world.container(script.id);
      if (!c) throw UnknownEntity(script.id);
      c->state = script.state;
      break;
    }
    case Kind::RemoveObject: {
      auto idx = world.index_of(script.id);
      if (!idx) throw UnknownEntity(script.id);
      world.objects.erase(world.objects.begin() + static_cast<std::ptrdiff_t>(*idx));
      std::erase_if(world.containers, [&](const Container& c) { return c.object_id == script.id; });
      if (world.held == script.id) world.held.reset();
      break;
    }
  }
  world.recompute_relations();
  check_world_invariants(world);
  return world;
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::HiddenInside: return "HiddenInside";
    case Category::RecursiveSearch: return "RecursiveSearch";
    case Category::RepositionToReveal: return "RepositionToReveal";
    case Category::SequentialRetrieval: return "SequentialRetrieval";
    case Category::SemanticTargeting: return "SemanticTargeting";
    case Category::CompositionalReasoning: return "CompositionalReasoning";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kAllCategories)
    if (category_name(c) == s) return c;
  return std::nullopt;
}

}  // namespace retriever
