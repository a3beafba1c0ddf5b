#include "retriever/harness/generators.hpp"

#include "retriever/errors.hpp"
#include "retriever/lexicon.hpp"
#include "retriever/scenario_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace retriever {

namespace {

constexpr int kMaxAttempts = 100;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform(double a, double b) { return a + (b - a) * static_cast<double>(next() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  bool coin() { return (next() & 1) != 0; }

 private:
  std::uint64_t s_;
};

std::uint64_t attempt_seed(std::uint64_t seed, int family, int attempt) {
  Rng r(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(family) * 7919 + static_cast<std::uint64_t>(attempt));
  return r.next();
}

const std::array<std::string, 9> kClutter = {"mug", "bowl", "apple", "banana", "cup", "orange", "lemon", "spoon", "bottle"};
const std::array<std::string, 4> kBoxKinds = {"cereal", "cracker", "tea", "pasta"};

SimObject make_object(const std::string& id, const std::string& label, const Vec3& center, const Vec3& extent) {
  SimObject o;
  o.id = id;
  o.class_label = label;
  o.fine_label = label;
  o.pose.position = center;
  o.extent = extent;
  o.movable = label_is_movable(label);
  o.reset_facet_descriptors();
  return o;
}

SimObject make_table() {
  SimObject t = make_object("table", "table", Vec3(0.0, 0.0, -0.02), Vec3(0.6, 0.4, 0.02));
  t.movable = false;
  return t;
}

// Axis-aligned footprints already used on the table, for spacing checks.
struct Footprints {
  std::vector<Aabb> boxes;
  bool clear(const Aabb& b, double gap) const {
    return std::none_of(boxes.begin(), boxes.end(), [&](const Aabb& o) {
      return b.min.x() < o.max.x() + gap && b.max.x() > o.min.x() - gap && b.min.y() < o.max.y() + gap &&
             b.max.y() > o.min.y() - gap;
    });
  }
};

Container make_container(const SimObject& owner, ContainerKind kind) {
  Container c;
  c.object_id = owner.id;
  c.kind = kind;
  c.state = ContainerState::Closed;
  c.aperture = kind == ContainerKind::Drawer ? Facet::PosZ : Facet::NegY;
  const Aabb body = owner.aabb();
  c.interior_region = body.inflated(-kContainerWall);
  c.handle_point = Vec3(owner.pose.position.x(), body.min.y(), owner.pose.position.z());
  return c;
}

std::string pick_instruction(Rng& rng, const std::string& what) {
  static const std::array<std::string, 4> kForms = {"find the ", "bring me the ", "I need the ", "get me the "};
  return kForms[rng.index(kForms.size())] + what;
}

struct Family {
  WorldState world;
  std::string target;
  std::string companion;
  std::string target_container;
  std::size_t category = 0;  // lexicon index of the target
  std::vector<std::string> containers;
  std::string instruction;
  std::string follow_up;
};

/// Places `n` clutter objects; the first `in_view` go to the left front of the
/// table, which the initial camera covers.
bool add_clutter(Rng& rng, WorldState& w, Footprints& fp, int n, int in_view) {
  for (int k = 0; k < n; ++k) {
    bool placed = false;
    for (int tries = 0; tries < 50 && !placed; ++tries) {
      const Vec3 ext(rng.uniform(0.025, 0.045), rng.uniform(0.025, 0.045), rng.uniform(0.02, 0.06));
      const bool view = k < in_view;
      const double x = view ? rng.uniform(-0.52, -0.12) : rng.uniform(-0.05, 0.55 - ext.x());
      const double y = view ? rng.uniform(-0.30, -0.05) : rng.uniform(-0.35 + ext.y(), -0.02 - ext.y());
      const Vec3 c(x, y, ext.z());
      const Aabb b{c - ext, c + ext};
      if (!fp.clear(b, 0.05)) continue;
      const std::string label = kClutter[rng.index(kClutter.size())];
      w.objects.push_back(make_object(label + "_" + std::to_string(w.objects.size()), label, c, ext));
      fp.boxes.push_back(b);
      placed = true;
    }
    if (!placed) return false;
  }
  return true;
}

/// Two or three closed containers at the back of the table, one of them
/// holding the target. With `recursive` the target sits at the back of a
/// cabinet behind a standing book.
std::optional<Family> inside_family(Rng& rng, bool recursive) {
  Family f;
  WorldState& w = f.world;
  w.camera = default_initial_camera();
  w.goal_region = Aabb{{0.40, -0.40, 0.0}, {0.60, -0.25, 0.25}};
  w.objects.push_back(make_table());
  Footprints fp;
  fp.boxes.push_back(w.goal_region);

  const int nc = 2 + static_cast<int>(rng.index(2));
  const std::size_t holder = rng.index(static_cast<std::size_t>(nc));
  for (int k = 0; k < nc; ++k) {
    const bool cabinet = (recursive && static_cast<std::size_t>(k) == holder) || rng.coin();
    const Vec3 ext = cabinet ? Vec3(rng.uniform(0.10, 0.13), rng.uniform(0.085, 0.10), rng.uniform(0.08, 0.10))
                             : Vec3(rng.uniform(0.10, 0.13), rng.uniform(0.08, 0.10), rng.uniform(0.05, 0.06));
    bool placed = false;
    for (int tries = 0; tries < 50 && !placed; ++tries) {
      const Vec3 c(rng.uniform(-0.10, 0.58 - ext.x()), rng.uniform(0.10 + ext.y(), 0.39 - ext.y()), ext.z());
      const Aabb b{c - ext, c + ext};
      if (!fp.clear(b, 0.06)) continue;
      const std::string label = cabinet ? "cabinet" : "drawer";
      SimObject o = make_object(label + "_" + std::to_string(k + 1), label, c, ext);
      o.movable = false;
      w.containers.push_back(make_container(o, cabinet ? ContainerKind::Cabinet : ContainerKind::Drawer));
      f.containers.push_back(o.id);
      w.objects.push_back(std::move(o));
      fp.boxes.push_back(b);
      placed = true;
    }
    if (!placed) return std::nullopt;
  }

  const Container& hold = w.containers[holder];
  f.target_container = hold.object_id;
  const Aabb in = hold.interior_region;
  const Vec3 ic = in.center(), ih = 0.5 * in.size();

  f.category = rng.index(lexicon().size());
  const auto& items = lexicon()[f.category].items;
  const std::size_t ti = rng.index(items.size());
  const std::size_t ci = (ti + 1 + rng.index(items.size() - 1)) % items.size();
  auto item_extent = [&](double max_x, double max_y) {
    return Vec3(std::min(rng.uniform(0.025, 0.04), max_x), std::min(rng.uniform(0.02, 0.035), max_y),
                std::min(rng.uniform(0.03, 0.05), ih.z() - 0.004));
  };

  if (!recursive) {
    const Vec3 te = item_extent(0.5 * ih.x() - 0.005, ih.y() - 0.005);
    const Vec3 ce = item_extent(0.5 * ih.x() - 0.005, ih.y() - 0.005);
    w.objects.push_back(make_object("target", items[ti], Vec3(ic.x() - 0.5 * ih.x(), ic.y(), in.min.z() + te.z()), te));
    w.objects.push_back(
        make_object("companion", items[ci], Vec3(ic.x() + 0.5 * ih.x(), ic.y(), in.min.z() + ce.z()), ce));
    f.companion = "companion";
  } else {
    const Vec3 te = item_extent(ih.x() - 0.01, 0.5 * ih.y() - 0.02);
    w.objects.push_back(
        make_object("target", items[ti], Vec3(ic.x(), in.max.y() - te.y() - 0.005, in.min.z() + te.z()), te));
    const Vec3 be(ih.x() - 0.006, 0.012, ih.z() - 0.012);
    w.objects.push_back(make_object("book_in_front", "book", Vec3(ic.x(), in.min.y() + be.y() + 0.01, in.min.z() + be.z()), be));
  }
  f.target = "target";

  const int clutter = 2 + static_cast<int>(rng.index(5));
  if (!add_clutter(rng, w, fp, clutter, 2)) return std::nullopt;
  w.recompute_relations();

  f.instruction = pick_instruction(rng, items[ti]);
  f.follow_up = "now bring me the " + items[ci];
  return f;
}

/// Look-alike boxes whose printed side faces away from the camera.
std::optional<Family> reveal_family(Rng& rng) {
  Family f;
  WorldState& w = f.world;
  w.camera = default_initial_camera();
  w.goal_region = Aabb{{0.40, -0.40, 0.0}, {0.60, -0.25, 0.25}};
  w.objects.push_back(make_table());
  Footprints fp;
  fp.boxes.push_back(w.goal_region);

  {
    const Vec3 ext(rng.uniform(0.10, 0.12), rng.uniform(0.08, 0.10), rng.uniform(0.05, 0.06));
    const Vec3 c(rng.uniform(0.10, 0.45), rng.uniform(0.20, 0.39 - ext.y()), ext.z());
    SimObject o = make_object("drawer_1", "drawer", c, ext);
    o.movable = false;
    w.containers.push_back(make_container(o, ContainerKind::Drawer));
    fp.boxes.push_back(o.aabb());
    w.objects.push_back(std::move(o));
  }

  const int nb = 2 + static_cast<int>(rng.index(2));
  std::vector<std::size_t> kinds = {0, 1, 2, 3};
  for (std::size_t i = kinds.size() - 1; i > 0; --i) std::swap(kinds[i], kinds[rng.index(i + 1)]);
  std::vector<Vec3> centers;
  // The target's place in the object list is random so that scan order says nothing.
  const int tk = static_cast<int>(rng.index(static_cast<std::size_t>(nb)));
  for (int k = 0; k < nb; ++k) {
    bool placed = false;
    for (int tries = 0; tries < 80 && !placed; ++tries) {
      const Vec3 ext(rng.uniform(0.035, 0.045), rng.uniform(0.02, 0.03), rng.uniform(0.06, 0.075));
      const Vec3 c(rng.uniform(-0.55, -0.05), rng.uniform(-0.25, 0.10), ext.z());
      const Aabb b{c - ext, c + ext};
      if (!fp.clear(b, 0.05)) continue;
      if (std::any_of(centers.begin(), centers.end(), [&](const Vec3& o) { return (o - c).head<2>().norm() < 0.25; }))
        continue;
      const std::string& kind = kBoxKinds[kinds[static_cast<std::size_t>(k)]];
      SimObject o = make_object(k == tk ? "target" : "box_" + std::to_string(k + 1), "box", c, ext);
      o.fine_label = kind + " box";
      o.facet(Facet::PosY).tag = kind;
      o.reset_facet_descriptors();
      w.objects.push_back(std::move(o));
      centers.push_back(c);
      fp.boxes.push_back(b);
      placed = true;
    }
    if (!placed) return std::nullopt;
  }
  f.target = "target";
  f.instruction = pick_instruction(rng, kBoxKinds[kinds[static_cast<std::size_t>(tk)]] + " box");

  const int clutter = 2 + static_cast<int>(rng.index(3));
  if (!add_clutter(rng, w, fp, clutter, 0)) return std::nullopt;
  w.recompute_relations();
  return f;
}

void fail_check(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("scenario", what);
}

Observation initial_view(const WorldState& w, const CameraIntrinsics& intr) {
  return observe(w, w.camera, intr, NoiseModel{}, 0, 0);
}

bool detected(const Observation& o, const std::string& id) {
  return std::any_of(o.detections.begin(), o.detections.end(), [&](const Detection& d) { return d.truth_id == id; });
}

void verify_common(const Scenario& s) {
  const WorldState& w = s.initial_world;
  check_world_invariants(w);
  const auto n = w.objects.size();
  fail_check(n >= 6 && n <= 16, "object count out of range");  // 6 to 15 plus the table
  fail_check(!w.containers.empty() && w.containers.size() <= 3, "container count out of range");
  fail_check(!s.instructions.empty() && s.instructions.size() == s.target_ids.size(), "instructions and targets differ");
  for (const auto& t : s.target_ids) fail_check(w.find(t) != nullptr, "target '" + t + "' missing");
  WorldState copy = w;
  copy.recompute_relations();
  fail_check(copy.inside_of == w.inside_of && copy.on_top_of == w.on_top_of, "relations do not match geometry");
}

void verify_hidden(const Scenario& s, const CameraIntrinsics& intr) {
  const WorldState& w = s.initial_world;
  const std::string& t = s.target_ids.front();
  fail_check(w.enclosed(t), "target is not inside a closed container");
  const Observation o = initial_view(w, intr);
  fail_check(!detected(o, t), "target visible from the initial pose");
  for (const auto& c : w.containers) fail_check(!detected(o, c.object_id), "a container is visible from the initial pose");
  const Container* holder = w.container(w.inside_of.at(t));
  fail_check((holder->handle_point - w.robot_base).norm() <= 0.9, "handle out of reach");
}

void verify_semantic(const Scenario& s) {
  const WorldState& w = s.initial_world;
  for (const auto& c : w.containers) fail_check(!w.find(c.object_id)->semantic_tag.empty(), "container without a label");
  const std::string& holder = w.inside_of.at(s.target_ids.front());
  const auto want = target_tokens(s.instructions.front());
  fail_check(semantic_relevance({w.find(holder)->semantic_tag}, want) == 1, "target container label does not fit");
  for (const auto& c : w.containers)
    if (c.object_id != holder)
      fail_check(semantic_relevance({w.find(c.object_id)->semantic_tag}, want) < 1, "two containers fit the target");
}

void verify_recursive(const Scenario& s) {
  const WorldState& w = s.initial_world;
  const std::string& t = s.target_ids.front();
  const std::string& holder = w.inside_of.at(t);
  const Container* c = w.container(holder);
  fail_check(c->kind == ContainerKind::Cabinet, "target container is not a cabinet");
  const Vec3 tp = w.find(t)->pose.position;
  const bool blocker = std::any_of(w.objects.begin(), w.objects.end(), [&](const SimObject& o) {
    auto it = w.inside_of.find(o.id);
    return o.id != t && o.movable && it != w.inside_of.end() && it->second == holder && o.pose.position.y() < tp.y();
  });
  fail_check(blocker, "nothing in front of the target");
}

void verify_reveal(const Scenario& s, const CameraIntrinsics& intr) {
  const WorldState& w = s.initial_world;
  const SimObject* target = w.find(s.target_ids.front());
  std::vector<const SimObject*> similar;
  for (const auto& o : w.objects)
    if (o.class_label == target->class_label && o.has_tagged_facet()) similar.push_back(&o);
  fail_check(similar.size() >= 2, "fewer than two look-alike objects");
  const Observation obs = initial_view(w, intr);
  for (const SimObject* o : similar) {
    auto it = std::find_if(obs.detections.begin(), obs.detections.end(),
                           [&](const Detection& d) { return d.truth_id == o->id; });
    fail_check(it != obs.detections.end(), "look-alike '" + o->id + "' not in the initial view");
    bool tagged = false;
    for (Facet f : kAllFacets)
      if (!o->facet(f).tag.empty())
        tagged = tagged || std::find(it->facet_tags.begin(), it->facet_tags.end(), o->facet(f).tag) != it->facet_tags.end();
    fail_check(!tagged, "printed side of '" + o->id + "' faces the camera");
  }
  for (std::size_t i = 0; i < similar.size(); ++i)
    for (std::size_t j = i + 1; j < similar.size(); ++j)
      fail_check((similar[i]->pose.position - similar[j]->pose.position).head<2>().norm() >= 0.25,
                 "look-alikes too close together");
}

/// Distinct category labels; the target's container gets the target's category.
void label_containers(Family& f, Rng& rng) {
  std::vector<std::size_t> others;
  for (std::size_t k = 0; k < lexicon().size(); ++k)
    if (k != f.category) others.push_back(k);
  for (std::size_t i = others.size() - 1; i > 0; --i) std::swap(others[i], others[rng.index(i + 1)]);
  std::size_t next = 0;
  for (auto& o : f.world.objects) {
    if (!f.world.container(o.id)) continue;
    o.semantic_tag = o.id == f.target_container ? lexicon()[f.category].tag : lexicon()[others[next++]].tag;
  }
}

}  // namespace

void verify_scenario(const Scenario& s, const CameraIntrinsics& intr) {
  verify_common(s);
  switch (s.category) {
    case Category::HiddenInside: verify_hidden(s, intr); break;
    case Category::SequentialRetrieval:
      verify_hidden(s, intr);
      fail_check(s.instructions.size() >= 2, "fewer than two instructions");
      break;
    case Category::SemanticTargeting:
      verify_hidden(s, intr);
      verify_semantic(s);
      break;
    case Category::RecursiveSearch:
      verify_hidden(s, intr);
      verify_recursive(s);
      break;
    case Category::CompositionalReasoning:
      verify_hidden(s, intr);
      verify_recursive(s);
      verify_semantic(s);
      break;
    case Category::RepositionToReveal: verify_reveal(s, intr); break;
  }
}

Scenario generate_scenario(Category category, std::uint64_t seed, const CameraIntrinsics& intr) {
  const int family = category == Category::RepositionToReveal                                          ? 2
                     : (category == Category::RecursiveSearch || category == Category::CompositionalReasoning) ? 1
                                                                                                         : 0;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(attempt_seed(seed, family, attempt));
    std::optional<Family> f = family == 2 ? reveal_family(rng) : inside_family(rng, family == 1);
    if (!f) continue;

    Scenario s;
    s.name = std::string(category_name(category)) + "-" + std::to_string(seed);
    s.category = category;
    s.seed = seed;
    s.instructions = {f->instruction};
    s.target_ids = {f->target};
    if (category == Category::SequentialRetrieval) {
      s.instructions.push_back(f->follow_up);
      s.target_ids.push_back(f->companion);
    }
    if (category == Category::SemanticTargeting || category == Category::CompositionalReasoning) {
      Rng tag_rng(attempt_seed(seed, 10 + family, attempt));
      label_containers(*f, tag_rng);
      s.instructions = {"I want the " + f->world.find(f->target)->fine_label};
    }
    s.initial_world = std::move(f->world);
    try {
      verify_scenario(s, intr);
    } catch (const ValidationError&) {
      continue;
    } catch (const InvariantViolation&) {
      continue;
    }
    return s;
  }
  throw GenerationFailed(std::string(category_name(category)) + " seed " + std::to_string(seed));
}

}  // namespace retriever
