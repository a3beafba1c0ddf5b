#include "retriever/lexicon.hpp"
#include "retriever/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <tuple>

namespace retriever {

namespace {

constexpr int kMaxFailures = 2;
constexpr int kMaxViews = 3;

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

class Policy {
 public:
  Policy(const DecideRequest& req, const std::function<double(const NodeView&)>& priority)
      : req_(req), priority_(priority), want_(target_tokens(req.instruction)), what_(join(want_)) {
    for (const auto& n : req.nodes) by_id_[n.id] = &n;
  }

  Decision run() {
    if (want_.empty()) return failure("EmptyInstruction");

    std::vector<const NodeView*> full, partial;
    for (const auto& n : req_.nodes) {
      if (!n.known) continue;
      const auto w = words_of(n);
      if (std::all_of(want_.begin(), want_.end(), [&](const std::string& t) { return w.count(t) > 0; }))
        full.push_back(&n);
      else if (w.count(want_.back()))
        partial.push_back(&n);
    }
    auto by_evidence = [](const NodeView* a, const NodeView* b) {
      return std::make_tuple(!a->detected_last, -a->conf, a->id) < std::make_tuple(!b->detected_last, -b->conf, b->id);
    };
    std::sort(full.begin(), full.end(), by_evidence);
    std::sort(partial.begin(), partial.end(), by_evidence);

    for (const NodeView* t : full)
      if (t->detected_last && exposed(*t) && failures(t->id, "Retrieve") < kMaxFailures)
        return manipulate(*t);
    for (const NodeView* t : full)
      if (auto d = unblock(*t)) return *d;
    for (const NodeView* p : partial)
      if (auto d = reveal(*p)) return *d;
    if (auto d = explore()) return *d;
    return failure("Exhausted");
  }

 private:
  std::set<std::string> words_of(const NodeView& n) const {
    std::set<std::string> w;
    for (auto& t : word_tokens(n.name)) w.insert(std::move(t));
    for (const auto& tag : n.tags)
      for (auto& t : word_tokens(tag)) w.insert(std::move(t));
    return w;
  }

  const NodeView* node(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : it->second;
  }

  // Nodes x with an edge (x rel dst).
  std::vector<const NodeView*> sources(const std::string& dst, Relation rel) const {
    std::vector<const NodeView*> out;
    for (const auto& e : req_.edges)
      if (e.dst == dst && e.relation == rel)
        if (const NodeView* n = node(e.src); n && n->known) out.push_back(n);
    return out;
  }

  // Nodes y with an edge (src rel y).
  std::vector<const NodeView*> grounds(const std::string& src, Relation rel) const {
    std::vector<const NodeView*> out;
    for (const auto& e : req_.edges)
      if (e.src == src && e.relation == rel)
        if (const NodeView* n = node(e.dst); n && n->known) out.push_back(n);
    return out;
  }

  const NodeView* closed_container(const NodeView& n) const {
    for (const NodeView* c : grounds(n.id, Relation::Inside))
      if (c->container_state == ContainerState::Closed) return c;
    return nullptr;
  }

  bool exposed(const NodeView& n) const { return !closed_container(n) && sources(n.id, Relation::On).empty(); }

  int failures(const std::string& id, std::string_view action) const {
    int k = 0;
    for (const auto& h : req_.history)
      if (h.target == id && h.action == action && !h.success) ++k;
    return k;
  }

  bool succeeded(const std::string& id, std::string_view action) const {
    return std::any_of(req_.history.begin(), req_.history.end(),
                       [&](const ActionRecord& h) { return h.target == id && h.action == action && h.success; });
  }

  bool can_move(const NodeView& n) const {
    return n.movable && n.detected_last && exposed(n) && failures(n.id, "PickPlace") < kMaxFailures;
  }

  bool can_open(const NodeView& c) const {
    return c.detected_last && c.handle_seen && failures(c.id, "Open") < kMaxFailures;
  }

  Decision manipulate(const NodeView& t) const {
    Decision d;
    d.target = t.id;
    d.action = ActionKind::Manipulation;
    d.goal_text = "retrieve the " + t.name;
    return d;
  }

  Decision interact(const NodeView& n, PrimitiveKind k, std::string goal) const {
    Decision d;
    d.target = n.id;
    d.action = ActionKind::InteractivePerception;
    d.primitive = k;
    if (k == PrimitiveKind::Rotate) d.angle = kPi;
    d.goal_text = std::move(goal);
    return d;
  }

  Decision look(const NodeView& n, std::string goal) const {
    Decision d;
    d.target = n.id;
    d.action = ActionKind::ActivePerception;
    d.goal_text = std::move(goal);
    return d;
  }

  Decision failure(std::string reason) const {
    Decision d;
    d.declare_failure = std::move(reason);
    return d;
  }

  // The target is known but cannot be taken yet.
  std::optional<Decision> unblock(const NodeView& t) const {
    if (const NodeView* c = closed_container(t)) {
      if (can_open(*c)) return interact(*c, PrimitiveKind::Open, "open the " + c->name + " to reach the " + t.name);
      if (c->ap_attempts < kMaxViews) return look(*c, "find the handle of the " + c->name);
      return std::nullopt;
    }
    for (const NodeView* x : sources(t.id, Relation::On))
      if (can_move(*x)) return interact(*x, PrimitiveKind::PickPlace, "move the " + x->name + " off the " + t.name);
    if (!sources(t.id, Relation::On).empty()) return std::nullopt;
    const bool stuck = !t.detected_last || failures(t.id, "Retrieve") >= kMaxFailures;
    if (stuck && (t.ap_attempts >= 2 || failures(t.id, "Retrieve") > 0))
      for (const NodeView* x : grounds(t.id, Relation::Behind))
        if (can_move(*x)) return interact(*x, PrimitiveKind::PickPlace, "move the " + x->name + " away from the " + t.name);
    if (stuck && t.ap_attempts < kMaxViews) return look(t, "look for the " + t.name + " again");
    return std::nullopt;
  }

  // A same-kind object whose distinguishing side may face away.
  std::optional<Decision> reveal(const NodeView& p) const {
    if (!p.movable || succeeded(p.id, "Rotate") || failures(p.id, "Rotate") >= kMaxFailures) return std::nullopt;
    if (p.detected_last && exposed(p))
      return interact(p, PrimitiveKind::Rotate, "turn the " + p.name + " to check whether it is the " + what_);
    if (p.ap_attempts < kMaxViews) return look(p, "look at the " + p.name + " to check whether it is the " + what_);
    return std::nullopt;
  }

  std::optional<Decision> explore() const {
    struct Ranked {
      double prio;
      int relevance;
      double volume;
      const NodeView* n;
    };
    std::vector<Ranked> cands;
    for (const auto& u : req_.nodes) {
      if (u.known || !u.region_relation || u.ap_attempts >= kMaxViews) continue;
      const NodeView* parent = node(u.region_parent);
      if (!parent) continue;
      auto tags = parent->tags;
      tags.push_back(parent->name);
      cands.push_back({priority_ ? priority_(u) : 0.0, semantic_relevance(tags, want_), u.region_volume, &u});
    }
    std::sort(cands.begin(), cands.end(), [](const Ranked& a, const Ranked& b) {
      return std::make_tuple(-a.prio, -a.relevance, -a.volume, a.n->id) <
             std::make_tuple(-b.prio, -b.relevance, -b.volume, b.n->id);
    });
    for (const auto& c : cands)
      if (auto d = explore_one(*c.n, *node(c.n->region_parent))) return d;
    return std::nullopt;
  }

  std::optional<Decision> explore_one(const NodeView& u, const NodeView& parent) const {
    std::string where(relation_name(*u.region_relation));
    where[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(where[0])));
    where += " the " + parent.name;
    const std::string goal = "look for the " + what_ + " " + where;
    switch (*u.region_relation) {
      case Relation::Inside:
        if (parent.container_state == ContainerState::Closed) {
          if (can_open(parent))
            return interact(parent, PrimitiveKind::Open, "open the " + parent.name + " to look for the " + what_);
          if (parent.ap_attempts < kMaxViews) return look(parent, "find the handle of the " + parent.name);
          return std::nullopt;
        }
        if (u.ap_attempts >= 2)
          for (const NodeView* x : sources(parent.id, Relation::Inside))
            if (can_move(*x)) return interact(*x, PrimitiveKind::PickPlace, "move the " + x->name + " aside " + where);
        return look(u, goal);
      case Relation::Behind:
        if (u.ap_attempts >= 2 && can_move(parent))
          return interact(parent, PrimitiveKind::PickPlace, "move the " + parent.name + " to see behind it");
        return look(u, goal);
      case Relation::Under:
        if (can_move(parent)) return interact(parent, PrimitiveKind::PickPlace, "lift the " + parent.name + " to see under it");
        return look(u, goal);
      default:
        return look(u, goal);
    }
  }

  const DecideRequest& req_;
  const std::function<double(const NodeView&)>& priority_;
  std::vector<std::string> want_;
  std::string what_;
  std::map<std::string, const NodeView*> by_id_;
};

}  // namespace

Decision heuristic_decide(const DecideRequest& req, const std::function<double(const NodeView&)>& priority) {
  return Policy(req, priority).run();
}

}  // namespace retriever
