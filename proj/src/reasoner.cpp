#include "retriever/reasoner.hpp"

#include "retriever/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace retriever {

std::string_view primitive_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Open: return "Open";
    case PrimitiveKind::Close: return "Close";
    case PrimitiveKind::PickPlace: return "PickPlace";
    case PrimitiveKind::Rotate: return "Rotate";
    case PrimitiveKind::Retrieve: return "Retrieve";
  }
  return "?";
}

std::optional<PrimitiveKind> parse_primitive(std::string_view s) {
  for (auto k : {PrimitiveKind::Open, PrimitiveKind::Close, PrimitiveKind::PickPlace, PrimitiveKind::Rotate,
                 PrimitiveKind::Retrieve})
    if (primitive_name(k) == s) return k;
  return std::nullopt;
}

std::string_view action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::None: return "None";
    case ActionKind::ActivePerception: return "ActivePerception";
    case ActionKind::InteractivePerception: return "InteractivePerception";
    case ActionKind::Manipulation: return "Manipulation";
  }
  return "?";
}

std::optional<ActionKind> parse_action_kind(std::string_view s) {
  for (auto k : {ActionKind::None, ActionKind::ActivePerception, ActionKind::InteractivePerception,
                 ActionKind::Manipulation})
    if (action_kind_name(k) == s) return k;
  return std::nullopt;
}

std::string_view variant_name(const ReasonerRequest& req) {
  static constexpr std::string_view names[] = {"MatchInstances", "InferAttributes", "InferRelationsVeto",
                                               "HypothesizeUnknown", "SelectDirection", "SelectPose", "Decide"};
  return names[req.index()];
}

ReasonerResponse CountingReasoner::respond(const ReasonerRequest& req) {
  if (calls_ >= limit_) throw BudgetExceeded();
  ++calls_;
  return inner_.respond(req);
}

// ---------------------------------------------------------------------------
// Matching

namespace {

double l2(const Descriptor& a, const Descriptor& b) {
  double s = 0;
  for (int i = 0; i < kDescriptorDim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct MatchSearch {
  const std::vector<std::vector<double>>& cost;  // inf where infeasible
  double theta;
  std::vector<double> floor;  // per detection, cheapest option
  std::vector<int> cur, best;
  std::vector<bool> used;
  double best_cost = std::numeric_limits<double>::infinity();

  void dfs(std::size_t i, double acc) {
    if (i == cost.size()) {
      if (acc < best_cost - 1e-12) {
        best_cost = acc;
        best = cur;
      }
      return;
    }
    double bound = acc;
    for (std::size_t k = i; k < cost.size(); ++k) bound += floor[k];
    if (bound >= best_cost - 1e-12) return;
    for (std::size_t j = 0; j < used.size(); ++j) {
      if (used[j] || !std::isfinite(cost[i][j])) continue;
      used[j] = true;
      cur[i] = static_cast<int>(j);
      dfs(i + 1, acc + cost[i][j]);
      used[j] = false;
    }
    cur[i] = -1;
    dfs(i + 1, acc + theta);
  }
};

}  // namespace

MatchInstancesResult heuristic_match(const MatchInstancesRequest& req) {
  const std::size_t nd = req.detections.size(), nn = req.nodes.size();
  std::vector<std::vector<double>> cost(nd, std::vector<double>(nn, std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i < nd; ++i) {
    for (std::size_t j = 0; j < nn; ++j) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& h : req.nodes[j].history) d = std::min(d, l2(req.detections[i].descriptor, h));
      const double c = d + req.lambda * req.detections[i].centroid_distance.at(j);
      if (c <= req.theta) cost[i][j] = c;
    }
  }

  MatchInstancesResult res;
  res.assignment.assign(nd, -1);
  if (nd <= req.exact_limit) {
    MatchSearch s{cost, req.theta, {}, std::vector<int>(nd, -1), std::vector<int>(nd, -1), std::vector<bool>(nn, false)};
    for (std::size_t i = 0; i < nd; ++i) {
      double f = req.theta;
      for (double c : cost[i]) f = std::min(f, c);
      s.floor.push_back(f);
    }
    s.dfs(0, 0.0);
    res.assignment = s.best;
    return res;
  }

  struct Pair {
    double c;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < nd; ++i)
    for (std::size_t j = 0; j < nn; ++j)
      if (std::isfinite(cost[i][j])) pairs.push_back({cost[i][j], i, j});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return a.c < b.c || (a.c == b.c && std::tie(a.i, a.j) < std::tie(b.i, b.j));
  });
  std::vector<bool> used(nn, false);
  for (const auto& p : pairs) {
    if (res.assignment[p.i] >= 0 || used[p.j]) continue;
    res.assignment[p.i] = static_cast<int>(p.j);
    used[p.j] = true;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Attributes

InferAttributesResult heuristic_attributes(const InferAttributesRequest& req) {
  InferAttributesResult res;
  for (const auto& item : req.items) {
    NodeAttributes a;
    const auto& h = item.history;
    if (h.empty()) {
      res.attributes.push_back(a);
      continue;
    }
    std::map<std::string, int> count;
    for (const auto& r : h) ++count[r.label];
    std::string best = h.front().label;
    for (const auto& r : h)
      if (count[r.label] > count[best]) best = r.label;
    a.name = best;
    a.conf = static_cast<double>(count[best]) / static_cast<double>(h.size());
    a.occl = std::all_of(h.begin(), h.end(),
                         [&](const ObservationRecord& r) { return r.visible_fraction < req.theta_full && !r.frustum_clipped; });
    a.view = std::all_of(h.begin(), h.end(), [](const ObservationRecord& r) { return r.frustum_clipped; });
    a.movable = label_is_movable(a.name);
    std::ostringstream desc;
    desc << "a " << (a.movable ? "movable " : "static ") << a.name << " seen " << h.size()
         << (h.size() == 1 ? " time" : " times");
    if (a.occl) desc << ", always partly hidden";
    if (a.view) desc << ", never fully in view";
    a.desc = desc.str();
    res.attributes.push_back(std::move(a));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Viewpoints

int heuristic_select_direction(const SelectDirectionRequest& req) {
  int best = 0;
  for (std::size_t i = 1; i < req.candidates.size(); ++i)
    if (req.candidates[i].score > req.candidates[static_cast<std::size_t>(best)].score) best = static_cast<int>(i);
  return req.candidates.empty() ? 0 : req.candidates[static_cast<std::size_t>(best)].index;
}

PoseChoice heuristic_select_pose(const SelectPoseRequest& req) {
  PoseChoice out;
  if (req.generative) {
    // Straight back along the current line of sight, onto the sphere.
    Vec3 d = req.current.position - req.center;
    if (d.norm() < 1e-9) d = Vec3::UnitZ();
    out.pose = CameraPose::look_at(req.center + req.radius * d.normalized(), req.center);
    return out;
  }
  int best = 0;
  for (std::size_t i = 1; i < req.candidates.size(); ++i)
    if (req.candidates[i].score > req.candidates[static_cast<std::size_t>(best)].score) best = static_cast<int>(i);
  out.index = req.candidates.empty() ? 0 : req.candidates[static_cast<std::size_t>(best)].index;
  return out;
}

ReasonerResponse HeuristicReasoner::respond(const ReasonerRequest& req) {
  return std::visit(
      [](const auto& r) -> ReasonerResponse {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, MatchInstancesRequest>) return heuristic_match(r);
        else if constexpr (std::is_same_v<T, InferAttributesRequest>) return heuristic_attributes(r);
        else if constexpr (std::is_same_v<T, InferRelationsVetoRequest>) return KeepResult{std::vector<bool>(r.edges.size(), true)};
        else if constexpr (std::is_same_v<T, HypothesizeUnknownRequest>) return KeepResult{std::vector<bool>(r.proposals.size(), true)};
        else if constexpr (std::is_same_v<T, SelectDirectionRequest>) return IndexResult{heuristic_select_direction(r)};
        else if constexpr (std::is_same_v<T, SelectPoseRequest>) return heuristic_select_pose(r);
        else return heuristic_decide(r);
      },
      req);
}

}  // namespace retriever
