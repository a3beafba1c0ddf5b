#include "retriever/ged.hpp"

#include "retriever/scene_graph.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>

namespace retriever {

void LabeledGraph::resize(std::size_t n) {
  labels.resize(n);
  rel.assign(n * n, 0);
}

void LabeledGraph::add_edge(std::size_t a, std::size_t b, Relation r) {
  rel[a * labels.size() + b] |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(r));
}

std::size_t LabeledGraph::edge_count() const {
  std::size_t n = 0;
  for (auto m : rel) n += static_cast<std::size_t>(std::popcount(m));
  return n;
}

LabeledGraph labeled_graph(const SceneGraph& g) {
  LabeledGraph out;
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;
  for (const auto& [id, n] : g.nodes) {
    if (n.kind != NodeKind::Known) continue;
    index[id] = names.size();
    names.push_back(n.attrs.name);
  }
  out.resize(names.size());
  out.labels = names;
  for (const auto& e : g.edges) {
    auto s = index.find(e.src);
    auto d = index.find(e.dst);
    if (s == index.end() || d == index.end()) continue;
    out.add_edge(s->second, d->second, e.relation);
  }
  return out;
}

namespace {

int pair_cost(std::uint8_t x, std::uint8_t y) {
  return std::max(std::popcount(static_cast<std::uint8_t>(x & ~y)), std::popcount(static_cast<std::uint8_t>(y & ~x)));
}

std::uint8_t rel_or_none(const LabeledGraph& g, int a, int b) {
  return (a < 0 || b < 0) ? 0 : g.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
}

struct Search {
  const LabeledGraph& a;
  const LabeledGraph& b;
  std::size_t n1, n2;
  std::vector<std::size_t> order;  // a-nodes in assignment order
  std::vector<int> map;            // a -> b or -1; -2 = unassigned
  std::vector<bool> used;
  int best = 0;
  std::vector<int> best_map;

  // Edge weight still unaccounted on each side is tracked incrementally:
  // a-edges with an unassigned endpoint; b-edges not between two used images.
  int rem_a = 0;
  int rem_b = 0;

  Search(const LabeledGraph& ga, const LabeledGraph& gb) : a(ga), b(gb), n1(ga.size()), n2(gb.size()) {}

  // Cost added by assigning a-node u to v (v = -1 deletes), given the current
  // partial map. Also reports how many a/b edge units become accounted.
  int step_cost(std::size_t u, int v, int& acc_a, int& acc_b) const {
    int c = 0;
    if (v < 0) c += 1;
    else if (a.labels[u] != b.labels[static_cast<std::size_t>(v)]) c += 1;
    acc_a = std::popcount(a.at(u, u));
    acc_b = v >= 0 ? std::popcount(b.at(static_cast<std::size_t>(v), static_cast<std::size_t>(v))) : 0;
    c += pair_cost(a.at(u, u), rel_or_none(b, v, v));
    for (std::size_t w = 0; w < n1; ++w) {
      if (w == u || map[w] == -2) continue;
      const int mw = map[w];
      c += pair_cost(a.at(u, w), rel_or_none(b, v, mw));
      c += pair_cost(a.at(w, u), rel_or_none(b, mw, v));
      acc_a += std::popcount(a.at(u, w)) + std::popcount(a.at(w, u));
      if (v >= 0 && mw >= 0)
        acc_b += std::popcount(rel_or_none(b, v, mw)) + std::popcount(rel_or_none(b, mw, v));
    }
    return c;
  }

  int label_bound(std::size_t depth) const {
    std::map<std::string, int> left;
    for (std::size_t k = depth; k < n1; ++k) ++left[a.labels[order[k]]];
    int wa = static_cast<int>(n1 - depth);
    int wb = 0;
    int common = 0;
    for (std::size_t v = 0; v < n2; ++v) {
      if (used[v]) continue;
      ++wb;
      auto it = left.find(b.labels[v]);
      if (it != left.end() && it->second > 0) {
        --it->second;
        ++common;
      }
    }
    return std::max(wa, wb) - common;
  }

  // Insertion of unused b-nodes and all b-edges touching them.
  int completion_cost() const {
    int c = 0;
    for (std::size_t v = 0; v < n2; ++v)
      if (!used[v]) ++c;
    for (std::size_t v = 0; v < n2; ++v)
      for (std::size_t w = 0; w < n2; ++w)
        if (!used[v] || !used[w]) c += std::popcount(b.at(v, w));
    return c;
  }

  void dfs(std::size_t depth, int cost) {
    if (depth == n1) {
      const int total = cost + completion_cost();
      if (total < best) {
        best = total;
        best_map = map;
      }
      return;
    }
    if (cost + label_bound(depth) + std::abs(rem_a - rem_b) >= best) return;
    const std::size_t u = order[depth];

    struct Option {
      int v;
      int c;
      int acc_a;
      int acc_b;
    };
    std::vector<Option> opts;
    for (int v = -1; v < static_cast<int>(n2); ++v) {
      if (v >= 0 && used[static_cast<std::size_t>(v)]) continue;
      Option o{v, 0, 0, 0};
      o.c = step_cost(u, v, o.acc_a, o.acc_b);
      opts.push_back(o);
    }
    std::stable_sort(opts.begin(), opts.end(), [](const Option& x, const Option& y) { return x.c < y.c; });
    for (const Option& o : opts) {
      if (cost + o.c >= best) continue;
      map[u] = o.v;
      if (o.v >= 0) used[static_cast<std::size_t>(o.v)] = true;
      rem_a -= o.acc_a;
      rem_b -= o.acc_b;
      dfs(depth + 1, cost + o.c);
      rem_a += o.acc_a;
      rem_b += o.acc_b;
      if (o.v >= 0) used[static_cast<std::size_t>(o.v)] = false;
      map[u] = -2;
    }
  }
};

std::vector<int> greedy_map(const LabeledGraph& a, const LabeledGraph& b, const std::vector<std::size_t>& order) {
  Search s(a, b);
  s.map.assign(a.size(), -2);
  s.used.assign(b.size(), false);
  for (std::size_t u : order) {
    int best_v = -1;
    int best_c = 0;
    bool first = true;
    for (int v = -1; v < static_cast<int>(b.size()); ++v) {
      if (v >= 0 && s.used[static_cast<std::size_t>(v)]) continue;
      int x = 0, y = 0;
      int c = s.step_cost(u, v, x, y);
      // Deleting defers the insertion cost of the partner; charge it up front.
      if (v < 0) c += 1;
      if (first || c < best_c) {
        best_c = c;
        best_v = v;
        first = false;
      }
    }
    s.map[u] = best_v;
    if (best_v >= 0) s.used[static_cast<std::size_t>(best_v)] = true;
  }
  return s.map;
}

// Pairwise swap / reassignment hill climbing on a complete mapping.
void improve(const LabeledGraph& a, const LabeledGraph& b, std::vector<int>& map) {
  int cur = mapping_cost(a, b, map);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < map.size(); ++i) {
      for (std::size_t j = i + 1; j < map.size(); ++j) {
        std::swap(map[i], map[j]);
        const int c = mapping_cost(a, b, map);
        if (c < cur) {
          cur = c;
          changed = true;
        } else {
          std::swap(map[i], map[j]);
        }
      }
      std::vector<bool> used(b.size(), false);
      for (int m : map)
        if (m >= 0) used[static_cast<std::size_t>(m)] = true;
      const int keep = map[i];
      for (int v = -1; v < static_cast<int>(b.size()); ++v) {
        if (v == keep || (v >= 0 && used[static_cast<std::size_t>(v)])) continue;
        map[i] = v;
        const int c = mapping_cost(a, b, map);
        if (c < cur) {
          cur = c;
          changed = true;
          break;
        }
        map[i] = keep;
      }
    }
  }
}

}  // namespace

int mapping_cost(const LabeledGraph& a, const LabeledGraph& b, const std::vector<int>& map) {
  const std::size_t n1 = a.size(), n2 = b.size();
  std::vector<int> inv(n2, -1);
  int c = 0;
  for (std::size_t u = 0; u < n1; ++u) {
    if (map[u] < 0) {
      ++c;
      continue;
    }
    inv[static_cast<std::size_t>(map[u])] = static_cast<int>(u);
    if (a.labels[u] != b.labels[static_cast<std::size_t>(map[u])]) ++c;
  }
  for (std::size_t v = 0; v < n2; ++v)
    if (inv[v] < 0) ++c;
  for (std::size_t u = 0; u < n1; ++u)
    for (std::size_t w = 0; w < n1; ++w) c += pair_cost(a.at(u, w), rel_or_none(b, map[u], map[w]));
  // b-pairs with at least one inserted endpoint.
  for (std::size_t v = 0; v < n2; ++v)
    for (std::size_t w = 0; w < n2; ++w)
      if (inv[v] < 0 || inv[w] < 0) c += std::popcount(b.at(v, w));
  return c;
}

GedResult graph_edit_distance(const LabeledGraph& a, const LabeledGraph& b, std::size_t exact_limit) {
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), 0);
  auto degree = [&](std::size_t u) {
    int d = 0;
    for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a.at(u, w)) + std::popcount(a.at(w, u));
    return d;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return degree(x) > degree(y); });

  std::vector<int> gmap = greedy_map(a, b, order);
  improve(a, b, gmap);
  const int upper = mapping_cost(a, b, gmap);
  if (a.size() > exact_limit || b.size() > exact_limit) return {upper, false};

  Search s(a, b);
  s.order = order;
  s.map.assign(a.size(), -2);
  s.used.assign(b.size(), false);
  s.best = upper + 1;
  s.best_map = gmap;
  s.rem_a = static_cast<int>(a.edge_count());
  s.rem_b = static_cast<int>(b.edge_count());
  s.dfs(0, 0);
  return {std::min(upper, s.best), true};
}

GedResult graph_edit_distance(const SceneGraph& a, const SceneGraph& b, std::size_t exact_limit) {
  return graph_edit_distance(labeled_graph(a), labeled_graph(b), exact_limit);
}

}  // namespace retriever
