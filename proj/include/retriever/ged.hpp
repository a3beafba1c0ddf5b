#pragma once

#include "retriever/relations.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace retriever {

struct SceneGraph;

/// Node labels plus a relation bitmask per ordered node pair.
struct LabeledGraph {
  std::vector<std::string> labels;
  std::vector<std::uint8_t> rel;  // n*n, bit = 1 << Relation

  std::size_t size() const { return labels.size(); }
  std::uint8_t at(std::size_t a, std::size_t b) const { return rel[a * labels.size() + b]; }
  void resize(std::size_t n);
  void add_edge(std::size_t a, std::size_t b, Relation r);
  std::size_t edge_count() const;
};

/// Known nodes only (labelled by name), edges between them.
LabeledGraph labeled_graph(const SceneGraph& g);

struct GedResult {
  int distance = 0;
  bool exact = true;
};

/// Unit-cost edit distance: node insert/delete/relabel and edge
/// insert/delete/relabel each cost 1. Exact branch and bound when both graphs
/// have at most `exact_limit` nodes, a greedy upper bound otherwise.
GedResult graph_edit_distance(const LabeledGraph& a, const LabeledGraph& b, std::size_t exact_limit = 12);
GedResult graph_edit_distance(const SceneGraph& a, const SceneGraph& b, std::size_t exact_limit = 12);

/// Cost of a complete mapping (map[i] = node of b, or -1 for deletion).
int mapping_cost(const LabeledGraph& a, const LabeledGraph& b, const std::vector<int>& map);

}  // namespace retriever
