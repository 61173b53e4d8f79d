#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gismo/corpus.hpp"
#include "gismo/matrix.hpp"

namespace gismo {

enum class NodeKind : std::uint8_t { Ingredient, Compound };

// Immutable sparse weighted graph of ingredient and flavor-compound nodes.
// Ingredient node ids coincide with vocabulary ids; compound ids follow.
// The undirected structure is stored symmetrically in CSR form; neighbors of
// a node are sorted by id. No self-loops, all weights positive.
class FlavorGraph {
 public:
  struct Edge {
    std::uint32_t neighbor;
    double weight;
  };

  // Builds from an undirected edge list. Rejects self-loops, non-positive
  // weights, and duplicate undirected edges.
  static FlavorGraph build(std::size_t ingredient_count,
                           std::vector<std::string> compound_names,
                           std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> edges);

  std::size_t node_count() const { return kinds_.size(); }
  std::size_t ingredient_count() const { return ingredient_count_; }
  std::size_t compound_count() const { return kinds_.size() - ingredient_count_; }
  NodeKind kind(std::uint32_t v) const;
  const std::string& compound_name(std::uint32_t v) const;

  // Stored incident edges of v, ascending by neighbor id.
  std::span<const Edge> neighbors(std::uint32_t v) const;

  std::size_t edge_slot_count() const { return edges_.size(); }  // directed slots
  std::span<const std::uint64_t> row_offsets() const { return row_offsets_; }

  // Dense adjacency oracle for tests; guarded to small graphs.
  Matrix to_dense() const;

 private:
  std::size_t ingredient_count_ = 0;
  std::vector<NodeKind> kinds_;
  std::vector<std::string> compound_names_;
  std::vector<std::uint64_t> row_offsets_;
  std::vector<Edge> edges_;
};

// CSV with header and columns node_a,node_b,edge_kind,weight where edge_kind
// is "ingr-ingr" or "ingr-comp". Compound names get ids past the vocabulary
// on first appearance; ingr-comp rows may omit the weight (defaults to 1.0).
FlavorGraph load_graph(const std::string& path, const Vocabulary& vocab);

// Normalized pointwise mutual information of one co-occurring pair:
// ln(p(u,v) / (p(u) p(v))) / (-ln p(u,v)) with p(.) = count / total.
double npmi(std::uint64_t pair_count, std::uint64_t count_u, std::uint64_t count_v,
            std::uint64_t total);

// Edge weights for every pair with positive npmi; non-positive pairs are
// dropped. Only used by the synthetic-graph generator in tests.
std::map<std::pair<std::uint32_t, std::uint32_t>, double> compute_npmi(
    const std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t>& pair_counts,
    const std::vector<std::uint64_t>& item_counts, std::uint64_t total);

}  // namespace gismo
