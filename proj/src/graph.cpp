#include "gismo/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gismo/errors.hpp"

namespace gismo {

FlavorGraph FlavorGraph::build(
    std::size_t ingredient_count, std::vector<std::string> compound_names,
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> edges) {
  FlavorGraph g;
  g.ingredient_count_ = ingredient_count;
  g.compound_names_ = std::move(compound_names);
  const std::size_t n = ingredient_count + g.compound_names_.size();
  g.kinds_.assign(n, NodeKind::Ingredient);
  for (std::size_t v = ingredient_count; v < n; ++v) g.kinds_[v] = NodeKind::Compound;

  std::unordered_set<std::uint64_t> seen;
  std::vector<std::pair<std::uint64_t, double>> directed;  // (u<<32|v, w)
  directed.reserve(edges.size() * 2);
  for (const auto& [u, v, w] : edges) {
    require(u < n && v < n, "edge endpoint out of range");
    require(u != v, "self-loop on node " + std::to_string(u));
    require(w > 0.0 && std::isfinite(w),
            "non-positive edge weight on (" + std::to_string(u) + ", " + std::to_string(v) + ")");
    const std::uint64_t key = u < v ? (static_cast<std::uint64_t>(u) << 32) | v
                                    : (static_cast<std::uint64_t>(v) << 32) | u;
    require(seen.insert(key).second, "duplicate undirected edge (" + std::to_string(u) +
                                         ", " + std::to_string(v) + ")");
    directed.emplace_back((static_cast<std::uint64_t>(u) << 32) | v, w);
    directed.emplace_back((static_cast<std::uint64_t>(v) << 32) | u, w);
  }
  std::sort(directed.begin(), directed.end());

  g.row_offsets_.assign(n + 1, 0);
  g.edges_.reserve(directed.size());
  for (const auto& [key, w] : directed) {
    const std::uint32_t u = static_cast<std::uint32_t>(key >> 32);
    const std::uint32_t v = static_cast<std::uint32_t>(key & 0xffffffffu);
    g.row_offsets_[u + 1] = g.edges_.size() + 1;
    g.edges_.push_back({v, w});
  }
  for (std::size_t i = 1; i <= n; ++i) {
    g.row_offsets_[i] = std::max(g.row_offsets_[i], g.row_offsets_[i - 1]);
  }
  return g;
}

NodeKind FlavorGraph::kind(std::uint32_t v) const {
  check_invariant(v < kinds_.size(), "node id out of range");
  return kinds_[v];
}

const std::string& FlavorGraph::compound_name(std::uint32_t v) const {
  check_invariant(v >= ingredient_count_ && v < kinds_.size(),
                  "compound id out of range");
  return compound_names_[v - ingredient_count_];
}

std::span<const FlavorGraph::Edge> FlavorGraph::neighbors(std::uint32_t v) const {
  check_invariant(v < kinds_.size(), "node id out of range");
  const std::uint64_t begin = row_offsets_[v];
  const std::uint64_t end = row_offsets_[v + 1];
  return {edges_.data() + begin, edges_.data() + end};
}

Matrix FlavorGraph::to_dense() const {
  check_invariant(node_count() <= 10'000, "to_dense: graph too large");
  Matrix a(node_count(), node_count());
  for (std::uint32_t v = 0; v < node_count(); ++v) {
    for (const Edge& e : neighbors(v)) a.at(v, e.neighbor) = e.weight;
  }
  return a;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

FlavorGraph load_graph(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  require(in.good(), "cannot open graph file: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "graph file is empty: " + path);
  require(line.find("node_a") != std::string::npos,
          path + ": missing header row (expected node_a,node_b,edge_kind,weight)");

  std::vector<std::string> compound_names;
  std::unordered_map<std::string, std::uint32_t> compound_ids;
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> edges;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_row(line);
    const std::string where = path + " line " + std::to_string(lineno);
    require(fields.size() == 3 || fields.size() == 4, where + ": expected 3 or 4 columns");
    const std::string& kind = fields[2];

    const auto a = resolve_ingredient(fields[0], vocab);
    require(a.has_value(), where + ": unresolvable ingredient \"" + fields[0] + "\"");

    std::uint32_t b = 0;
    if (kind == "ingr-ingr") {
      const auto rb = resolve_ingredient(fields[1], vocab);
      require(rb.has_value(), where + ": unresolvable ingredient \"" + fields[1] + "\"");
      b = *rb;
    } else if (kind == "ingr-comp") {
      const std::string cname = normalize_surface(fields[1]);
      require(!cname.empty(), where + ": empty compound name");
      auto [it, inserted] = compound_ids.emplace(
          cname, static_cast<std::uint32_t>(vocab.size() + compound_names.size()));
      if (inserted) compound_names.push_back(cname);
      b = it->second;
    } else {
      throw FormatError(where + ": unknown edge_kind \"" + kind + "\"");
    }

    double weight = 1.0;
    const bool has_weight = fields.size() == 4 && !fields[3].empty();
    if (has_weight) {
      try {
        std::size_t pos = 0;
        weight = std::stod(fields[3], &pos);
        require(pos == fields[3].size(), where + ": bad weight \"" + fields[3] + "\"");
      } catch (const std::exception&) {
        throw FormatError(where + ": bad weight \"" + fields[3] + "\"");
      }
    } else {
      require(kind == "ingr-comp", where + ": ingr-ingr edge without weight");
    }
    require(weight > 0.0, where + ": weight must be positive");
    require(*a != b, where + ": self-loop");
    edges.emplace_back(*a, b, weight);
  }
  try {
    return FlavorGraph::build(vocab.size(), std::move(compound_names), std::move(edges));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

double npmi(std::uint64_t pair_count, std::uint64_t count_u, std::uint64_t count_v,
            std::uint64_t total) {
  require(total > 0, "npmi: zero total");
  require(pair_count > 0 && count_u > 0 && count_v > 0, "npmi: counts must be positive");
  require(pair_count <= count_u && pair_count <= count_v,
          "npmi: pair count exceeds a marginal");
  const double p_uv = static_cast<double>(pair_count) / static_cast<double>(total);
  const double p_u = static_cast<double>(count_u) / static_cast<double>(total);
  const double p_v = static_cast<double>(count_v) / static_cast<double>(total);
  if (p_uv >= 1.0) return 1.0;  // perfect co-occurrence, -ln p(u,v) would be 0
  return std::log(p_uv / (p_u * p_v)) / -std::log(p_uv);
}

std::map<std::pair<std::uint32_t, std::uint32_t>, double> compute_npmi(
    const std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t>& pair_counts,
    const std::vector<std::uint64_t>& item_counts, std::uint64_t total) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> weights;
  for (const auto& [pair, count] : pair_counts) {
    const auto [u, v] = pair;
    check_invariant(u < item_counts.size() && v < item_counts.size(),
                    "compute_npmi: item id out of range");
    const double w = npmi(count, item_counts[u], item_counts[v], total);
    if (w > 0.0) weights.emplace(pair, w);
  }
  return weights;
}

}  // namespace gismo
