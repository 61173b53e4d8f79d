#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gismo/graph.hpp"
#include "gismo/matrix.hpp"
#include "gismo/rng.hpp"

namespace gismo {

// A learnable tensor. Gradients are zeroed at the start of every optimizer
// step and populated by Tape::backward.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

// Row v of the output is the weighted sum of the feature rows of v's
// neighbors: out[v] = sum over (u, w) in neighbors(v) of w * h[u].
Matrix sparse_aggregate(const FlavorGraph& g, const Matrix& h);

// -log( e^pos / (e^pos + sum_m e^neg_m) ), stabilized with a max shift.
// Exactly zero when there are no negatives.
double contrastive_loss(double pos_score, std::span<const double> neg_scores);

// Reverse-mode tape over whole matrices. Forward calls record one node per
// operation; backward replays them in exact reverse order, accumulating
// gradients into the bound Parameters. A tape lives for one forward/backward
// pass and is confined to a single thread.
class Tape {
 public:
  using Var = std::uint32_t;

  Var input(Matrix value);       // constant leaf
  Var param(Parameter& p);       // learnable leaf

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row_broadcast(Var x, Var bias_row);  // bias_row is 1 x c
  Var relu(Var x);
  // Zeroes entries with probability `rate` and rescales survivors by
  // 1/(1-rate) during training; the identity (no node recorded) otherwise.
  Var dropout(Var x, double rate, Rng& rng, bool training);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather_rows(Var x, std::vector<std::uint32_t> rows);
  Var group_mean_rows(Var x, std::vector<std::vector<std::uint32_t>> groups);
  Var mean_rows(Var x, std::vector<std::uint32_t> rows);
  Var sparse_aggregate(const FlavorGraph& g, Var h);
  // (1 + eps) * h_self + h_agg with a learnable 1x1 eps
  Var gin_combine(Var eps, Var h_self, Var h_agg);
  // scores laid out per group as [positive, negative_1 .. negative_z];
  // returns the mean contrastive loss over all groups as a 1x1 value.
  Var contrastive_mean(Var scores, std::size_t group_count, std::size_t negatives);

  const Matrix& value(Var v) const { return nodes_[v].value; }
  const Matrix& grad(Var v) const { return nodes_[v].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and visits every recorded operation in
  // reverse, adding into Parameter::grad at the leaves.
  void backward(Var scalar_loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;  // empty for constant leaves
  };
  Var push(Matrix value, std::function<void(Tape&)> back = {});
  Matrix& grad_mut(Var v) { return nodes_[v].grad; }

  std::vector<Node> nodes_;
};

}  // namespace gismo
