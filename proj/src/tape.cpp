#include "gismo/tape.hpp"

#include <algorithm>
#include <cmath>

#include "gismo/errors.hpp"

namespace gismo {

Matrix sparse_aggregate(const FlavorGraph& g, const Matrix& h) {
  check_invariant(h.rows() == g.node_count(), "sparse_aggregate: shape mismatch");
  Matrix out(h.rows(), h.cols());
  const std::int64_t n = static_cast<std::int64_t>(g.node_count());
#pragma omp parallel for schedule(static)
  for (std::int64_t v = 0; v < n; ++v) {
    double* dst = out.row(static_cast<std::size_t>(v));
    for (const FlavorGraph::Edge& e : g.neighbors(static_cast<std::uint32_t>(v))) {
      const double* src = h.row(e.neighbor);
      for (std::size_t c = 0; c < h.cols(); ++c) dst[c] += e.weight * src[c];
    }
  }
  return out;
}

double contrastive_loss(double pos_score, std::span<const double> neg_scores) {
  double max = pos_score;
  for (double s : neg_scores) max = std::max(max, s);
  double denom = std::exp(pos_score - max);
  for (double s : neg_scores) denom += std::exp(s - max);
  return -(pos_score - max - std::log(denom));
}

Tape::Var Tape::push(Matrix value, std::function<void(Tape&)> back) {
  Node node;
  node.grad = Matrix(value.rows(), value.cols());
  node.value = std::move(value);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::input(Matrix value) { return push(std::move(value)); }

Tape::Var Tape::param(Parameter& p) {
  Parameter* bound = &p;
  Var id = push(p.value);
  nodes_[id].back = [bound, id](Tape& t) { add_inplace(bound->grad, t.grad(id)); };
  return id;
}

Tape::Var Tape::matmul(Var a, Var b) {
  Var id = push(gismo::matmul(value(a), value(b)));
  nodes_[id].back = [a, b, id](Tape& t) {
    add_inplace(t.grad_mut(a), matmul_nt(t.grad(id), t.value(b)));
    add_inplace(t.grad_mut(b), matmul_tn(t.value(a), t.grad(id)));
  };
  return id;
}

Tape::Var Tape::add(Var a, Var b) {
  check_invariant(value(a).same_shape(value(b)), "add: shape mismatch");
  Matrix out = value(a);
  add_inplace(out, value(b));
  Var id = push(std::move(out));
  nodes_[id].back = [a, b, id](Tape& t) {
    add_inplace(t.grad_mut(a), t.grad(id));
    add_inplace(t.grad_mut(b), t.grad(id));
  };
  return id;
}

Tape::Var Tape::add_row_broadcast(Var x, Var bias_row) {
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias_row);
  check_invariant(bv.rows() == 1 && bv.cols() == xv.cols(),
                  "add_row_broadcast: bias shape mismatch");
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* dst = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) dst[c] += bv.at(0, c);
  }
  Var id = push(std::move(out));
  nodes_[id].back = [x, bias_row, id](Tape& t) {
    const Matrix& d = t.grad(id);
    add_inplace(t.grad_mut(x), d);
    Matrix& gb = t.grad_mut(bias_row);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const double* src = d.row(r);
      for (std::size_t c = 0; c < d.cols(); ++c) gb.at(0, c) += src[c];
    }
  };
  return id;
}

Tape::Var Tape::relu(Var x) {
  Var id = push(gismo::relu(value(x)));
  nodes_[id].back = [x, id](Tape& t) {
    const Matrix& d = t.grad(id);
    const Matrix& xv = t.value(x);
    Matrix& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (xv.data()[i] > 0.0) gx.data()[i] += d.data()[i];
    }
  };
  return id;
}

Tape::Var Tape::dropout(Var x, double rate, Rng& rng, bool training) {
  check_invariant(rate >= 0.0 && rate < 1.0, "dropout: rate out of range");
  if (!training || rate == 0.0) return x;
  const Matrix& xv = value(x);
  Matrix mask(xv.rows(), xv.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < rate ? 0.0 : scale;
  }
  Matrix out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  Var id = push(std::move(out));
  nodes_[id].back = [x, id, mask = std::move(mask)](Tape& t) {
    const Matrix& d = t.grad(id);
    Matrix& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < d.size(); ++i) gx.data()[i] += d.data()[i] * mask.data()[i];
  };
  return id;
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts) {
  std::vector<const Matrix*> views;
  views.reserve(parts.size());
  for (Var p : parts) views.push_back(&value(p));
  Var id = push(gismo::concat_cols(views));
  nodes_[id].back = [parts, id](Tape& t) {
    const Matrix& d = t.grad(id);
    std::size_t col = 0;
    for (Var p : parts) {
      Matrix& gp = t.grad_mut(p);
      for (std::size_t r = 0; r < gp.rows(); ++r) {
        const double* src = d.row(r) + col;
        double* dst = gp.row(r);
        for (std::size_t c = 0; c < gp.cols(); ++c) dst[c] += src[c];
      }
      col += gp.cols();
    }
  };
  return id;
}

Tape::Var Tape::gather_rows(Var x, std::vector<std::uint32_t> rows) {
  const Matrix& xv = value(x);
  Matrix out(rows.size(), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_invariant(rows[i] < xv.rows(), "gather_rows: index out of range");
    std::copy_n(xv.row(rows[i]), xv.cols(), out.row(i));
  }
  Var id = push(std::move(out));
  nodes_[id].back = [x, id, rows = std::move(rows)](Tape& t) {
    const Matrix& d = t.grad(id);
    Matrix& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double* src = d.row(i);
      double* dst = gx.row(rows[i]);
      for (std::size_t c = 0; c < d.cols(); ++c) dst[c] += src[c];
    }
  };
  return id;
}

Tape::Var Tape::group_mean_rows(Var x, std::vector<std::vector<std::uint32_t>> groups) {
  const Matrix& xv = value(x);
  Matrix out(groups.size(), xv.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    check_invariant(!groups[g].empty(), "group_mean_rows: empty index set");
    double* dst = out.row(g);
    for (std::uint32_t r : groups[g]) {
      check_invariant(r < xv.rows(), "group_mean_rows: index out of range");
      const double* src = xv.row(r);
      for (std::size_t c = 0; c < xv.cols(); ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(groups[g].size());
    for (std::size_t c = 0; c < xv.cols(); ++c) dst[c] *= inv;
  }
  Var id = push(std::move(out));
  nodes_[id].back = [x, id, groups = std::move(groups)](Tape& t) {
    const Matrix& d = t.grad(id);
    Matrix& gx = t.grad_mut(x);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double inv = 1.0 / static_cast<double>(groups[g].size());
      const double* src = d.row(g);
      for (std::uint32_t r : groups[g]) {
        double* dst = gx.row(r);
        for (std::size_t c = 0; c < d.cols(); ++c) dst[c] += src[c] * inv;
      }
    }
  };
  return id;
}

Tape::Var Tape::mean_rows(Var x, std::vector<std::uint32_t> rows) {
  return group_mean_rows(x, {std::move(rows)});
}

Tape::Var Tape::sparse_aggregate(const FlavorGraph& g, Var h) {
  Var id = push(gismo::sparse_aggregate(g, value(h)));
  const FlavorGraph* graph = &g;
  nodes_[id].back = [graph, h, id](Tape& t) {
    // the graph is symmetric, so the adjoint is another aggregation
    add_inplace(t.grad_mut(h), gismo::sparse_aggregate(*graph, t.grad(id)));
  };
  return id;
}

Tape::Var Tape::gin_combine(Var eps, Var h_self, Var h_agg) {
  const Matrix& ev = value(eps);
  check_invariant(ev.rows() == 1 && ev.cols() == 1, "gin_combine: eps must be 1x1");
  check_invariant(value(h_self).same_shape(value(h_agg)), "gin_combine: shape mismatch");
  const double e = ev.at(0, 0);
  Matrix out = value(h_self);
  scale_inplace(out, 1.0 + e);
  add_inplace(out, value(h_agg));
  Var id = push(std::move(out));
  nodes_[id].back = [eps, h_self, h_agg, id, e](Tape& t) {
    const Matrix& d = t.grad(id);
    const Matrix& self = t.value(h_self);
    Matrix& gs = t.grad_mut(h_self);
    Matrix& ga = t.grad_mut(h_agg);
    double eps_grad = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      gs.data()[i] += (1.0 + e) * d.data()[i];
      ga.data()[i] += d.data()[i];
      eps_grad += d.data()[i] * self.data()[i];
    }
    t.grad_mut(eps).at(0, 0) += eps_grad;
  };
  return id;
}

Tape::Var Tape::contrastive_mean(Var scores, std::size_t group_count,
                                 std::size_t negatives) {
  const Matrix& sv = value(scores);
  const std::size_t stride = 1 + negatives;
  check_invariant(sv.cols() == 1 && sv.rows() == group_count * stride,
                  "contrastive_mean: bad score layout");
  check_invariant(group_count > 0, "contrastive_mean: no groups");

  Matrix probs(sv.rows(), 1);  // softmax within each group, kept for backward
  double total = 0.0;
  for (std::size_t g = 0; g < group_count; ++g) {
    const double* s = sv.data() + g * stride;
    double max = s[0];
    for (std::size_t j = 1; j < stride; ++j) max = std::max(max, s[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < stride; ++j) denom += std::exp(s[j] - max);
    total += -(s[0] - max - std::log(denom));
    double* p = probs.data() + g * stride;
    for (std::size_t j = 0; j < stride; ++j) p[j] = std::exp(s[j] - max) / denom;
  }
  Matrix out(1, 1);
  out.at(0, 0) = total / static_cast<double>(group_count);

  Var id = push(std::move(out));
  nodes_[id].back = [scores, id, group_count, stride, probs = std::move(probs)](Tape& t) {
    const double upstream = t.grad(id).at(0, 0) / static_cast<double>(group_count);
    Matrix& gs = t.grad_mut(scores);
    for (std::size_t g = 0; g < group_count; ++g) {
      double* dst = gs.data() + g * stride;
      const double* p = probs.data() + g * stride;
      dst[0] += upstream * (p[0] - 1.0);
      for (std::size_t j = 1; j < stride; ++j) dst[j] += upstream * p[j];
    }
  };
  return id;
}

void Tape::backward(Var scalar_loss) {
  check_invariant(scalar_loss < nodes_.size(), "backward: unknown var");
  Matrix& seed = grad_mut(scalar_loss);
  check_invariant(seed.rows() == 1 && seed.cols() == 1, "backward: loss must be 1x1");
  seed.at(0, 0) = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

}  // namespace gismo
