#include "gismo/optimizer.hpp"

#include <cmath>

#include "gismo/errors.hpp"

namespace gismo {

AdamState AdamState::init(std::span<Parameter* const> params) {
  AdamState state;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.rows(), p->value.cols());
    state.second_moment.emplace_back(p->value.rows(), p->value.cols());
  }
  return state;
}

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr,
               double weight_decay) {
  check_invariant(params.size() == state.first_moment.size(),
                  "adam_step: state does not match parameter list");
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    check_invariant(m.same_shape(p.value), "adam_step: moment shape mismatch");
    double* value = p.value.data();
    double* grad = p.grad.data();
    double* md = m.data();
    double* vd = v.data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = grad[k] + weight_decay * value[k];
      md[k] = AdamState::kBeta1 * md[k] + (1.0 - AdamState::kBeta1) * g;
      vd[k] = AdamState::kBeta2 * vd[k] + (1.0 - AdamState::kBeta2) * g * g;
      const double m_hat = md[k] / bc1;
      const double v_hat = vd[k] / bc2;
      value[k] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEpsHat);
      grad[k] = 0.0;
    }
  }
}

GradCheckResult grad_check(const std::function<double(bool)>& eval,
                           std::span<Parameter* const> params, std::size_t probe_count,
                           double step, Rng& rng) {
  std::size_t total = 0;
  for (const Parameter* p : params) total += p->value.size();
  check_invariant(total > 0, "grad_check: no parameters");

  for (Parameter* p : params) p->zero_grad();
  eval(true);
  std::vector<Matrix> tape_grads;
  tape_grads.reserve(params.size());
  for (const Parameter* p : params) tape_grads.push_back(p->grad);

  GradCheckResult result;
  result.probes = probe_count;
  for (std::size_t probe = 0; probe < probe_count; ++probe) {
    std::uint64_t flat = rng.below(total);
    std::size_t pi = 0;
    while (flat >= params[pi]->value.size()) {
      flat -= params[pi]->value.size();
      ++pi;
    }
    double& coord = params[pi]->value.data()[flat];
    const double orig = coord;
    coord = orig + step;
    const double f_plus = eval(false);
    coord = orig - step;
    const double f_minus = eval(false);
    coord = orig;

    const double fd = (f_plus - f_minus) / (2.0 * step);
    const double g = tape_grads[pi].data()[flat];
    const double abs_err = std::fabs(g - fd);
    const double denom = std::max(std::fabs(g), std::fabs(fd));
    const double rel_err = denom < 1e-8 ? abs_err : abs_err / denom;
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    result.max_rel_error = std::max(result.max_rel_error, rel_err);
  }
  return result;
}

}  // namespace gismo
