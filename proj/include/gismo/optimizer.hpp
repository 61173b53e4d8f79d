#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gismo/rng.hpp"
#include "gismo/tape.hpp"

namespace gismo {

// Adam moment buffers, one pair per parameter, in registration order.
struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsHat = 1e-8;

  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step_count = 0;

  static AdamState init(std::span<Parameter* const> params);
};

// One Adam update with bias correction. Weight decay is applied in coupled
// form: the L2 term is added to the gradient before the moment update.
// Gradients are zeroed afterwards.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr,
               double weight_decay);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t probes = 0;
};

// Compares tape gradients against central finite differences on randomly
// probed parameter coordinates. `eval(true)` must compute the loss and leave
// fresh gradients in the parameters; `eval(false)` computes the loss only.
// The loss must be deterministic (dropout disabled, negatives fixed).
GradCheckResult grad_check(const std::function<double(bool)>& eval,
                           std::span<Parameter* const> params, std::size_t probe_count,
                           double step, Rng& rng);

}  // namespace gismo
