#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fvp {

/// Moment accumulators for classic Adam with bias correction.
struct AdamState {
  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}

  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update in place. Weight decay is the L2 form: g <- g + weight_decay * w.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr,
               double weight_decay);

}  // namespace fvp
