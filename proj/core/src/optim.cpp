#include "fvp/optim.hpp"

#include <cmath>

#include "fvp/error.hpp"

namespace fvp {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr,
               double weight_decay) {
  require(params.size() == grads.size() && params.size() == state.m.size(), ErrorKind::kShape,
          "adam_step: parameter, gradient and state sizes differ");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + weight_decay * params[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace fvp
