#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "colloq/layers.hpp"

namespace colloq {

struct AdamState {
  explicit AdamState(double learning_rate = 0.001, double beta1 = 0.9,
                     double beta2 = 0.999, double epsilon = 1e-8)
      : learning_rate(learning_rate),
        beta1(beta1),
        beta2(beta2),
        epsilon(epsilon) {}

  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  std::uint64_t step = 0;
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;
};

// One Adam step over `params` using their accumulated gradients. Moment
// buffers are created on the first call and must keep matching shapes.
inline void adam_update(AdamState& state, std::span<Parameter* const> params) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->value.rows(), p->value.cols());
      state.second_moment.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam state does not match parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor2& value = params[p]->value;
    const Tensor2& grad = params[p]->grad;
    Tensor2& m = state.first_moment[p];
    Tensor2& v = state.second_moment[p];
    if (m.size() != value.size()) {
      throw std::invalid_argument("adam moment shape mismatch for " +
                                  params[p]->name);
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace colloq
