#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "colloq/layers.hpp"

namespace testing {

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

// Finite-difference check of one layer under the scalar loss
// sum(weights * forward(x)). `forward` must be a pure function of the
// parameters and x; `backward` receives d loss / d output and returns
// d loss / d x while accumulating parameter gradients.
inline double check_layer(std::vector<colloq::Parameter*> params, colloq::Tensor2& x,
                          const std::function<colloq::Tensor2()>& forward,
                          const std::function<colloq::Tensor2(const colloq::Tensor2&)>& backward,
                          colloq::Rng& rng, double delta = 1e-5) {
  colloq::Tensor2 out = forward();
  colloq::Tensor2 weights(out.rows(), out.cols());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = rng.uniform(-1.0, 1.0);
  auto loss = [&] {
    const colloq::Tensor2 y = forward();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
    return s;
  };
  for (auto* p : params) p->zero_grad();
  forward();
  const colloq::Tensor2 dx = backward(weights);

  double worst = 0.0;
  auto probe = [&](colloq::Real& value, double analytic) {
    const double saved = value;
    value = saved + delta;
    const double up = loss();
    value = saved - delta;
    const double down = loss();
    value = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * delta)));
  };
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) probe(p->value[i], p->grad[i]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) probe(x[i], dx[i]);
  return worst;
}

inline colloq::Tensor2 random_tensor(std::size_t rows, std::size_t cols, colloq::Rng& rng,
                                     double scale = 1.0) {
  colloq::Tensor2 t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

}  // namespace testing
