#include "colloq/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace colloq {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<Real> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("tensor data size does not match shape " +
                                shape_string());
  }
}

void Tensor2::fill(Real v) {
  for (auto& x : data_) x = v;
}

bool Tensor2::all_finite() const {
  for (Real x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor2::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void affine(const Tensor2& weights, std::span<const Real> bias,
            std::span<const Real> x, std::span<Real> out) {
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    Real acc = bias.empty() ? 0.0 : bias[r];
    const auto w = weights.row(r);
    for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
}

void matvec_add(const Tensor2& weights, std::span<const Real> x,
                std::span<Real> out) {
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    Real acc = 0.0;
    const auto w = weights.row(r);
    for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * x[c];
    out[r] += acc;
  }
}

void matvec_transpose_add(const Tensor2& weights, std::span<const Real> dy,
                          std::span<Real> grad_x) {
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    const Real g = dy[r];
    if (g == 0.0) continue;
    const auto w = weights.row(r);
    for (std::size_t c = 0; c < w.size(); ++c) grad_x[c] += w[c] * g;
  }
}

void outer_add(std::span<const Real> dy, std::span<const Real> x,
               Tensor2& grad_w) {
  for (std::size_t r = 0; r < grad_w.rows(); ++r) {
    const Real g = dy[r];
    if (g == 0.0) continue;
    auto w = grad_w.row(r);
    for (std::size_t c = 0; c < w.size(); ++c) w[c] += g * x[c];
  }
}

}  // namespace colloq
