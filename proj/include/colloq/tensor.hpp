#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace colloq {

using Real = double;

// Dense row-major matrix. Vectors are stored as 1 x n.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, Real fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<Real> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<Real>& values() { return data_; }
  const std::vector<Real>& values() const { return data_; }

  void fill(Real v);
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

// out = W x + b, where W is (out x in) and x has length in.
void affine(const Tensor2& weights, std::span<const Real> bias,
            std::span<const Real> x, std::span<Real> out);

// out += W x
void matvec_add(const Tensor2& weights, std::span<const Real> x,
                std::span<Real> out);

// grad_x += W^T dy
void matvec_transpose_add(const Tensor2& weights, std::span<const Real> dy,
                          std::span<Real> grad_x);

// grad_w += dy x^T
void outer_add(std::span<const Real> dy, std::span<const Real> x,
               Tensor2& grad_w);

}  // namespace colloq
