#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "colloq/rng.hpp"
#include "colloq/tensor.hpp"

namespace colloq {

// A trainable tensor and its accumulated gradient (same shape).
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  std::string name;
  Tensor2 value;
  Tensor2 grad;

  void zero_grad() { grad.fill(0.0); }
};

enum class Mode { Train, Eval };

void glorot_uniform(Tensor2& w, std::size_t fan_in, std::size_t fan_out,
                    Rng& rng);
void uniform_init(Tensor2& w, Real limit, Rng& rng);

// Valid cross-correlation of x (L x d) with K filters stored as rows of
// `weights` (K x f*d, element (k, i*d + j) multiplies x[t+i, j]).
// Returns (L - f + 1) x K. Throws std::invalid_argument when L < f.
Tensor2 conv1d_forward(const Tensor2& x, const Tensor2& weights,
                       std::span<const Real> bias, std::size_t width);

class Conv1D {
 public:
  Conv1D(const std::string& prefix, std::size_t in_dim, std::size_t filters,
         std::size_t width);

  void init(Rng& rng);
  Tensor2 forward(const Tensor2& x);
  // Accumulates parameter gradients and returns d loss / d x.
  Tensor2 backward(const Tensor2& dy);

  std::size_t in_dim() const { return in_dim_; }
  std::size_t filters() const { return filters_; }
  std::size_t width() const { return width_; }

  Parameter weight;
  Parameter bias;

 private:
  std::size_t in_dim_, filters_, width_;
  Tensor2 input_;
};

class GlobalMaxPool {
 public:
  // T x K -> 1 x K. First index wins ties.
  Tensor2 forward(const Tensor2& y);
  Tensor2 backward(const Tensor2& dy) const;
  const std::vector<std::size_t>& argmax() const { return argmax_; }

 private:
  std::size_t rows_ = 0;
  std::vector<std::size_t> argmax_;
};

class Dense {
 public:
  Dense(const std::string& prefix, std::size_t in_dim, std::size_t out_dim);

  void init(Rng& rng);
  Tensor2 forward(const Tensor2& x);  // 1 x in -> 1 x out
  Tensor2 backward(const Tensor2& dy);

  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return weight.value.rows(); }

  Parameter weight;
  Parameter bias;

 private:
  Tensor2 input_;
};

class Relu {
 public:
  Tensor2 forward(const Tensor2& x);
  Tensor2 backward(const Tensor2& dy) const;

 private:
  Tensor2 input_;
};

// Inverted dropout. In spatial mode one mask value covers a whole column
// (an embedding channel across every time step).
class Dropout {
 public:
  explicit Dropout(double rate, bool spatial = false);

  Tensor2 forward(const Tensor2& x, Mode mode, Rng& rng);
  Tensor2 backward(const Tensor2& dy) const;

  double rate() const { return rate_; }
  bool spatial() const { return spatial_; }

 private:
  double rate_;
  bool spatial_;
  bool active_ = false;
  Tensor2 mask_;
};

struct LstmParams {
  const Tensor2& input_weights;      // 4H x in, gate blocks i, f, g, o
  const Tensor2& recurrent_weights;  // 4H x H
  std::span<const Real> bias;        // 4H
};

struct LstmStep {
  std::vector<Real> h;
  std::vector<Real> c;
};

LstmStep lstm_step(std::span<const Real> x, std::span<const Real> h,
                   std::span<const Real> c, const LstmParams& params);

struct GruParams {
  const Tensor2& input_weights;      // 3H x in, gate blocks z, r, n
  const Tensor2& recurrent_weights;  // 3H x H
  std::span<const Real> bias;        // 3H
};

// h' = z * h + (1 - z) * tanh(Wn x + Un (r * h) + bn)
std::vector<Real> gru_step(std::span<const Real> x, std::span<const Real> h,
                           const GruParams& params);

// Recurrent layers iterate over the first `length` rows only; the returned
// state sequence has `length` rows.
class Lstm {
 public:
  Lstm(const std::string& prefix, std::size_t in_dim, std::size_t hidden);

  void init(Rng& rng);
  Tensor2 forward(const Tensor2& x, std::size_t length, bool reverse = false);
  // d_states has one row per processed step; returns dx with x's shape.
  Tensor2 backward(const Tensor2& d_states);

  std::size_t hidden() const { return hidden_; }
  std::size_t in_dim() const { return in_dim_; }

  Parameter input_weights;
  Parameter recurrent_weights;
  Parameter bias;

 private:
  struct Cache {
    std::vector<Real> x, h_prev, c_prev, i, f, g, o, c, tanh_c;
  };
  std::size_t in_dim_, hidden_;
  std::size_t input_rows_ = 0;
  bool reverse_ = false;
  std::vector<Cache> steps_;
};

class Gru {
 public:
  Gru(const std::string& prefix, std::size_t in_dim, std::size_t hidden);

  void init(Rng& rng);
  Tensor2 forward(const Tensor2& x, std::size_t length, bool reverse = false);
  Tensor2 backward(const Tensor2& d_states);

  std::size_t hidden() const { return hidden_; }
  std::size_t in_dim() const { return in_dim_; }

  Parameter input_weights;
  Parameter recurrent_weights;
  Parameter bias;

 private:
  struct Cache {
    std::vector<Real> x, h_prev, z, r, n, rh;
  };
  std::size_t in_dim_, hidden_;
  std::size_t input_rows_ = 0;
  bool reverse_ = false;
  std::vector<Cache> steps_;
};

// Last row of a state sequence, or zeros when the sequence is empty.
Tensor2 final_state(const Tensor2& states, std::size_t hidden);
// Inverse of final_state for backward: a d_states with only the last row set.
Tensor2 expand_final_grad(const Tensor2& d_final, std::size_t steps);

// Runs one cell left-to-right and a second right-to-left over the true
// length, concatenating the two final states: [forward | backward].
template <typename Cell>
class Bidirectional {
 public:
  Bidirectional(const std::string& prefix, std::size_t in_dim,
                std::size_t hidden)
      : forward_cell(prefix + ".fwd", in_dim, hidden),
        backward_cell(prefix + ".bwd", in_dim, hidden) {}

  void init(Rng& rng) {
    forward_cell.init(rng);
    backward_cell.init(rng);
  }

  Tensor2 forward(const Tensor2& x, std::size_t length) {
    steps_ = length;
    const std::size_t h = forward_cell.hidden();
    const Tensor2 fwd = final_state(forward_cell.forward(x, length), h);
    const Tensor2 bwd =
        final_state(backward_cell.forward(x, length, /*reverse=*/true), h);
    Tensor2 out(1, 2 * h);
    for (std::size_t j = 0; j < h; ++j) {
      out[j] = fwd[j];
      out[h + j] = bwd[j];
    }
    return out;
  }

  Tensor2 backward(const Tensor2& dy) {
    const std::size_t h = forward_cell.hidden();
    Tensor2 d_fwd(1, h), d_bwd(1, h);
    for (std::size_t j = 0; j < h; ++j) {
      d_fwd[j] = dy[j];
      d_bwd[j] = dy[h + j];
    }
    Tensor2 dx = forward_cell.backward(expand_final_grad(d_fwd, steps_));
    const Tensor2 dx2 = backward_cell.backward(expand_final_grad(d_bwd, steps_));
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx2[i];
    return dx;
  }

  std::size_t hidden() const { return forward_cell.hidden(); }

  Cell forward_cell;
  Cell backward_cell;

 private:
  std::size_t steps_ = 0;
};

void softmax(std::span<const Real> logits, std::span<Real> out);

struct SoftmaxXent {
  Real loss;
  std::vector<Real> probabilities;
  std::vector<Real> grad;  // d loss / d logits = p - onehot
};

SoftmaxXent softmax_cross_entropy(std::span<const Real> logits,
                                  std::size_t target);

}  // namespace colloq
