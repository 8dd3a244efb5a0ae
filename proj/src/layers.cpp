#include "colloq/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace colloq {
namespace {

Real sigmoid(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

// Row `r` of x when iterating `step` of `length` in the given direction.
std::size_t source_row(std::size_t step, std::size_t length, bool reverse) {
  return reverse ? length - 1 - step : step;
}

void check_length(const Tensor2& x, std::size_t length, std::size_t in_dim) {
  if (x.cols() != in_dim) {
    throw std::invalid_argument("recurrent input has " +
                                std::to_string(x.cols()) + " columns, expected " +
                                std::to_string(in_dim));
  }
  if (length > x.rows()) {
    throw std::invalid_argument("recurrent length exceeds input rows");
  }
}

}  // namespace

void glorot_uniform(Tensor2& w, std::size_t fan_in, std::size_t fan_out,
                    Rng& rng) {
  const Real limit = std::sqrt(6.0 / static_cast<Real>(fan_in + fan_out));
  uniform_init(w, limit, rng);
}

void uniform_init(Tensor2& w, Real limit, Rng& rng) {
  for (auto& v : w.values()) v = rng.uniform(-limit, limit);
}

Tensor2 conv1d_forward(const Tensor2& x, const Tensor2& weights,
                       std::span<const Real> bias, std::size_t width) {
  const std::size_t d = x.cols();
  if (width == 0 || x.rows() < width) {
    throw std::invalid_argument("conv1d input has " + std::to_string(x.rows()) +
                                " rows, filter width is " +
                                std::to_string(width));
  }
  if (weights.cols() != width * d) {
    throw std::invalid_argument("conv1d filter shape " +
                                weights.shape_string() +
                                " does not match input width " +
                                std::to_string(d));
  }
  const std::size_t steps = x.rows() - width + 1;
  Tensor2 out(steps, weights.rows());
  for (std::size_t t = 0; t < steps; ++t) {
    // The window x[t .. t+width) is contiguous in row-major storage.
    std::span<const Real> window(x.values().data() + t * d, width * d);
    affine(weights, bias, window, out.row(t));
  }
  return out;
}

Conv1D::Conv1D(const std::string& prefix, std::size_t in_dim,
               std::size_t filters, std::size_t width)
    : weight(prefix + ".weight", filters, width * in_dim),
      bias(prefix + ".bias", 1, filters),
      in_dim_(in_dim),
      filters_(filters),
      width_(width) {}

void Conv1D::init(Rng& rng) {
  glorot_uniform(weight.value, width_ * in_dim_, filters_, rng);
  bias.value.fill(0.0);
}

Tensor2 Conv1D::forward(const Tensor2& x) {
  input_ = x;
  return conv1d_forward(x, weight.value, bias.value.values(), width_);
}

Tensor2 Conv1D::backward(const Tensor2& dy) {
  const std::size_t d = in_dim_;
  Tensor2 dx(input_.rows(), d);
  for (std::size_t t = 0; t < dy.rows(); ++t) {
    const auto g = dy.row(t);
    std::span<const Real> window(input_.values().data() + t * d, width_ * d);
    std::span<Real> d_window(dx.values().data() + t * d, width_ * d);
    outer_add(g, window, weight.grad);
    matvec_transpose_add(weight.value, g, d_window);
    for (std::size_t k = 0; k < filters_; ++k) bias.grad[k] += g[k];
  }
  return dx;
}

Tensor2 GlobalMaxPool::forward(const Tensor2& y) {
  if (y.rows() == 0) {
    throw std::invalid_argument("global max pool over zero rows");
  }
  rows_ = y.rows();
  argmax_.assign(y.cols(), 0);
  Tensor2 out(1, y.cols());
  for (std::size_t k = 0; k < y.cols(); ++k) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < y.rows(); ++t) {
      if (y(t, k) > y(best, k)) best = t;
    }
    argmax_[k] = best;
    out[k] = y(best, k);
  }
  return out;
}

Tensor2 GlobalMaxPool::backward(const Tensor2& dy) const {
  Tensor2 dx(rows_, argmax_.size());
  for (std::size_t k = 0; k < argmax_.size(); ++k) dx(argmax_[k], k) = dy[k];
  return dx;
}

Dense::Dense(const std::string& prefix, std::size_t in_dim, std::size_t out_dim)
    : weight(prefix + ".weight", out_dim, in_dim),
      bias(prefix + ".bias", 1, out_dim) {}

void Dense::init(Rng& rng) {
  glorot_uniform(weight.value, in_dim(), out_dim(), rng);
  bias.value.fill(0.0);
}

Tensor2 Dense::forward(const Tensor2& x) {
  if (x.size() != in_dim()) {
    throw std::invalid_argument("dense input size " + std::to_string(x.size()) +
                                ", expected " + std::to_string(in_dim()));
  }
  input_ = x;
  Tensor2 out(1, out_dim());
  affine(weight.value, bias.value.values(), x.values(), out.values());
  return out;
}

Tensor2 Dense::backward(const Tensor2& dy) {
  outer_add(dy.values(), input_.values(), weight.grad);
  for (std::size_t i = 0; i < out_dim(); ++i) bias.grad[i] += dy[i];
  Tensor2 dx(1, in_dim());
  matvec_transpose_add(weight.value, dy.values(), dx.values());
  return dx;
}

Tensor2 Relu::forward(const Tensor2& x) {
  input_ = x;
  Tensor2 out = x;
  for (auto& v : out.values()) v = std::max<Real>(v, 0.0);
  return out;
}

Tensor2 Relu::backward(const Tensor2& dy) const {
  Tensor2 dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(input_[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

Dropout::Dropout(double rate, bool spatial) : rate_(rate), spatial_(spatial) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1), got " +
                                std::to_string(rate));
  }
}

Tensor2 Dropout::forward(const Tensor2& x, Mode mode, Rng& rng) {
  active_ = mode == Mode::Train && rate_ > 0.0;
  if (!active_) return x;
  const Real scale = 1.0 / (1.0 - rate_);
  mask_ = Tensor2(x.rows(), x.cols());
  if (spatial_) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const Real m = rng.bernoulli(rate_) ? 0.0 : scale;
      for (std::size_t r = 0; r < x.rows(); ++r) mask_(r, c) = m;
    }
  } else {
    for (auto& m : mask_.values()) m = rng.bernoulli(rate_) ? 0.0 : scale;
  }
  Tensor2 out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask_[i];
  return out;
}

Tensor2 Dropout::backward(const Tensor2& dy) const {
  if (!active_) return dy;
  Tensor2 dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

LstmStep lstm_step(std::span<const Real> x, std::span<const Real> h,
                   std::span<const Real> c, const LstmParams& params) {
  const std::size_t hidden = h.size();
  if (params.input_weights.rows() != 4 * hidden ||
      params.input_weights.cols() != x.size() ||
      params.recurrent_weights.rows() != 4 * hidden ||
      params.recurrent_weights.cols() != hidden ||
      params.bias.size() != 4 * hidden || c.size() != hidden) {
    throw std::invalid_argument("lstm_step: inconsistent shapes");
  }
  std::vector<Real> a(4 * hidden);
  affine(params.input_weights, params.bias, x, a);
  matvec_add(params.recurrent_weights, h, a);
  LstmStep out{std::vector<Real>(hidden), std::vector<Real>(hidden)};
  for (std::size_t j = 0; j < hidden; ++j) {
    const Real i = sigmoid(a[j]);
    const Real f = sigmoid(a[hidden + j]);
    const Real g = std::tanh(a[2 * hidden + j]);
    const Real o = sigmoid(a[3 * hidden + j]);
    out.c[j] = f * c[j] + i * g;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

std::vector<Real> gru_step(std::span<const Real> x, std::span<const Real> h,
                           const GruParams& params) {
  const std::size_t hidden = h.size();
  if (params.input_weights.rows() != 3 * hidden ||
      params.input_weights.cols() != x.size() ||
      params.recurrent_weights.rows() != 3 * hidden ||
      params.recurrent_weights.cols() != hidden ||
      params.bias.size() != 3 * hidden) {
    throw std::invalid_argument("gru_step: inconsistent shapes");
  }
  std::vector<Real> ax(3 * hidden);
  affine(params.input_weights, params.bias, x, ax);
  std::vector<Real> z(hidden), r(hidden), rh(hidden), out(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    Real az = ax[j], ar = ax[hidden + j];
    for (std::size_t k = 0; k < hidden; ++k) {
      az += params.recurrent_weights(j, k) * h[k];
      ar += params.recurrent_weights(hidden + j, k) * h[k];
    }
    z[j] = sigmoid(az);
    r[j] = sigmoid(ar);
    rh[j] = r[j] * h[j];
  }
  for (std::size_t j = 0; j < hidden; ++j) {
    Real an = ax[2 * hidden + j];
    for (std::size_t k = 0; k < hidden; ++k) {
      an += params.recurrent_weights(2 * hidden + j, k) * rh[k];
    }
    out[j] = z[j] * h[j] + (1.0 - z[j]) * std::tanh(an);
  }
  return out;
}

Lstm::Lstm(const std::string& prefix, std::size_t in_dim, std::size_t hidden)
    : input_weights(prefix + ".input_weights", 4 * hidden, in_dim),
      recurrent_weights(prefix + ".recurrent_weights", 4 * hidden, hidden),
      bias(prefix + ".bias", 1, 4 * hidden),
      in_dim_(in_dim),
      hidden_(hidden) {}

void Lstm::init(Rng& rng) {
  const Real limit = 1.0 / std::sqrt(static_cast<Real>(hidden_));
  uniform_init(input_weights.value, limit, rng);
  uniform_init(recurrent_weights.value, limit, rng);
  bias.value.fill(0.0);
}

Tensor2 Lstm::forward(const Tensor2& x, std::size_t length, bool reverse) {
  check_length(x, length, in_dim_);
  const std::size_t H = hidden_;
  input_rows_ = x.rows();
  reverse_ = reverse;
  steps_.clear();
  steps_.reserve(length);
  Tensor2 states(length, H);
  std::vector<Real> h(H, 0.0), c(H, 0.0), a(4 * H);
  for (std::size_t s = 0; s < length; ++s) {
    const auto xs = x.row(source_row(s, length, reverse));
    Cache cache;
    cache.x.assign(xs.begin(), xs.end());
    cache.h_prev = h;
    cache.c_prev = c;
    affine(input_weights.value, bias.value.values(), xs, a);
    matvec_add(recurrent_weights.value, h, a);
    cache.i.resize(H);
    cache.f.resize(H);
    cache.g.resize(H);
    cache.o.resize(H);
    cache.c.resize(H);
    cache.tanh_c.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
      cache.i[j] = sigmoid(a[j]);
      cache.f[j] = sigmoid(a[H + j]);
      cache.g[j] = std::tanh(a[2 * H + j]);
      cache.o[j] = sigmoid(a[3 * H + j]);
      cache.c[j] = cache.f[j] * c[j] + cache.i[j] * cache.g[j];
      cache.tanh_c[j] = std::tanh(cache.c[j]);
      h[j] = cache.o[j] * cache.tanh_c[j];
      states(s, j) = h[j];
    }
    c = cache.c;
    steps_.push_back(std::move(cache));
  }
  return states;
}

Tensor2 Lstm::backward(const Tensor2& d_states) {
  const std::size_t H = hidden_;
  const std::size_t length = steps_.size();
  Tensor2 dx(input_rows_, in_dim_);
  std::vector<Real> dh(H, 0.0), dc(H, 0.0), da(4 * H);
  for (std::size_t s = length; s-- > 0;) {
    const Cache& k = steps_[s];
    for (std::size_t j = 0; j < H; ++j) dh[j] += d_states(s, j);
    for (std::size_t j = 0; j < H; ++j) {
      const Real d_o = dh[j] * k.tanh_c[j];
      const Real dcj = dc[j] + dh[j] * k.o[j] * (1.0 - k.tanh_c[j] * k.tanh_c[j]);
      const Real d_i = dcj * k.g[j];
      const Real d_f = dcj * k.c_prev[j];
      const Real d_g = dcj * k.i[j];
      da[j] = d_i * k.i[j] * (1.0 - k.i[j]);
      da[H + j] = d_f * k.f[j] * (1.0 - k.f[j]);
      da[2 * H + j] = d_g * (1.0 - k.g[j] * k.g[j]);
      da[3 * H + j] = d_o * k.o[j] * (1.0 - k.o[j]);
      dc[j] = dcj * k.f[j];
    }
    outer_add(da, k.x, input_weights.grad);
    outer_add(da, k.h_prev, recurrent_weights.grad);
    for (std::size_t j = 0; j < 4 * H; ++j) bias.grad[j] += da[j];
    matvec_transpose_add(input_weights.value, da,
                         dx.row(source_row(s, length, reverse_)));
    std::fill(dh.begin(), dh.end(), 0.0);
    matvec_transpose_add(recurrent_weights.value, da, dh);
  }
  return dx;
}

Gru::Gru(const std::string& prefix, std::size_t in_dim, std::size_t hidden)
    : input_weights(prefix + ".input_weights", 3 * hidden, in_dim),
      recurrent_weights(prefix + ".recurrent_weights", 3 * hidden, hidden),
      bias(prefix + ".bias", 1, 3 * hidden),
      in_dim_(in_dim),
      hidden_(hidden) {}

void Gru::init(Rng& rng) {
  const Real limit = 1.0 / std::sqrt(static_cast<Real>(hidden_));
  uniform_init(input_weights.value, limit, rng);
  uniform_init(recurrent_weights.value, limit, rng);
  bias.value.fill(0.0);
}

Tensor2 Gru::forward(const Tensor2& x, std::size_t length, bool reverse) {
  check_length(x, length, in_dim_);
  const std::size_t H = hidden_;
  const Tensor2& U = recurrent_weights.value;
  input_rows_ = x.rows();
  reverse_ = reverse;
  steps_.clear();
  steps_.reserve(length);
  Tensor2 states(length, H);
  std::vector<Real> h(H, 0.0), ax(3 * H);
  for (std::size_t s = 0; s < length; ++s) {
    const auto xs = x.row(source_row(s, length, reverse));
    Cache k;
    k.x.assign(xs.begin(), xs.end());
    k.h_prev = h;
    k.z.resize(H);
    k.r.resize(H);
    k.n.resize(H);
    k.rh.resize(H);
    affine(input_weights.value, bias.value.values(), xs, ax);
    for (std::size_t j = 0; j < H; ++j) {
      Real az = ax[j], ar = ax[H + j];
      const auto uz = U.row(j);
      const auto ur = U.row(H + j);
      for (std::size_t m = 0; m < H; ++m) {
        az += uz[m] * h[m];
        ar += ur[m] * h[m];
      }
      k.z[j] = sigmoid(az);
      k.r[j] = sigmoid(ar);
      k.rh[j] = k.r[j] * h[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      Real an = ax[2 * H + j];
      const auto un = U.row(2 * H + j);
      for (std::size_t m = 0; m < H; ++m) an += un[m] * k.rh[m];
      k.n[j] = std::tanh(an);
    }
    for (std::size_t j = 0; j < H; ++j) {
      h[j] = k.z[j] * h[j] + (1.0 - k.z[j]) * k.n[j];
      states(s, j) = h[j];
    }
    steps_.push_back(std::move(k));
  }
  return states;
}

Tensor2 Gru::backward(const Tensor2& d_states) {
  const std::size_t H = hidden_;
  const std::size_t length = steps_.size();
  const Tensor2& U = recurrent_weights.value;
  Tensor2& dU = recurrent_weights.grad;
  Tensor2 dx(input_rows_, in_dim_);
  std::vector<Real> dh(H, 0.0), da(3 * H), d_rh(H), dh_prev(H);
  for (std::size_t s = length; s-- > 0;) {
    const Cache& k = steps_[s];
    for (std::size_t j = 0; j < H; ++j) dh[j] += d_states(s, j);
    for (std::size_t j = 0; j < H; ++j) {
      const Real dz = dh[j] * (k.h_prev[j] - k.n[j]);
      const Real dn = dh[j] * (1.0 - k.z[j]);
      da[j] = dz * k.z[j] * (1.0 - k.z[j]);
      da[2 * H + j] = dn * (1.0 - k.n[j] * k.n[j]);
      dh_prev[j] = dh[j] * k.z[j];
    }
    // Candidate block: its recurrent input is r * h_prev.
    std::fill(d_rh.begin(), d_rh.end(), 0.0);
    for (std::size_t j = 0; j < H; ++j) {
      const Real g = da[2 * H + j];
      auto un = U.row(2 * H + j);
      auto dun = dU.row(2 * H + j);
      for (std::size_t m = 0; m < H; ++m) {
        dun[m] += g * k.rh[m];
        d_rh[m] += un[m] * g;
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      const Real dr = d_rh[j] * k.h_prev[j];
      dh_prev[j] += d_rh[j] * k.r[j];
      da[H + j] = dr * k.r[j] * (1.0 - k.r[j]);
    }
    // Update and reset blocks read h_prev directly.
    for (std::size_t j = 0; j < 2 * H; ++j) {
      const Real g = da[j];
      auto u = U.row(j);
      auto du = dU.row(j);
      for (std::size_t m = 0; m < H; ++m) {
        du[m] += g * k.h_prev[m];
        dh_prev[m] += u[m] * g;
      }
    }
    outer_add(da, k.x, input_weights.grad);
    for (std::size_t j = 0; j < 3 * H; ++j) bias.grad[j] += da[j];
    matvec_transpose_add(input_weights.value, da,
                         dx.row(source_row(s, length, reverse_)));
    dh = dh_prev;
  }
  return dx;
}

Tensor2 final_state(const Tensor2& states, std::size_t hidden) {
  Tensor2 out(1, hidden);
  if (states.rows() == 0) return out;
  const auto last = states.row(states.rows() - 1);
  std::copy(last.begin(), last.end(), out.values().begin());
  return out;
}

Tensor2 expand_final_grad(const Tensor2& d_final, std::size_t steps) {
  Tensor2 d(steps, d_final.size());
  if (steps == 0) return d;
  auto last = d.row(steps - 1);
  std::copy(d_final.values().begin(), d_final.values().end(), last.begin());
  return d;
}

void softmax(std::span<const Real> logits, std::span<Real> out) {
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Real sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

SoftmaxXent softmax_cross_entropy(std::span<const Real> logits,
                                  std::size_t target) {
  if (target >= logits.size()) {
    throw std::invalid_argument("target class out of range");
  }
  SoftmaxXent out;
  out.probabilities.resize(logits.size());
  softmax(logits, out.probabilities);
  // log-sum-exp form keeps the loss finite for large logits.
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Real sum = 0.0;
  for (Real l : logits) sum += std::exp(l - mx);
  out.loss = -(logits[target] - mx - std::log(sum));
  out.grad = out.probabilities;
  out.grad[target] -= 1.0;
  return out;
}

}  // namespace colloq
