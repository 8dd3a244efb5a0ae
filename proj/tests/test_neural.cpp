#include <cmath>
#include <numeric>

#include "colloq/adam.hpp"
#include "colloq/layers.hpp"
#include "doctest.h"
#include "layer_check.hpp"
#include "support.hpp"

using namespace colloq;
using testing::check_layer;
using testing::random_tensor;

TEST_SUITE("neural_core") {

TEST_CASE("conv1d hand example and boundaries") {
  const Tensor2 x(4, 2, {1, 0, 0, 1, 1, 1, 2, 0});
  const Tensor2 ones(1, 6, 1.0);
  const std::vector<Real> zero_bias{0.0};
  const Tensor2 y = conv1d_forward(x, ones, zero_bias, 3);
  REQUIRE(y.rows() == 2);
  CHECK(y(0, 0) == 4.0);
  CHECK(y(1, 0) == 5.0);

  const std::vector<Real> bias{2.5};
  const Tensor2 constant = conv1d_forward(x, Tensor2(1, 6), bias, 3);
  CHECK(constant == Tensor2(2, 1, 2.5));

  const Tensor2 full = conv1d_forward(x, Tensor2(1, 8, 1.0), zero_bias, 4);
  CHECK(full.rows() == 1);
  CHECK(full(0, 0) == 6.0);

  CHECK_THROWS_AS(conv1d_forward(x, Tensor2(1, 10), zero_bias, 5), std::invalid_argument);
}

TEST_CASE("conv1d matches a triple-loop reference") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t L = 3 + rng.below(8), d = 1 + rng.below(5), f = 1 + rng.below(3),
                      K = 1 + rng.below(4);
    const Tensor2 x = random_tensor(L, d, rng);
    std::vector<Tensor2> filters;
    Tensor2 packed(K, f * d);
    std::vector<double> bias(K);
    for (std::size_t k = 0; k < K; ++k) {
      filters.push_back(random_tensor(f, d, rng));
      for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t j = 0; j < d; ++j) packed(k, i * d + j) = filters[k](i, j);
      }
      bias[k] = rng.uniform(-1, 1);
    }
    const Tensor2 got = conv1d_forward(x, packed, bias, f);
    const Tensor2 want = testing::oracle::conv1d(x, filters, bias);
    REQUIRE(got.rows() == want.rows());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("global max pool") {
  GlobalMaxPool pool;
  const Tensor2 y(2, 1, {4, 5});
  CHECK(pool.forward(y)[0] == 5.0);

  const Tensor2 flat(3, 2, 7.0);
  pool.forward(flat);
  const Tensor2 dx = pool.backward(Tensor2(1, 2, 1.0));
  CHECK(dx(0, 0) == 1.0);
  CHECK(dx(1, 0) == 0.0);
  CHECK(dx(2, 1) == 0.0);
  CHECK(dx(0, 1) == 1.0);

  CHECK_THROWS(pool.forward(Tensor2(0, 3)));

  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor2 r = random_tensor(1 + rng.below(9), 1 + rng.below(6), rng);
    const Tensor2 m = pool.forward(r);
    for (std::size_t c = 0; c < r.cols(); ++c) {
      double best = r(0, c);
      for (std::size_t t = 1; t < r.rows(); ++t) best = std::max(best, r(t, c));
      CHECK(m[c] == best);
    }
  }
}

TEST_CASE("relu, dropout and softmax contracts") {
  Relu relu;
  const Tensor2 r = relu.forward(Tensor2(1, 2, {-1, 2}));
  CHECK(r == Tensor2(1, 2, {0, 2}));

  Rng rng(3);
  const Tensor2 x = random_tensor(4, 5, rng);
  Dropout none(0.0);
  CHECK(none.forward(x, Mode::Train, rng) == x);
  Dropout half(0.5);
  CHECK(half.forward(x, Mode::Eval, rng) == x);
  CHECK_THROWS(Dropout(1.0));
  CHECK_THROWS(Dropout(-0.1));

  Dropout spatial(0.5, true);
  const Tensor2 s = spatial.forward(Tensor2(6, 8, 1.0), Mode::Train, rng);
  for (std::size_t c = 0; c < 8; ++c) {
    for (std::size_t t = 1; t < 6; ++t) CHECK(s(t, c) == s(0, c));
  }

  const std::vector<Real> zeros(3, 0.0);
  const SoftmaxXent uniform = softmax_cross_entropy(zeros, 1);
  CHECK(uniform.loss == doctest::Approx(std::log(3.0)).epsilon(1e-15));

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Real> logits{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
    const SoftmaxXent sx = softmax_cross_entropy(logits, rng.below(3));
    const double sum = std::accumulate(sx.probabilities.begin(), sx.probabilities.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(sx.loss >= 0.0);
  }
}

TEST_CASE("training dropout preserves the expectation") {
  Rng rng(17);
  const Tensor2 x(1, 4, {0.5, -1.0, 2.0, 3.0});
  for (bool spatial : {false, true}) {
    Dropout drop(0.4, spatial);
    std::vector<double> mean(4, 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const Tensor2 y = drop.forward(x, Mode::Train, rng);
      for (std::size_t j = 0; j < 4; ++j) mean[j] += y[j] / draws;
    }
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(mean[j] - x[j]) <= 0.01 * std::abs(x[j]));
    }
  }
}

TEST_CASE("recurrent cells with zero parameters") {
  const Tensor2 w4(8, 3), u4(8, 2);
  const std::vector<Real> b4(8, 0.0);
  const std::vector<Real> x{0.3, -0.7, 1.1}, h{0.0, 0.0}, c{0.0, 0.0};
  const LstmStep s = lstm_step(x, h, c, {w4, u4, b4});
  CHECK(s.h == std::vector<Real>{0.0, 0.0});
  CHECK(s.c == std::vector<Real>{0.0, 0.0});

  const Tensor2 w3(6, 3), u3(6, 2);
  const std::vector<Real> b3(6, 0.0);
  const std::vector<Real> h0{0.8, -0.4};
  const std::vector<Real> h1 = gru_step(x, h0, {w3, u3, b3});
  CHECK(h1[0] == 0.4);
  CHECK(h1[1] == -0.2);
}

TEST_CASE("layer gradients match central differences") {
  Rng rng(23);
  for (int seed = 0; seed < 5; ++seed) {
    Rng init(100 + seed);
    Tensor2 x = random_tensor(6, 3, rng);

    Conv1D conv("conv", 3, 2, 3);
    conv.init(init);
    CHECK(check_layer({&conv.weight, &conv.bias}, x, [&] { return conv.forward(x); },
                      [&](const Tensor2& dy) { return conv.backward(dy); }, rng) < 1e-6);

    Tensor2 v = random_tensor(1, 5, rng);
    Dense dense("dense", 5, 3);
    dense.init(init);
    CHECK(check_layer({&dense.weight, &dense.bias}, v, [&] { return dense.forward(v); },
                      [&](const Tensor2& dy) { return dense.backward(dy); }, rng) < 1e-6);

    GlobalMaxPool pool;
    CHECK(check_layer({}, x, [&] { return pool.forward(x); },
                      [&](const Tensor2& dy) { return pool.backward(dy); }, rng) < 1e-6);

    Lstm lstm("lstm", 3, 4);
    lstm.init(init);
    CHECK(check_layer({&lstm.input_weights, &lstm.recurrent_weights, &lstm.bias}, x,
                      [&] { return lstm.forward(x, 5); },
                      [&](const Tensor2& dy) { return lstm.backward(dy); }, rng) < 1e-5);

    Gru gru("gru", 3, 4);
    gru.init(init);
    CHECK(check_layer({&gru.input_weights, &gru.recurrent_weights, &gru.bias}, x,
                      [&] { return gru.forward(x, 4, true); },
                      [&](const Tensor2& dy) { return gru.backward(dy); }, rng) < 1e-5);

    Bidirectional<Gru> bigru("bigru", 3, 3);
    bigru.init(init);
    CHECK(check_layer({&bigru.forward_cell.input_weights, &bigru.backward_cell.recurrent_weights,
                       &bigru.backward_cell.bias},
                      x, [&] { return bigru.forward(x, 5); },
                      [&](const Tensor2& dy) { return bigru.backward(dy); }, rng) < 1e-5);

    Bidirectional<Lstm> bilstm("bilstm", 3, 3);
    bilstm.init(init);
    CHECK(check_layer({&bilstm.forward_cell.recurrent_weights, &bilstm.backward_cell.input_weights},
                      x, [&] { return bilstm.forward(x, 6); },
                      [&](const Tensor2& dy) { return bilstm.backward(dy); }, rng) < 1e-5);
  }
}

TEST_CASE("relu gradient away from the kink") {
  Rng rng(2);
  Tensor2 x = random_tensor(3, 4, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 0.05) x[i] = 0.5;
  }
  Relu relu;
  CHECK(check_layer({}, x, [&] { return relu.forward(x); },
                    [&](const Tensor2& dy) { return relu.backward(dy); }, rng) < 1e-8);
}

TEST_CASE("bidirectional output ignores padding rows") {
  Rng rng(9);
  Bidirectional<Gru> gru("g", 3, 4);
  Bidirectional<Lstm> lstm("l", 3, 4);
  gru.init(rng);
  lstm.init(rng);
  const Tensor2 x = random_tensor(4, 3, rng);
  Tensor2 padded(9, 3);
  for (std::size_t i = 0; i < x.size(); ++i) padded[i] = x[i];
  CHECK(gru.forward(x, 4) == gru.forward(padded, 4));
  CHECK(lstm.forward(x, 4) == lstm.forward(padded, 4));
}

TEST_CASE("adam steps") {
  Parameter p("w", 1, 3);
  p.value = Tensor2(1, 3, {1.0, 2.0, 3.0});
  p.grad = Tensor2(1, 3, 1.0);
  std::vector<Parameter*> params{&p};
  AdamState state(0.001);
  adam_update(state, params);
  for (std::size_t i = 0; i < 3; ++i) {
    const double moved = (static_cast<double>(i) + 1.0) - p.value[i];
    CHECK(std::abs(moved - 0.001 / (1.0 + 1e-8)) <= 1e-15);
  }
  const Tensor2 after_one = p.value;
  adam_update(state, params);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.value[i] < after_one[i]);

  Parameter q("q", 2, 2);
  q.value = Tensor2(2, 2, {1, -1, 2, -2});
  const Tensor2 before = q.value;
  std::vector<Parameter*> qs{&q};
  AdamState fresh;
  adam_update(fresh, qs);
  CHECK(q.value == before);
  CHECK(fresh.step == 1);
}

}  // TEST_SUITE
