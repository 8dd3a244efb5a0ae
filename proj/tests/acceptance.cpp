// Acceptance checks: one PASS/FAIL line per criterion, with the measured
// quantity and the runtime. Exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <regex>

#include "cli_runner.hpp"
#include "colloq/adam.hpp"
#include "colloq/annotation_engine.hpp"
#include "colloq/corpus_store.hpp"
#include "colloq/embedding_store.hpp"
#include "colloq/harness.hpp"
#include "colloq/layers.hpp"
#include "colloq/model_zoo.hpp"
#include "colloq/normalizer.hpp"
#include "layer_check.hpp"
#include "model_fixtures.hpp"
#include "protocol_oracle.hpp"
#include "support.hpp"
#include "text_fuzz.hpp"

using namespace colloq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds,
               const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (seconds > budget_seconds) {
    o.pass = false;
    o.detail += "; over the " + format_real(budget_seconds) + " s budget";
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.2f s", seconds);
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail << "; " << timing
            << "]" << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------- agreement

Outcome agreement_oracle() {
  Rng rng(20240501);
  double worst = 0.0;
  int undefined_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const std::size_t N = 1 + rng.below(50);
    std::vector<CategoryCounts> m(N);
    std::vector<std::vector<int>> ratings(N);
    for (std::size_t i = 0; i < N; ++i) {
      m[i] = {0, 0, 0};
      for (int k = 0; k < n; ++k) {
        const int c = static_cast<int>(rng.below(3));
        ++m[i][c];
        ratings[i].push_back(c);
      }
    }
    const auto got = fleiss_kappa(m);
    const auto want = testing::fleiss_formula(m);
    if (got.has_value() != want.has_value()) {
      ++undefined_mismatch;
      continue;
    }
    if (!got) continue;
    worst = std::max(worst, std::abs(*got - *want));
    worst = std::max(worst, std::abs(*got - testing::oracle::fleiss_from_ratings(ratings, 3)));
  }
  const std::vector<CategoryCounts> unanimous{{0, 0, 3}, {3, 0, 0}};
  const std::vector<CategoryCounts> hand{{0, 0, 3}, {1, 0, 2}};
  const std::vector<CategoryCounts> single{{0, 0, 3}, {0, 0, 3}, {0, 0, 3}};
  const bool k1 = std::abs(fleiss_kappa(unanimous).value() - 1.0) <= 1e-12;
  const bool k2 = std::abs(fleiss_kappa(hand).value() + 0.2) <= 1e-12;
  const bool k3 = !fleiss_kappa(single).has_value();
  return {worst <= 1e-12 && undefined_mismatch == 0 && k1 && k2 && k3,
          "200 matrices, max |diff| " + fmt(worst) + ", kappa=1 " + (k1 ? "ok" : "bad") +
              ", kappa=-0.2 " + (k2 ? "ok" : "bad") + ", degenerate " + (k3 ? "ok" : "bad")};
}

// ---------------------------------------------------------------- normalizer

Outcome normalizer_golden() {
  const Normalizer normalizer(EmojiInventory::load_default());
  std::ifstream in(testing::fixture("normalizer_golden.tsv"));
  std::size_t lines = 0, mismatches = 0, not_idempotent = 0;
  std::string line, first_bad;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++lines;
    const auto tab = line.find('\t');
    const std::string input = tsv_unescape(line.substr(0, tab));
    if (join_tokens(normalizer.normalize(input).tokens) != line.substr(tab + 1)) {
      ++mismatches;
      if (first_bad.empty()) first_bad = input;
    }
    not_idempotent += !normalizer.is_idempotent(input);
  }
  Rng rng(7);
  std::size_t fuzz_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    fuzz_failures += !normalizer.is_idempotent(testing::fuzz_text(rng, 16));
  }
  return {lines >= 40 && mismatches == 0 && not_idempotent == 0 && fuzz_failures == 0,
          std::to_string(lines) + " fixtures, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(not_idempotent + fuzz_failures) +
              " idempotence failures over fixtures + 10000 fuzz inputs"};
}

// ---------------------------------------------------------------- gradients

double layer_gradients(std::uint64_t seed) {
  using testing::check_layer;
  using testing::random_tensor;
  Rng rng(seed);
  Rng init(mix_seed(seed, 99));
  double worst = 0.0;
  auto note = [&](double e) { worst = std::max(worst, e); };
  const std::size_t d = 8, L = 10, H = 8, K = 4;

  Tensor2 x = random_tensor(L, d, rng);
  Conv1D conv("conv", d, K, 3);
  conv.init(init);
  note(check_layer({&conv.weight, &conv.bias}, x, [&] { return conv.forward(x); },
                   [&](const Tensor2& dy) { return conv.backward(dy); }, rng));

  GlobalMaxPool pool;
  Tensor2 y = random_tensor(L, K, rng);
  note(check_layer({}, y, [&] { return pool.forward(y); },
                   [&](const Tensor2& dy) { return pool.backward(dy); }, rng));

  Relu relu;
  Tensor2 r = random_tensor(L, K, rng);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (std::abs(r[i]) < 1e-3) r[i] = 0.5;
  }
  note(check_layer({}, r, [&] { return relu.forward(r); },
                   [&](const Tensor2& dy) { return relu.backward(dy); }, rng));

  for (bool spatial : {false, true}) {
    Dropout drop(0.4, spatial);
    Tensor2 v = random_tensor(L, d, rng);
    const std::uint64_t mask_seed = rng.next_u64();
    note(check_layer({}, v,
                     [&] {
                       Rng mask(mask_seed);
                       return drop.forward(v, Mode::Train, mask);
                     },
                     [&](const Tensor2& dy) { return drop.backward(dy); }, rng));
  }

  Dense dense("dense", 2 * H, 3);
  dense.init(init);
  Tensor2 h = random_tensor(1, 2 * H, rng);
  note(check_layer({&dense.weight, &dense.bias}, h, [&] { return dense.forward(h); },
                   [&](const Tensor2& dy) { return dense.backward(dy); }, rng));

  const std::size_t len = 1 + rng.below(L);
  for (bool reverse : {false, true}) {
    Lstm lstm("lstm", d, H);
    lstm.init(init);
    note(check_layer({&lstm.input_weights, &lstm.recurrent_weights, &lstm.bias}, x,
                     [&] { return lstm.forward(x, len, reverse); },
                     [&](const Tensor2& dy) { return lstm.backward(dy); }, rng));
    Gru gru("gru", d, H);
    gru.init(init);
    note(check_layer({&gru.input_weights, &gru.recurrent_weights, &gru.bias}, x,
                     [&] { return gru.forward(x, len, reverse); },
                     [&](const Tensor2& dy) { return gru.backward(dy); }, rng));
  }

  Bidirectional<Gru> bigru("bigru", d, H);
  bigru.init(init);
  note(check_layer({&bigru.forward_cell.input_weights, &bigru.forward_cell.recurrent_weights,
                    &bigru.forward_cell.bias, &bigru.backward_cell.input_weights,
                    &bigru.backward_cell.recurrent_weights, &bigru.backward_cell.bias},
                   x, [&] { return bigru.forward(x, len); },
                   [&](const Tensor2& dy) { return bigru.backward(dy); }, rng));
  Bidirectional<Lstm> bilstm("bilstm", d, H);
  bilstm.init(init);
  note(check_layer({&bilstm.forward_cell.input_weights, &bilstm.forward_cell.recurrent_weights,
                    &bilstm.forward_cell.bias, &bilstm.backward_cell.input_weights,
                    &bilstm.backward_cell.recurrent_weights, &bilstm.backward_cell.bias},
                   x, [&] { return bilstm.forward(x, len); },
                   [&](const Tensor2& dy) { return bilstm.backward(dy); }, rng));

  // Softmax cross-entropy: analytic d loss / d logits against differences.
  std::vector<Real> logits{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
  const std::size_t target = rng.below(3);
  const auto sx = softmax_cross_entropy(logits, target);
  for (std::size_t i = 0; i < 3; ++i) {
    auto shifted = logits;
    shifted[i] += 1e-5;
    const double up = softmax_cross_entropy(shifted, target).loss;
    shifted[i] -= 2e-5;
    const double down = softmax_cross_entropy(shifted, target).loss;
    note(testing::relative_error(sx.grad[i], (up - down) / 2e-5));
  }
  return worst;
}

// Draws every parameter, biases included, from U(-0.5, 0.5). Zero biases
// would park padded conv positions exactly on the relu kink.
void randomize(SentimentModel& model, Rng& rng) {
  for (Parameter* p : model.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-0.5, 0.5);
  }
}

// Largest |analytic - numeric| among elements over tolerance, for the report.
double worst_absolute_miss(SentimentModel& model, const DocumentMatrix& doc, int target) {
  Rng unused(0);
  const auto t = static_cast<std::size_t>(target);
  auto loss = [&] {
    return softmax_cross_entropy(model.forward(doc, Mode::Eval, unused).values(), t).loss;
  };
  model.zero_grad();
  model.backward(Tensor2(1, 3, softmax_cross_entropy(
                                   model.forward(doc, Mode::Eval, unused).values(), t).grad));
  double worst = 0.0;
  for (Parameter* p : model.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Real saved = p->value[i];
      p->value[i] = saved + 1e-5;
      const double up = loss();
      p->value[i] = saved - 1e-5;
      const double down = loss();
      p->value[i] = saved;
      const double numeric = (up - down) / 2e-5;
      if (testing::relative_error(p->grad[i], numeric) >= 1e-4) {
        worst = std::max(worst, std::abs(p->grad[i] - numeric));
      }
    }
  }
  return worst;
}

Outcome gradient_checks() {
  double layers = 0.0, miss = 0.0;
  std::map<Architecture, double> models;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    layers = std::max(layers, layer_gradients(seed));
    Rng rng(mix_seed(seed, 5));
    for (Architecture a : kAllArchitectures) {
      auto model = build(testing::toy_config(a, seed));
      randomize(*model, rng);
      const auto doc = testing::random_document(10, 8, 1 + rng.below(10), rng);
      const int target = static_cast<int>(rng.below(3));
      const double e = gradient_check(*model, doc, target);
      models[a] = std::max(models[a], e);
      if (e >= 1e-4) miss = std::max(miss, worst_absolute_miss(*model, doc, target));
    }
  }
  bool ok = layers < 1e-4;
  std::string detail = "20 seeds; layers " + fmt(layers);
  for (const auto& [a, e] : models) {
    ok = ok && e < 1e-4;
    detail += ", " + to_string(a) + " " + fmt(e);
  }
  if (!ok) detail += "; largest absolute miss " + fmt(miss);
  return {ok, "max relative error: " + detail};
}

// ---------------------------------------------------------------- overfit

struct Prepared {
  std::vector<Example> train, val, test;
};

Prepared prepare(const SynthCorpus& s, std::uint64_t seed, std::size_t L) {
  static const Normalizer normalizer(EmojiInventory::load_default());
  const TokenizedCorpus t = tokenize(s.records, normalizer);
  SplitSpec spec;
  spec.seed = seed;
  const Split parts = split(t.labels, spec);
  return {encode_examples(t, parts.train, s.table, L), encode_examples(t, parts.val, s.table, L),
          encode_examples(t, parts.test, s.table, L)};
}

struct FitResult {
  std::size_t epochs_to_target = 0;  // 0: never reached
  double best_train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Trains epoch by epoch, measuring training accuracy with dropout off.
FitResult fit(const ModelConfig& config, const Prepared& data, double target) {
  auto model = build(config);
  FitResult r;
  TrainOptions opts;
  opts.clock = null_clock();
  opts.on_epoch = [&](const EpochRecord& e) {
    const double acc = evaluate_loss(*model, data.train).accuracy;
    r.best_train_accuracy = std::max(r.best_train_accuracy, acc);
    if (!r.epochs_to_target && acc >= target) r.epochs_to_target = e.epoch;
  };
  train(*model, data.train, data.val, opts);
  r.test_accuracy = evaluate_loss(*model, data.test).accuracy;
  return r;
}

ModelConfig scaled_config(Architecture arch, std::size_t epochs) {
  ModelConfig c = default_config(arch);
  c.seed = 3;
  c.embedding_dim = 100;
  c.padded_length = 8;
  c.hyper.epochs = epochs;
  c.hyper.batch_size = 8;
  switch (arch) {
    case Architecture::Cnn:
      c.hyper.filters = 16;
      break;
    case Architecture::Lstm:
      c.hyper.hidden_dims = {16, 8};
      c.hyper.learning_rate = 0.005;
      break;
    case Architecture::BiGru:
      c.hyper.hidden_dims = {8};
      c.hyper.learning_rate = 0.005;
      break;
    default:
      break;
  }
  return c;
}

Outcome overfit_oracle() {
  const SynthCorpus s = synth_corpus(200, 50, 3);
  const Prepared data = prepare(s, 3, 8);
  const FitResult cnn = fit(scaled_config(Architecture::Cnn, 30), data, 0.99);
  const FitResult lstm = fit(scaled_config(Architecture::Lstm, 50), data, 0.95);
  const FitResult bigru = fit(scaled_config(Architecture::BiGru, 50), data, 0.95);
  auto when = [](const FitResult& r) {
    return r.epochs_to_target ? "epoch " + std::to_string(r.epochs_to_target)
                              : "never (best " + fmt(r.best_train_accuracy) + ")";
  };
  const bool ok = cnn.epochs_to_target && cnn.test_accuracy >= 0.90 && lstm.epochs_to_target &&
                  bigru.epochs_to_target;
  return {ok, "cnn train>=0.99 at " + when(cnn) + ", held-out test " + fmt(cnn.test_accuracy) +
                  " on " + std::to_string(data.test.size()) + " docs; lstm train>=0.95 at " +
                  when(lstm) + "; bigru train>=0.95 at " + when(bigru)};
}

// ---------------------------------------------------------------- protocol

Outcome protocol_exactness() {
  const SplitSizes sizes = split_sizes(1000, SplitSpec{});
  std::vector<Polarity> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<Polarity>(int(i % 3) - 1);
  const Split parts = split(labels, SplitSpec{});
  const bool split_ok = sizes.train == 900 && sizes.test == 60 && sizes.val == 40 &&
                        parts.train.size() == 900 && parts.test.size() == 60 &&
                        parts.val.size() == 40;

  bool mapping_ok = class_index(Polarity::Negative) == 0 && class_index(Polarity::Neutral) == 1 &&
                    class_index(Polarity::Positive) == 2 &&
                    polarity_from_class(0) == Polarity::Negative &&
                    polarity_from_class(1) == Polarity::Neutral &&
                    polarity_from_class(2) == Polarity::Positive;
  Rng rng(4);
  for (Architecture a : kAllArchitectures) {
    auto m = build(testing::toy_config(a));
    for (int i = 0; i < 10; ++i) {
      const auto doc = testing::random_document(10, 8, rng.below(11), rng);
      Rng unused(0);
      const Tensor2 logits = m->forward(doc, Mode::Eval, unused);
      const Prediction p = predict(*m, doc);
      const double sum = p.probabilities[0] + p.probabilities[1] + p.probabilities[2];
      mapping_ok = mapping_ok && logits.rows() == 1 && logits.cols() == 3 &&
                   std::abs(sum - 1.0) <= 1e-12 && to_int(p.label) == p.class_index - 1;
    }
  }

  std::size_t cases = 0;
  const std::size_t mismatches = testing::adjudication_truth_table(5, cases);
  return {split_ok && mapping_ok && mismatches == 0,
          "split 1000 -> " + std::to_string(parts.train.size()) + "/" +
              std::to_string(parts.test.size()) + "/" + std::to_string(parts.val.size()) +
              ", class mapping " + (mapping_ok ? "ok" : "bad") + ", adjudication " +
              std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------- OOV

Outcome oov_composition() {
  const std::vector<std::string> alphabet{"a", "b", "c", "ب", "ا", "ی", "ک", "😊"};
  Rng rng(1000);
  double worst = 0.0;
  std::size_t composed = 0;
  auto word = [&](std::size_t max_len) {
    std::string w;
    const std::size_t len = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < len; ++i) w += alphabet[rng.below(alphabet.size())];
    return w;
  };
  for (int t = 0; t < 1000; ++t) {
    const std::size_t dim = 1 + rng.below(6);
    const std::size_t lo = 1 + rng.below(3), hi = lo + rng.below(4);
    EmbeddingTable table(dim, lo, hi);
    std::map<std::string, std::vector<double>> grams;
    for (std::size_t k = 0, want = 10 + rng.below(60); k < want; ++k) {
      std::string g = word(hi);
      if (rng.bernoulli(0.3)) g = "<" + g;
      if (rng.bernoulli(0.3)) g += ">";
      if (testing::oracle::code_points(g).size() > hi || grams.count(g)) continue;
      std::vector<double> v(dim);
      for (auto& x : v) x = rng.uniform(-10, 10);
      table.add_ngram(g, v);
      grams[g] = v;
    }
    for (int q = 0; q < 5; ++q) {
      const std::string token = word(7);
      std::vector<double> want(dim, 0.0);
      for (const auto& g : testing::oracle::ngram_set(token, lo, hi)) {
        if (const auto it = grams.find(g); it != grams.end()) {
          for (std::size_t i = 0; i < dim; ++i) want[i] += it->second[i];
        }
      }
      const auto got = lookup(table, token);
      for (std::size_t i = 0; i < dim; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
      composed += std::any_of(want.begin(), want.end(), [](double v) { return v != 0.0; });
    }
  }
  return {worst <= 1e-9, "1000 tables, 5000 lookups (" + std::to_string(composed) +
                             " composed), max |diff| " + fmt(worst)};
}

// ---------------------------------------------------------------- determinism

std::vector<std::pair<std::string, std::string>> files_under(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out.emplace_back(fs::relative(e.path(), root).string(), testing::slurp(e.path()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Drops the seconds columns so wall-clock runs can be compared.
std::string mask_timing(const std::string& name, const std::string& text) {
  if (name.find("comparison.csv") != std::string::npos) {
    return std::regex_replace(text, std::regex(R"(,[^,\n]*,(ok|failed)\n)"), ",*,$1\n");
  }
  if (name.find(".csv") != std::string::npos) {
    return std::regex_replace(text, std::regex(R"(,[^,\n]*\n)"), ",*\n");
  }
  if (name.rfind("cells", 0) == 0) {
    auto j = nlohmann::json::parse(text);
    j.erase("mean_epoch_seconds");
    j.erase("epoch_seconds");
    return j.dump();
  }
  return text;
}

Outcome determinism() {
  testing::TempDir dir;
  const std::string synth = (dir / "synth").string();
  if (testing::run({"synth", "--docs", "150", "--vocab", "40", "--dim", "16", "--out", synth})
          .code != 0) {
    return {false, "synth failed"};
  }
  const std::string corpus = synth + "/corpus.tsv", vec = synth + "/embeddings.vec";
  auto train_run = [&](const std::string& out, const std::string& timing) {
    return testing::run({"train", "--arch", "bigru", "--corpus", corpus, "--embeddings", vec,
                         "--seed", "7", "--epochs", "2", "--timing", timing, "--out", out})
        .code;
  };
  auto compare_run = [&](const std::string& out, const std::string& timing) {
    return testing::run({"compare", "--corpus", corpus, "--embeddings", "toy=" + vec, "--seed",
                         "7", "--timing", timing, "--out", out})
        .code;
  };
  std::string detail;
  bool ok = true;
  auto same = [&](const std::string& what, const fs::path& a, const fs::path& b, bool masked) {
    auto fa = files_under(a), fb = files_under(b);
    bool equal = fa.size() == fb.size() && !fa.empty();
    for (std::size_t i = 0; equal && i < fa.size(); ++i) {
      equal = fa[i].first == fb[i].first &&
              (masked ? mask_timing(fa[i].first, fa[i].second) ==
                            mask_timing(fb[i].first, fb[i].second)
                      : fa[i].second == fb[i].second);
    }
    detail += (detail.empty() ? "" : ", ") + what + " " + std::to_string(fa.size()) + " files " +
              (equal ? "identical" : "DIFFER");
    ok = ok && equal;
  };
  ok = train_run((dir / "t1").string(), "off") == 0 && train_run((dir / "t2").string(), "off") == 0;
  same("train", dir / "t1", dir / "t2", false);
  ok = ok && compare_run((dir / "c1").string(), "off") == 0 &&
       compare_run((dir / "c2").string(), "off") == 0;
  same("compare", dir / "c1", dir / "c2", false);
  ok = ok && train_run((dir / "w1").string(), "wall") == 0 &&
       train_run((dir / "w2").string(), "wall") == 0;
  same("train(wall, timing masked)", dir / "w1", dir / "w2", true);
  ok = ok && compare_run((dir / "cw1").string(), "wall") == 0 &&
       compare_run((dir / "cw2").string(), "wall") == 0;
  same("compare(wall, timing masked)", dir / "cw1", dir / "cw2", true);
  return {ok, detail};
}

// ---------------------------------------------------------------- grid

Outcome comparison_grid() {
  testing::TempDir dir;
  const std::string synth = (dir / "synth").string();
  testing::run({"synth", "--out", synth});
  const auto r = testing::run({"compare", "--corpus", synth + "/corpus.tsv", "--embeddings",
                               "toy=" + synth + "/embeddings.vec", "--out",
                               (dir / "grid").string()});
  std::ifstream comparison(dir / "grid" / "comparison.csv");
  std::string line;
  std::getline(comparison, line);
  const bool header =
      line == "architecture,embedding_label,f1_macro,accuracy,mean_epoch_seconds,status";
  std::set<std::string> archs;
  std::size_t ok_rows = 0;
  std::string summary;
  while (std::getline(comparison, line)) {
    const auto comma = line.find(',');
    archs.insert(line.substr(0, comma));
    const bool ok = line.size() > 3 && line.compare(line.size() - 3, 3, ",ok") == 0;
    ok_rows += ok;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() == 6) summary += " " + f[0] + "=" + fmt(std::stod(f[3].empty() ? "0" : f[3]));
  }
  std::ifstream timing(dir / "grid" / "timing.csv");
  std::getline(timing, line);
  const bool timing_header = line == "architecture,embedding_label,epoch,seconds";
  std::size_t timing_rows = 0, expected_rows = 0;
  while (std::getline(timing, line)) ++timing_rows;
  for (Architecture a : kAllArchitectures) expected_rows += default_hyperparameters(a).epochs;
  const bool ok = r.code == 0 && header && timing_header && archs.size() == 5 && ok_rows == 5 &&
                  timing_rows == expected_rows;
  return {ok, "5 architectures x 1 table, " + std::to_string(ok_rows) + " ok cells, " +
                  std::to_string(timing_rows) + " timing rows; accuracy" + summary};
}

}  // namespace

int main() {
  std::cout << "acceptance suite" << std::endl;
  criterion("agreement oracle: fleiss kappa vs brute force, special cases", 5, agreement_oracle);
  criterion("normalizer golden suite and idempotence", 10, normalizer_golden);
  criterion("gradient checks: every layer and architecture, 20 seeds", 60, gradient_checks);
  criterion("overfit oracle: cnn, lstm, bigru on synthetic corpus", 180, overfit_oracle);
  criterion("protocol exactness: split sizes, class mapping, adjudication", 60,
            protocol_exactness);
  criterion("OOV composition vs n-gram set summation", 60, oov_composition);
  criterion("determinism: train and compare reruns", 600, determinism);
  criterion("comparison grid: five architectures, complete CSVs", 600, comparison_grid);
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failed"
                         : std::string("acceptance: all passed"))
            << std::endl;
  return failures;
}
