#include "colloq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "colloq/normalizer.hpp"
#include "colloq/rng.hpp"
#include "json.hpp"

namespace colloq {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kTrain = 0, kTest = 1, kVal = 2;

// Integer allocation a[c][p] with row sums class_counts[c], column sums
// sizes[p], and every entry the floor or ceil of
// class_counts[c] * sizes[p] / n. The floors are fixed; the remaining units
// go through a max flow over the cells whose share is fractional.
std::array<std::array<std::size_t, 3>, kNumClasses> allocate(
    const std::array<std::size_t, kNumClasses>& class_counts,
    const std::array<std::size_t, 3>& sizes, std::size_t n) {
  std::array<std::array<std::size_t, 3>, kNumClasses> alloc{};
  // Nodes: 0 source, 1..3 classes, 4..6 partitions, 7 sink.
  constexpr int kNodes = 8;
  std::array<std::array<long long, kNodes>, kNodes> cap{};
  std::array<long long, 3> col_floor{};
  long long needed = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    long long row_floor = 0;
    for (int p = 0; p < 3; ++p) {
      const std::size_t share = class_counts[c] * sizes[p];
      alloc[c][p] = share / n;
      row_floor += static_cast<long long>(alloc[c][p]);
      col_floor[p] += static_cast<long long>(alloc[c][p]);
      if (share % n != 0) cap[1 + c][4 + p] = 1;
    }
    cap[0][1 + c] = static_cast<long long>(class_counts[c]) - row_floor;
    needed += cap[0][1 + c];
  }
  for (int p = 0; p < 3; ++p) {
    cap[4 + p][7] = static_cast<long long>(sizes[p]) - col_floor[p];
  }

  long long flow = 0;
  while (true) {
    std::array<int, kNodes> parent;
    parent.fill(-1);
    parent[0] = 0;
    std::vector<int> stack{0};
    while (!stack.empty() && parent[7] < 0) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < kNodes; ++v) {
        if (parent[v] < 0 && cap[u][v] > 0) {
          parent[v] = u;
          stack.push_back(v);
        }
      }
    }
    if (parent[7] < 0) break;
    for (int v = 7; v != 0; v = parent[v]) {
      --cap[parent[v]][v];
      ++cap[v][parent[v]];
    }
    ++flow;
  }
  if (flow != needed) throw Error("stratified allocation failed");
  for (int c = 0; c < kNumClasses; ++c) {
    for (int p = 0; p < 3; ++p) {
      // Residual capacity on the reverse edge is the flow sent.
      alloc[c][p] += static_cast<std::size_t>(cap[4 + p][1 + c]);
    }
  }
  return alloc;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

std::string cell_name(const CompareCell& cell) {
  std::string label;
  for (char c : cell.embedding_label) {
    const bool plain = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                       (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    label.push_back(plain ? c : '_');
  }
  return to_string(cell.architecture) + "__" + label;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<json> read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

void log_line(const CompareOptions& options, const std::string& line) {
  if (options.log) options.log(line);
}

}  // namespace

void SplitSpec::validate() const {
  for (double f : {train_fraction, test_fraction, val_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) throw DataError("split fractions must lie in [0, 1]");
  }
  if (std::abs(train_fraction + test_fraction + val_fraction - 1.0) > 1e-9) {
    throw DataError("split fractions must sum to 1");
  }
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n < 10) throw DataError("corpus of " + std::to_string(n) + " is too small to split");
  SplitSizes s;
  s.test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
  s.val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.val_fraction));
  if (s.test + s.val >= n || s.test == 0 || s.val == 0) {
    throw DataError("corpus of " + std::to_string(n) +
                    " leaves an empty train, test or validation partition");
  }
  s.train = n - s.test - s.val;
  return s;
}

Split split(std::span<const Polarity> labels, const SplitSpec& spec) {
  const SplitSizes sizes = split_sizes(labels.size(), spec);
  Rng rng(mix_seed(spec.seed, 1));
  Split out;
  auto place = [&](const std::vector<std::size_t>& order, std::size_t test,
                   std::size_t val) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto& dest = i < test ? out.test : i < test + val ? out.val : out.train;
      dest.push_back(order[i]);
    }
  };
  if (!spec.stratified) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    place(order, sizes.test, sizes.val);
  } else {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      by_class[class_index(labels[i])].push_back(i);
    }
    std::array<std::size_t, kNumClasses> counts{};
    for (int c = 0; c < kNumClasses; ++c) counts[c] = by_class[c].size();
    const auto alloc = allocate(counts, {sizes.train, sizes.test, sizes.val},
                                labels.size());
    for (int c = 0; c < kNumClasses; ++c) {
      rng.shuffle(by_class[c]);
      place(by_class[c], alloc[c][kTest], alloc[c][kVal]);
    }
  }
  for (auto* part : {&out.train, &out.test, &out.val}) std::sort(part->begin(), part->end());
  return out;
}

MetricsReport metrics_from_confusion(const Confusion& confusion) {
  MetricsReport r;
  r.confusion = confusion;
  std::size_t correct = 0;
  for (int g = 0; g < kNumClasses; ++g) {
    for (int p = 0; p < kNumClasses; ++p) r.total += confusion[g][p];
    correct += confusion[g][g];
  }
  if (r.total == 0) throw DataError("cannot compute metrics for an empty dataset");
  r.accuracy = ratio(correct, r.total);
  for (int c = 0; c < kNumClasses; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      predicted += confusion[k][c];
      actual += confusion[c][k];
    }
    ClassMetrics& m = r.per_class[c];
    m.support = actual;
    m.precision = ratio(confusion[c][c], predicted);
    m.recall = ratio(confusion[c][c], actual);
    const double sum = m.precision + m.recall;
    m.f1 = sum == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / sum;
    r.macro_precision += m.precision / kNumClasses;
    r.macro_recall += m.recall / kNumClasses;
    r.macro_f1 += m.f1 / kNumClasses;
  }
  return r;
}

std::string MetricsReport::to_json() const {
  json classes = json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    classes.push_back({{"label", to_int(polarity_from_class(c))},
                       {"precision", per_class[c].precision},
                       {"recall", per_class[c].recall},
                       {"f1", per_class[c].f1},
                       {"support", per_class[c].support}});
  }
  return json{{"confusion", confusion},
              {"total", total},
              {"accuracy", accuracy},
              {"per_class", classes},
              {"macro_precision", macro_precision},
              {"macro_recall", macro_recall},
              {"macro_f1", macro_f1}}
      .dump();
}

MetricsReport evaluate(SentimentModel& model, std::span<const Example> examples) {
  Confusion confusion{};
  for (const auto& ex : examples) {
    if (ex.target < 0 || ex.target >= kNumClasses) throw DataError("bad target class");
    ++confusion[ex.target][predict(model, ex.input).class_index];
  }
  return metrics_from_confusion(confusion);
}

TokenizedCorpus tokenize(std::span<const LabeledText> records,
                         const Normalizer& normalizer) {
  TokenizedCorpus out;
  for (const auto& r : records) {
    out.ids.push_back(r.doc_id);
    out.tokens.push_back(normalizer.normalize(r.raw_text).tokens);
    out.labels.push_back(r.label);
  }
  return out;
}

std::vector<Example> encode_examples(const TokenizedCorpus& corpus,
                                     std::span<const std::size_t> indices,
                                     const EmbeddingTable& table,
                                     std::size_t padded_length,
                                     LookupStats* stats) {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    out.push_back({encode(table, corpus.tokens.at(i), padded_length, stats),
                   class_index(corpus.labels.at(i))});
  }
  return out;
}

std::size_t padded_length_for(const TokenizedCorpus& corpus,
                              std::span<const std::size_t> indices) {
  std::vector<std::size_t> lengths;
  for (std::size_t i : indices) lengths.push_back(corpus.tokens.at(i).size());
  return percentile_length(std::move(lengths));
}

SynthCorpus synth_corpus(std::size_t num_docs, std::size_t vocab_size,
                         std::uint64_t seed, std::size_t dim) {
  if (num_docs < 3 * kNumClasses) throw DataError("synth_corpus needs at least 9 documents");
  const std::size_t per_class = vocab_size >= 30 ? 2 : 1;
  if (vocab_size < kNumClasses * per_class + 1) {
    throw DataError("synth_corpus needs a vocabulary of at least 4 words");
  }
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";

  Rng rng(mix_seed(seed, 0));
  std::vector<std::string> words;
  std::set<std::string> seen;
  while (words.size() < vocab_size) {
    std::string w;
    const std::size_t syllables = 2 + rng.below(2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(kConsonants[rng.below(kConsonants.size())]);
      w.push_back(kVowels[rng.below(kVowels.size())]);
    }
    if (seen.insert(w).second) words.push_back(w);
  }

  SynthCorpus out{{}, EmbeddingTable(dim), {}, {}};
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      out.keywords[c].push_back(words[c * per_class + k]);
    }
  }
  out.fillers.assign(words.begin() + kNumClasses * per_class, words.end());

  Rng vectors(mix_seed(seed, 3));
  for (const auto& w : words) {
    std::vector<Real> v(dim);
    for (auto& x : v) x = vectors.uniform(-1.0, 1.0);
    out.table.add_word(w, std::move(v));
  }

  for (std::size_t i = 0; i < num_docs; ++i) {
    const int c = static_cast<int>(i % kNumClasses);
    std::vector<std::string> tokens;
    const std::size_t fillers = 2 + rng.below(6);
    for (std::size_t f = 0; f < fillers; ++f) {
      tokens.push_back(out.fillers[rng.below(out.fillers.size())]);
    }
    const auto& keys = out.keywords[c];
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(rng.below(fillers + 1)),
                  keys[rng.below(keys.size())]);
    std::string id = std::to_string(i);
    id = "syn" + std::string(id.size() < 5 ? 5 - id.size() : 0, '0') + id;
    out.records.push_back({id, polarity_from_class(c), join_tokens(tokens)});
  }
  return out;
}

std::vector<CellResult> compare(std::span<const CompareCell> cells,
                                std::span<const LabeledText> corpus,
                                const std::map<std::string, EmbeddingTable>& tables,
                                const Normalizer& normalizer,
                                const fs::path& out_dir,
                                const CompareOptions& options) {
  const TokenizedCorpus tokenized = tokenize(corpus, normalizer);
  const Split parts = split(tokenized.labels, options.split);

  std::uint64_t corpus_hash = fnv1a("corpus");
  for (std::size_t i = 0; i < tokenized.ids.size(); ++i) {
    corpus_hash = fnv1a(tokenized.ids[i], corpus_hash);
    corpus_hash = fnv1a(std::to_string(to_int(tokenized.labels[i])), corpus_hash);
    for (const auto& t : tokenized.tokens[i]) corpus_hash = fnv1a(t + " ", corpus_hash);
  }
  const std::string split_key =
      format_real(options.split.train_fraction) + "/" +
      format_real(options.split.test_fraction) + "/" +
      format_real(options.split.val_fraction) + "/" +
      std::to_string(options.split.seed) + (options.split.stratified ? "s" : "u");

  std::vector<CellResult> results;
  for (const auto& cell : cells) {
    CellResult result;
    result.cell = cell;
    const std::string name = cell_name(cell);
    const fs::path cell_path = out_dir / "cells" / (name + ".json");
    try {
      const auto table_it = tables.find(cell.embedding_label);
      if (table_it == tables.end()) {
        throw DataError("no embedding table labelled '" + cell.embedding_label + "'");
      }
      const EmbeddingTable& table = table_it->second;

      ModelConfig config = default_config(cell.architecture);
      if (const auto it = options.hyperparameters.find(cell.architecture);
          it != options.hyperparameters.end()) {
        config.hyper = it->second;
      }
      config.seed = options.seed;
      config.embedding_dim = table.dim();
      config.padded_length =
          options.padded_length.value_or(std::max(padded_length_for(tokenized, parts.train),
                                                  config.hyper.filter_size));
      config.validate();

      const std::string key =
          hex(fnv1a(config_to_json(config) + "|" + table.fingerprint() + "|" +
                        split_key,
                    corpus_hash));

      if (const auto saved = read_json(cell_path);
          saved && saved->value("status", "") == "ok" && saved->value("key", "") == key) {
        result.ok = true;
        result.resumed = true;
        result.f1_macro = saved->at("f1_macro").get<double>();
        result.accuracy = saved->at("accuracy").get<double>();
        result.mean_epoch_seconds = saved->at("mean_epoch_seconds").get<double>();
        result.epoch_seconds = saved->at("epoch_seconds").get<std::vector<double>>();
        log_line(options, name + ": reused");
        results.push_back(result);
        continue;
      }

      log_line(options, name + ": training (L=" + std::to_string(config.padded_length) + ")");
      const auto train_set = encode_examples(tokenized, parts.train, table, config.padded_length);
      const auto val_set = encode_examples(tokenized, parts.val, table, config.padded_length);
      const auto test_set = encode_examples(tokenized, parts.test, table, config.padded_length);
      auto model = build(config);
      TrainOptions train_options;
      train_options.clock = options.clock;
      const TrainingTrace trace = train(*model, train_set, val_set, train_options);
      const MetricsReport metrics = evaluate(*model, test_set);

      result.ok = true;
      result.f1_macro = metrics.macro_f1;
      result.accuracy = metrics.accuracy;
      result.mean_epoch_seconds = trace.mean_epoch_seconds();
      for (const auto& e : trace.epochs) result.epoch_seconds.push_back(e.seconds);

      std::ostringstream trace_csv;
      trace.write_csv(trace_csv);
      write_file(out_dir / "traces" / (name + ".csv"), trace_csv.str());
      fs::create_directories(out_dir / "checkpoints");
      save_checkpoint(*model, table.fingerprint(), out_dir / "checkpoints" / (name + ".json"));
      write_file(cell_path, json{{"status", "ok"},
                                 {"key", key},
                                 {"architecture", to_string(cell.architecture)},
                                 {"embedding_label", cell.embedding_label},
                                 {"f1_macro", result.f1_macro},
                                 {"accuracy", result.accuracy},
                                 {"mean_epoch_seconds", result.mean_epoch_seconds},
                                 {"epoch_seconds", result.epoch_seconds},
                                 {"metrics", json::parse(metrics.to_json())}}
                                .dump(2) +
                                "\n");
      log_line(options, name + ": accuracy " + format_real(result.accuracy) +
                            ", macro F1 " + format_real(result.f1_macro));
    } catch (const std::exception& e) {
      result = CellResult{};
      result.cell = cell;
      result.error = e.what();
      log_line(options, name + ": failed: " + result.error);
      try {
        write_file(cell_path, json{{"status", "failed"}, {"error", result.error}}.dump(2) + "\n");
      } catch (const std::exception&) {
        // The grid result still records the failure.
      }
    }
    results.push_back(result);
  }

  std::ostringstream comparison, timing;
  write_comparison_csv(results, comparison);
  write_timing_csv(results, timing);
  write_file(out_dir / "comparison.csv", comparison.str());
  write_file(out_dir / "timing.csv", timing.str());
  return results;
}

void write_comparison_csv(std::span<const CellResult> results, std::ostream& out) {
  out << "architecture,embedding_label,f1_macro,accuracy,mean_epoch_seconds,status\n";
  for (const auto& r : results) {
    out << to_string(r.cell.architecture) << ',' << r.cell.embedding_label << ',';
    if (r.ok) {
      out << format_real(r.f1_macro) << ',' << format_real(r.accuracy) << ','
          << format_real(r.mean_epoch_seconds) << ",ok\n";
    } else {
      out << ",,,failed\n";
    }
  }
}

void write_timing_csv(std::span<const CellResult> results, std::ostream& out) {
  out << "architecture,embedding_label,epoch,seconds\n";
  for (const auto& r : results) {
    for (std::size_t e = 0; e < r.epoch_seconds.size(); ++e) {
      out << to_string(r.cell.architecture) << ',' << r.cell.embedding_label << ','
          << e + 1 << ',' << format_real(r.epoch_seconds[e]) << '\n';
    }
  }
}

}  // namespace colloq
