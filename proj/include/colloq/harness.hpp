#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "colloq/corpus_store.hpp"
#include "colloq/embedding_store.hpp"
#include "colloq/model_zoo.hpp"

namespace colloq {

class Normalizer;

struct SplitSpec {
  double train_fraction = 0.90;
  double test_fraction = 0.06;
  double val_fraction = 0.04;
  std::uint64_t seed = 1;
  bool stratified = true;

  void validate() const;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t val = 0;
};

// test = round(N * test_fraction), val = round(N * val_fraction), the rest
// is train. Throws DataError when N < 10 or a partition would be empty.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

// Indices into the corpus, each list ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::size_t> val;
};

// Stratified mode gives every class floor or ceil of its proportional share
// in every partition.
Split split(std::span<const Polarity> labels, const SplitSpec& spec);

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

// Rows are gold class indices, columns predicted.
struct MetricsReport {
  Confusion confusion{};
  std::size_t total = 0;
  double accuracy = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;

  std::string to_json() const;
};

// Zero denominators give 0. Throws DataError for an empty matrix.
MetricsReport metrics_from_confusion(const Confusion& confusion);
MetricsReport evaluate(SentimentModel& model, std::span<const Example> examples);

// Normalized token sequences for a labelled corpus.
struct TokenizedCorpus {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> tokens;
  std::vector<Polarity> labels;
};

TokenizedCorpus tokenize(std::span<const LabeledText> records,
                         const Normalizer& normalizer);

std::vector<Example> encode_examples(const TokenizedCorpus& corpus,
                                     std::span<const std::size_t> indices,
                                     const EmbeddingTable& table,
                                     std::size_t padded_length,
                                     LookupStats* stats = nullptr);

// Padded length from the token counts of the given documents.
std::size_t padded_length_for(const TokenizedCorpus& corpus,
                              std::span<const std::size_t> indices);

struct SynthCorpus {
  std::vector<LabeledText> records;
  EmbeddingTable table;
  std::array<std::vector<std::string>, kNumClasses> keywords;  // by class index
  std::vector<std::string> fillers;
};

// Balanced three-class corpus. Each document holds exactly one keyword of
// its class among 2 to 7 filler words. Words are lowercase ASCII
// consonant-vowel strings so normalization leaves them untouched. Every
// word gets a uniform(-1, 1) vector. Throws DataError when num_docs < 9 or
// vocab_size < 4.
SynthCorpus synth_corpus(std::size_t num_docs, std::size_t vocab_size,
                         std::uint64_t seed, std::size_t dim = 100);

struct CompareCell {
  Architecture architecture = Architecture::Cnn;
  std::string embedding_label;
};

struct CellResult {
  CompareCell cell;
  bool ok = false;
  bool resumed = false;
  std::string error;
  double f1_macro = 0.0;
  double accuracy = 0.0;
  double mean_epoch_seconds = 0.0;
  std::vector<double> epoch_seconds;
};

struct CompareOptions {
  SplitSpec split;
  std::uint64_t seed = 1;
  std::optional<std::size_t> padded_length;  // default: 99th percentile of train
  std::map<Architecture, Hyperparameters> hyperparameters;  // overrides
  Clock clock = wall_clock();
  std::function<void(const std::string&)> log;
};

// Trains and tests every cell. Writes under out_dir:
//   comparison.csv  architecture,embedding_label,f1_macro,accuracy,
//                   mean_epoch_seconds,status
//   timing.csv      architecture,embedding_label,epoch,seconds
//   traces/<cell>.csv, checkpoints/<cell>.json, cells/<cell>.json
// A cell whose cells/<cell>.json records success for the same inputs is
// reused rather than retrained. A cell that throws is recorded as failed
// and the grid continues.
std::vector<CellResult> compare(std::span<const CompareCell> cells,
                                std::span<const LabeledText> corpus,
                                const std::map<std::string, EmbeddingTable>& tables,
                                const Normalizer& normalizer,
                                const std::filesystem::path& out_dir,
                                const CompareOptions& options = {});

void write_comparison_csv(std::span<const CellResult> results, std::ostream& out);
void write_timing_csv(std::span<const CellResult> results, std::ostream& out);

}  // namespace colloq
