#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "colloq/common.hpp"
#include "colloq/tensor.hpp"

namespace colloq {

// Pretrained word vectors plus optional character n-gram vectors used to
// compose out-of-vocabulary words. Immutable once loaded.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 100, std::size_t ngram_min = 3,
                          std::size_t ngram_max = 6);

  std::size_t dim() const { return dim_; }
  std::size_t ngram_min() const { return ngram_min_; }
  std::size_t ngram_max() const { return ngram_max_; }

  void add_word(std::string token, std::vector<Real> vector);
  void add_ngram(std::string ngram, std::vector<Real> vector);

  const std::vector<Real>* find_word(std::string_view token) const;
  const std::vector<Real>* find_ngram(std::string_view ngram) const;

  std::size_t word_count() const { return words_.size(); }
  std::size_t ngram_count() const { return ngrams_.size(); }
  const std::unordered_map<std::string, std::vector<Real>>& words() const {
    return words_;
  }
  const std::unordered_map<std::string, std::vector<Real>>& ngrams() const {
    return ngrams_;
  }

  // Hex digest over dim, n-gram range, and every (key, vector) pair in
  // sorted key order. Independent of load order.
  std::string fingerprint() const;

 private:
  void check_vector(const std::string& key, const std::vector<Real>& v) const;

  std::size_t dim_;
  std::size_t ngram_min_;
  std::size_t ngram_max_;
  std::unordered_map<std::string, std::vector<Real>> words_;
  std::unordered_map<std::string, std::vector<Real>> ngrams_;
};

// Plain-text vector file: optional "<count> <dim>" header, then one
// "token v1 ... vd" line per entry. Tokens that begin with '<' or end with
// '>' are boundary n-grams. A line consisting of "#ngrams" routes every
// following entry into the n-gram table (for interior n-grams).
EmbeddingTable load_text_vec(const std::filesystem::path& path,
                             std::size_t ngram_min = 3,
                             std::size_t ngram_max = 6);
EmbeddingTable parse_text_vec(std::istream& in, std::size_t ngram_min = 3,
                              std::size_t ngram_max = 6);
void save_text_vec(const EmbeddingTable& table,
                   const std::filesystem::path& path);

struct LookupStats {
  std::atomic<std::size_t> lookups{0};
  std::atomic<std::size_t> oov_composed{0};
  std::atomic<std::size_t> misses{0};
  std::atomic<std::size_t> truncated_tokens{0};
  std::atomic<std::size_t> truncated_documents{0};

  std::string to_json() const;
};

// Code-point n-grams of "<token>" with lengths in [min_n, max_n],
// deduplicated, in order of first occurrence.
std::vector<std::string> char_ngrams(std::string_view token, std::size_t min_n,
                                     std::size_t max_n);

std::vector<Real> lookup(const EmbeddingTable& table, std::string_view token,
                         LookupStats* stats = nullptr);

struct DocumentMatrix {
  Tensor2 values;  // L x d; rows >= true_length are zero
  std::size_t true_length = 0;
};

DocumentMatrix encode(const EmbeddingTable& table,
                      const std::vector<std::string>& tokens,
                      std::size_t padded_length, LookupStats* stats = nullptr);

// Nearest-rank percentile of token counts, at least 1.
std::size_t percentile_length(std::vector<std::size_t> lengths,
                              double percentile = 0.99);

}  // namespace colloq
