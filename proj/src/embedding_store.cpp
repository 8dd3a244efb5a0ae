#include "colloq/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "colloq/rng.hpp"
#include "colloq/utf8.hpp"

namespace colloq {
namespace {

constexpr std::string_view kNgramSection = "#ngrams";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r') {
      ++i;
    }
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_real(std::string_view s, Real& out) {
  // strtod accepts forms (e.g. "1e-05", "-.5") that word2vec writers emit.
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && !tmp.empty() && std::isfinite(out);
}

bool is_boundary_ngram(std::string_view token) {
  return token.size() > 1 && (token.front() == '<' || token.back() == '>');
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim, std::size_t ngram_min,
                               std::size_t ngram_max)
    : dim_(dim), ngram_min_(ngram_min), ngram_max_(ngram_max) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
  if (ngram_min == 0 || ngram_min > ngram_max) {
    throw DataError("invalid n-gram range [" + std::to_string(ngram_min) +
                    ", " + std::to_string(ngram_max) + "]");
  }
}

void EmbeddingTable::check_vector(const std::string& key,
                                  const std::vector<Real>& v) const {
  if (v.size() != dim_) {
    throw DataError("vector for '" + key + "' has " + std::to_string(v.size()) +
                    " components, expected " + std::to_string(dim_));
  }
}

void EmbeddingTable::add_word(std::string token, std::vector<Real> vector) {
  check_vector(token, vector);
  if (token.empty()) throw DataError("empty embedding token");
  if (!words_.emplace(token, std::move(vector)).second) {
    throw DataError("duplicate embedding token '" + token + "'");
  }
}

void EmbeddingTable::add_ngram(std::string ngram, std::vector<Real> vector) {
  check_vector(ngram, vector);
  if (ngram.empty()) throw DataError("empty n-gram key");
  if (!ngrams_.emplace(ngram, std::move(vector)).second) {
    throw DataError("duplicate n-gram '" + ngram + "'");
  }
}

const std::vector<Real>* EmbeddingTable::find_word(std::string_view token) const {
  const auto it = words_.find(std::string(token));
  return it == words_.end() ? nullptr : &it->second;
}

const std::vector<Real>* EmbeddingTable::find_ngram(std::string_view ngram) const {
  const auto it = ngrams_.find(std::string(ngram));
  return it == ngrams_.end() ? nullptr : &it->second;
}

std::string EmbeddingTable::fingerprint() const {
  auto hash_map = [](std::uint64_t h, char tag,
                     const std::unordered_map<std::string, std::vector<Real>>& m) {
    std::vector<const std::pair<const std::string, std::vector<Real>>*> entries;
    entries.reserve(m.size());
    for (const auto& e : m) entries.push_back(&e);
    std::sort(entries.begin(), entries.end(),
              [](auto* a, auto* b) { return a->first < b->first; });
    h = fnv1a(std::string_view(&tag, 1), h);
    for (const auto* e : entries) {
      h = fnv1a(e->first, h);
      h = fnv1a(std::string_view("\0", 1), h);
      for (Real x : e->second) {
        const auto bits = std::bit_cast<std::uint64_t>(x);
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(&bits),
                                   sizeof bits),
                  h);
      }
    }
    return h;
  };
  std::uint64_t h = fnv1a(std::to_string(dim_) + ":" +
                          std::to_string(ngram_min_) + ":" +
                          std::to_string(ngram_max_));
  h = hash_map(h, 'w', words_);
  h = hash_map(h, 'n', ngrams_);
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

EmbeddingTable parse_text_vec(std::istream& in, std::size_t ngram_min,
                              std::size_t ngram_max) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared_count = 0;
  bool has_header = false;
  bool in_ngram_section = false;
  std::optional<EmbeddingTable> table;
  std::size_t entries = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t count = 0, dim = 0;
      if (parse_size(fields[0], count) && parse_size(fields[1], dim)) {
        if (dim == 0) throw DataError("header declares dimension 0", line_no);
        has_header = true;
        declared_count = count;
        table.emplace(dim, ngram_min, ngram_max);
        continue;
      }
    }
    if (fields.size() == 1 && fields[0] == kNgramSection) {
      in_ngram_section = true;
      continue;
    }
    if (fields.size() < 2) {
      throw DataError("entry '" + std::string(fields[0]) + "' has no vector",
                      line_no);
    }
    const std::size_t dim = fields.size() - 1;
    if (!table) table.emplace(dim, ngram_min, ngram_max);
    if (dim != table->dim()) {
      throw DataError("inconsistent dimension: " + std::to_string(dim) +
                          " components, expected " +
                          std::to_string(table->dim()),
                      line_no);
    }
    std::vector<Real> v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_real(fields[i + 1], v[i])) {
        throw DataError("non-numeric component '" + std::string(fields[i + 1]) +
                            "'",
                        line_no);
      }
    }
    std::string token(fields[0]);
    if (!utf8::is_valid(token)) throw DataError("token is not UTF-8", line_no);
    try {
      if (in_ngram_section || is_boundary_ngram(token)) {
        table->add_ngram(std::move(token), std::move(v));
      } else {
        table->add_word(std::move(token), std::move(v));
      }
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
    ++entries;
  }
  if (!table || entries == 0) throw DataError("embedding file has no entries");
  if (has_header && declared_count != entries) {
    throw DataError("header declares " + std::to_string(declared_count) +
                    " entries but file has " + std::to_string(entries));
  }
  return std::move(*table);
}

EmbeddingTable load_text_vec(const std::filesystem::path& path,
                             std::size_t ngram_min, std::size_t ngram_max) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embedding file " + path.string());
  try {
    return parse_text_vec(in, ngram_min, ngram_max);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_text_vec(const EmbeddingTable& table,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding file " + path.string());
  out << std::setprecision(17);
  auto write_sorted = [&](const auto& m) {
    std::vector<std::string> keys;
    for (const auto& [k, v] : m) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (const auto& k : keys) {
      out << k;
      for (Real x : m.at(k)) out << ' ' << x;
      out << '\n';
    }
  };
  out << table.word_count() + table.ngram_count() << ' ' << table.dim() << '\n';
  write_sorted(table.words());
  if (table.ngram_count() > 0) {
    out << kNgramSection << '\n';
    write_sorted(table.ngrams());
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string LookupStats::to_json() const {
  std::ostringstream out;
  out << "{\"lookups\":" << lookups.load()
      << ",\"oov_composed\":" << oov_composed.load()
      << ",\"misses\":" << misses.load()
      << ",\"truncated_tokens\":" << truncated_tokens.load()
      << ",\"truncated_documents\":" << truncated_documents.load() << "}";
  return out.str();
}

std::vector<std::string> char_ngrams(std::string_view token, std::size_t min_n,
                                     std::size_t max_n) {
  std::u32string wrapped = U"<";
  wrapped += utf8::decode(token);
  wrapped += U">";
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (std::size_t start = 0; start < wrapped.size(); ++start) {
    for (std::size_t n = min_n; n <= max_n && start + n <= wrapped.size(); ++n) {
      std::string gram = utf8::encode(wrapped.substr(start, n));
      if (seen.insert(gram).second) out.push_back(std::move(gram));
    }
  }
  return out;
}

std::vector<Real> lookup(const EmbeddingTable& table, std::string_view token,
                         LookupStats* stats) {
  if (stats) ++stats->lookups;
  if (const auto* v = table.find_word(token)) return *v;
  std::vector<Real> sum(table.dim(), 0.0);
  bool found = false;
  for (const auto& gram :
       char_ngrams(token, table.ngram_min(), table.ngram_max())) {
    if (const auto* v = table.find_ngram(gram)) {
      found = true;
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
    }
  }
  if (stats) ++(found ? stats->oov_composed : stats->misses);
  return sum;
}

DocumentMatrix encode(const EmbeddingTable& table,
                      const std::vector<std::string>& tokens,
                      std::size_t padded_length, LookupStats* stats) {
  if (padded_length == 0) throw DataError("padded length must be at least 1");
  DocumentMatrix doc{Tensor2(padded_length, table.dim()),
                     std::min(tokens.size(), padded_length)};
  for (std::size_t t = 0; t < doc.true_length; ++t) {
    const auto v = lookup(table, tokens[t], stats);
    std::copy(v.begin(), v.end(), doc.values.row(t).begin());
  }
  if (stats && tokens.size() > padded_length) {
    stats->truncated_tokens += tokens.size() - padded_length;
    ++stats->truncated_documents;
  }
  return doc;
}

std::size_t percentile_length(std::vector<std::size_t> lengths,
                              double percentile) {
  if (lengths.empty()) return 1;
  std::sort(lengths.begin(), lengths.end());
  const double rank = std::ceil(percentile * static_cast<double>(lengths.size()));
  const std::size_t index =
      std::clamp<std::size_t>(static_cast<std::size_t>(rank), 1, lengths.size()) -
      1;
  return std::max<std::size_t>(lengths[index], 1);
}

}  // namespace colloq
