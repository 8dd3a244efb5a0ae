#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "colloq/common.hpp"

namespace colloq {

class Normalizer;

using Instant = std::chrono::sys_time<std::chrono::milliseconds>;

// RFC 3339 date-time ("2020-03-01T12:30:00Z", "...+03:30", optional
// fractional seconds, kept to millisecond precision). Throws DataError.
Instant parse_rfc3339(std::string_view text);
// Always UTC with a trailing Z; milliseconds only when nonzero.
std::string format_rfc3339(Instant t);

enum class Source { Twitter, Instagram };
std::string to_string(Source s);
Source parse_source(std::string_view name);

struct RawPost {
  std::string id;
  Source source = Source::Twitter;
  std::string text;
  std::string author_id;
  Instant timestamp{};
  std::uint64_t like_count = 0;
  std::uint64_t comment_count = 0;
  std::string domain_tag;

  friend bool operator==(const RawPost&, const RawPost&) = default;
};

// Builds a post from one JSONL object. Throws DataError on missing or
// mistyped fields.
RawPost post_from_json(std::string_view line);
std::string post_to_json(const RawPost& post);

struct SelectionConfig {
  std::uint64_t min_comment_count = 0;
  std::uint64_t min_like_count = 0;
  std::set<std::string> allowed_domains;  // empty: all domains
  std::optional<std::set<std::string>> author_allowlist;
  std::vector<std::string> ad_marker_patterns;

  void validate() const;
  bool accepts(const RawPost& post) const;
};

struct Document {
  std::string doc_id;
  std::string raw_text;
  std::vector<std::string> tokens;
  std::size_t token_count = 0;
  std::size_t emoji_count = 0;
  std::string source_post;

  friend bool operator==(const Document&, const Document&) = default;
};

Document make_document(const RawPost& post, const Normalizer& normalizer);

enum class Provenance { UnanimousR1, MajorityR1, MajorityR2 };
std::string to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

struct GoldRecord {
  std::string doc_id;
  Polarity label = Polarity::Neutral;
  int round = 1;
  Provenance provenance = Provenance::UnanimousR1;

  friend bool operator==(const GoldRecord&, const GoldRecord&) = default;
};

struct Annotation {
  std::string annotator_id;
  std::string doc_id;
  Polarity label = Polarity::Neutral;
  int round = 1;
  Instant submitted_at{};
  bool probe = false;  // repeated round-1 label for self-agreement

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

std::string annotation_to_json(const Annotation& a);
Annotation annotation_from_json(std::string_view line);

struct IngestDiagnostic {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  std::size_t accepted = 0;
  std::vector<IngestDiagnostic> diagnostics;
};

// Posts, documents, annotators, annotations and gold records. With a log
// path every mutation is appended to a JSONL record log (flushed and synced
// before the call returns) and the log is replayed on construction. One
// writer at a time; readers get copies.
class CorpusStore {
 public:
  CorpusStore() = default;
  explicit CorpusStore(std::filesystem::path log_path);
  ~CorpusStore();
  CorpusStore(const CorpusStore&) = delete;
  CorpusStore& operator=(const CorpusStore&) = delete;

  // JSONL posts. Malformed lines and duplicate ids are reported and skipped.
  IngestResult ingest(const std::filesystem::path& path);
  IngestResult ingest(std::istream& in);
  // Throws DataError on a duplicate id or an invalid post.
  void add_post(const RawPost& post);

  std::vector<RawPost> select(const SelectionConfig& config) const;
  std::vector<RawPost> posts() const;
  std::optional<RawPost> find_post(const std::string& id) const;

  // Returns false when a document with this id already exists.
  bool add_document(const Document& doc);
  std::vector<Document> documents() const;
  std::optional<Document> find_document(const std::string& id) const;

  // Returns false when already registered.
  bool add_annotator(const std::string& id);
  std::set<std::string> annotators() const;

  void add_annotation(const Annotation& a);
  std::vector<Annotation> annotations() const;

  // Throws DataError when the document already has a gold record.
  void add_gold(const GoldRecord& g);
  std::vector<GoldRecord> gold() const;

  std::size_t post_count() const;
  std::size_t document_count() const;

 private:
  void apply(const std::string& line, std::size_t line_no);
  void append(const std::string& line);
  bool insert_post(const RawPost& post);

  mutable std::shared_mutex mutex_;
  std::FILE* log_ = nullptr;
  std::map<std::string, RawPost> posts_;
  std::map<std::string, Document> documents_;
  std::set<std::string> annotators_;
  std::vector<Annotation> annotations_;
  std::map<std::string, GoldRecord> gold_;
};

struct CorpusStats {
  std::map<int, std::size_t> class_counts;  // always has -1, 0, +1
  std::map<std::size_t, std::size_t> length_histogram;
  std::map<std::size_t, std::size_t> emoji_histogram;
  std::map<int, double> mean_length_by_label;  // nonempty groups only
  std::size_t labeled_documents = 0;
  std::size_t skipped_unlabeled = 0;

  std::string to_json() const;
};

// Documents without a gold record are skipped and counted.
CorpusStats compute_stats(std::span<const Document> docs,
                          std::span<const GoldRecord> gold);

struct LabeledText {
  std::string doc_id;
  Polarity label = Polarity::Neutral;
  std::string raw_text;

  friend bool operator==(const LabeledText&, const LabeledText&) = default;
};

std::vector<LabeledText> labeled_corpus(const CorpusStore& store);

// Backslash escapes for tab, newline, carriage return and backslash.
std::string tsv_escape(std::string_view text);
// Throws DataError on a dangling or unknown escape.
std::string tsv_unescape(std::string_view text);

// doc_id <TAB> label <TAB> escaped raw text, one record per line.
std::size_t export_tsv(std::span<const LabeledText> records,
                       const std::filesystem::path& path);
void write_tsv(std::span<const LabeledText> records, std::ostream& out);
std::vector<LabeledText> read_labeled_tsv(const std::filesystem::path& path);
std::vector<LabeledText> parse_labeled_tsv(std::istream& in);

}  // namespace colloq
