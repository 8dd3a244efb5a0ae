#include "colloq/corpus_store.hpp"

#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <istream>

#include "json.hpp"

#include "colloq/normalizer.hpp"
#include "colloq/utf8.hpp"

namespace colloq {

using nlohmann::json;
namespace chr = std::chrono;

namespace {

int parse_fixed(std::string_view s, std::size_t pos, std::size_t width) {
  if (pos + width > s.size()) throw DataError("truncated timestamp");
  int v = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (s[i] < '0' || s[i] > '9') throw DataError("bad digit in timestamp");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect_char(std::string_view s, std::size_t pos, std::string_view allowed) {
  if (pos >= s.size() || allowed.find(s[pos]) == std::string_view::npos) {
    throw DataError("malformed timestamp '" + std::string(s) + "'");
  }
}

std::string pad(long long v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return s;
}

const json& field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t count_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    throw DataError(std::string("field '") + key + "' must be nonnegative");
  }
  throw DataError(std::string("field '") + key + "' must be an integer");
}

Polarity label_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number_integer()) throw DataError("label must be an integer");
  const auto p = polarity_from_int(v.get<long long>());
  if (!p) throw DataError("label must be -1, 0 or 1");
  return *p;
}

json parse_object(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) throw DataError("malformed JSON");
  if (!j.is_object()) throw DataError("record is not a JSON object");
  return j;
}

json post_json(const RawPost& p) {
  return json{{"id", p.id},
              {"source", to_string(p.source)},
              {"text", p.text},
              {"author_id", p.author_id},
              {"timestamp", format_rfc3339(p.timestamp)},
              {"like_count", p.like_count},
              {"comment_count", p.comment_count},
              {"domain_tag", p.domain_tag}};
}

RawPost post_from_object(const json& j) {
  RawPost p;
  p.id = string_field(j, "id");
  p.source = parse_source(string_field(j, "source"));
  p.text = string_field(j, "text");
  p.author_id = string_field(j, "author_id");
  p.timestamp = parse_rfc3339(string_field(j, "timestamp"));
  p.like_count = count_field(j, "like_count");
  p.comment_count = count_field(j, "comment_count");
  p.domain_tag = string_field(j, "domain_tag");
  if (p.id.empty()) throw DataError("empty post id");
  if (p.text.empty()) throw DataError("empty post text");
  return p;
}

json annotation_json(const Annotation& a) {
  json j{{"annotator_id", a.annotator_id},
         {"doc_id", a.doc_id},
         {"label", to_int(a.label)},
         {"round", a.round},
         {"submitted_at", format_rfc3339(a.submitted_at)}};
  if (a.probe) j["probe"] = true;
  return j;
}

Annotation annotation_from_object(const json& j) {
  Annotation a;
  a.annotator_id = string_field(j, "annotator_id");
  a.doc_id = string_field(j, "doc_id");
  a.label = label_field(j, "label");
  const json& round = field(j, "round");
  if (!round.is_number_integer() || (round.get<int>() != 1 && round.get<int>() != 2)) {
    throw DataError("round must be 1 or 2");
  }
  a.round = round.get<int>();
  a.submitted_at = parse_rfc3339(string_field(j, "submitted_at"));
  if (const auto it = j.find("probe"); it != j.end()) {
    if (!it->is_boolean()) throw DataError("probe must be a boolean");
    a.probe = it->get<bool>();
  }
  return a;
}

}  // namespace

Instant parse_rfc3339(std::string_view s) {
  const int year = parse_fixed(s, 0, 4);
  expect_char(s, 4, "-");
  const int month = parse_fixed(s, 5, 2);
  expect_char(s, 7, "-");
  const int day = parse_fixed(s, 8, 2);
  expect_char(s, 10, "Tt ");
  const int hour = parse_fixed(s, 11, 2);
  expect_char(s, 13, ":");
  const int minute = parse_fixed(s, 14, 2);
  expect_char(s, 16, ":");
  const int second = parse_fixed(s, 17, 2);
  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (pos - start < 3) millis = millis * 10 + (s[pos] - '0');
      ++pos;
    }
    if (pos == start) throw DataError("empty fractional seconds in timestamp");
    for (std::size_t k = pos - start; k < 3; ++k) millis *= 10;
  }
  int offset_minutes = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const int sign = s[pos] == '+' ? 1 : -1;
    const int oh = parse_fixed(s, pos + 1, 2);
    expect_char(s, pos + 3, ":");
    const int om = parse_fixed(s, pos + 4, 2);
    if (oh > 23 || om > 59) throw DataError("bad UTC offset in timestamp");
    offset_minutes = sign * (oh * 60 + om);
    pos += 6;
  } else {
    throw DataError("timestamp '" + std::string(s) + "' lacks a UTC offset");
  }
  if (pos != s.size()) throw DataError("trailing characters in timestamp");

  const chr::year_month_day ymd{chr::year(year), chr::month(month), chr::day(day)};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    throw DataError("timestamp '" + std::string(s) + "' out of range");
  }
  return Instant(chr::sys_days(ymd)) + chr::hours(hour) + chr::minutes(minute) +
         chr::seconds(second) + chr::milliseconds(millis) -
         chr::minutes(offset_minutes);
}

std::string format_rfc3339(Instant t) {
  const auto days = chr::floor<chr::days>(t);
  const chr::year_month_day ymd(days);
  const chr::hh_mm_ss<chr::milliseconds> hms(t - days);
  std::string out = pad(static_cast<int>(ymd.year()), 4) + "-" +
                    pad(static_cast<unsigned>(ymd.month()), 2) + "-" +
                    pad(static_cast<unsigned>(ymd.day()), 2) + "T" +
                    pad(hms.hours().count(), 2) + ":" +
                    pad(hms.minutes().count(), 2) + ":" +
                    pad(hms.seconds().count(), 2);
  if (hms.subseconds().count() != 0) out += "." + pad(hms.subseconds().count(), 3);
  return out + "Z";
}

std::string to_string(Source s) {
  return s == Source::Twitter ? "twitter" : "instagram";
}

Source parse_source(std::string_view name) {
  if (name == "twitter") return Source::Twitter;
  if (name == "instagram") return Source::Instagram;
  throw DataError("unknown source '" + std::string(name) + "'");
}

RawPost post_from_json(std::string_view line) {
  return post_from_object(parse_object(line));
}

std::string post_to_json(const RawPost& post) { return post_json(post).dump(); }

std::string annotation_to_json(const Annotation& a) { return annotation_json(a).dump(); }

Annotation annotation_from_json(std::string_view line) {
  return annotation_from_object(parse_object(line));
}

void SelectionConfig::validate() const {
  for (const auto& p : ad_marker_patterns) {
    if (p.empty()) throw DataError("advertisement marker patterns must be nonempty");
  }
}

bool SelectionConfig::accepts(const RawPost& post) const {
  if (post.comment_count < min_comment_count) return false;
  if (post.like_count < min_like_count) return false;
  if (!allowed_domains.empty() && !allowed_domains.count(post.domain_tag)) return false;
  if (author_allowlist && !author_allowlist->count(post.author_id)) return false;
  for (const auto& marker : ad_marker_patterns) {
    if (post.text.find(marker) != std::string::npos) return false;
  }
  return true;
}

Document make_document(const RawPost& post, const Normalizer& normalizer) {
  const NormalizationReport report = normalizer.normalize(post.text);
  Document doc;
  doc.doc_id = post.id;
  doc.raw_text = post.text;
  doc.tokens = report.tokens;
  doc.token_count = report.tokens.size();
  doc.emoji_count = report.emoji_count;
  doc.source_post = post.id;
  return doc;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::UnanimousR1:
      return "unanimous_r1";
    case Provenance::MajorityR1:
      return "majority_r1";
    case Provenance::MajorityR2:
      return "majority_r2";
  }
  return "unknown";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "unanimous_r1") return Provenance::UnanimousR1;
  if (name == "majority_r1") return Provenance::MajorityR1;
  if (name == "majority_r2") return Provenance::MajorityR2;
  throw DataError("unknown provenance '" + std::string(name) + "'");
}

CorpusStore::CorpusStore(std::filesystem::path log_path) {
  if (std::ifstream in{log_path}) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        apply(line, line_no);
      } catch (const DataError& e) {
        throw DataError("corrupt store " + log_path.string() + ": " + e.what());
      }
    }
  }
  log_ = std::fopen(log_path.c_str(), "ab");
  if (!log_) {
    throw IoError("cannot open store " + log_path.string() + ": " +
                  std::strerror(errno));
  }
}

CorpusStore::~CorpusStore() {
  if (log_) std::fclose(log_);
}

void CorpusStore::apply(const std::string& line, std::size_t line_no) {
  try {
    const json j = parse_object(line);
    const std::string kind = string_field(j, "kind");
    if (kind == "post") {
      if (!insert_post(post_from_object(field(j, "post")))) {
        throw DataError("duplicate post");
      }
    } else if (kind == "document") {
      Document d;
      d.doc_id = string_field(j, "doc_id");
      d.raw_text = string_field(j, "raw_text");
      d.tokens = field(j, "tokens").get<std::vector<std::string>>();
      d.token_count = d.tokens.size();
      d.emoji_count = field(j, "emoji_count").get<std::size_t>();
      d.source_post = string_field(j, "source_post");
      if (!documents_.emplace(d.doc_id, d).second) throw DataError("duplicate document");
    } else if (kind == "annotator") {
      annotators_.insert(string_field(j, "id"));
    } else if (kind == "annotation") {
      annotations_.push_back(annotation_from_object(field(j, "annotation")));
    } else if (kind == "gold") {
      GoldRecord g;
      g.doc_id = string_field(j, "doc_id");
      g.label = label_field(j, "label");
      g.round = field(j, "round").get<int>();
      g.provenance = parse_provenance(string_field(j, "provenance"));
      if (!gold_.emplace(g.doc_id, g).second) throw DataError("duplicate gold record");
    } else {
      throw DataError("unknown record kind '" + kind + "'");
    }
  } catch (const DataError& e) {
    throw DataError(e.what(), line_no);
  } catch (const json::exception& e) {
    throw DataError(e.what(), line_no);
  }
}

void CorpusStore::append(const std::string& line) {
  if (!log_) return;
  const std::string record = line + "\n";
  if (std::fwrite(record.data(), 1, record.size(), log_) != record.size() ||
      std::fflush(log_) != 0 || ::fsync(::fileno(log_)) != 0) {
    throw IoError(std::string("store write failed: ") + std::strerror(errno));
  }
}

bool CorpusStore::insert_post(const RawPost& post) {
  return posts_.emplace(post.id, post).second;
}

IngestResult CorpusStore::ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return ingest(in);
}

IngestResult CorpusStore::ingest(std::istream& in) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      add_post(post_from_json(line));
      ++result.accepted;
    } catch (const DataError& e) {
      result.diagnostics.push_back({line_no, e.what()});
    }
  }
  return result;
}

void CorpusStore::add_post(const RawPost& post) {
  if (post.id.empty()) throw DataError("empty post id");
  if (post.text.empty()) throw DataError("empty post text");
  if (!utf8::is_valid(post.text)) throw DataError("post text is not valid UTF-8");
  std::unique_lock lock(mutex_);
  if (posts_.count(post.id)) throw DataError("duplicate post id '" + post.id + "'");
  append(json{{"kind", "post"}, {"post", post_json(post)}}.dump());
  insert_post(post);
}

std::vector<RawPost> CorpusStore::select(const SelectionConfig& config) const {
  config.validate();
  std::shared_lock lock(mutex_);
  std::vector<RawPost> out;
  for (const auto& [id, post] : posts_) {
    if (config.accepts(post)) out.push_back(post);
  }
  return out;
}

std::vector<RawPost> CorpusStore::posts() const {
  std::shared_lock lock(mutex_);
  std::vector<RawPost> out;
  for (const auto& [id, post] : posts_) out.push_back(post);
  return out;
}

std::optional<RawPost> CorpusStore::find_post(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = posts_.find(id);
  if (it == posts_.end()) return std::nullopt;
  return it->second;
}

bool CorpusStore::add_document(const Document& doc) {
  if (doc.doc_id.empty()) throw DataError("empty document id");
  if (doc.token_count != doc.tokens.size()) {
    throw DataError("document '" + doc.doc_id + "' token_count mismatch");
  }
  std::unique_lock lock(mutex_);
  if (documents_.count(doc.doc_id)) return false;
  append(json{{"kind", "document"},
              {"doc_id", doc.doc_id},
              {"raw_text", doc.raw_text},
              {"tokens", doc.tokens},
              {"emoji_count", doc.emoji_count},
              {"source_post", doc.source_post}}
             .dump());
  documents_.emplace(doc.doc_id, doc);
  return true;
}

std::vector<Document> CorpusStore::documents() const {
  std::shared_lock lock(mutex_);
  std::vector<Document> out;
  for (const auto& [id, doc] : documents_) out.push_back(doc);
  return out;
}

std::optional<Document> CorpusStore::find_document(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = documents_.find(id);
  if (it == documents_.end()) return std::nullopt;
  return it->second;
}

bool CorpusStore::add_annotator(const std::string& id) {
  if (id.empty()) throw DataError("empty annotator id");
  std::unique_lock lock(mutex_);
  if (annotators_.count(id)) return false;
  append(json{{"kind", "annotator"}, {"id", id}}.dump());
  annotators_.insert(id);
  return true;
}

std::set<std::string> CorpusStore::annotators() const {
  std::shared_lock lock(mutex_);
  return annotators_;
}

void CorpusStore::add_annotation(const Annotation& a) {
  std::unique_lock lock(mutex_);
  append(json{{"kind", "annotation"}, {"annotation", annotation_json(a)}}.dump());
  annotations_.push_back(a);
}

std::vector<Annotation> CorpusStore::annotations() const {
  std::shared_lock lock(mutex_);
  return annotations_;
}

void CorpusStore::add_gold(const GoldRecord& g) {
  std::unique_lock lock(mutex_);
  if (gold_.count(g.doc_id)) {
    throw DataError("document '" + g.doc_id + "' already has a gold label");
  }
  append(json{{"kind", "gold"},
              {"doc_id", g.doc_id},
              {"label", to_int(g.label)},
              {"round", g.round},
              {"provenance", to_string(g.provenance)}}
             .dump());
  gold_.emplace(g.doc_id, g);
}

std::vector<GoldRecord> CorpusStore::gold() const {
  std::shared_lock lock(mutex_);
  std::vector<GoldRecord> out;
  for (const auto& [id, g] : gold_) out.push_back(g);
  return out;
}

std::size_t CorpusStore::post_count() const {
  std::shared_lock lock(mutex_);
  return posts_.size();
}

std::size_t CorpusStore::document_count() const {
  std::shared_lock lock(mutex_);
  return documents_.size();
}

std::string CorpusStats::to_json() const {
  json classes = json::object();
  for (const auto& [label, n] : class_counts) classes[std::to_string(label)] = n;
  json lengths = json::object();
  for (const auto& [len, n] : length_histogram) lengths[std::to_string(len)] = n;
  json emoji = json::object();
  for (const auto& [count, n] : emoji_histogram) emoji[std::to_string(count)] = n;
  json means = json::object();
  for (const auto& [label, m] : mean_length_by_label) means[std::to_string(label)] = m;
  return json{{"class_counts", classes},
              {"length_histogram", lengths},
              {"emoji_histogram", emoji},
              {"mean_length_by_label", means},
              {"labeled_documents", labeled_documents},
              {"skipped_unlabeled", skipped_unlabeled}}
      .dump();
}

CorpusStats compute_stats(std::span<const Document> docs,
                          std::span<const GoldRecord> gold) {
  std::map<std::string_view, Polarity> labels;
  for (const auto& g : gold) labels[g.doc_id] = g.label;

  CorpusStats stats;
  for (int label = -1; label <= 1; ++label) stats.class_counts[label] = 0;
  std::map<int, std::size_t> length_sums;
  for (const auto& doc : docs) {
    const auto it = labels.find(doc.doc_id);
    if (it == labels.end()) {
      ++stats.skipped_unlabeled;
      continue;
    }
    const int label = to_int(it->second);
    ++stats.labeled_documents;
    ++stats.class_counts[label];
    ++stats.length_histogram[doc.token_count];
    ++stats.emoji_histogram[doc.emoji_count];
    length_sums[label] += doc.token_count;
  }
  for (const auto& [label, sum] : length_sums) {
    stats.mean_length_by_label[label] =
        static_cast<double>(sum) / static_cast<double>(stats.class_counts[label]);
  }
  return stats;
}

std::vector<LabeledText> labeled_corpus(const CorpusStore& store) {
  std::vector<LabeledText> out;
  for (const auto& g : store.gold()) {
    const auto doc = store.find_document(g.doc_id);
    if (!doc) throw DataError("gold record for missing document '" + g.doc_id + "'");
    out.push_back({g.doc_id, g.label, doc->raw_text});
  }
  return out;
}

std::string tsv_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\\':
        out += "\\\\";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string tsv_unescape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out.push_back(text[i]);
      continue;
    }
    if (++i == text.size()) throw DataError("dangling backslash");
    switch (text[i]) {
      case 't':
        out.push_back('\t');
        break;
      case 'n':
        out.push_back('\n');
        break;
      case 'r':
        out.push_back('\r');
        break;
      case '\\':
        out.push_back('\\');
        break;
      default:
        throw DataError(std::string("unknown escape \\") + text[i]);
    }
  }
  return out;
}

void write_tsv(std::span<const LabeledText> records, std::ostream& out) {
  for (const auto& r : records) {
    out << tsv_escape(r.doc_id) << '\t' << to_int(r.label) << '\t'
        << tsv_escape(r.raw_text) << '\n';
  }
}

std::size_t export_tsv(std::span<const LabeledText> records,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_tsv(records, out);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
  return records.size();
}

std::vector<LabeledText> parse_labeled_tsv(std::istream& in) {
  std::vector<LabeledText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos) throw DataError("expected 3 tab-separated fields", line_no);
    try {
      LabeledText r;
      r.doc_id = tsv_unescape(std::string_view(line).substr(0, a));
      const std::string label = line.substr(a + 1, b - a - 1);
      std::optional<Polarity> p;
      if (label == "-1") p = Polarity::Negative;
      else if (label == "0") p = Polarity::Neutral;
      else if (label == "1" || label == "+1") p = Polarity::Positive;
      if (!p) throw DataError("label '" + label + "' is not -1, 0 or 1");
      r.label = *p;
      r.raw_text = tsv_unescape(std::string_view(line).substr(b + 1));
      out.push_back(std::move(r));
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
  }
  return out;
}

std::vector<LabeledText> read_labeled_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return parse_labeled_tsv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace colloq
