#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace colloq {

// Emoji code-point sequence -> name token. Variation selectors (U+FE0E,
// U+FE0F) are not significant and are stripped from keys. Names must match
// [a-z0-9_]+ and, so that they survive re-normalization unchanged, contain
// no digit and no run of three identical characters.
class EmojiInventory {
 public:
  void add(std::string_view sequence, const std::string& name);

  // TSV: emoji sequence (literal UTF-8) <TAB> name. Blank lines ignored.
  static EmojiInventory parse(std::istream& in);
  static EmojiInventory load(const std::filesystem::path& path);
  // The inventory shipped in the data directory.
  static EmojiInventory load_default();

  struct Match {
    std::size_t length;  // code points consumed
    const std::string* name;
  };
  // Longest entry that is a prefix of `text`.
  std::optional<Match> match(std::u32string_view text) const;
  bool is_name(std::string_view token) const { return names_.count(std::string(token)) > 0; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::u32string, std::string> entries_;
  std::set<std::string, std::less<>> names_;
  std::size_t max_length_ = 0;
};

enum class SpanKind {
  Url,
  Mention,
  Hashtag,
  Number,
  DateTime,
  Punctuation,
  UnknownEmoji
};

std::string to_string(SpanKind kind);

struct RemovedSpan {
  SpanKind kind;
  std::string text;

  friend bool operator==(const RemovedSpan&, const RemovedSpan&) = default;
};

struct NormalizationReport {
  std::vector<std::string> tokens;
  // Number of output tokens that are inventory names.
  std::size_t emoji_count = 0;
  std::vector<RemovedSpan> removed_spans;

  friend bool operator==(const NormalizationReport&,
                         const NormalizationReport&) = default;
};

struct NormalizerOptions {
  // Runs of at least this many identical characters collapse to one.
  std::size_t elongation_threshold = 3;
};

// Fixed pipeline:
//   1. NFC
//   2. character map: Arabic yeh/kaf to Persian forms, all decimal digits to
//      ASCII, tatweel and Arabic diacritics dropped, ZWNJ runs unified
//   3. emoji (including unseparated runs) split out and replaced by names;
//      unknown emoji removed
//   4. URLs, @mentions, '#' markers, date-times and numbers removed
//   5. remaining punctuation and symbols removed
//   6. de-elongation
//   7. whitespace tokenization
class Normalizer {
 public:
  explicit Normalizer(EmojiInventory inventory, NormalizerOptions options = {});

  NormalizationReport normalize(std::string_view text) const;

  // Whether normalizing the space-joined tokens reproduces the tokens.
  bool is_idempotent(std::string_view text) const;

  const EmojiInventory& inventory() const { return inventory_; }

 private:
  EmojiInventory inventory_;
  NormalizerOptions options_;
};

NormalizationReport normalize(std::string_view text,
                              const EmojiInventory& inventory);
bool is_idempotent_check(std::string_view text, const EmojiInventory& inventory);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace colloq
