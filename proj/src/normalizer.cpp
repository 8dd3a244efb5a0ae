#include "colloq/normalizer.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <fstream>
#include <istream>

#include "colloq/common.hpp"
#include "colloq/utf8.hpp"

namespace colloq {
namespace {

constexpr char32_t kZwnj = 0x200C;
constexpr char32_t kZwj = 0x200D;
constexpr char32_t kKeycap = 0x20E3;

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

bool is_pictographic(char32_t c) {
  return u_hasBinaryProperty(static_cast<UChar32>(c), UCHAR_EXTENDED_PICTOGRAPHIC);
}
bool is_regional_indicator(char32_t c) { return c >= 0x1F1E6 && c <= 0x1F1FF; }
bool is_variation_selector(char32_t c) { return c >= 0xFE00 && c <= 0xFE0F; }
bool is_skin_tone(char32_t c) { return c >= 0x1F3FB && c <= 0x1F3FF; }
bool is_tag(char32_t c) { return c >= 0xE0020 && c <= 0xE007F; }
bool is_keycap_base(char32_t c) {
  return (c >= U'0' && c <= U'9') || c == U'#' || c == U'*';
}
bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_letter(char32_t c) {
  return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_L_MASK) != 0;
}
bool is_mark(char32_t c) {
  return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_M_MASK) != 0;
}

std::u32string nfc(std::u32string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  const std::string bytes = utf8::encode(text);
  const icu::UnicodeString source = icu::UnicodeString::fromUTF8(bytes);
  if (normalizer->isNormalized(source, status) && U_SUCCESS(status)) {
    return std::u32string(text);
  }
  status = U_ZERO_ERROR;
  const icu::UnicodeString result = normalizer->normalize(source, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  std::string out;
  result.toUTF8String(out);
  return utf8::decode(out);
}

bool is_arabic_presentation_form(char32_t c) {
  return (c >= 0xFB50 && c <= 0xFDFF) || (c >= 0xFE70 && c <= 0xFEFE);
}

// Compatibility decomposition of one presentation-form character into its
// nominal letters (e.g. U+FEDF U+FEFC -> lam, lam-alef -> lam, lam, alef).
std::u32string fold_presentation_form(char32_t c) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFKC normalizer unavailable");
  const icu::UnicodeString folded =
      nfkc->normalize(icu::UnicodeString(static_cast<UChar32>(c)), status);
  if (U_FAILURE(status)) return std::u32string(1, c);
  std::string out;
  folded.toUTF8String(out);
  return utf8::decode(out);
}

// Step 2. Character map version 1.
std::u32string map_characters(std::u32string_view input) {
  std::u32string text;
  text.reserve(input.size());
  for (char32_t c : input) {
    if (is_arabic_presentation_form(c)) {
      text += fold_presentation_form(c);
    } else {
      text.push_back(c);
    }
  }
  std::u32string mapped;
  mapped.reserve(text.size());
  for (char32_t c : text) {
    switch (c) {
      case 0x064A:  // ARABIC LETTER YEH
      case 0x0649:  // ARABIC LETTER ALEF MAKSURA
        mapped.push_back(0x06CC);
        continue;
      case 0x0643:  // ARABIC LETTER KAF
        mapped.push_back(0x06A9);
        continue;
      case 0x0640:  // TATWEEL
        continue;
      default:
        break;
    }
    if ((c >= 0x064B && c <= 0x065F) || c == 0x0670) continue;  // diacritics
    if (u_isdigit(static_cast<UChar32>(c))) {
      mapped.push_back(U'0' + static_cast<char32_t>(
                                  u_charDigitValue(static_cast<UChar32>(c))));
      continue;
    }
    mapped.push_back(c);
  }
  // ZWNJ: one at a time, never next to whitespace or at either end.
  std::u32string out;
  out.reserve(mapped.size());
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    const char32_t c = mapped[i];
    if (c == kZwnj) {
      const bool after_boundary =
          out.empty() || out.back() == kZwnj || is_space(out.back());
      const bool before_boundary =
          i + 1 == mapped.size() || is_space(mapped[i + 1]);
      if (after_boundary || before_boundary) continue;
    }
    out.push_back(c);
  }
  return nfc(out);
}

struct Segment {
  bool emoji = false;
  std::u32string text;
  std::string name;
};

void add_span(std::vector<RemovedSpan>& spans, SpanKind kind,
              std::u32string_view text) {
  spans.push_back({kind, utf8::encode(text)});
}

std::size_t emoji_cluster_end(std::u32string_view s, std::size_t i) {
  const std::size_t n = s.size();
  std::size_t j = i;
  const char32_t c = s[i];
  if (is_regional_indicator(c)) {
    ++j;
    if (j < n && is_regional_indicator(s[j])) ++j;
  } else {
    ++j;
  }
  while (j < n) {
    const char32_t d = s[j];
    if (is_variation_selector(d) || is_skin_tone(d) || d == kKeycap ||
        is_tag(d)) {
      ++j;
    } else if (d == kZwj && j + 1 < n && is_pictographic(s[j + 1])) {
      j += 2;
    } else {
      break;
    }
  }
  return j;
}

bool starts_emoji(std::u32string_view s, std::size_t i) {
  const char32_t c = s[i];
  if (is_pictographic(c) || is_regional_indicator(c)) return true;
  if (!is_keycap_base(c)) return false;
  std::size_t j = i + 1;
  if (j < s.size() && is_variation_selector(s[j])) ++j;
  return j < s.size() && s[j] == kKeycap;
}

// Step 3.
std::vector<Segment> split_emoji(std::u32string_view text,
                                 const EmojiInventory& inventory,
                                 std::vector<RemovedSpan>& spans) {
  std::vector<Segment> segments;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) segments.push_back({false, std::move(current), {}});
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (!starts_emoji(text, i)) {
      current.push_back(text[i++]);
      continue;
    }
    flush();
    const std::size_t end = emoji_cluster_end(text, i);
    std::u32string key;
    for (std::size_t k = i; k < end; ++k) {
      if (!is_variation_selector(text[k])) key.push_back(text[k]);
    }
    std::size_t p = 0;
    while (p < key.size()) {
      if (const auto m = inventory.match(std::u32string_view(key).substr(p))) {
        segments.push_back({true, {}, *m->name});
        p += m->length;
        continue;
      }
      const char32_t c = key[p];
      const bool component = c == kZwj || c == kKeycap || is_skin_tone(c) ||
                             is_tag(c);
      if (!component) add_span(spans, SpanKind::UnknownEmoji, key.substr(p, 1));
      ++p;
    }
    i = end;
  }
  flush();
  return segments;
}

bool starts_with_ci(std::u32string_view s, std::size_t i, std::u32string_view prefix) {
  if (s.size() - i < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    char32_t c = s[i + k];
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    if (c != prefix[k]) return false;
  }
  return true;
}

std::size_t digit_run(std::u32string_view s, std::size_t i) {
  std::size_t j = i;
  while (j < s.size() && is_ascii_digit(s[j])) ++j;
  return j - i;
}

bool is_date_separator(char32_t c) { return c == U'-' || c == U'/' || c == U'.'; }

// hh:mm or hh:mm:ss at i; returns matched length or 0.
std::size_t match_clock(std::u32string_view s, std::size_t i) {
  const std::size_t h = digit_run(s, i);
  if (h < 1 || h > 2) return 0;
  std::size_t p = i + h;
  if (p >= s.size() || s[p] != U':' || digit_run(s, p + 1) != 2) return 0;
  p += 3;
  if (p < s.size() && s[p] == U':' && digit_run(s, p + 1) == 2) p += 3;
  return p - i;
}

// Three digit groups joined by date separators, with the given group length
// bounds; returns matched length or 0.
std::size_t match_date(std::u32string_view s, std::size_t i, std::size_t a_min,
                       std::size_t a_max, std::size_t c_min, std::size_t c_max) {
  const std::size_t a = digit_run(s, i);
  if (a < a_min || a > a_max) return 0;
  std::size_t p = i + a;
  if (p >= s.size() || !is_date_separator(s[p])) return 0;
  const std::size_t b = digit_run(s, p + 1);
  if (b < 1 || b > 2) return 0;
  p += 1 + b;
  if (p >= s.size() || !is_date_separator(s[p])) return 0;
  const std::size_t c = digit_run(s, p + 1);
  if (c < c_min || c > c_max) return 0;
  return p + 1 + c - i;
}

std::size_t match_datetime(std::u32string_view s, std::size_t i) {
  if (std::size_t n = match_date(s, i, 4, 4, 1, 2)) {
    const std::size_t p = i + n;
    if (p < s.size() && (s[p] == U'T' || s[p] == U't')) {
      if (const std::size_t t = match_clock(s, p + 1)) return n + 1 + t;
    }
    return n;
  }
  if (std::size_t n = match_date(s, i, 1, 2, 2, 4)) return n;
  return match_clock(s, i);
}

std::size_t match_number(std::u32string_view s, std::size_t i) {
  std::size_t p = i + digit_run(s, i);
  while (p + 1 < s.size() &&
         (s[p] == U'.' || s[p] == U',' || s[p] == 0x066B || s[p] == 0x066C ||
          s[p] == U'/') &&
         is_ascii_digit(s[p + 1])) {
    p += 1 + digit_run(s, p + 1);
  }
  return p - i;
}

bool is_handle_char(char32_t c) {
  return u_isalnum(static_cast<UChar32>(c)) || c == U'_' || c == U'.';
}

// Step 4.
std::u32string strip_social_tokens(std::u32string_view s,
                                   std::vector<RemovedSpan>& spans) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const char32_t c = s[i];
    if (starts_with_ci(s, i, U"http://") || starts_with_ci(s, i, U"https://") ||
        starts_with_ci(s, i, U"www.")) {
      std::size_t j = i;
      while (j < s.size() && !is_space(s[j])) ++j;
      add_span(spans, SpanKind::Url, s.substr(i, j - i));
      out.push_back(U' ');
      i = j;
    } else if (c == U'@') {
      std::size_t j = i + 1;
      while (j < s.size() && is_handle_char(s[j])) ++j;
      while (j > i + 1 && s[j - 1] == U'.') --j;
      add_span(spans, SpanKind::Mention, s.substr(i, j - i));
      out.push_back(U' ');
      i = j;
    } else if (c == U'#') {
      add_span(spans, SpanKind::Hashtag, s.substr(i, 1));
      out.push_back(U' ');
      ++i;
    } else if (is_ascii_digit(c)) {
      std::size_t n = match_datetime(s, i);
      SpanKind kind = SpanKind::DateTime;
      if (n == 0) {
        n = match_number(s, i);
        kind = SpanKind::Number;
      }
      add_span(spans, kind, s.substr(i, n));
      out.push_back(U' ');
      i += n;
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

bool keep_character(char32_t c) {
  if (c == U'_' || c == kZwnj) return true;
  if (is_variation_selector(c) || c == kKeycap) return false;
  return is_letter(c) || is_mark(c);
}

// Step 5.
std::u32string strip_symbols(std::u32string_view s,
                             std::vector<RemovedSpan>& spans) {
  std::u32string out;
  out.reserve(s.size());
  std::u32string run;
  auto flush = [&] {
    if (!run.empty()) {
      add_span(spans, SpanKind::Punctuation, run);
      run.clear();
    }
  };
  for (char32_t c : s) {
    if (is_space(c)) {
      flush();
      out.push_back(U' ');
    } else if (keep_character(c)) {
      flush();
      out.push_back(c);
    } else {
      if (run.empty()) out.push_back(U' ');
      run.push_back(c);
    }
  }
  flush();
  return out;
}

// Step 6.
std::u32string collapse_elongations(std::u32string_view s, std::size_t threshold) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const std::size_t run = j - i;
    out.append(run >= threshold ? 1 : run, s[i]);
    i = j;
  }
  return out;
}

void validate_name(const std::string& name) {
  if (name.empty()) throw DataError("empty emoji name");
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) throw DataError("emoji name '" + name + "' is not [a-z0-9_]+");
    if (c >= '0' && c <= '9') {
      throw DataError("emoji name '" + name +
                      "' contains a digit, which normalization would remove");
    }
    if (i >= 2 && name[i - 1] == c && name[i - 2] == c) {
      throw DataError("emoji name '" + name +
                      "' contains a run that de-elongation would collapse");
    }
  }
}

}  // namespace

void EmojiInventory::add(std::string_view sequence, const std::string& name) {
  validate_name(name);
  std::u32string key;
  for (char32_t c : utf8::decode(sequence)) {
    if (!is_variation_selector(c)) key.push_back(c);
  }
  if (key.empty()) throw DataError("empty emoji sequence for '" + name + "'");
  const char32_t first = key.front();
  const bool keycap = key.size() >= 2 && is_keycap_base(first) && key[1] == kKeycap;
  if (!is_pictographic(first) && !is_regional_indicator(first) && !keycap) {
    throw DataError("'" + std::string(sequence) + "' is not an emoji sequence");
  }
  const auto [it, inserted] = entries_.emplace(key, name);
  if (!inserted && it->second != name) {
    throw DataError("emoji '" + std::string(sequence) + "' mapped to both '" +
                    it->second + "' and '" + name + "'");
  }
  names_.insert(name);
  max_length_ = std::max(max_length_, key.size());
}

EmojiInventory EmojiInventory::parse(std::istream& in) {
  EmojiInventory inv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("emoji inventory line has no tab", line_no);
    }
    try {
      inv.add(std::string_view(line).substr(0, tab), line.substr(tab + 1));
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
  }
  return inv;
}

EmojiInventory EmojiInventory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read emoji inventory " + path.string());
  try {
    return parse(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

EmojiInventory EmojiInventory::load_default() {
  return load(data_dir() / "emoji_inventory.tsv");
}

std::optional<EmojiInventory::Match> EmojiInventory::match(
    std::u32string_view text) const {
  for (std::size_t len = std::min(max_length_, text.size()); len > 0; --len) {
    const auto it = entries_.find(std::u32string(text.substr(0, len)));
    if (it != entries_.end()) return Match{len, &it->second};
  }
  return std::nullopt;
}

std::string to_string(SpanKind kind) {
  switch (kind) {
    case SpanKind::Url:
      return "url";
    case SpanKind::Mention:
      return "mention";
    case SpanKind::Hashtag:
      return "hashtag";
    case SpanKind::Number:
      return "number";
    case SpanKind::DateTime:
      return "datetime";
    case SpanKind::Punctuation:
      return "punctuation";
    case SpanKind::UnknownEmoji:
      return "unknown_emoji";
  }
  return "unknown";
}

Normalizer::Normalizer(EmojiInventory inventory, NormalizerOptions options)
    : inventory_(std::move(inventory)), options_(options) {
  if (options_.elongation_threshold < 2) {
    throw DataError("elongation threshold must be at least 2");
  }
}

NormalizationReport Normalizer::normalize(std::string_view text) const {
  NormalizationReport report;
  const std::u32string mapped = map_characters(nfc(utf8::decode(text)));
  const auto segments = split_emoji(mapped, inventory_, report.removed_spans);

  for (const Segment& segment : segments) {
    if (segment.emoji) {
      report.tokens.push_back(segment.name);
      continue;
    }
    std::u32string s = strip_social_tokens(segment.text, report.removed_spans);
    s = strip_symbols(s, report.removed_spans);
    s = collapse_elongations(s, options_.elongation_threshold);

    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && s[i] == U' ') ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != U' ') ++j;
      std::size_t a = i, b = j;
      while (a < b && s[a] == kZwnj) ++a;
      while (b > a && s[b - 1] == kZwnj) --b;
      if (a < b) {
        const std::u32string_view token(s.data() + a, b - a);
        bool has_letter = false;
        for (char32_t c : token) has_letter = has_letter || is_letter(c);
        if (has_letter) {
          report.tokens.push_back(utf8::encode(token));
        } else {
          add_span(report.removed_spans, SpanKind::Punctuation, token);
        }
      }
      i = j;
    }
  }
  for (const auto& token : report.tokens) {
    if (inventory_.is_name(token)) ++report.emoji_count;
  }
  return report;
}

bool Normalizer::is_idempotent(std::string_view text) const {
  const auto first = normalize(text);
  const auto second = normalize(join_tokens(first.tokens));
  return first.tokens == second.tokens;
}

NormalizationReport normalize(std::string_view text,
                              const EmojiInventory& inventory) {
  return Normalizer(inventory).normalize(text);
}

bool is_idempotent_check(std::string_view text, const EmojiInventory& inventory) {
  return Normalizer(inventory).is_idempotent(text);
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace colloq
