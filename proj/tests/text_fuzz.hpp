#pragma once

#include <string>
#include <vector>

#include "colloq/rng.hpp"

namespace testing {

// Random text assembled from fragments that exercise every normalizer rule:
// letters in both Arabic and Persian forms, digits from three scripts,
// emoji sequences (modifiers, ZWJ, flags, keycaps, unknown pictographs),
// social tokens, punctuation, odd whitespace and combining marks.
inline std::string fuzz_text(colloq::Rng& rng, std::size_t max_pieces = 12) {
  static const std::vector<std::string> pieces{
      "سلام", "خوب", "ي", "ك", "ی", "ک", "ـ", "ً", "ٰ", "‌", "‌‌",
      "‍", "ﻻ", "ﺑ", "۱۲", "١٢", "34", "3.5", "۱۴۰۰/۰۲/۰۳", "2020-05-01T10:20", "12:30",
      "😊", "😊😊", "🌹", "❤️", "👍🏽", "👨‍👩‍👧", "🇮🇷", "1️⃣", "#️⃣", "\U0001FAFF", "️",
      "http://t.co/x", "www.example.com", "@user_1", "#تست", "#", "@", "!", "؟", "،", "...",
      "«", "»", "(", ")", "-", "_", " ", "  ", "\t", "\n", " ", "é", "Ab", "abc",
      "aaa", "ییی", "ههههه", "aa", "x1y", "٫", "%", "$", "😊a", "a😊"};
  std::string out;
  const std::size_t n = rng.below(max_pieces + 1);
  for (std::size_t i = 0; i < n; ++i) {
    out += pieces[rng.below(pieces.size())];
    if (rng.bernoulli(0.4)) out += ' ';
  }
  return out;
}

}  // namespace testing
