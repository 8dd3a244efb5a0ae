#pragma once

#include <string>
#include <string_view>

namespace colloq::utf8 {

// Invalid sequences decode to U+FFFD.
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view code_points);
void append(std::string& out, char32_t cp);
bool is_valid(std::string_view bytes);

}  // namespace colloq::utf8
