#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace colloq {

// Base for every error raised by the library. The CLI maps these to exit
// code 2 (data errors).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input data; `line` is 1-based, 0 when not tied to a line.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Polarity : std::int8_t { Negative = -1, Neutral = 0, Positive = 1 };

inline constexpr int kNumClasses = 3;

inline int to_int(Polarity p) { return static_cast<int>(p); }

inline std::optional<Polarity> polarity_from_int(long long v) {
  if (v < -1 || v > 1) return std::nullopt;
  return static_cast<Polarity>(v);
}

// Global class-index mapping: 0 -> -1, 1 -> 0, 2 -> +1.
inline int class_index(Polarity p) { return to_int(p) + 1; }

inline Polarity polarity_from_class(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw Error("class index out of range: " + std::to_string(index));
  }
  return static_cast<Polarity>(index - 1);
}

// Shortest decimal form that reads back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Directory holding the shipped data files (emoji inventory, guidelines,
// API schema). COLLOQ_DATA_DIR in the environment overrides the build-time
// location.
inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("COLLOQ_DATA_DIR"); env && *env) return env;
#ifdef COLLOQ_DATA_DIR
  return COLLOQ_DATA_DIR;
#else
  return "data";
#endif
}

}  // namespace colloq
