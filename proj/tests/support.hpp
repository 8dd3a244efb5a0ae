#pragma once

// Shared helpers for the unit and acceptance binaries: scratch directories,
// fixture paths, and reference implementations written independently of the
// library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "colloq/rng.hpp"
#include "colloq/tensor.hpp"
#include "json.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "colloq-test-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline fs::path fixture(const std::string& name) {
  return fs::path(COLLOQ_TEST_DIR) / "fixtures" / name;
}

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

namespace oracle {

// Fleiss' kappa from raw per-rater category labels rather than counts:
// agreement is the share of ordered rater pairs that agree.
inline double fleiss_from_ratings(const std::vector<std::vector<int>>& ratings,
                                  int categories) {
  const double N = static_cast<double>(ratings.size());
  const double n = static_cast<double>(ratings.front().size());
  double p_bar = 0.0;
  std::vector<double> share(categories, 0.0);
  for (const auto& item : ratings) {
    double agreeing = 0.0;
    for (std::size_t a = 0; a < item.size(); ++a) {
      share[item[a]] += 1.0;
      for (std::size_t b = 0; b < item.size(); ++b) {
        if (a != b && item[a] == item[b]) agreeing += 1.0;
      }
    }
    p_bar += agreeing / (n * (n - 1.0));
  }
  p_bar /= N;
  double p_e = 0.0;
  for (double s : share) p_e += (s / (N * n)) * (s / (N * n));
  return (p_bar - p_e) / (1.0 - p_e);
}

// Code points of a UTF-8 string, decoded by hand (input assumed valid).
inline std::vector<std::string> code_points(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    const std::size_t len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// Set of character n-grams of "<token>" with lengths in [lo, hi].
inline std::set<std::string> ngram_set(const std::string& token, std::size_t lo,
                                       std::size_t hi) {
  std::vector<std::string> cps = code_points(token);
  cps.insert(cps.begin(), "<");
  cps.push_back(">");
  std::set<std::string> out;
  for (std::size_t start = 0; start < cps.size(); ++start) {
    std::string gram;
    for (std::size_t len = 1; start + len <= cps.size() && len <= hi; ++len) {
      gram += cps[start + len - 1];
      if (len >= lo) out.insert(gram);
    }
  }
  return out;
}

inline colloq::Tensor2 conv1d(const colloq::Tensor2& x,
                              const std::vector<colloq::Tensor2>& filters,
                              const std::vector<double>& bias) {
  const std::size_t f = filters.front().rows();
  colloq::Tensor2 out(x.rows() - f + 1, filters.size());
  for (std::size_t t = 0; t + f <= x.rows(); ++t) {
    for (std::size_t k = 0; k < filters.size(); ++k) {
      double acc = bias[k];
      for (std::size_t i = 0; i < f; ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) acc += x(t + i, j) * filters[k](i, j);
      }
      out(t, k) = acc;
    }
  }
  return out;
}

struct ClassScores {
  double precision, recall, f1;
};

// Per-class scores from paired label lists.
inline std::vector<ClassScores> per_class(const std::vector<int>& gold,
                                          const std::vector<int>& predicted,
                                          int classes) {
  std::vector<ClassScores> out;
  for (int c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (predicted[i] == c && gold[i] == c) tp += 1;
      if (predicted[i] == c && gold[i] != c) fp += 1;
      if (predicted[i] != c && gold[i] == c) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out.push_back({p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0});
  }
  return out;
}

}  // namespace oracle

// Checks a JSON value against the subset of JSON Schema used by the API
// schema file: type (string or list), required, properties,
// additionalProperties (bool or schema), items, enum, minimum, maximum and
// local $ref. Returns a list of violations.
class SchemaChecker {
 public:
  explicit SchemaChecker(nlohmann::json root) : root_(std::move(root)) {}

  std::vector<std::string> check(const nlohmann::json& value,
                                 const std::string& definition) const {
    std::vector<std::string> errors;
    visit(value, root_.at("definitions").at(definition), "$", errors);
    return errors;
  }

 private:
  static bool has_type(const nlohmann::json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    return false;
  }

  void visit(const nlohmann::json& v, const nlohmann::json& schema,
             const std::string& where, std::vector<std::string>& errors) const {
    if (schema.contains("$ref")) {
      const std::string ref = schema["$ref"];
      const std::string prefix = "#/definitions/";
      visit(v, root_.at("definitions").at(ref.substr(prefix.size())), where, errors);
      return;
    }
    if (schema.contains("type")) {
      bool ok = false;
      if (schema["type"].is_array()) {
        for (const auto& t : schema["type"]) ok = ok || has_type(v, t);
      } else {
        ok = has_type(v, schema["type"]);
      }
      if (!ok) {
        errors.push_back(where + ": expected type " + schema["type"].dump());
        return;
      }
    }
    if (schema.contains("enum")) {
      const auto& options = schema["enum"];
      if (std::find(options.begin(), options.end(), v) == options.end()) {
        errors.push_back(where + ": value " + v.dump() + " not in enum");
      }
    }
    if (v.is_number()) {
      if (schema.contains("minimum") && v.get<double>() < schema["minimum"].get<double>()) {
        errors.push_back(where + ": below minimum");
      }
      if (schema.contains("maximum") && v.get<double>() > schema["maximum"].get<double>()) {
        errors.push_back(where + ": above maximum");
      }
    }
    if (v.is_object()) {
      if (schema.contains("required")) {
        for (const auto& key : schema["required"]) {
          if (!v.contains(key.get<std::string>())) {
            errors.push_back(where + ": missing " + key.get<std::string>());
          }
        }
      }
      const auto props = schema.value("properties", nlohmann::json::object());
      for (const auto& [key, child] : v.items()) {
        if (props.contains(key)) {
          visit(child, props[key], where + "." + key, errors);
        } else if (schema.contains("additionalProperties")) {
          const auto& extra = schema["additionalProperties"];
          if (extra.is_boolean()) {
            if (!extra.get<bool>()) errors.push_back(where + ": unexpected key " + key);
          } else {
            visit(child, extra, where + "." + key, errors);
          }
        }
      }
    }
    if (v.is_array() && schema.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        visit(v[i], schema["items"], where + "[" + std::to_string(i) + "]", errors);
      }
    }
  }

  nlohmann::json root_;
};

}  // namespace testing
