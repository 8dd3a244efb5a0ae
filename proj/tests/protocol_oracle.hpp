#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "colloq/annotation_engine.hpp"

namespace testing {

struct ExpectedOutcome {
  colloq::Adjudication::Outcome outcome;
  std::optional<int> label;
  std::optional<colloq::Provenance> provenance;
};

// Decision written from the protocol description: count votes, compare the
// top count against the panel size.
inline ExpectedOutcome expected_outcome(const std::vector<int>& round1,
                                        const std::vector<int>& round2) {
  using Outcome = colloq::Adjudication::Outcome;
  auto top = [](const std::vector<int>& labels) {
    std::array<int, 3> votes{};
    for (int l : labels) ++votes[l + 1];
    int best = 0;
    for (int c = 1; c < 3; ++c) {
      if (votes[c] > votes[best]) best = c;
    }
    return std::pair{best - 1, votes[best]};
  };
  const int n = static_cast<int>(round1.size());
  const auto [l1, c1] = top(round1);
  if (c1 == n) return {Outcome::Gold, l1, colloq::Provenance::UnanimousR1};
  if (2 * c1 > n) return {Outcome::Gold, l1, colloq::Provenance::MajorityR1};
  if (round2.empty()) return {Outcome::NeedsRound2, std::nullopt, std::nullopt};
  const auto [l2, c2] = top(round2);
  if (2 * c2 > n) return {Outcome::Gold, l2, colloq::Provenance::MajorityR2};
  return {Outcome::Removed, std::nullopt, std::nullopt};
}

inline std::vector<colloq::Annotation> make_annotations(const std::string& doc,
                                                        const std::vector<int>& round1,
                                                        const std::vector<int>& round2) {
  std::vector<colloq::Annotation> out;
  for (std::size_t i = 0; i < round1.size(); ++i) {
    out.push_back({"r1_" + std::to_string(i), doc, static_cast<colloq::Polarity>(round1[i]), 1,
                   {}, false});
  }
  for (std::size_t i = 0; i < round2.size(); ++i) {
    out.push_back({"r2_" + std::to_string(i), doc, static_cast<colloq::Polarity>(round2[i]), 2,
                   {}, false});
  }
  return out;
}

// Every label vector of length n over {-1, 0, 1}.
inline std::vector<std::vector<int>> all_label_vectors(std::size_t n) {
  std::vector<std::vector<int>> out{{}};
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::vector<int>> next;
    for (const auto& v : out) {
      for (int l = -1; l <= 1; ++l) {
        auto w = v;
        w.push_back(l);
        next.push_back(w);
      }
    }
    out = std::move(next);
  }
  return out;
}

// Runs adjudicate over every round-1 vector for n in [2, max_n], and for
// the undecided ones over every round-2 vector. Returns the number of
// mismatches; `cases` receives the number of cases checked.
inline std::size_t adjudication_truth_table(std::size_t max_n, std::size_t& cases) {
  using Outcome = colloq::Adjudication::Outcome;
  std::size_t mismatches = 0;
  cases = 0;
  auto same = [](const colloq::Adjudication& got, const ExpectedOutcome& want) {
    if (got.outcome != want.outcome) return false;
    if (got.outcome != Outcome::Gold) return !got.gold.has_value();
    return got.gold && colloq::to_int(got.gold->label) == *want.label &&
           got.gold->provenance == *want.provenance &&
           got.gold->round == (*want.provenance == colloq::Provenance::MajorityR2 ? 2 : 1);
  };
  for (std::size_t n = 2; n <= max_n; ++n) {
    colloq::AdjudicationConfig config;
    config.annotators_per_item = n;
    const auto vectors = all_label_vectors(n);
    for (const auto& r1 : vectors) {
      ++cases;
      const auto want = expected_outcome(r1, {});
      if (!same(colloq::adjudicate(make_annotations("d", r1, {}), config), want)) ++mismatches;
      if (want.outcome != Outcome::NeedsRound2) {
        // A decided document must refuse round-2 labels.
        ++cases;
        try {
          colloq::adjudicate(make_annotations("d", r1, vectors.front()), config);
          ++mismatches;
        } catch (const colloq::DataError&) {
        }
        continue;
      }
      for (const auto& r2 : vectors) {
        ++cases;
        if (!same(colloq::adjudicate(make_annotations("d", r1, r2), config),
                  expected_outcome(r1, r2))) {
          ++mismatches;
        }
      }
    }
  }
  return mismatches;
}

// Fleiss' kappa evaluated straight from the count-matrix formula, with
// long double accumulation.
inline std::optional<double> fleiss_formula(const std::vector<colloq::CategoryCounts>& m) {
  const long double N = static_cast<long double>(m.size());
  long double n = 0;
  for (int c : m.front()) n += c;
  long double p_bar = 0;
  std::array<long double, 3> col{};
  for (const auto& row : m) {
    long double sq = 0;
    for (int j = 0; j < 3; ++j) {
      sq += static_cast<long double>(row[j]) * row[j];
      col[j] += row[j];
    }
    p_bar += (sq - n) / (n * (n - 1));
  }
  p_bar /= N;
  long double p_e = 0;
  for (auto c : col) p_e += (c / (N * n)) * (c / (N * n));
  if (p_e == 1.0L) return std::nullopt;
  return static_cast<double>((p_bar - p_e) / (1 - p_e));
}

}  // namespace testing
