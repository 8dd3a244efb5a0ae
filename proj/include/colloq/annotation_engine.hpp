#pragma once

#include <array>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "colloq/corpus_store.hpp"

namespace colloq {

struct AdjudicationConfig {
  std::size_t annotators_per_item = 3;
  double probe_fraction = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Adjudication {
  enum class Outcome { Gold, NeedsRound2, Removed };
  Outcome outcome = Outcome::NeedsRound2;
  std::optional<GoldRecord> gold;  // set iff outcome == Gold
};

std::string to_string(Adjudication::Outcome outcome);

// Two-round decision for one document. Round 1 needs labels from exactly
// n distinct annotators (probe repeats are ignored; an annotator's first
// label counts). A unanimous round 1 gives unanimous_r1, a strict majority
// (> n/2) majority_r1, anything else NeedsRound2. Round-2 labels, when
// present, must number exactly n and are only allowed after NeedsRound2:
// a strict majority gives majority_r2, anything else Removed.
// Throws DataError on incomplete sets, mixed documents, or bad labels.
Adjudication adjudicate(std::span<const Annotation> annotations,
                        const AdjudicationConfig& config);

using CategoryCounts = std::array<int, kNumClasses>;

// nullopt when expected agreement is 1 (every rating in one category).
// Throws DataError for an empty matrix, unequal ratings per item, n < 2 or
// negative counts.
std::optional<double> fleiss_kappa(std::span<const CategoryCounts> items);

// Fraction of items whose ratings all fall in one category; nullopt for an
// empty matrix.
std::optional<double> raw_interagreement(std::span<const CategoryCounts> items);

struct SelfAgreement {
  std::map<std::string, double> per_annotator;
  std::map<std::string, std::size_t> probes;
  std::optional<double> overall;  // weighted by probe count
};

// Probe: the same annotator gave two or more round-1 labels to one doc.
SelfAgreement self_agreement(std::span<const Annotation> annotations);

// Round-1 category counts for every doc with labels from exactly n
// distinct annotators, in doc_id order.
std::vector<CategoryCounts> round1_matrix(std::span<const Annotation> annotations,
                                          std::size_t n);

struct AgreementReport {
  std::optional<double> fleiss_kappa;
  std::optional<double> raw_interagreement;
  SelfAgreement self;
  std::size_t items = 0;

  std::string to_json() const;
};

AgreementReport agreement_report(std::span<const Annotation> annotations,
                                 std::size_t n);

struct Task {
  std::string doc_id;
  int round = 1;
  bool probe = false;
};

struct LabelSubmission {
  std::string annotator_id;
  std::string doc_id;
  long long label = 0;
  int round = 1;
  std::optional<Instant> client_timestamp;
};

enum class SubmitStatus {
  Accepted,
  Duplicate,
  NotServed,
  InvalidLabel,
  InvalidRound,
  UnknownAnnotator,
  UnknownDocument
};

std::string to_string(SubmitStatus status);

struct SubmitResult {
  SubmitStatus status = SubmitStatus::Accepted;
  std::string message;
  std::optional<Adjudication> adjudication;  // when the round completed
};

enum class DocState { Round1, NeedsRound2, Gold, Removed };
std::string to_string(DocState state);

// Task scheduling and label intake over a CorpusStore. All calls are
// serialized; adjudication runs when a document's round completes.
class AnnotationEngine {
 public:
  AnnotationEngine(CorpusStore& store, AdjudicationConfig config);

  const AdjudicationConfig& config() const { return config_; }

  void register_annotator(const std::string& id);
  bool is_registered(const std::string& id) const;

  // Lowest (ratings + outstanding) first, then doc_id. An outstanding task
  // for the same annotator and round is served again until answered.
  // Throws DataError for an unknown annotator or a round other than 1, 2.
  std::optional<Task> next_task(const std::string& annotator_id, int round);

  SubmitResult submit(const LabelSubmission& submission);

  DocState state(const std::string& doc_id) const;
  std::map<DocState, std::size_t> state_counts() const;
  AgreementReport agreement() const;

 private:
  struct DocProgress {
    DocState state = DocState::Round1;
    std::map<std::string, Polarity> round1;  // first label per annotator
    std::map<std::string, Polarity> round2;
    std::size_t reserved1 = 0;
    std::size_t reserved2 = 0;
  };

  void replay();
  void conclude(const std::string& doc_id, DocProgress& progress,
                SubmitResult& result);
  std::vector<Annotation> annotations_for(const std::string& doc_id) const;

  CorpusStore& store_;
  AdjudicationConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, DocProgress> docs_;
  std::map<std::string, std::size_t> annotation_counts_;
  std::map<std::pair<std::string, int>, Task> outstanding_;
};

}  // namespace colloq
