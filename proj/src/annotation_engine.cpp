#include "colloq/annotation_engine.hpp"

#include <algorithm>
#include <set>

#include "colloq/rng.hpp"
#include "json.hpp"

namespace colloq {

using nlohmann::json;

namespace {

Polarity checked(Polarity p) {
  if (!polarity_from_int(to_int(p))) {
    throw DataError("label " + std::to_string(to_int(p)) + " outside {-1, 0, 1}");
  }
  return p;
}

// Majority label when its count is strictly more than half.
std::optional<std::pair<Polarity, bool>> strict_majority(
    const std::map<std::string, Polarity>& labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& [who, label] : labels) ++counts[class_index(label)];
  const auto best = std::max_element(counts.begin(), counts.end());
  if (2 * *best <= labels.size()) return std::nullopt;
  const bool unanimous = *best == labels.size();
  return std::pair{polarity_from_class(static_cast<int>(best - counts.begin())),
                   unanimous};
}

Instant now_ms() {
  return std::chrono::floor<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void AdjudicationConfig::validate() const {
  if (annotators_per_item < 2) throw DataError("annotators_per_item must be at least 2");
  if (!(probe_fraction >= 0.0 && probe_fraction <= 1.0)) {
    throw DataError("probe_fraction must lie in [0, 1]");
  }
}

std::string to_string(Adjudication::Outcome outcome) {
  switch (outcome) {
    case Adjudication::Outcome::Gold:
      return "gold";
    case Adjudication::Outcome::NeedsRound2:
      return "needs_round2";
    case Adjudication::Outcome::Removed:
      return "removed";
  }
  return "unknown";
}

Adjudication adjudicate(std::span<const Annotation> annotations,
                        const AdjudicationConfig& config) {
  config.validate();
  if (annotations.empty()) throw DataError("no annotations to adjudicate");
  const std::string& doc_id = annotations.front().doc_id;
  std::map<std::string, Polarity> round1, round2;
  for (const auto& a : annotations) {
    if (a.doc_id != doc_id) throw DataError("annotations span several documents");
    checked(a.label);
    if (a.round == 1) {
      round1.emplace(a.annotator_id, a.label);
    } else if (a.round == 2) {
      if (!round2.emplace(a.annotator_id, a.label).second) {
        throw DataError("annotator '" + a.annotator_id +
                        "' labelled '" + doc_id + "' twice in round 2");
      }
    } else {
      throw DataError("round must be 1 or 2");
    }
  }
  const std::size_t n = config.annotators_per_item;
  if (round1.size() != n) {
    throw DataError("document '" + doc_id + "' has " + std::to_string(round1.size()) +
                    " round-1 annotators, expected " + std::to_string(n));
  }

  Adjudication result;
  if (const auto m = strict_majority(round1)) {
    if (!round2.empty()) {
      throw DataError("round-2 labels for '" + doc_id + "', which round 1 decided");
    }
    result.outcome = Adjudication::Outcome::Gold;
    result.gold = GoldRecord{doc_id, m->first, 1,
                             m->second ? Provenance::UnanimousR1 : Provenance::MajorityR1};
    return result;
  }
  if (round2.empty()) {
    result.outcome = Adjudication::Outcome::NeedsRound2;
    return result;
  }
  if (round2.size() != n) {
    throw DataError("document '" + doc_id + "' has " + std::to_string(round2.size()) +
                    " round-2 annotators, expected " + std::to_string(n));
  }
  if (const auto m = strict_majority(round2)) {
    result.outcome = Adjudication::Outcome::Gold;
    result.gold = GoldRecord{doc_id, m->first, 2, Provenance::MajorityR2};
  } else {
    result.outcome = Adjudication::Outcome::Removed;
  }
  return result;
}

std::optional<double> fleiss_kappa(std::span<const CategoryCounts> items) {
  if (items.empty()) throw DataError("fleiss_kappa needs at least one item");
  long long n = 0;
  for (int c : items.front()) n += c;
  if (n < 2) throw DataError("fleiss_kappa needs at least two ratings per item");

  const double N = static_cast<double>(items.size());
  const double nd = static_cast<double>(n);
  std::array<long long, kNumClasses> totals{};
  double p_bar = 0.0;
  for (const auto& row : items) {
    long long sum = 0, squares = 0;
    for (int j = 0; j < kNumClasses; ++j) {
      if (row[j] < 0) throw DataError("negative category count");
      sum += row[j];
      squares += static_cast<long long>(row[j]) * row[j];
      totals[j] += row[j];
    }
    if (sum != n) throw DataError("items have unequal numbers of ratings");
    p_bar += static_cast<double>(squares - n) / (nd * (nd - 1.0));
  }
  p_bar /= N;

  const long long all = static_cast<long long>(items.size()) * n;
  double p_e = 0.0;
  for (long long t : totals) {
    if (t == all) return std::nullopt;
    const double p = static_cast<double>(t) / (N * nd);
    p_e += p * p;
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

std::optional<double> raw_interagreement(std::span<const CategoryCounts> items) {
  if (items.empty()) return std::nullopt;
  std::size_t unanimous = 0;
  for (const auto& row : items) {
    int nonzero = 0;
    for (int c : row) nonzero += c > 0;
    unanimous += nonzero <= 1;
  }
  return static_cast<double>(unanimous) / static_cast<double>(items.size());
}

SelfAgreement self_agreement(std::span<const Annotation> annotations) {
  std::map<std::pair<std::string, std::string>, std::vector<Polarity>> repeats;
  for (const auto& a : annotations) {
    if (a.round == 1) repeats[{a.annotator_id, a.doc_id}].push_back(a.label);
  }
  SelfAgreement out;
  std::map<std::string, std::size_t> consistent;
  for (const auto& [key, labels] : repeats) {
    if (labels.size() < 2) continue;
    ++out.probes[key.first];
    const bool same = std::all_of(labels.begin(), labels.end(),
                                  [&](Polarity p) { return p == labels.front(); });
    consistent[key.first] += same;
  }
  std::size_t total = 0, total_consistent = 0;
  for (const auto& [annotator, probes] : out.probes) {
    out.per_annotator[annotator] =
        static_cast<double>(consistent[annotator]) / static_cast<double>(probes);
    total += probes;
    total_consistent += consistent[annotator];
  }
  if (total > 0) {
    out.overall = static_cast<double>(total_consistent) / static_cast<double>(total);
  }
  return out;
}

std::vector<CategoryCounts> round1_matrix(std::span<const Annotation> annotations,
                                          std::size_t n) {
  std::map<std::string, std::map<std::string, Polarity>> firsts;
  for (const auto& a : annotations) {
    if (a.round == 1) firsts[a.doc_id].emplace(a.annotator_id, a.label);
  }
  std::vector<CategoryCounts> rows;
  for (const auto& [doc, labels] : firsts) {
    if (labels.size() != n) continue;
    CategoryCounts row{};
    for (const auto& [who, label] : labels) ++row[class_index(label)];
    rows.push_back(row);
  }
  return rows;
}

std::string AgreementReport::to_json() const {
  json per = json::object();
  for (const auto& [who, rate] : self.per_annotator) per[who] = rate;
  json probes = json::object();
  for (const auto& [who, count] : self.probes) probes[who] = count;
  return json{{"fleiss_kappa", optional_number(fleiss_kappa)},
              {"raw_interagreement", optional_number(raw_interagreement)},
              {"self_agreement", per},
              {"probe_counts", probes},
              {"overall_self_agreement", optional_number(self.overall)},
              {"items", items}}
      .dump();
}

AgreementReport agreement_report(std::span<const Annotation> annotations,
                                 std::size_t n) {
  AgreementReport report;
  const auto matrix = round1_matrix(annotations, n);
  report.items = matrix.size();
  if (!matrix.empty()) report.fleiss_kappa = fleiss_kappa(matrix);
  report.raw_interagreement = raw_interagreement(matrix);
  report.self = self_agreement(annotations);
  return report;
}

std::string to_string(SubmitStatus status) {
  switch (status) {
    case SubmitStatus::Accepted:
      return "accepted";
    case SubmitStatus::Duplicate:
      return "duplicate";
    case SubmitStatus::NotServed:
      return "not_served";
    case SubmitStatus::InvalidLabel:
      return "invalid_label";
    case SubmitStatus::InvalidRound:
      return "invalid_round";
    case SubmitStatus::UnknownAnnotator:
      return "unknown_annotator";
    case SubmitStatus::UnknownDocument:
      return "unknown_document";
  }
  return "unknown";
}

std::string to_string(DocState state) {
  switch (state) {
    case DocState::Round1:
      return "round1";
    case DocState::NeedsRound2:
      return "needs_round2";
    case DocState::Gold:
      return "gold";
    case DocState::Removed:
      return "removed";
  }
  return "unknown";
}

AnnotationEngine::AnnotationEngine(CorpusStore& store, AdjudicationConfig config)
    : store_(store), config_(config) {
  config_.validate();
  replay();
}

std::vector<Annotation> AnnotationEngine::annotations_for(
    const std::string& doc_id) const {
  const DocProgress& p = docs_.at(doc_id);
  std::vector<Annotation> out;
  for (const auto& [who, label] : p.round1) out.push_back({who, doc_id, label, 1, {}, false});
  if (p.round2.size() == config_.annotators_per_item) {
    for (const auto& [who, label] : p.round2) out.push_back({who, doc_id, label, 2, {}, false});
  }
  return out;
}

void AnnotationEngine::replay() {
  for (const auto& doc : store_.documents()) docs_[doc.doc_id];
  for (const auto& a : store_.annotations()) {
    const auto it = docs_.find(a.doc_id);
    if (it == docs_.end()) {
      throw DataError("annotation for unknown document '" + a.doc_id + "'");
    }
    (a.round == 1 ? it->second.round1 : it->second.round2).emplace(a.annotator_id, a.label);
    ++annotation_counts_[a.annotator_id];
  }
  std::set<std::string> have_gold;
  for (const auto& g : store_.gold()) have_gold.insert(g.doc_id);
  for (auto& [doc_id, progress] : docs_) {
    if (progress.round1.size() < config_.annotators_per_item) continue;
    const Adjudication adj = adjudicate(annotations_for(doc_id), config_);
    switch (adj.outcome) {
      case Adjudication::Outcome::Gold:
        progress.state = DocState::Gold;
        // A crash between the last label and the gold record leaves the
        // record missing; restore it.
        if (!have_gold.count(doc_id)) store_.add_gold(*adj.gold);
        break;
      case Adjudication::Outcome::NeedsRound2:
        progress.state = DocState::NeedsRound2;
        break;
      case Adjudication::Outcome::Removed:
        progress.state = DocState::Removed;
        break;
    }
  }
}

void AnnotationEngine::register_annotator(const std::string& id) {
  std::lock_guard lock(mutex_);
  store_.add_annotator(id);
}

bool AnnotationEngine::is_registered(const std::string& id) const {
  return store_.annotators().count(id) > 0;
}

std::optional<Task> AnnotationEngine::next_task(const std::string& annotator_id,
                                                int round) {
  if (round != 1 && round != 2) throw DataError("round must be 1 or 2");
  if (!is_registered(annotator_id)) {
    throw DataError("unknown annotator '" + annotator_id + "'");
  }
  std::lock_guard lock(mutex_);
  const auto key = std::pair{annotator_id, round};
  if (const auto it = outstanding_.find(key); it != outstanding_.end()) {
    return it->second;
  }
  const std::size_t n = config_.annotators_per_item;

  if (round == 1 && config_.probe_fraction > 0.0) {
    Rng rng(mix_seed(mix_seed(config_.seed, fnv1a(annotator_id)),
                     annotation_counts_[annotator_id]));
    if (rng.bernoulli(config_.probe_fraction)) {
      std::vector<std::string> labelled;
      for (const auto& [doc_id, p] : docs_) {
        if (p.round1.count(annotator_id)) labelled.push_back(doc_id);
      }
      if (!labelled.empty()) {
        Task task{labelled[rng.below(labelled.size())], 1, true};
        outstanding_[key] = task;
        return task;
      }
    }
  }

  const std::string* best = nullptr;
  std::size_t best_load = 0;
  for (const auto& [doc_id, p] : docs_) {
    const bool open = round == 1 ? p.state == DocState::Round1
                                 : p.state == DocState::NeedsRound2;
    if (!open) continue;
    const auto& labels = round == 1 ? p.round1 : p.round2;
    const std::size_t load = labels.size() + (round == 1 ? p.reserved1 : p.reserved2);
    if (labels.count(annotator_id) || load >= n) continue;
    if (!best || load < best_load) {
      best = &doc_id;
      best_load = load;
    }
  }
  if (!best) return std::nullopt;
  DocProgress& p = docs_.at(*best);
  ++(round == 1 ? p.reserved1 : p.reserved2);
  Task task{*best, round, false};
  outstanding_[key] = task;
  return task;
}

void AnnotationEngine::conclude(const std::string& doc_id, DocProgress& progress,
                                SubmitResult& result) {
  const Adjudication adj = adjudicate(annotations_for(doc_id), config_);
  switch (adj.outcome) {
    case Adjudication::Outcome::Gold:
      store_.add_gold(*adj.gold);
      progress.state = DocState::Gold;
      break;
    case Adjudication::Outcome::NeedsRound2:
      progress.state = DocState::NeedsRound2;
      break;
    case Adjudication::Outcome::Removed:
      progress.state = DocState::Removed;
      break;
  }
  result.adjudication = adj;
}

SubmitResult AnnotationEngine::submit(const LabelSubmission& s) {
  SubmitResult result;
  auto reject = [&](SubmitStatus status, std::string message) {
    result.status = status;
    result.message = std::move(message);
    return result;
  };
  if (!is_registered(s.annotator_id)) {
    return reject(SubmitStatus::UnknownAnnotator, "unknown annotator '" + s.annotator_id + "'");
  }
  if (s.round != 1 && s.round != 2) {
    return reject(SubmitStatus::InvalidRound, "round must be 1 or 2");
  }
  const auto label = polarity_from_int(s.label);
  if (!label) return reject(SubmitStatus::InvalidLabel, "label must be -1, 0 or 1");

  std::lock_guard lock(mutex_);
  const auto doc_it = docs_.find(s.doc_id);
  if (doc_it == docs_.end()) {
    return reject(SubmitStatus::UnknownDocument, "unknown document '" + s.doc_id + "'");
  }
  DocProgress& progress = doc_it->second;
  const auto key = std::pair{s.annotator_id, s.round};
  const auto out_it = outstanding_.find(key);
  const bool served = out_it != outstanding_.end() && out_it->second.doc_id == s.doc_id;
  const bool probe = served && out_it->second.probe;
  auto& labels = s.round == 1 ? progress.round1 : progress.round2;
  if (labels.count(s.annotator_id) && !probe) {
    return reject(SubmitStatus::Duplicate, "already labelled in this round");
  }
  if (!served) {
    return reject(SubmitStatus::NotServed, "document was not served to this annotator");
  }

  Annotation a{s.annotator_id, s.doc_id, *label, s.round, now_ms(), probe};
  store_.add_annotation(a);  // durable before the state changes

  outstanding_.erase(out_it);
  ++annotation_counts_[s.annotator_id];
  if (probe) return result;
  std::size_t& reserved = s.round == 1 ? progress.reserved1 : progress.reserved2;
  if (reserved > 0) --reserved;
  labels.emplace(s.annotator_id, *label);
  if (labels.size() == config_.annotators_per_item) {
    conclude(s.doc_id, progress, result);
  }
  return result;
}

DocState AnnotationEngine::state(const std::string& doc_id) const {
  std::lock_guard lock(mutex_);
  const auto it = docs_.find(doc_id);
  if (it == docs_.end()) throw DataError("unknown document '" + doc_id + "'");
  return it->second.state;
}

std::map<DocState, std::size_t> AnnotationEngine::state_counts() const {
  std::lock_guard lock(mutex_);
  std::map<DocState, std::size_t> counts{{DocState::Round1, 0},
                                         {DocState::NeedsRound2, 0},
                                         {DocState::Gold, 0},
                                         {DocState::Removed, 0}};
  for (const auto& [id, p] : docs_) ++counts[p.state];
  return counts;
}

AgreementReport AnnotationEngine::agreement() const {
  return agreement_report(store_.annotations(), config_.annotators_per_item);
}

}  // namespace colloq
