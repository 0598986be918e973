// The slice verifier: a tree classifier answering "which slice does this user
// belong to" from its KPIs, plus three runtime checks on the stream of
// verdicts: per-slice feature drift (PSI against the training reference),
// misclassification against the operator's label, and conflicting
// predictions for nearby points in normalized feature space.
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "slicever/bus.h"
#include "slicever/domain.h"
#include "slicever/gbdt.h"
#include "slicever/tree.h"

namespace slicever::verify {

enum class ClassifierKind : std::uint8_t { kGbdt, kTree };

std::string_view classifier_name(ClassifierKind k);  // "gbdt" | "tree"
std::optional<ClassifierKind> parse_classifier(std::string_view name);

struct VerifierParams {
  ClassifierKind classifier = ClassifierKind::kGbdt;
  tree::TreeParams tree;
  tree::EnsembleParams ensemble;
  std::size_t min_per_class = 30;
  std::size_t drift_window = 500;
  double psi_threshold = 0.25;
  std::int32_t breach_persistence = 3;
  std::size_t conflict_cache_size = 1000;
  double conflict_epsilon = 0.1;

  bool operator==(const VerifierParams&) const = default;
};

void validate_verifier_params(const VerifierParams& params);

using Classifier = std::variant<tree::Tree, tree::Ensemble>;

struct VerifierModel {
  Classifier classifier;
  std::array<FeatureStats, kNumSlices> slice_reference{};
  FeatureStats normalization;  // over the whole training subset
  double train_fraction = 1.0;
  std::size_t train_size = 0;

  bool operator==(const VerifierModel&) const = default;
};

tree::ClassProbs predict(const VerifierModel& model, const FeatureVector& x);
SliceId predict_slice(const VerifierModel& model, const FeatureVector& x);

// Fits the classifier on `subset` as given. Throws
// ValidationError("insufficient support for class <c>") when a slice has
// fewer than params.min_per_class samples.
VerifierModel fit_verifier(std::span<const UserKpi> subset, double fraction, const VerifierParams& params);

// Stratified sample of `fraction` of the corpus (all of it when fraction is
// 1), then fit_verifier on that sample.
VerifierModel train_verifier(std::span<const UserKpi> corpus, double fraction, const VerifierParams& params,
                             std::mt19937_64& rng);

// Population stability index over matching bins with proportions floored at 1e-6.
double psi(std::span<const double> actual, std::span<const double> expected);

inline constexpr double kPsiFloor = 1e-6;

struct DriftCheck {
  bool evaluated = false;  // false when the window holds fewer than W/2 samples
  std::array<double, kNumFeatures> psi{};
  bool over_threshold = false;  // any feature PSI > threshold
};

struct SliceDriftWindow {
  std::deque<FeatureVector> samples;
  std::array<double, kNumFeatures> last_psi{};
  std::int32_t consecutive = 0;
  bool breached = false;
};

// Per-slice sliding windows of the last W feature vectors.
class DriftState {
 public:
  explicit DriftState(std::size_t window = 500) : window_(window) {}

  void push(SliceId slice, const FeatureVector& x);
  const SliceDriftWindow& slice(SliceId s) const { return slices_[index_of(s)]; }
  SliceDriftWindow& slice(SliceId s) { return slices_[index_of(s)]; }
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
  std::array<SliceDriftWindow, kNumSlices> slices_;
};

// PSI of the slice's window against its reference histogram. Stateless.
DriftCheck check_drift(const DriftState& state, SliceId slice, const FeatureStats& reference,
                       double threshold = 0.25);

struct ConflictEntry {
  FeatureVector z{};
  SliceId predicted = SliceId::kEmbb;
  std::int64_t window_id = 0;
};

// Bounded FIFO of recent normalized predictions.
class ConflictCache {
 public:
  explicit ConflictCache(std::size_t capacity = 1000, double epsilon = 0.1)
      : capacity_(capacity), epsilon_(epsilon) {}

  // True iff a cached entry within L2 distance epsilon has a different
  // predicted class. The query is appended afterwards.
  bool check_and_insert(const FeatureVector& z, SliceId predicted, std::int64_t window_id);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<ConflictEntry>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  double epsilon_;
  std::deque<ConflictEntry> entries_;
};

bool check_conflict(ConflictCache& cache, const FeatureVector& z, SliceId predicted, std::int64_t window_id = 0);

using Verdict = bus::VerdictMsg;

struct VerifierState {
  explicit VerifierState(const VerifierParams& params = {})
      : drift(params.drift_window),
        cache(params.conflict_cache_size, params.conflict_epsilon),
        psi_threshold(params.psi_threshold),
        breach_persistence(params.breach_persistence) {}

  DriftState drift;
  ConflictCache cache;
  double psi_threshold;
  std::int32_t breach_persistence;
};

// Classifies one KPI sample and raises the per-sample flags. Only `state` is
// mutated.
Verdict verify_sample(const VerifierModel& model, VerifierState& state, const UserKpi& kpi);

// Once-per-window drift evaluation for every slice; updates the consecutive
// breach counters (a slice is breached after `breach_persistence` evaluations
// in a row over threshold; an under-threshold evaluation resets it).
std::array<DriftCheck, kNumSlices> evaluate_drift(const VerifierModel& model, VerifierState& state);

struct EscalationPolicy {
  double misclass_rate_threshold = 0.25;
  std::size_t misclass_windows = 20;

  bool operator==(const EscalationPolicy&) const = default;
};

// Turns verdicts and drift evaluations into escalations, at most one per
// reason ("misclass_rate", "drift", "conflict") per run.
class Escalator {
 public:
  explicit Escalator(EscalationPolicy policy = {}) : policy_(policy) {}

  // Drift and conflict flags escalate immediately.
  std::vector<bus::EscalationMsg> observe(const Verdict& verdict);
  // Closes a window: escalates on a drift breach, or when the misclassification
  // rate over the last `misclass_windows` windows exceeds the threshold.
  std::vector<bus::EscalationMsg> close_window(std::int64_t window_id, bool drift_breach);

  const std::vector<bus::EscalationMsg>& raised() const { return raised_; }

 private:
  std::optional<bus::EscalationMsg> raise(const std::string& reason, std::int64_t window_id);

  EscalationPolicy policy_;
  std::int64_t window_total_ = 0;
  std::int64_t window_misclass_ = 0;
  std::deque<std::pair<std::int64_t, std::int64_t>> history_;  // (total, misclassified)
  std::vector<bus::EscalationMsg> raised_;
};

struct LatencyStats {
  std::int64_t p50 = 0;
  std::int64_t p95 = 0;
  std::int64_t p99 = 0;
  std::int64_t max = 0;

  bool operator==(const LatencyStats&) const = default;
};

// Nearest-rank percentiles (rank ceil(q n), 1-based). Throws on empty input.
LatencyStats latency_stats(std::span<const std::int64_t> latencies_us);
LatencyStats latency_stats(std::span<const Verdict> verdicts);

}  // namespace slicever::verify
