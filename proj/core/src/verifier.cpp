#include "slicever/verifier.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "slicever/datagen.h"

namespace slicever::verify {

std::string_view classifier_name(ClassifierKind k) { return k == ClassifierKind::kGbdt ? "gbdt" : "tree"; }

std::optional<ClassifierKind> parse_classifier(std::string_view name) {
  if (name == "gbdt") return ClassifierKind::kGbdt;
  if (name == "tree") return ClassifierKind::kTree;
  return std::nullopt;
}

void validate_verifier_params(const VerifierParams& p) {
  tree::validate_tree_params(p.tree);
  tree::validate_ensemble_params(p.ensemble);
  if (p.drift_window < 2) throw ValidationError("verifier: drift_window must be >= 2");
  if (!(p.psi_threshold > 0.0)) throw ValidationError("verifier: psi_threshold must be > 0");
  if (p.breach_persistence < 1) throw ValidationError("verifier: breach_persistence must be >= 1");
  if (p.conflict_cache_size == 0) throw ValidationError("verifier: conflict_cache_size must be > 0");
  if (!(p.conflict_epsilon >= 0.0)) throw ValidationError("verifier: conflict_epsilon must be >= 0");
}

tree::ClassProbs predict(const VerifierModel& model, const FeatureVector& x) {
  return std::visit(
      [&](const auto& clf) -> tree::ClassProbs {
        using T = std::decay_t<decltype(clf)>;
        if constexpr (std::is_same_v<T, tree::Tree>) {
          return tree::predict_tree(clf, x);
        } else {
          return tree::predict_ensemble(clf, x);
        }
      },
      model.classifier);
}

SliceId predict_slice(const VerifierModel& model, const FeatureVector& x) {
  return slice_from_index(static_cast<std::size_t>(tree::argmax_class(predict(model, x))));
}

VerifierModel fit_verifier(std::span<const UserKpi> subset, double fraction, const VerifierParams& params) {
  validate_verifier_params(params);
  std::array<std::vector<UserKpi>, kNumSlices> per_slice;
  for (const auto& k : subset) per_slice[index_of(k.slice)].push_back(k);
  for (SliceId s : kAllSlices) {
    if (per_slice[index_of(s)].size() < params.min_per_class) {
      throw ValidationError("insufficient support for class " + std::string(slice_name(s)));
    }
  }

  VerifierModel model;
  const auto data = tree::Dataset::from_kpis(subset);
  if (params.classifier == ClassifierKind::kTree) {
    model.classifier = tree::fit_tree(data, params.tree);
  } else {
    model.classifier = tree::fit_gbdt(data, params.ensemble, params.tree);
  }
  for (SliceId s : kAllSlices) model.slice_reference[index_of(s)] = feature_stats(per_slice[index_of(s)]);
  model.normalization = feature_stats(subset);
  model.train_fraction = fraction;
  model.train_size = subset.size();
  return model;
}

VerifierModel train_verifier(std::span<const UserKpi> corpus, double fraction, const VerifierParams& params,
                             std::mt19937_64& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("verifier: fraction must lie in (0,1]");
  if (fraction == 1.0) return fit_verifier(corpus, fraction, params);
  const auto split = datagen::stratified_split(corpus, fraction, rng);
  return fit_verifier(split.subset, fraction, params);
}

double psi(std::span<const double> actual, std::span<const double> expected) {
  if (actual.size() != expected.size()) throw Error("psi: bin count mismatch");
  double sum = 0.0;
  for (std::size_t b = 0; b < actual.size(); ++b) {
    const double p = std::max(actual[b], kPsiFloor);
    const double q = std::max(expected[b], kPsiFloor);
    sum += (p - q) * std::log(p / q);
  }
  return sum;
}

void DriftState::push(SliceId s, const FeatureVector& x) {
  auto& w = slices_[index_of(s)].samples;
  w.push_back(x);
  while (w.size() > window_) w.pop_front();
}

DriftCheck check_drift(const DriftState& state, SliceId slice, const FeatureStats& reference, double threshold) {
  DriftCheck check;
  const auto& samples = state.slice(slice).samples;
  if (samples.size() * 2 < state.window() || samples.empty()) return check;
  check.evaluated = true;
  const double n = static_cast<double>(samples.size());
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    std::array<double, kHistogramBins> props{};
    for (const auto& x : samples) props[histogram_bin(reference.edges[f], x[f])] += 1.0;
    for (double& p : props) p /= n;
    check.psi[f] = psi(props, reference.bin_props[f]);
    check.over_threshold = check.over_threshold || check.psi[f] > threshold;
  }
  return check;
}

bool ConflictCache::check_and_insert(const FeatureVector& z, SliceId predicted, std::int64_t window_id) {
  const double eps_sq = epsilon_ * epsilon_;
  bool conflict = false;
  for (const auto& e : entries_) {
    if (e.predicted == predicted) continue;
    double d = 0.0;
    for (std::size_t f = 0; f < kNumFeatures; ++f) d += (e.z[f] - z[f]) * (e.z[f] - z[f]);
    if (d <= eps_sq) {
      conflict = true;
      break;
    }
  }
  entries_.push_back({z, predicted, window_id});
  while (entries_.size() > capacity_) entries_.pop_front();
  return conflict;
}

bool check_conflict(ConflictCache& cache, const FeatureVector& z, SliceId predicted, std::int64_t window_id) {
  return cache.check_and_insert(z, predicted, window_id);
}

Verdict verify_sample(const VerifierModel& model, VerifierState& state, const UserKpi& kpi) {
  const auto start = std::chrono::steady_clock::now();
  const FeatureVector x = features_of(kpi);
  const SliceId predicted = predict_slice(model, x);
  const bool conflict = state.cache.check_and_insert(zscore_normalize(x, model.normalization), predicted, kpi.window_id);
  state.drift.push(kpi.slice, x);
  const bool drift = state.drift.slice(kpi.slice).breached;
  const auto elapsed = std::chrono::steady_clock::now() - start;

  Verdict v;
  v.window_id = kpi.window_id;
  v.user_id = kpi.user_id;
  v.predicted_slice = predicted;
  v.true_slice = kpi.slice;
  v.flags = {drift, predicted != kpi.slice, conflict};
  v.latency_us = std::chrono::duration_cast<std::chrono::microseconds>(elapsed).count();
  return v;
}

std::array<DriftCheck, kNumSlices> evaluate_drift(const VerifierModel& model, VerifierState& state) {
  std::array<DriftCheck, kNumSlices> checks{};
  for (SliceId s : kAllSlices) {
    auto& check = checks[index_of(s)];
    check = check_drift(state.drift, s, model.slice_reference[index_of(s)], state.psi_threshold);
    if (!check.evaluated) continue;
    auto& window = state.drift.slice(s);
    window.last_psi = check.psi;
    window.consecutive = check.over_threshold ? window.consecutive + 1 : 0;
    window.breached = window.consecutive >= state.breach_persistence;
  }
  return checks;
}

std::optional<bus::EscalationMsg> Escalator::raise(const std::string& reason, std::int64_t window_id) {
  for (const auto& e : raised_) {
    if (e.reason == reason) return std::nullopt;
  }
  raised_.push_back({reason, window_id});
  return raised_.back();
}

std::vector<bus::EscalationMsg> Escalator::observe(const Verdict& verdict) {
  std::vector<bus::EscalationMsg> out;
  ++window_total_;
  if (verdict.flags.misclass) ++window_misclass_;
  if (verdict.flags.drift) {
    if (auto e = raise("drift", verdict.window_id)) out.push_back(*e);
  }
  if (verdict.flags.conflict) {
    if (auto e = raise("conflict", verdict.window_id)) out.push_back(*e);
  }
  return out;
}

std::vector<bus::EscalationMsg> Escalator::close_window(std::int64_t window_id, bool drift_breach) {
  std::vector<bus::EscalationMsg> out;
  if (drift_breach) {
    if (auto e = raise("drift", window_id)) out.push_back(*e);
  }
  history_.emplace_back(window_total_, window_misclass_);
  window_total_ = 0;
  window_misclass_ = 0;
  while (history_.size() > policy_.misclass_windows) history_.pop_front();
  if (history_.size() == policy_.misclass_windows) {
    std::int64_t total = 0, wrong = 0;
    for (const auto& [t, m] : history_) {
      total += t;
      wrong += m;
    }
    if (total > 0 && static_cast<double>(wrong) / static_cast<double>(total) > policy_.misclass_rate_threshold) {
      if (auto e = raise("misclass_rate", window_id)) out.push_back(*e);
    }
  }
  return out;
}

LatencyStats latency_stats(std::span<const std::int64_t> latencies_us) {
  if (latencies_us.empty()) throw Error("latency_stats: no samples");
  std::vector<double> sorted(latencies_us.begin(), latencies_us.end());
  std::sort(sorted.begin(), sorted.end());
  auto at = [&](double q) { return static_cast<std::int64_t>(nearest_rank(sorted, q)); };
  return {at(0.50), at(0.95), at(0.99), static_cast<std::int64_t>(sorted.back())};
}

LatencyStats latency_stats(std::span<const Verdict> verdicts) {
  std::vector<std::int64_t> v;
  v.reserve(verdicts.size());
  for (const auto& x : verdicts) v.push_back(x.latency_us);
  return latency_stats(v);
}

}  // namespace slicever::verify
