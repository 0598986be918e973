#include "slicever/gbdt.h"

#include <algorithm>
#include <cmath>

namespace slicever::tree {

void validate_ensemble_params(const EnsembleParams& p) {
  if (p.rounds < 0) throw ValidationError("gbdt: rounds must be >= 0");
  if (!(p.learning_rate > 0.0) || !std::isfinite(p.learning_rate)) {
    throw ValidationError("gbdt: learning_rate must be > 0");
  }
}

ClassProbs softmax(const std::array<double, kNumClasses>& scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  ClassProbs p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p[c] = std::exp(scores[c] - top);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

Ensemble fit_gbdt(const Dataset& data, const EnsembleParams& params, const TreeParams& tree_params) {
  if (data.empty()) throw ValidationError("empty dataset");
  validate_ensemble_params(params);
  validate_tree_params(tree_params);
  const ClassCounts counts = data.class_counts();
  if (std::any_of(counts.begin(), counts.end(), [](auto c) { return c == 0; })) {
    throw ValidationError("class absent from training data");
  }

  Ensemble ens;
  ens.params = params;
  ens.tree_params = tree_params;
  const auto n = data.size();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ens.base_score[c] = std::log(static_cast<double>(counts[c]) / static_cast<double>(n));
  }

  std::vector<std::array<double, kNumClasses>> scores(n, ens.base_score);
  std::vector<ClassProbs> probs(n);
  std::vector<double> residual(n);
  for (std::int32_t round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) probs[i] = softmax(scores[i]);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double y = data.label(i) == static_cast<int>(c) ? 1.0 : 0.0;
        residual[i] = y - probs[i][c];
      }
      Tree t = fit_regression_tree(data, residual, tree_params);
      for (std::size_t i = 0; i < n; ++i) scores[i][c] += params.learning_rate * t.leaf_for(data.row(i)).value;
      ens.trees[c].push_back(std::move(t));
    }
  }
  return ens;
}

std::array<double, kNumClasses> raw_scores(const Ensemble& ens, std::span<const double> x) {
  std::array<double, kNumClasses> s = ens.base_score;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double sum = 0.0;
    for (const auto& t : ens.trees[c]) sum += t.leaf_for(x).value;
    s[c] += ens.params.learning_rate * sum;
  }
  return s;
}

ClassProbs predict_ensemble(const Ensemble& ens, std::span<const double> x) {
  return softmax(raw_scores(ens, x));
}

double log_loss(const Ensemble& ens, const Dataset& data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = predict_ensemble(ens, data.row(i));
    sum -= std::log(std::max(p[static_cast<std::size_t>(data.label(i))], 1e-300));
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace slicever::tree
