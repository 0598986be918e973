// First-order softmax gradient boosting over CART regression trees.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "slicever/tree.h"

namespace slicever::tree {

struct EnsembleParams {
  std::int32_t rounds = 50;
  double learning_rate = 0.3;

  bool operator==(const EnsembleParams&) const = default;
};

void validate_ensemble_params(const EnsembleParams& params);

struct Ensemble {
  EnsembleParams params;
  TreeParams tree_params;
  std::array<double, kNumClasses> base_score{};      // log class priors
  std::array<std::vector<Tree>, kNumClasses> trees;  // trees[c][round]

  bool operator==(const Ensemble&) const = default;
};

// Per round: p = softmax(scores); for each class fit a regression tree to the
// residuals y_c - p_c (leaf = mean residual); scores += learning_rate * tree.
// Throws ValidationError("class absent from training data") if a class has no
// samples.
Ensemble fit_gbdt(const Dataset& data, const EnsembleParams& params = {}, const TreeParams& tree_params = {});

std::array<double, kNumClasses> raw_scores(const Ensemble& ens, std::span<const double> x);
ClassProbs predict_ensemble(const Ensemble& ens, std::span<const double> x);
ClassProbs softmax(const std::array<double, kNumClasses>& scores);

// Mean negative log-likelihood of the labels.
double log_loss(const Ensemble& ens, const Dataset& data);

}  // namespace slicever::tree
