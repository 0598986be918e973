// CART decision trees. Classification trees split on Gini impurity and store
// class counts/probabilities at the leaves; regression trees (used by the
// boosting ensemble) split on variance reduction and store a mean value.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "slicever/domain.h"

namespace slicever::tree {

inline constexpr std::size_t kNumClasses = kNumSlices;

using ClassCounts = std::array<std::int64_t, kNumClasses>;
using ClassProbs = std::array<double, kNumClasses>;

// Row-major feature matrix with integer class labels in [0, kNumClasses).
class Dataset {
 public:
  explicit Dataset(std::size_t n_features = kNumFeatures) : n_features_(n_features) {}

  static Dataset from_kpis(std::span<const UserKpi> kpis);

  void add(std::span<const double> row, int label);
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t n_features() const { return n_features_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_features_, n_features_};
  }
  double at(std::size_t i, std::size_t f) const { return values_[i * n_features_ + f]; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  ClassCounts class_counts() const;

 private:
  std::size_t n_features_;
  std::vector<double> values_;
  std::vector<int> labels_;
};

struct TreeParams {
  std::int32_t max_depth = 6;
  std::int32_t min_samples_split = 20;
  double min_gain = 1e-7;

  bool operator==(const TreeParams&) const = default;
};

void validate_tree_params(const TreeParams& params);

// Internal nodes route x[feature] <= threshold to `left`. Leaves have feature -1.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  ClassCounts counts{};
  ClassProbs probs{};
  double value = 0.0;  // regression leaves

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Nodes in depth-first order; nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const double> x) const;
  std::int32_t depth() const;
  bool operator==(const Tree&) const = default;
};

double gini(const ClassCounts& counts);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exhaustive search over features and midpoints between consecutive distinct
// values. Ties go to the lowest feature, then the lowest threshold. Returns
// nullopt when fewer than two samples are given or the best gain < min_gain.
std::optional<Split> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                double min_gain = TreeParams{}.min_gain);
std::optional<Split> best_split(const Dataset& data, double min_gain = TreeParams{}.min_gain);

// Variance-reduction counterpart for real targets (one per dataset row).
std::optional<Split> best_regression_split(const Dataset& data, std::span<const double> targets,
                                           std::span<const std::size_t> rows, double min_gain);

Tree fit_tree(const Dataset& data, const TreeParams& params = {});
Tree fit_regression_tree(const Dataset& data, std::span<const double> targets, const TreeParams& params);

ClassProbs predict_tree(const Tree& tree, std::span<const double> x);

// Ties go to the lowest class index.
int argmax_class(const ClassProbs& probs);

}  // namespace slicever::tree
