#include "slicever/tree.h"

#include <algorithm>
#include <numeric>

namespace slicever::tree {

namespace {

// Gains closer than this are treated as ties so the lowest feature/threshold wins.
constexpr double kTieTolerance = 1e-12;

double midpoint(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return mid < b ? mid : a;
}

ClassCounts counts_of(const Dataset& data, std::span<const std::size_t> rows) {
  ClassCounts counts{};
  for (auto i : rows) ++counts[static_cast<std::size_t>(data.label(i))];
  return counts;
}

std::int64_t total(const ClassCounts& c) { return std::accumulate(c.begin(), c.end(), std::int64_t{0}); }

TreeNode class_leaf(const ClassCounts& counts) {
  TreeNode leaf;
  leaf.counts = counts;
  const auto n = total(counts);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    leaf.probs[c] = n > 0 ? static_cast<double>(counts[c]) / static_cast<double>(n) : 1.0 / kNumClasses;
  }
  return leaf;
}

// Sorts rows by feature f, ties by row index, so sweeps are deterministic.
void sort_by_feature(const Dataset& data, std::vector<std::size_t>& order, std::size_t f) {
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = data.at(a, f);
    const double vb = data.at(b, f);
    return va < vb || (va == vb && a < b);
  });
}

void partition(const Dataset& data, std::span<const std::size_t> rows, const Split& split,
               std::vector<std::size_t>& left, std::vector<std::size_t>& right) {
  for (auto i : rows) {
    (data.at(i, split.feature) <= split.threshold ? left : right).push_back(i);
  }
}

class ClassificationBuilder {
 public:
  ClassificationBuilder(const Dataset& data, const TreeParams& params) : data_(data), params_(params) {}

  Tree build() {
    std::vector<std::size_t> rows(data_.size());
    std::iota(rows.begin(), rows.end(), 0);
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(const std::vector<std::size_t>& rows, std::int32_t depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    const ClassCounts counts = counts_of(data_, rows);
    tree_.nodes.push_back(class_leaf(counts));

    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (depth >= params_.max_depth || static_cast<std::int64_t>(rows.size()) < params_.min_samples_split ||
        pure) {
      return id;
    }
    const auto split = best_split(data_, rows, params_.min_gain);
    if (!split) return id;

    std::vector<std::size_t> left, right;
    partition(data_, rows, *split, left, right);
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Dataset& data_;
  const TreeParams& params_;
  Tree tree_;
};

class RegressionBuilder {
 public:
  RegressionBuilder(const Dataset& data, std::span<const double> targets, const TreeParams& params)
      : data_(data), targets_(targets), params_(params) {}

  Tree build() {
    std::vector<std::size_t> rows(data_.size());
    std::iota(rows.begin(), rows.end(), 0);
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(const std::vector<std::size_t>& rows, std::int32_t depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    TreeNode leaf;
    double sum = 0.0;
    for (auto i : rows) sum += targets_[i];
    leaf.value = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
    leaf.counts = counts_of(data_, rows);
    tree_.nodes.push_back(leaf);

    if (depth >= params_.max_depth || static_cast<std::int64_t>(rows.size()) < params_.min_samples_split) {
      return id;
    }
    const auto split = best_regression_split(data_, targets_, rows, params_.min_gain);
    if (!split) return id;

    std::vector<std::size_t> left, right;
    partition(data_, rows, *split, left, right);
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Dataset& data_;
  std::span<const double> targets_;
  const TreeParams& params_;
  Tree tree_;
};

}  // namespace

Dataset Dataset::from_kpis(std::span<const UserKpi> kpis) {
  Dataset d(kNumFeatures);
  for (const auto& k : kpis) {
    const FeatureVector x = features_of(k);
    d.add(x, static_cast<int>(index_of(k.slice)));
  }
  return d;
}

void Dataset::add(std::span<const double> row, int label) {
  if (row.size() != n_features_) throw Error("dataset: row has wrong feature count");
  if (label < 0 || label >= static_cast<int>(kNumClasses)) throw Error("dataset: label out of range");
  values_.insert(values_.end(), row.begin(), row.end());
  labels_.push_back(label);
}

ClassCounts Dataset::class_counts() const {
  ClassCounts counts{};
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

void validate_tree_params(const TreeParams& p) {
  if (p.max_depth < 1) throw ValidationError("tree: max_depth must be >= 1");
  if (p.min_samples_split < 2) throw ValidationError("tree: min_samples_split must be >= 2");
  if (!(p.min_gain >= 0.0)) throw ValidationError("tree: min_gain must be >= 0");
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
  if (nodes.empty()) throw Error("tree: not fitted");
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) {
    const auto next = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
    node = &nodes[static_cast<std::size_t>(next)];
  }
  return *node;
}

std::int32_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::int32_t> depth(nodes.size(), 0);
  std::int32_t deepest = 0;
  // Children always follow their parent in depth-first order.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    deepest = std::max(deepest, depth[i]);
    if (n.is_leaf()) continue;
    depth[static_cast<std::size_t>(n.left)] = depth[i] + 1;
    depth[static_cast<std::size_t>(n.right)] = depth[i] + 1;
  }
  return deepest;
}

double gini(const ClassCounts& counts) {
  const auto n = total(counts);
  if (n == 0) return 0.0;
  double sum_sq = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

std::optional<Split> best_split(const Dataset& data, std::span<const std::size_t> rows, double min_gain) {
  if (rows.size() < 2) return std::nullopt;
  const ClassCounts parent = counts_of(data, rows);
  const double parent_gini = gini(parent);
  const auto n = static_cast<double>(rows.size());

  std::optional<Split> best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t f = 0; f < data.n_features(); ++f) {
    sort_by_feature(data, order, f);
    ClassCounts left{};
    ClassCounts right = parent;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const auto label = static_cast<std::size_t>(data.label(order[k]));
      ++left[label];
      --right[label];
      const double a = data.at(order[k], f);
      const double b = data.at(order[k + 1], f);
      if (!(a < b)) continue;
      const double nl = static_cast<double>(k + 1);
      const double gain = parent_gini - (nl / n) * gini(left) - ((n - nl) / n) * gini(right);
      if (!best || gain > best->gain + kTieTolerance) best = Split{f, midpoint(a, b), gain};
    }
  }
  if (!best || best->gain < min_gain) return std::nullopt;
  return best;
}

std::optional<Split> best_split(const Dataset& data, double min_gain) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return best_split(data, rows, min_gain);
}

std::optional<Split> best_regression_split(const Dataset& data, std::span<const double> targets,
                                           std::span<const std::size_t> rows, double min_gain) {
  if (rows.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(rows.size());
  double sum = 0.0, sum_sq = 0.0;
  for (auto i : rows) {
    sum += targets[i];
    sum_sq += targets[i] * targets[i];
  }
  const double parent_sse = sum_sq - sum * sum / n;

  std::optional<Split> best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t f = 0; f < data.n_features(); ++f) {
    sort_by_feature(data, order, f);
    double left_sum = 0.0, left_sq = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const double t = targets[order[k]];
      left_sum += t;
      left_sq += t * t;
      const double a = data.at(order[k], f);
      const double b = data.at(order[k + 1], f);
      if (!(a < b)) continue;
      const double nl = static_cast<double>(k + 1);
      const double nr = n - nl;
      const double right_sum = sum - left_sum;
      const double right_sq = sum_sq - left_sq;
      const double sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
      const double gain = (parent_sse - sse) / n;
      if (!best || gain > best->gain + kTieTolerance) best = Split{f, midpoint(a, b), gain};
    }
  }
  if (!best || best->gain < min_gain) return std::nullopt;
  return best;
}

Tree fit_tree(const Dataset& data, const TreeParams& params) {
  if (data.empty()) throw ValidationError("empty dataset");
  validate_tree_params(params);
  return ClassificationBuilder(data, params).build();
}

Tree fit_regression_tree(const Dataset& data, std::span<const double> targets, const TreeParams& params) {
  if (data.empty()) throw ValidationError("empty dataset");
  if (targets.size() != data.size()) throw Error("regression tree: target count mismatch");
  validate_tree_params(params);
  return RegressionBuilder(data, targets, params).build();
}

ClassProbs predict_tree(const Tree& tree, std::span<const double> x) { return tree.leaf_for(x).probs; }

int argmax_class(const ClassProbs& probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace slicever::tree
