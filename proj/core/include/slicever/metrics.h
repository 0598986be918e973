// Confusion matrix and the precision / recall / F1 classification report.
#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "slicever/tree.h"

namespace slicever::metrics {

using tree::kNumClasses;

// rows = true class, columns = predicted class
using ConfusionMatrix = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct ClassificationReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double accuracy = 0.0;
  ClassMetrics macro;     // support = total
  ClassMetrics weighted;  // support = total
  ConfusionMatrix matrix{};
  std::int64_t total = 0;

  bool operator==(const ClassificationReport&) const = default;
};

// Zero-division convention: a metric with an empty denominator is 0.
// Throws Error("no samples") for an all-zero matrix.
ClassificationReport classification_report(const ConfusionMatrix& matrix);

}  // namespace slicever::metrics
