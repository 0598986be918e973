#include "slicever/metrics.h"

namespace slicever::metrics {

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw Error("confusion_matrix: length mismatch");
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int t = labels[i];
    const int p = preds[i];
    if (t < 0 || p < 0 || t >= static_cast<int>(kNumClasses) || p >= static_cast<int>(kNumClasses)) {
      throw Error("confusion_matrix: class index out of range");
    }
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

ClassificationReport classification_report(const ConfusionMatrix& matrix) {
  ClassificationReport r;
  r.matrix = matrix;
  std::int64_t trace = 0;
  std::array<std::int64_t, kNumClasses> row_sum{}, col_sum{};
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      if (matrix[t][p] < 0) throw Error("classification_report: negative count");
      row_sum[t] += matrix[t][p];
      col_sum[p] += matrix[t][p];
      r.total += matrix[t][p];
    }
    trace += matrix[t][t];
  }
  if (r.total == 0) throw Error("no samples");

  const auto total = static_cast<double>(r.total);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& m = r.per_class[c];
    const auto hit = static_cast<double>(matrix[c][c]);
    m.precision = col_sum[c] > 0 ? hit / static_cast<double>(col_sum[c]) : 0.0;
    m.recall = row_sum[c] > 0 ? hit / static_cast<double>(row_sum[c]) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.support = row_sum[c];

    r.macro.precision += m.precision / kNumClasses;
    r.macro.recall += m.recall / kNumClasses;
    r.macro.f1 += m.f1 / kNumClasses;
    const double w = static_cast<double>(m.support) / total;
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  r.macro.support = r.total;
  r.weighted.support = r.total;
  r.accuracy = static_cast<double>(trace) / total;
  return r;
}

}  // namespace slicever::metrics
