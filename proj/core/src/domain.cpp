#include "slicever/domain.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace slicever {

SliceId slice_from_index(std::size_t i) {
  if (i >= kNumSlices) throw Error("slice index out of range: " + std::to_string(i));
  return static_cast<SliceId>(i);
}

std::string_view slice_name(SliceId s) {
  switch (s) {
    case SliceId::kEmbb:
      return "embb";
    case SliceId::kMmtc:
      return "mmtc";
    case SliceId::kUrllc:
      return "urllc";
  }
  return "unknown";
}

std::string_view slice_label(SliceId s) {
  switch (s) {
    case SliceId::kEmbb:
      return "eMBB";
    case SliceId::kMmtc:
      return "mMTC";
    case SliceId::kUrllc:
      return "URLLC";
  }
  return "unknown";
}

std::optional<SliceId> parse_slice(std::string_view name) {
  for (SliceId s : kAllSlices) {
    if (slice_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view scheduler_name(SchedulerPolicy p) {
  switch (p) {
    case SchedulerPolicy::kRoundRobin:
      return "RR";
    case SchedulerPolicy::kWaterfilling:
      return "WF";
    case SchedulerPolicy::kProportionalFair:
      return "PF";
  }
  return "unknown";
}

std::optional<SchedulerPolicy> parse_scheduler(std::string_view name) {
  for (auto p : {SchedulerPolicy::kRoundRobin, SchedulerPolicy::kWaterfilling,
                 SchedulerPolicy::kProportionalFair}) {
    if (scheduler_name(p) == name) return p;
  }
  return std::nullopt;
}

FeatureVector features_of(const UserKpi& kpi) {
  return {kpi.tx_bitrate_mbps, static_cast<double>(kpi.tx_packets),
          static_cast<double>(kpi.dl_buffer_bytes)};
}

void check_kpi(const UserKpi& kpi) {
  if (!std::isfinite(kpi.tx_bitrate_mbps) || kpi.tx_bitrate_mbps < 0.0) {
    throw ValidationError("invalid value: tx_bitrate_mbps");
  }
  if (kpi.tx_packets < 0) throw ValidationError("invalid value: tx_packets");
  if (kpi.dl_buffer_bytes < 0) throw ValidationError("invalid value: dl_buffer_bytes");
}

ActionValidation validate_action(const SlicingAction& action, std::int32_t total_prbs) {
  ActionValidation result;
  if (total_prbs <= 0) {
    result.violations.push_back("total_prbs " + std::to_string(total_prbs) + " <= 0");
    return result;
  }
  std::int64_t sum = 0;
  for (SliceId s : kAllSlices) {
    const auto prbs = action[s].prbs;
    if (prbs < 0) {
      result.violations.push_back("slice " + std::string(slice_name(s)) + " prbs " +
                                  std::to_string(prbs) + " < 0");
    }
    sum += prbs;
  }
  if (sum > total_prbs) {
    result.violations.push_back("sum " + std::to_string(sum) + " > " + std::to_string(total_prbs));
  }
  return result;
}

double nearest_rank(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("nearest_rank of empty sequence");
  const auto n = static_cast<double>(sorted.size());
  // The small slack keeps ceil(0.99 * 100) at 99 despite representation error.
  auto rank = static_cast<std::int64_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

std::size_t histogram_bin(const std::array<double, kHistogramBins + 1>& edges, double value) {
  // Interior edges are edges[1..9].
  const auto first = edges.begin() + 1;
  const auto last = edges.end() - 1;
  return static_cast<std::size_t>(std::upper_bound(first, last, value) - first);
}

FeatureStats feature_stats(std::span<const FeatureVector> samples) {
  if (samples.empty()) throw ValidationError("empty reference set");
  FeatureStats stats;
  stats.count = samples.size();
  const auto n = static_cast<double>(samples.size());
  std::vector<double> column(samples.size());
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i][f];

    const double mean = std::accumulate(column.begin(), column.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    stats.mean[f] = mean;
    stats.stddev[f] = std::sqrt(ss / n);

    std::sort(column.begin(), column.end());
    auto& edges = stats.edges[f];
    for (std::size_t b = 0; b <= kHistogramBins; ++b) {
      edges[b] = nearest_rank(column, static_cast<double>(b) / kHistogramBins);
    }
    for (std::size_t b = 1; b <= kHistogramBins; ++b) {
      // 1e-9 vanishes below one ulp for large magnitudes; fall back to the next double.
      const double floor = std::max(edges[b - 1] + kEdgeEpsilon,
                                    std::nextafter(edges[b - 1], std::numeric_limits<double>::infinity()));
      edges[b] = std::max(edges[b], floor);
    }

    auto& props = stats.bin_props[f];
    props.fill(0.0);
    for (double v : column) props[histogram_bin(edges, v)] += 1.0;
    for (double& p : props) p /= n;
  }
  return stats;
}

FeatureStats feature_stats(std::span<const UserKpi> dataset) {
  std::vector<FeatureVector> samples;
  samples.reserve(dataset.size());
  for (const auto& kpi : dataset) samples.push_back(features_of(kpi));
  return feature_stats(std::span<const FeatureVector>(samples));
}

FeatureVector zscore_normalize(const FeatureVector& x, const FeatureStats& stats) {
  FeatureVector z{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    z[f] = stats.stddev[f] > 0.0 ? (x[f] - stats.mean[f]) / stats.stddev[f] : 0.0;
  }
  return z;
}

}  // namespace slicever
