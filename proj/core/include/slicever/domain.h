// Shared value types for the slice verification harness: slice and scheduler
// enumerations, per-user KPI records, slicing actions and the reference
// feature statistics used for normalization and drift binning.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace slicever {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or input that was rejected before any work started.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Class index order is fixed: EMBB=0, MMTC=1, URLLC=2.
enum class SliceId : std::uint8_t { kEmbb = 0, kMmtc = 1, kUrllc = 2 };

inline constexpr std::size_t kNumSlices = 3;
inline constexpr std::array<SliceId, kNumSlices> kAllSlices = {SliceId::kEmbb, SliceId::kMmtc,
                                                               SliceId::kUrllc};

constexpr std::size_t index_of(SliceId s) { return static_cast<std::size_t>(s); }
SliceId slice_from_index(std::size_t i);

// Wire names: "embb" | "mmtc" | "urllc".
std::string_view slice_name(SliceId s);
std::optional<SliceId> parse_slice(std::string_view name);
// Display names: "eMBB" | "mMTC" | "URLLC".
std::string_view slice_label(SliceId s);

enum class SchedulerPolicy : std::uint8_t { kRoundRobin = 0, kWaterfilling = 1, kProportionalFair = 2 };

// Wire names: "RR" | "WF" | "PF".
std::string_view scheduler_name(SchedulerPolicy p);
std::optional<SchedulerPolicy> parse_scheduler(std::string_view name);

inline constexpr std::size_t kNumFeatures = 3;

// (tx_bitrate_mbps, tx_packets, dl_buffer_bytes), in that order.
using FeatureVector = std::array<double, kNumFeatures>;

struct UserKpi {
  std::int64_t user_id = 0;
  SliceId slice = SliceId::kEmbb;
  double tx_bitrate_mbps = 0.0;
  std::int64_t tx_packets = 0;
  std::int64_t dl_buffer_bytes = 0;
  std::int64_t window_id = 0;

  bool operator==(const UserKpi&) const = default;
};

FeatureVector features_of(const UserKpi& kpi);

// Throws ValidationError naming the first field that is negative or non-finite.
void check_kpi(const UserKpi& kpi);

struct SliceAllocation {
  std::int32_t prbs = 0;
  SchedulerPolicy scheduler = SchedulerPolicy::kRoundRobin;

  bool operator==(const SliceAllocation&) const = default;
};

struct SlicingAction {
  std::array<SliceAllocation, kNumSlices> slices{};

  SliceAllocation& operator[](SliceId s) { return slices[index_of(s)]; }
  const SliceAllocation& operator[](SliceId s) const { return slices[index_of(s)]; }
  bool operator==(const SlicingAction&) const = default;
};

// Violations are data; an empty list means the action is admissible.
struct ActionValidation {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ActionValidation validate_action(const SlicingAction& action, std::int32_t total_prbs);

inline constexpr std::size_t kHistogramBins = 10;
inline constexpr double kEdgeEpsilon = 1e-9;

// Per-feature summary of a reference dataset. `edges` hold the 0,10,...,100
// nearest-rank percentiles made strictly increasing; `bin_props` is the share
// of the reference samples falling in each of the ten bins.
struct FeatureStats {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> stddev{};
  std::array<std::array<double, kHistogramBins + 1>, kNumFeatures> edges{};
  std::array<std::array<double, kHistogramBins>, kNumFeatures> bin_props{};
  std::size_t count = 0;

  bool operator==(const FeatureStats&) const = default;
};

FeatureStats feature_stats(std::span<const UserKpi> dataset);
FeatureStats feature_stats(std::span<const FeatureVector> samples);

// Bin of `value` against ten-bin edges: values below the first interior edge
// land in bin 0, values at or above the last interior edge in bin 9.
std::size_t histogram_bin(const std::array<double, kHistogramBins + 1>& edges, double value);

FeatureVector zscore_normalize(const FeatureVector& x, const FeatureStats& stats);

// Nearest-rank percentile of an ascending-sorted sequence, q in [0, 1].
// Rank is ceil(q * n) (1-based) clamped to [1, n].
double nearest_rank(std::span<const double> sorted, double q);

}  // namespace slicever
