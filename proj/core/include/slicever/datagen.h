// Synthetic labeled KPI generation (Gaussian copula over truncated Gaussian
// marginals), stratified splitting and CSV persistence.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "slicever/domain.h"

namespace slicever::datagen {

using Matrix3 = std::array<std::array<double, kNumFeatures>, kNumFeatures>;

// Marginals are N(mean, stddev) truncated to [0, inf); `correlation` couples
// them through a Gaussian copula.
struct SliceKpiDistribution {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> stddev{1.0, 1.0, 1.0};
  Matrix3 correlation{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};

  bool operator==(const SliceKpiDistribution&) const = default;
};

struct GenConfig {
  std::array<SliceKpiDistribution, kNumSlices> slices{};
  std::size_t n_samples = 10'000;
  std::array<double, kNumSlices> class_weights{1.0, 1.0, 1.0};
  // Pulls the eMBB and mMTC tx_packets means toward their midpoint:
  // mean' = (1 - overlap) * mean + overlap * midpoint.
  double overlap = 0.5;
  std::uint64_t seed = 42;

  // Scenario presets calibrated to the two agent objectives.
  static GenConfig embb_oriented();
  static GenConfig urllc_oriented();

  bool operator==(const GenConfig&) const = default;
};

void validate_gen_config(const GenConfig& config);

// Lower-triangular L with L L^T = corr. Accepts positive semi-definite input;
// throws ValidationError for asymmetric, non-unit-diagonal or indefinite matrices.
Matrix3 cholesky_psd(const Matrix3& corr);

// Per-slice sample counts: largest-remainder apportionment of n by weight.
std::array<std::size_t, kNumSlices> class_counts(std::size_t n, const std::array<double, kNumSlices>& weights);

// Effective per-slice means after applying the overlap knob.
std::array<std::array<double, kNumFeatures>, kNumSlices> effective_means(const GenConfig& config);

// Mean of N(mean, stddev) truncated to [0, inf).
double truncated_mean(double mean, double stddev);

std::vector<UserKpi> sample_dataset(const GenConfig& config);
std::vector<UserKpi> sample_dataset(const GenConfig& config, std::mt19937_64& rng);

struct SplitResult {
  std::vector<UserKpi> subset;
  std::vector<UserKpi> remainder;
};

// Per class, round(fraction * n_c) samples drawn without replacement; both
// halves keep the corpus order. Throws when a present class would get zero.
SplitResult stratified_split(std::span<const UserKpi> dataset, double fraction, std::mt19937_64& rng);

inline constexpr const char* kCsvHeader = "window_id,user_id,slice,tx_bitrate_mbps,tx_packets,dl_buffer_bytes";

struct CsvData {
  std::vector<UserKpi> rows;
  std::size_t imputed = 0;  // numeric cells filled with the column median
};

CsvData read_csv(std::istream& in);
void write_csv(std::ostream& out, std::span<const UserKpi> rows);
CsvData load_csv(const std::filesystem::path& path);
void save_csv(std::span<const UserKpi> rows, const std::filesystem::path& path);

}  // namespace slicever::datagen
