#include "slicever/datagen.h"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

namespace slicever::datagen {

namespace {

constexpr std::size_t kPackets = 1;

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double std_normal_quantile(double p) {
  static const boost::math::normal_distribution<double> kStd(0.0, 1.0);
  return boost::math::quantile(kStd, p);
}

// Inverse CDF of N(mean, sd) truncated to [0, inf) at probability u.
double truncated_quantile(double mean, double sd, double u) {
  const double lower = std_normal_cdf(-mean / sd);
  double p = lower + u * (1.0 - lower);
  p = std::clamp(p, 1e-15, 1.0 - 1e-15);
  return std::max(0.0, mean + sd * std_normal_quantile(p));
}

SliceKpiDistribution make(std::array<double, 3> mean, std::array<double, 3> sd, double r_rate_pkts,
                          double r_rate_buf, double r_pkts_buf) {
  SliceKpiDistribution d;
  d.mean = mean;
  d.stddev = sd;
  d.correlation = {{{1.0, r_rate_pkts, r_rate_buf}, {r_rate_pkts, 1.0, r_pkts_buf}, {r_rate_buf, r_pkts_buf, 1.0}}};
  return d;
}

}  // namespace

GenConfig GenConfig::embb_oriented() {
  GenConfig c;
  // Throughput-seeking agent: eMBB users trade bitrate against backlog and
  // drift toward the mMTC packet-count region.
  c.slices[index_of(SliceId::kEmbb)] = make({1.6, 82.0, 6000.0}, {0.6, 15.0, 2500.0}, 0.6, 0.1, 0.1);
  c.slices[index_of(SliceId::kMmtc)] = make({1.4, 35.0, 6000.0}, {0.6, 15.0, 2500.0}, 0.6, 0.1, 0.1);
  c.slices[index_of(SliceId::kUrllc)] = make({0.8, 60.0, 300.0}, {0.3, 12.0, 150.0}, 0.5, 0.0, 0.1);
  return c;
}

GenConfig GenConfig::urllc_oriented() {
  GenConfig c;
  // Latency-seeking agent: URLLC backlog pinned low, eMBB clearly apart.
  c.slices[index_of(SliceId::kEmbb)] = make({6.0, 110.0, 60000.0}, {1.2, 25.0, 15000.0}, 0.7, 0.2, 0.2);
  c.slices[index_of(SliceId::kMmtc)] = make({1.0, 40.0, 1800.0}, {0.35, 12.0, 1000.0}, 0.6, 0.1, 0.2);
  c.slices[index_of(SliceId::kUrllc)] = make({1.3, 48.0, 600.0}, {0.35, 12.0, 400.0}, 0.6, 0.0, 0.1);
  return c;
}

Matrix3 cholesky_psd(const Matrix3& corr) {
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (std::abs(corr[i][i] - 1.0) > 1e-12) throw ValidationError("correlation matrix must have unit diagonal");
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (!std::isfinite(corr[i][j]) || std::abs(corr[i][j] - corr[j][i]) > 1e-12) {
        throw ValidationError("correlation matrix must be symmetric");
      }
    }
  }
  Matrix3 l{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double d = corr[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (d < -1e-10) throw ValidationError("correlation matrix is not positive semi-definite");
    const double pivot = d > 1e-12 ? std::sqrt(d) : 0.0;
    l[j][j] = pivot;
    for (std::size_t i = j + 1; i < kNumFeatures; ++i) {
      double s = corr[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (pivot > 0.0) {
        l[i][j] = s / pivot;
      } else if (std::abs(s) > 1e-10) {
        throw ValidationError("correlation matrix is not positive semi-definite");
      }
    }
  }
  return l;
}

void validate_gen_config(const GenConfig& c) {
  if (c.n_samples == 0) throw ValidationError("gen: n_samples must be > 0");
  if (!(c.overlap >= 0.0 && c.overlap <= 1.0)) throw ValidationError("gen: overlap must lie in [0,1]");
  double weight_sum = 0.0;
  for (double w : c.class_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("gen: class weights must be >= 0");
    weight_sum += w;
  }
  if (!(weight_sum > 0.0)) throw ValidationError("gen: class weights sum to zero");
  for (const auto& s : c.slices) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      if (!(s.stddev[f] > 0.0) || !std::isfinite(s.stddev[f])) throw ValidationError("gen: stddev must be > 0");
      if (!std::isfinite(s.mean[f])) throw ValidationError("gen: mean must be finite");
    }
    cholesky_psd(s.correlation);
  }
}

std::array<std::size_t, kNumSlices> class_counts(std::size_t n, const std::array<double, kNumSlices>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::array<std::size_t, kNumSlices> counts{};
  std::array<double, kNumSlices> frac{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < kNumSlices; ++s) {
    const double exact = static_cast<double>(n) * weights[s] / total;
    counts[s] = static_cast<std::size_t>(std::floor(exact));
    frac[s] = exact - std::floor(exact);
    assigned += counts[s];
  }
  std::array<std::size_t, kNumSlices> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % kNumSlices]];
  return counts;
}

std::array<std::array<double, kNumFeatures>, kNumSlices> effective_means(const GenConfig& c) {
  std::array<std::array<double, kNumFeatures>, kNumSlices> means{};
  for (std::size_t s = 0; s < kNumSlices; ++s) means[s] = c.slices[s].mean;
  auto& embb = means[index_of(SliceId::kEmbb)][kPackets];
  auto& mmtc = means[index_of(SliceId::kMmtc)][kPackets];
  const double mid = 0.5 * (embb + mmtc);
  embb = (1.0 - c.overlap) * embb + c.overlap * mid;
  mmtc = (1.0 - c.overlap) * mmtc + c.overlap * mid;
  return means;
}

double truncated_mean(double mean, double sd) {
  const double a = -mean / sd;
  const double tail = 1.0 - std_normal_cdf(a);
  const double density = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
  return mean + sd * density / tail;
}

std::vector<UserKpi> sample_dataset(const GenConfig& config) {
  std::mt19937_64 rng(config.seed);
  return sample_dataset(config, rng);
}

std::vector<UserKpi> sample_dataset(const GenConfig& config, std::mt19937_64& rng) {
  validate_gen_config(config);
  const auto means = effective_means(config);
  std::array<Matrix3, kNumSlices> chol{};
  for (std::size_t s = 0; s < kNumSlices; ++s) chol[s] = cholesky_psd(config.slices[s].correlation);

  const auto counts = class_counts(config.n_samples, config.class_weights);
  std::vector<SliceId> labels;
  labels.reserve(config.n_samples);
  for (std::size_t s = 0; s < kNumSlices; ++s) labels.insert(labels.end(), counts[s], slice_from_index(s));
  std::shuffle(labels.begin(), labels.end(), rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<UserKpi> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto s = index_of(labels[i]);
    const auto& dist = config.slices[s];
    std::array<double, kNumFeatures> e{};
    for (double& v : e) v = gauss(rng);
    std::array<double, kNumFeatures> x{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double z = 0.0;
      for (std::size_t k = 0; k <= f; ++k) z += chol[s][f][k] * e[k];
      x[f] = truncated_quantile(means[s][f], dist.stddev[f], std_normal_cdf(z));
    }
    UserKpi kpi;
    kpi.user_id = static_cast<std::int64_t>(i);
    kpi.slice = labels[i];
    kpi.tx_bitrate_mbps = x[0];
    kpi.tx_packets = std::llround(x[1]);
    kpi.dl_buffer_bytes = std::llround(x[2]);
    kpi.window_id = 0;
    out.push_back(kpi);
  }
  return out;
}

SplitResult stratified_split(std::span<const UserKpi> dataset, double fraction, std::mt19937_64& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split: fraction must lie in (0,1)");
  std::array<std::vector<std::size_t>, kNumSlices> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[index_of(dataset[i].slice)].push_back(i);

  std::vector<bool> chosen(dataset.size(), false);
  for (std::size_t s = 0; s < kNumSlices; ++s) {
    auto& rows = by_class[s];
    if (rows.empty()) continue;
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    if (take == 0) {
      throw ValidationError("split: fraction yields no samples for class " + std::string(slice_name(slice_from_index(s))));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t k = 0; k < take; ++k) chosen[rows[k]] = true;
  }
  SplitResult result;
  for (std::size_t i = 0; i < dataset.size(); ++i) (chosen[i] ? result.subset : result.remainder).push_back(dataset[i]);
  return result;
}

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

[[noreturn]] void row_error(std::size_t line_no, const std::string& what) {
  throw ValidationError("csv line " + std::to_string(line_no) + ": " + what);
}

template <class T>
std::optional<T> parse_number(std::string_view cell, std::size_t line_no, const char* column) {
  if (cell.empty()) return std::nullopt;
  T value{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    row_error(line_no, std::string("cannot parse ") + column + " '" + std::string(cell) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) row_error(line_no, std::string("non-finite ") + column);
  }
  if (value < 0) row_error(line_no, std::string("negative ") + column);
  return value;
}

template <class T>
T required(std::optional<T> v, std::size_t line_no, const char* column) {
  if (!v) row_error(line_no, std::string("missing ") + column);
  return *v;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

CsvData read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ValidationError(std::string("csv: missing header; expected ") + kCsvHeader);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) {
    throw ValidationError(std::string("csv: header mismatch; expected ") + kCsvHeader);
  }

  struct Partial {
    UserKpi kpi;
    std::optional<double> bitrate;
    std::optional<std::int64_t> packets;
    std::optional<std::int64_t> buffer;
  };
  std::vector<Partial> partial;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_cells(line);
    if (cells.size() != 6) row_error(line_no, "expected 6 columns, got " + std::to_string(cells.size()));
    Partial p;
    p.kpi.window_id = required(parse_number<std::int64_t>(cells[0], line_no, "window_id"), line_no, "window_id");
    p.kpi.user_id = required(parse_number<std::int64_t>(cells[1], line_no, "user_id"), line_no, "user_id");
    const auto slice = parse_slice(cells[2]);
    if (!slice) row_error(line_no, "unknown slice '" + std::string(cells[2]) + "'");
    p.kpi.slice = *slice;
    p.bitrate = parse_number<double>(cells[3], line_no, "tx_bitrate_mbps");
    p.packets = parse_number<std::int64_t>(cells[4], line_no, "tx_packets");
    p.buffer = parse_number<std::int64_t>(cells[5], line_no, "dl_buffer_bytes");
    partial.push_back(p);
  }

  std::vector<double> bitrates, packets, buffers;
  for (const auto& p : partial) {
    if (p.bitrate) bitrates.push_back(*p.bitrate);
    if (p.packets) packets.push_back(static_cast<double>(*p.packets));
    if (p.buffer) buffers.push_back(static_cast<double>(*p.buffer));
  }
  auto median_or_throw = [](const std::vector<double>& v, const char* column) {
    if (v.empty()) throw ValidationError(std::string("csv: column ") + column + " has no values to impute from");
    return median_of(v);
  };

  CsvData data;
  data.rows.reserve(partial.size());
  for (auto& p : partial) {
    if (!p.bitrate) {
      p.kpi.tx_bitrate_mbps = median_or_throw(bitrates, "tx_bitrate_mbps");
      ++data.imputed;
    } else {
      p.kpi.tx_bitrate_mbps = *p.bitrate;
    }
    if (!p.packets) {
      p.kpi.tx_packets = std::llround(median_or_throw(packets, "tx_packets"));
      ++data.imputed;
    } else {
      p.kpi.tx_packets = *p.packets;
    }
    if (!p.buffer) {
      p.kpi.dl_buffer_bytes = std::llround(median_or_throw(buffers, "dl_buffer_bytes"));
      ++data.imputed;
    } else {
      p.kpi.dl_buffer_bytes = *p.buffer;
    }
    data.rows.push_back(p.kpi);
  }
  return data;
}

void write_csv(std::ostream& out, std::span<const UserKpi> rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.window_id << ',' << r.user_id << ',' << slice_name(r.slice) << ',' << format_double(r.tx_bitrate_mbps)
        << ',' << r.tx_packets << ',' << r.dl_buffer_bytes << '\n';
  }
}

CsvData load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open " + path.string());
  return read_csv(in);
}

void save_csv(std::span<const UserKpi> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("csv: cannot write " + path.string());
  write_csv(out, rows);
  if (!out) throw Error("csv: write failed for " + path.string());
}

}  // namespace slicever::datagen
