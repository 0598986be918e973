// Discrete-time gNB emulator. Each window is `tti_per_window` 1 ms TTIs; in
// every TTI traffic is enqueued per user, then each slice's PRB share is
// scheduled among its backlogged users by the slice's policy.
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "slicever/domain.h"

namespace slicever::sim {

// On/off modulated Poisson packet source. `burst_on_prob` is the per-TTI
// probability that an ON user switches OFF, `burst_off_prob` the probability
// that an OFF user switches ON, so the stationary ON share is
// burst_off_prob / (burst_on_prob + burst_off_prob).
struct SliceTrafficProfile {
  double mean_arrival_kbps = 0.0;
  std::int32_t packet_size_bytes = 1500;
  double burst_on_prob = 0.0;
  double burst_off_prob = 1.0;

  bool operator==(const SliceTrafficProfile&) const = default;
};

void validate_profile(const SliceTrafficProfile& profile);

// Expected packets per TTI while ON.
double packets_per_tti(const SliceTrafficProfile& profile);

inline constexpr double kMinSpectralEff = 36.0;
inline constexpr double kMaxSpectralEff = 1404.0;
inline constexpr double kPfBeta = 0.1;

struct SimConfig {
  std::int32_t total_prbs = 50;
  std::int32_t tti_per_window = 250;
  std::int32_t users_per_slice = 6;
  std::array<SliceTrafficProfile, kNumSlices> traffic = default_traffic();
  double fading_sigma = 0.5;
  double median_spectral_eff = 360.0;  // bits per PRB per TTI
  // Drop-tail cap per user queue; arrivals beyond it are counted as dropped.
  std::int64_t max_queue_bytes = 1'000'000;
  std::uint64_t seed = 1;

  double window_seconds() const { return tti_per_window * 1e-3; }
  static std::array<SliceTrafficProfile, kNumSlices> default_traffic();
  bool operator==(const SimConfig&) const = default;
};

void validate_sim_config(const SimConfig& config);

// FIFO of packets stored as runs of equal-size packets. The head packet may be
// partially transmitted; it counts as sent only once fully drained.
class PacketQueue {
 public:
  void push(std::int64_t packet_bits, std::int64_t count = 1);
  // Drains up to `bits`; returns the number of packets completed.
  std::int64_t serve(std::int64_t bits);
  std::int64_t bits() const { return bits_; }
  bool empty() const { return bits_ == 0; }

 private:
  struct Run {
    std::int64_t packet_bits;
    std::int64_t count;
  };
  std::deque<Run> runs_;
  std::int64_t head_sent_bits_ = 0;
  std::int64_t bits_ = 0;
};

struct UserState {
  std::int64_t user_id = 0;
  SliceId slice = SliceId::kEmbb;
  PacketQueue queue;
  double spectral_eff = 360.0;
  double ema_throughput_mbps = 0.0;
  bool burst_on = false;
};

// Returns the bits enqueued this TTI and advances the user's burst state.
std::int64_t arrivals(const SliceTrafficProfile& profile, UserState& user, std::mt19937_64& rng);

// Scheduler view of one user for a single TTI.
struct SchedCandidate {
  std::int64_t user_id = 0;
  std::int64_t need_prbs = 0;      // PRBs needed to drain the queue; 0 = not backlogged
  double spectral_eff = 1.0;       // bits per PRB
  double served_bits = 0.0;        // served so far in this window
  double ema_throughput_mbps = 0.0;
};

inline constexpr std::int64_t kSaturated = std::numeric_limits<std::int64_t>::max() / 4;

// PRB-by-PRB cycle over backlogged users starting at `rotation mod n`;
// uncapped demand gives floor(prbs/n) each with the remainder from the
// rotation point onward.
std::vector<std::int32_t> schedule_rr(std::span<const SchedCandidate> users, std::int32_t prbs,
                                      std::uint64_t rotation);

// Greedy max-min: each PRB goes to the backlogged user with the least bits
// served so far this window (ties to the lowest user_id).
std::vector<std::int32_t> schedule_wf(std::span<const SchedCandidate> users, std::int32_t prbs);

// Each PRB goes to the user maximizing spectral_eff / (provisional ema + 1e-6),
// where the provisional ema folds in the bits served so far this window.
std::vector<std::int32_t> schedule_pf(std::span<const SchedCandidate> users, std::int32_t prbs,
                                      double window_seconds, double beta = kPfBeta);

struct KpiReport {
  std::int64_t window_id = 0;
  std::vector<UserKpi> users;
  bool action_rejected = false;

  bool operator==(const KpiReport&) const = default;
};

// Per-user accounting for one window, for invariant checks.
struct UserWindowTrace {
  std::int64_t arrived_bits = 0;  // admitted into the queue
  std::int64_t dropped_bits = 0;  // rejected by the queue cap
  std::int64_t served_bits = 0;
  std::int64_t queue_start_bits = 0;
  std::int64_t queue_end_bits = 0;
  std::int64_t prbs_granted = 0;
  // PRBs granted in a TTI where the user's queue was empty at scheduling time
  // while another user of the slice was backlogged.
  std::int64_t idle_grants = 0;
};

struct WindowTrace {
  std::vector<UserWindowTrace> users;
  std::array<std::int64_t, kNumSlices> prbs_granted{};
  std::array<std::int64_t, kNumSlices> prbs_offered{};
  SlicingAction applied_action;
};

struct WindowResult {
  KpiReport report;
  std::vector<std::string> violations;  // non-empty iff the action was rejected
  WindowTrace trace;
};

struct DriftSpec {
  SliceId slice = SliceId::kEmbb;
  // One of: mean_arrival_kbps, packet_size_bytes, burst_on_prob,
  // burst_off_prob, fading_sigma.
  std::string parameter;
  double multiplier = 1.0;
  std::int64_t start_window = 0;

  bool operator==(const DriftSpec&) const = default;
};

void validate_drift(const DriftSpec& spec);

class RanSimulator {
 public:
  explicit RanSimulator(SimConfig config);

  // Runs one control window. An action that fails validate_action is
  // rejected: the previous valid action is applied and the report flagged.
  WindowResult run_window(const SlicingAction& action);

  // Scales a traffic/fading parameter of one slice from `start_window` on.
  void inject_drift(const DriftSpec& spec);

  const SimConfig& config() const { return config_; }
  std::int64_t next_window_id() const { return next_window_; }
  const std::vector<UserState>& users() const { return users_; }
  const SliceTrafficProfile& effective_profile(SliceId s) const { return profiles_[index_of(s)]; }
  const SlicingAction& last_valid_action() const { return last_valid_; }

  static SlicingAction equal_split(std::int32_t total_prbs, SchedulerPolicy policy);

 private:
  void apply_due_drifts();
  void redraw_channels();
  void schedule_slice(SliceId slice, const SliceAllocation& alloc, WindowTrace& trace,
                      std::vector<std::int64_t>& packets);

  SimConfig config_;
  std::mt19937_64 rng_;
  std::vector<UserState> users_;
  std::array<SliceTrafficProfile, kNumSlices> profiles_;
  std::array<double, kNumSlices> fading_scale_{1.0, 1.0, 1.0};
  std::array<std::uint64_t, kNumSlices> rr_rotation_{};
  std::vector<DriftSpec> pending_drifts_;
  std::vector<double> window_served_bits_;
  SlicingAction last_valid_;
  std::int64_t next_window_ = 0;
};

}  // namespace slicever::sim
