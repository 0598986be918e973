// The control xApp: reward computation, quantile state encoding, a tabular
// Q-learning policy and a hill-climbing baseline over a fixed action catalog.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "slicever/domain.h"
#include "slicever/ran_sim.h"

namespace slicever::agent {

enum class AgentMode : std::uint8_t { kEmbbOriented, kUrllcOriented };

std::string_view mode_name(AgentMode m);  // "embb" | "urllc"
std::optional<AgentMode> parse_mode(std::string_view name);

// EMBB_ORIENTED: mean eMBB bitrate (Mbps). URLLC_ORIENTED: minus the mean
// URLLC buffer in MB. Throws Error("empty slice") if the target slice has no users.
double compute_reward(std::span<const UserKpi> users, AgentMode mode);

// Percent splits (eMBB/mMTC/URLLC) in catalog order.
inline constexpr std::array<std::array<int, kNumSlices>, 7> kSplitPercents = {{
    {60, 20, 20},
    {20, 60, 20},
    {20, 20, 60},
    {40, 40, 20},
    {40, 20, 40},
    {20, 40, 40},
    {34, 33, 33},
}};
inline constexpr std::array<SchedulerPolicy, 3> kCatalogSchedulers = {
    SchedulerPolicy::kRoundRobin, SchedulerPolicy::kWaterfilling, SchedulerPolicy::kProportionalFair};
inline constexpr std::size_t kNumActions = kSplitPercents.size() * kCatalogSchedulers.size();

// Index = split * 3 + scheduler, scheduler in RR, WF, PF order. PRB counts are
// the percent shares of total_prbs rounded by largest remainder, so every
// entry sums exactly to total_prbs.
class ActionCatalog {
 public:
  explicit ActionCatalog(std::int32_t total_prbs);

  const SlicingAction& operator[](std::size_t index) const { return actions_.at(index); }
  std::size_t size() const { return actions_.size(); }
  static std::size_t index_of(std::size_t split, SchedulerPolicy policy);
  static std::size_t split_of(std::size_t index) { return index / kCatalogSchedulers.size(); }

 private:
  std::vector<SlicingAction> actions_;
};

inline constexpr std::size_t kStateBins = 4;
inline constexpr std::size_t kNumStates = 4096;  // 4^6

// Quartile edges (25/50/75, nearest rank) of per-window slice means observed
// during a warm-up run.
struct StateReference {
  std::array<std::array<double, 3>, kNumSlices> bitrate_quartiles{};
  std::array<std::array<double, 3>, kNumSlices> buffer_quartiles{};

  bool operator==(const StateReference&) const = default;
};

StateReference build_state_reference(std::span<const sim::KpiReport> warmup);

// Digits, most significant first: eMBB bitrate, eMBB buffer, mMTC bitrate,
// mMTC buffer, URLLC bitrate, URLLC buffer. Each digit counts the reference
// quartile edges <= the slice mean.
std::uint32_t encode_state(std::span<const UserKpi> users, const StateReference& reference);

struct QParams {
  double alpha = 0.1;
  double gamma = 0.5;
  double epsilon = 0.1;

  bool operator==(const QParams&) const = default;
};

class QTable {
 public:
  QTable(std::size_t states = kNumStates, std::size_t actions = kNumActions, QParams params = {});

  double at(std::size_t s, std::size_t a) const;
  void set(std::size_t s, std::size_t a, double value);
  double max_value(std::size_t s) const;
  std::size_t argmax(std::size_t s) const;  // ties to lowest index

  // Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
  void update(std::size_t s, std::size_t a, double reward, std::size_t s_next);

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }
  const QParams& params() const { return params_; }

 private:
  void check(std::size_t s, std::size_t a) const;

  std::size_t states_;
  std::size_t actions_;
  QParams params_;
  std::vector<double> values_;
};

// Epsilon-greedy: uniform over actions with probability epsilon, else argmax.
std::size_t select_action(const QTable& q, std::size_t state, double epsilon, std::mt19937_64& rng);

// Hill-climbing baseline. Holds the last action while the reward improves;
// otherwise steps one position along a cycle of the seven splits that starts
// at the split favoring the mode's slice.
class HeuristicPolicy {
 public:
  HeuristicPolicy(AgentMode mode, std::int32_t total_prbs);

  // `last_reward` is the reward observed for the previously returned action;
  // pass nullopt on the first call.
  SlicingAction step(std::optional<double> last_reward);
  std::size_t current_index() const;

  static std::array<std::size_t, kSplitPercents.size()> split_cycle(AgentMode mode);

 private:
  AgentMode mode_;
  ActionCatalog catalog_;
  SchedulerPolicy scheduler_;
  std::array<std::size_t, kSplitPercents.size()> cycle_;
  std::size_t position_ = 0;
  std::optional<double> previous_reward_;
  bool started_ = false;
};

// Owns the learning loop state: one action per incoming report.
class QLearningAgent {
 public:
  QLearningAgent(AgentMode mode, std::int32_t total_prbs, StateReference reference, QParams params,
                 std::uint64_t seed);

  // Learns from the transition that ended in `users`, then picks the next action.
  SlicingAction act(std::span<const UserKpi> users);

  const QTable& table() const { return q_; }
  std::optional<std::size_t> last_action() const { return last_action_; }

 private:
  AgentMode mode_;
  ActionCatalog catalog_;
  StateReference reference_;
  QTable q_;
  std::mt19937_64 rng_;
  std::optional<std::size_t> last_state_;
  std::optional<std::size_t> last_action_;
};

}  // namespace slicever::agent
