#include "slicever/agent.h"

#include <algorithm>
#include <numeric>

namespace slicever::agent {

std::string_view mode_name(AgentMode m) {
  return m == AgentMode::kEmbbOriented ? "embb" : "urllc";
}

std::optional<AgentMode> parse_mode(std::string_view name) {
  if (name == "embb") return AgentMode::kEmbbOriented;
  if (name == "urllc") return AgentMode::kUrllcOriented;
  return std::nullopt;
}

double compute_reward(std::span<const UserKpi> users, AgentMode mode) {
  const SliceId target = mode == AgentMode::kEmbbOriented ? SliceId::kEmbb : SliceId::kUrllc;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& u : users) {
    if (u.slice != target) continue;
    sum += mode == AgentMode::kEmbbOriented ? u.tx_bitrate_mbps : static_cast<double>(u.dl_buffer_bytes);
    ++n;
  }
  if (n == 0) throw Error("empty slice");
  const double mean = sum / static_cast<double>(n);
  return mode == AgentMode::kEmbbOriented ? mean : -mean / 1e6;
}

ActionCatalog::ActionCatalog(std::int32_t total_prbs) {
  if (total_prbs <= 0) throw ValidationError("catalog: total_prbs must be > 0");
  for (const auto& split : kSplitPercents) {
    // Largest-remainder rounding; ties go to the lower slice index.
    std::array<std::int32_t, kNumSlices> prbs{};
    std::array<std::int64_t, kNumSlices> remainder{};
    std::int32_t assigned = 0;
    for (std::size_t s = 0; s < kNumSlices; ++s) {
      const std::int64_t scaled = static_cast<std::int64_t>(split[s]) * total_prbs;
      prbs[s] = static_cast<std::int32_t>(scaled / 100);
      remainder[s] = scaled % 100;
      assigned += prbs[s];
    }
    std::array<std::size_t, kNumSlices> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total_prbs; ++k, ++assigned) ++prbs[order[k % kNumSlices]];

    for (SchedulerPolicy policy : kCatalogSchedulers) {
      SlicingAction action;
      for (std::size_t s = 0; s < kNumSlices; ++s) action.slices[s] = {prbs[s], policy};
      actions_.push_back(action);
    }
  }
}

std::size_t ActionCatalog::index_of(std::size_t split, SchedulerPolicy policy) {
  return split * kCatalogSchedulers.size() + static_cast<std::size_t>(policy);
}

StateReference build_state_reference(std::span<const sim::KpiReport> warmup) {
  if (warmup.empty()) throw ValidationError("state reference: empty warm-up");
  std::array<std::vector<double>, kNumSlices> bitrates;
  std::array<std::vector<double>, kNumSlices> buffers;
  for (const auto& report : warmup) {
    std::array<double, kNumSlices> rate_sum{}, buffer_sum{};
    std::array<std::size_t, kNumSlices> count{};
    for (const auto& u : report.users) {
      const auto s = index_of(u.slice);
      rate_sum[s] += u.tx_bitrate_mbps;
      buffer_sum[s] += static_cast<double>(u.dl_buffer_bytes);
      ++count[s];
    }
    for (std::size_t s = 0; s < kNumSlices; ++s) {
      if (count[s] == 0) continue;
      bitrates[s].push_back(rate_sum[s] / static_cast<double>(count[s]));
      buffers[s].push_back(buffer_sum[s] / static_cast<double>(count[s]));
    }
  }
  StateReference ref;
  for (std::size_t s = 0; s < kNumSlices; ++s) {
    if (bitrates[s].empty()) throw ValidationError("state reference: slice without users");
    std::sort(bitrates[s].begin(), bitrates[s].end());
    std::sort(buffers[s].begin(), buffers[s].end());
    for (std::size_t q = 0; q < 3; ++q) {
      const double level = 0.25 * static_cast<double>(q + 1);
      ref.bitrate_quartiles[s][q] = nearest_rank(bitrates[s], level);
      ref.buffer_quartiles[s][q] = nearest_rank(buffers[s], level);
    }
  }
  return ref;
}

namespace {

std::uint32_t quartile_bin(const std::array<double, 3>& edges, double value) {
  std::uint32_t bin = 0;
  for (double e : edges) bin += e <= value ? 1 : 0;
  return std::min<std::uint32_t>(bin, kStateBins - 1);
}

}  // namespace

std::uint32_t encode_state(std::span<const UserKpi> users, const StateReference& reference) {
  std::array<double, kNumSlices> rate_sum{}, buffer_sum{};
  std::array<std::size_t, kNumSlices> count{};
  for (const auto& u : users) {
    const auto s = index_of(u.slice);
    rate_sum[s] += u.tx_bitrate_mbps;
    buffer_sum[s] += static_cast<double>(u.dl_buffer_bytes);
    ++count[s];
  }
  std::uint32_t state = 0;
  for (std::size_t s = 0; s < kNumSlices; ++s) {
    const double n = count[s] > 0 ? static_cast<double>(count[s]) : 1.0;
    state = state * kStateBins + quartile_bin(reference.bitrate_quartiles[s], rate_sum[s] / n);
    state = state * kStateBins + quartile_bin(reference.buffer_quartiles[s], buffer_sum[s] / n);
  }
  return state;
}

QTable::QTable(std::size_t states, std::size_t actions, QParams params)
    : states_(states), actions_(actions), params_(params), values_(states * actions, 0.0) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(params.alpha) || !unit(params.gamma) || !unit(params.epsilon)) {
    throw ValidationError("q-table: alpha, gamma and epsilon must lie in [0,1]");
  }
  if (states == 0 || actions == 0) throw ValidationError("q-table: empty dimensions");
}

void QTable::check(std::size_t s, std::size_t a) const {
  if (s >= states_ || a >= actions_) {
    throw Error("q-table index out of range (" + std::to_string(s) + ", " + std::to_string(a) + ")");
  }
}

double QTable::at(std::size_t s, std::size_t a) const {
  check(s, a);
  return values_[s * actions_ + a];
}

void QTable::set(std::size_t s, std::size_t a, double value) {
  check(s, a);
  values_[s * actions_ + a] = value;
}

double QTable::max_value(std::size_t s) const { return at(s, argmax(s)); }

std::size_t QTable::argmax(std::size_t s) const {
  check(s, 0);
  const auto row = values_.begin() + static_cast<std::ptrdiff_t>(s * actions_);
  return static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(actions_)) - row);
}

void QTable::update(std::size_t s, std::size_t a, double reward, std::size_t s_next) {
  check(s, a);
  check(s_next, 0);
  double& q = values_[s * actions_ + a];
  q += params_.alpha * (reward + params_.gamma * max_value(s_next) - q);
}

std::size_t select_action(const QTable& q, std::size_t state, double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, q.actions() - 1);
    return pick(rng);
  }
  return q.argmax(state);
}

std::array<std::size_t, kSplitPercents.size()> HeuristicPolicy::split_cycle(AgentMode mode) {
  const std::size_t slice = index_of(mode == AgentMode::kEmbbOriented ? SliceId::kEmbb : SliceId::kUrllc);
  std::array<std::size_t, kSplitPercents.size()> cycle{};
  std::iota(cycle.begin(), cycle.end(), 0);
  std::stable_sort(cycle.begin(), cycle.end(), [&](std::size_t a, std::size_t b) {
    return kSplitPercents[a][slice] > kSplitPercents[b][slice];
  });
  return cycle;
}

HeuristicPolicy::HeuristicPolicy(AgentMode mode, std::int32_t total_prbs)
    : mode_(mode),
      catalog_(total_prbs),
      scheduler_(mode == AgentMode::kEmbbOriented ? SchedulerPolicy::kProportionalFair
                                                  : SchedulerPolicy::kRoundRobin),
      cycle_(split_cycle(mode)) {}

std::size_t HeuristicPolicy::current_index() const {
  return ActionCatalog::index_of(cycle_[position_], scheduler_);
}

SlicingAction HeuristicPolicy::step(std::optional<double> last_reward) {
  if (started_) {
    const bool improved = last_reward && previous_reward_ && *last_reward > *previous_reward_;
    if (!improved) position_ = (position_ + 1) % cycle_.size();
    if (last_reward) previous_reward_ = last_reward;
  }
  started_ = true;
  return catalog_[current_index()];
}

QLearningAgent::QLearningAgent(AgentMode mode, std::int32_t total_prbs, StateReference reference,
                               QParams params, std::uint64_t seed)
    : mode_(mode),
      catalog_(total_prbs),
      reference_(reference),
      q_(kNumStates, kNumActions, params),
      rng_(seed) {}

SlicingAction QLearningAgent::act(std::span<const UserKpi> users) {
  const double reward = compute_reward(users, mode_);
  const std::size_t state = encode_state(users, reference_);
  if (last_state_ && last_action_) q_.update(*last_state_, *last_action_, reward, state);
  const std::size_t action = select_action(q_, state, q_.params().epsilon, rng_);
  last_state_ = state;
  last_action_ = action;
  return catalog_[action];
}

}  // namespace slicever::agent
