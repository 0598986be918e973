#include "slicever/ran_sim.h"

#include <algorithm>
#include <cmath>

namespace slicever::sim {

namespace {

constexpr double kPfEpsilon = 1e-6;

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

std::int64_t prbs_needed(std::int64_t queue_bits, double spectral_eff) {
  if (queue_bits <= 0) return 0;
  return static_cast<std::int64_t>(std::ceil(static_cast<double>(queue_bits) / spectral_eff));
}

std::int64_t capacity_bits(std::int64_t prbs, double spectral_eff) {
  return static_cast<std::int64_t>(std::floor(static_cast<double>(prbs) * spectral_eff));
}

}  // namespace

std::array<SliceTrafficProfile, kNumSlices> SimConfig::default_traffic() {
  return {{
      {4000.0, 1500, 0.0, 1.0},  // eMBB: always on
      {50.0, 200, 0.3, 0.1},     // mMTC: bursty, ON 25% of the time
      {200.0, 256, 0.0, 1.0},    // URLLC: always on
  }};
}

void validate_profile(const SliceTrafficProfile& p) {
  if (!std::isfinite(p.mean_arrival_kbps) || p.mean_arrival_kbps < 0.0) {
    throw ValidationError("traffic profile: mean_arrival_kbps must be >= 0");
  }
  if (p.packet_size_bytes <= 0) throw ValidationError("traffic profile: packet_size_bytes must be > 0");
  if (!is_probability(p.burst_on_prob) || !is_probability(p.burst_off_prob)) {
    throw ValidationError("traffic profile: burst probabilities must lie in [0,1]");
  }
}

double packets_per_tti(const SliceTrafficProfile& p) {
  return p.mean_arrival_kbps * 1000.0 / (8.0 * p.packet_size_bytes) / 1000.0;
}

void validate_sim_config(const SimConfig& c) {
  if (c.total_prbs <= 0) throw ValidationError("sim: total_prbs must be > 0");
  if (c.tti_per_window <= 0) throw ValidationError("sim: tti_per_window must be > 0");
  if (c.users_per_slice <= 0) throw ValidationError("sim: users_per_slice must be > 0");
  if (!std::isfinite(c.fading_sigma) || c.fading_sigma < 0.0) {
    throw ValidationError("sim: fading_sigma must be >= 0");
  }
  if (!(c.median_spectral_eff > 0.0)) throw ValidationError("sim: median_spectral_eff must be > 0");
  if (c.max_queue_bytes <= 0) throw ValidationError("sim: max_queue_bytes must be > 0");
  for (const auto& p : c.traffic) validate_profile(p);
}

void PacketQueue::push(std::int64_t packet_bits, std::int64_t count) {
  if (packet_bits <= 0 || count <= 0) return;
  if (!runs_.empty() && runs_.back().packet_bits == packet_bits) {
    runs_.back().count += count;
  } else {
    runs_.push_back({packet_bits, count});
  }
  bits_ += packet_bits * count;
}

std::int64_t PacketQueue::serve(std::int64_t bits) {
  std::int64_t completed = 0;
  while (bits > 0 && !runs_.empty()) {
    auto& head = runs_.front();
    const std::int64_t remaining = head.packet_bits - head_sent_bits_;
    if (bits >= remaining) {
      bits -= remaining;
      bits_ -= remaining;
      head_sent_bits_ = 0;
      ++completed;
      if (--head.count == 0) runs_.pop_front();
    } else {
      head_sent_bits_ += bits;
      bits_ -= bits;
      bits = 0;
    }
  }
  return completed;
}

std::int64_t arrivals(const SliceTrafficProfile& profile, UserState& user, std::mt19937_64& rng) {
  std::int64_t bits = 0;
  const double mean = packets_per_tti(profile);
  if (user.burst_on && mean > 0.0) {
    std::poisson_distribution<std::int64_t> packets(mean);
    bits = packets(rng) * static_cast<std::int64_t>(profile.packet_size_bytes) * 8;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  if (user.burst_on) {
    if (draw < profile.burst_on_prob) user.burst_on = false;
  } else {
    if (draw < profile.burst_off_prob) user.burst_on = true;
  }
  return bits;
}

std::vector<std::int32_t> schedule_rr(std::span<const SchedCandidate> users, std::int32_t prbs,
                                      std::uint64_t rotation) {
  std::vector<std::int32_t> grants(users.size(), 0);
  std::vector<std::size_t> backlogged;
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i].need_prbs > 0) backlogged.push_back(i);
  }
  if (backlogged.empty() || prbs <= 0) return grants;

  const std::size_t n = backlogged.size();
  std::size_t cursor = static_cast<std::size_t>(rotation % n);
  std::size_t satisfied = 0;
  std::int32_t left = prbs;
  while (left > 0 && satisfied < n) {
    const std::size_t i = backlogged[cursor];
    if (grants[i] < users[i].need_prbs) {
      ++grants[i];
      --left;
      if (grants[i] == users[i].need_prbs) ++satisfied;
    }
    cursor = (cursor + 1) % n;
  }
  return grants;
}

std::vector<std::int32_t> schedule_wf(std::span<const SchedCandidate> users, std::int32_t prbs) {
  std::vector<std::int32_t> grants(users.size(), 0);
  std::vector<double> served(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) served[i] = users[i].served_bits;

  for (std::int32_t k = 0; k < prbs; ++k) {
    std::size_t best = users.size();
    for (std::size_t i = 0; i < users.size(); ++i) {
      if (grants[i] >= users[i].need_prbs) continue;
      if (best == users.size() || served[i] < served[best] ||
          (served[i] == served[best] && users[i].user_id < users[best].user_id)) {
        best = i;
      }
    }
    if (best == users.size()) break;
    ++grants[best];
    served[best] += users[best].spectral_eff;
  }
  return grants;
}

std::vector<std::int32_t> schedule_pf(std::span<const SchedCandidate> users, std::int32_t prbs,
                                      double window_seconds, double beta) {
  std::vector<std::int32_t> grants(users.size(), 0);
  std::vector<double> served(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) served[i] = users[i].served_bits;

  auto metric = [&](std::size_t i) {
    const double rate_so_far = served[i] / window_seconds / 1e6;
    const double provisional = (1.0 - beta) * users[i].ema_throughput_mbps + beta * rate_so_far;
    return users[i].spectral_eff / (provisional + kPfEpsilon);
  };

  for (std::int32_t k = 0; k < prbs; ++k) {
    std::size_t best = users.size();
    double best_metric = 0.0;
    for (std::size_t i = 0; i < users.size(); ++i) {
      if (grants[i] >= users[i].need_prbs) continue;
      const double m = metric(i);
      if (best == users.size() || m > best_metric ||
          (m == best_metric && users[i].user_id < users[best].user_id)) {
        best = i;
        best_metric = m;
      }
    }
    if (best == users.size()) break;
    ++grants[best];
    served[best] += users[best].spectral_eff;
  }
  return grants;
}

void validate_drift(const DriftSpec& spec) {
  static constexpr std::array<std::string_view, 5> kParameters = {
      "mean_arrival_kbps", "packet_size_bytes", "burst_on_prob", "burst_off_prob", "fading_sigma"};
  if (std::find(kParameters.begin(), kParameters.end(), spec.parameter) == kParameters.end()) {
    throw ValidationError("drift: unknown parameter '" + spec.parameter + "'");
  }
  if (!std::isfinite(spec.multiplier) || spec.multiplier <= 0.0) {
    throw ValidationError("drift: multiplier must be > 0");
  }
}

SlicingAction RanSimulator::equal_split(std::int32_t total_prbs, SchedulerPolicy policy) {
  SlicingAction a;
  const std::int32_t base = total_prbs / static_cast<std::int32_t>(kNumSlices);
  std::int32_t rem = total_prbs % static_cast<std::int32_t>(kNumSlices);
  for (auto& s : a.slices) {
    s.prbs = base + (rem-- > 0 ? 1 : 0);
    s.scheduler = policy;
  }
  return a;
}

RanSimulator::RanSimulator(SimConfig config)
    : config_(std::move(config)), rng_(config_.seed), profiles_(config_.traffic) {
  validate_sim_config(config_);
  last_valid_ = equal_split(config_.total_prbs, SchedulerPolicy::kRoundRobin);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::int64_t id = 0;
  for (SliceId s : kAllSlices) {
    const auto& p = profiles_[index_of(s)];
    const double switching = p.burst_on_prob + p.burst_off_prob;
    const double on_share = switching > 0.0 ? p.burst_off_prob / switching : 0.0;
    for (std::int32_t k = 0; k < config_.users_per_slice; ++k) {
      UserState user;
      user.user_id = id++;
      user.slice = s;
      user.burst_on = u(rng_) < on_share;
      users_.push_back(std::move(user));
    }
  }
  window_served_bits_.assign(users_.size(), 0.0);
}

void RanSimulator::inject_drift(const DriftSpec& spec) {
  validate_drift(spec);
  pending_drifts_.push_back(spec);
}

void RanSimulator::apply_due_drifts() {
  auto due = [&](const DriftSpec& d) { return d.start_window <= next_window_; };
  for (const auto& d : pending_drifts_) {
    if (!due(d)) continue;
    auto& p = profiles_[index_of(d.slice)];
    if (d.parameter == "mean_arrival_kbps") {
      p.mean_arrival_kbps *= d.multiplier;
    } else if (d.parameter == "packet_size_bytes") {
      p.packet_size_bytes = std::max<std::int32_t>(
          1, static_cast<std::int32_t>(std::lround(p.packet_size_bytes * d.multiplier)));
    } else if (d.parameter == "burst_on_prob") {
      p.burst_on_prob = std::min(1.0, p.burst_on_prob * d.multiplier);
    } else if (d.parameter == "burst_off_prob") {
      p.burst_off_prob = std::min(1.0, p.burst_off_prob * d.multiplier);
    } else if (d.parameter == "fading_sigma") {
      fading_scale_[index_of(d.slice)] *= d.multiplier;
    }
  }
  std::erase_if(pending_drifts_, due);
}

void RanSimulator::redraw_channels() {
  std::normal_distribution<double> z(0.0, 1.0);
  const double log_median = std::log(config_.median_spectral_eff);
  for (auto& user : users_) {
    const double sigma = config_.fading_sigma * fading_scale_[index_of(user.slice)];
    const double eff = std::exp(log_median + sigma * z(rng_));
    user.spectral_eff = std::clamp(eff, kMinSpectralEff, kMaxSpectralEff);
  }
}

void RanSimulator::schedule_slice(SliceId slice, const SliceAllocation& alloc, WindowTrace& trace,
                                  std::vector<std::int64_t>& packets) {
  const std::size_t first = index_of(slice) * static_cast<std::size_t>(config_.users_per_slice);
  const std::size_t count = static_cast<std::size_t>(config_.users_per_slice);

  std::vector<SchedCandidate> candidates(count);
  bool any_backlogged = false;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& u = users_[first + k];
    candidates[k] = {u.user_id, prbs_needed(u.queue.bits(), u.spectral_eff), u.spectral_eff,
                     window_served_bits_[first + k], u.ema_throughput_mbps};
    any_backlogged = any_backlogged || candidates[k].need_prbs > 0;
  }
  trace.prbs_offered[index_of(slice)] += alloc.prbs;
  if (!any_backlogged || alloc.prbs == 0) return;

  std::vector<std::int32_t> grants;
  switch (alloc.scheduler) {
    case SchedulerPolicy::kRoundRobin:
      grants = schedule_rr(candidates, alloc.prbs, rr_rotation_[index_of(slice)]++);
      break;
    case SchedulerPolicy::kWaterfilling:
      grants = schedule_wf(candidates, alloc.prbs);
      break;
    case SchedulerPolicy::kProportionalFair:
      grants = schedule_pf(candidates, alloc.prbs, config_.window_seconds());
      break;
  }

  for (std::size_t k = 0; k < count; ++k) {
    if (grants[k] == 0) continue;
    auto& u = users_[first + k];
    auto& t = trace.users[first + k];
    if (candidates[k].need_prbs == 0) t.idle_grants += grants[k];
    const std::int64_t served = std::min(u.queue.bits(), capacity_bits(grants[k], u.spectral_eff));
    packets[first + k] += u.queue.serve(served);
    window_served_bits_[first + k] += static_cast<double>(served);
    t.served_bits += served;
    t.prbs_granted += grants[k];
    trace.prbs_granted[index_of(slice)] += grants[k];
  }
}

WindowResult RanSimulator::run_window(const SlicingAction& action) {
  WindowResult result;
  const auto validation = validate_action(action, config_.total_prbs);
  if (validation.ok()) {
    last_valid_ = action;
  } else {
    result.violations = validation.violations;
    result.report.action_rejected = true;
  }
  const SlicingAction applied = last_valid_;

  apply_due_drifts();
  redraw_channels();

  auto& trace = result.trace;
  trace.applied_action = applied;
  trace.users.resize(users_.size());
  for (std::size_t i = 0; i < users_.size(); ++i) trace.users[i].queue_start_bits = users_[i].queue.bits();
  std::fill(window_served_bits_.begin(), window_served_bits_.end(), 0.0);
  std::vector<std::int64_t> packets(users_.size(), 0);

  const std::int64_t cap_bits = config_.max_queue_bytes * 8;
  for (std::int32_t tti = 0; tti < config_.tti_per_window; ++tti) {
    for (std::size_t i = 0; i < users_.size(); ++i) {
      auto& u = users_[i];
      const auto& profile = profiles_[index_of(u.slice)];
      const std::int64_t bits = arrivals(profile, u, rng_);
      if (bits == 0) continue;
      const std::int64_t packet_bits = static_cast<std::int64_t>(profile.packet_size_bytes) * 8;
      const std::int64_t room = std::max<std::int64_t>(0, cap_bits - u.queue.bits()) / packet_bits;
      const std::int64_t admitted = std::min(room, bits / packet_bits);
      u.queue.push(packet_bits, admitted);
      trace.users[i].arrived_bits += admitted * packet_bits;
      trace.users[i].dropped_bits += bits - admitted * packet_bits;
    }
    for (SliceId s : kAllSlices) schedule_slice(s, applied[s], trace, packets);
  }

  auto& report = result.report;
  report.window_id = next_window_;
  report.users.reserve(users_.size());
  const double seconds = config_.window_seconds();
  for (std::size_t i = 0; i < users_.size(); ++i) {
    auto& u = users_[i];
    const double bitrate = window_served_bits_[i] / seconds / 1e6;
    u.ema_throughput_mbps = (1.0 - kPfBeta) * u.ema_throughput_mbps + kPfBeta * bitrate;
    trace.users[i].queue_end_bits = u.queue.bits();
    report.users.push_back({u.user_id, u.slice, bitrate, packets[i], u.queue.bits() / 8, next_window_});
  }
  ++next_window_;
  return result;
}

}  // namespace slicever::sim
