#include "slicever/experiment.h"

#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "slicever/endpoint.h"
#include "slicever/model_io.h"

namespace slicever::experiment {

namespace {

enum Stream : std::uint64_t { kSimStream = 1, kAgentStream = 3, kSplitStream = 4 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// ---- json helpers ----------------------------------------------------------

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw ValidationError("config: " + section + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValidationError("config: unknown key '" + section + "." + key + "'");
  }
}

template <class T>
void take(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void take_named(const Json& j, const char* key, T& out, std::optional<T> (*parse)(std::string_view),
                const char* what) {
  if (!j.contains(key)) return;
  const auto name = j.at(key).get<std::string>();
  const auto v = parse(name);
  if (!v) throw ValidationError(std::string("config: unknown ") + what + " '" + name + "'");
  out = *v;
}

std::optional<RunMode> parse_run_mode(std::string_view s) {
  if (s == "offline") return RunMode::kOffline;
  if (s == "closed_loop") return RunMode::kClosedLoop;
  return std::nullopt;
}

std::optional<PolicyKind> parse_policy(std::string_view s) {
  if (s == "qlearning") return PolicyKind::kQLearning;
  if (s == "heuristic") return PolicyKind::kHeuristic;
  if (s == "static") return PolicyKind::kStatic;
  return std::nullopt;
}

Json traffic_json(const sim::SliceTrafficProfile& p) {
  return Json{{"mean_arrival_kbps", p.mean_arrival_kbps},
              {"packet_size_bytes", p.packet_size_bytes},
              {"burst_on_prob", p.burst_on_prob},
              {"burst_off_prob", p.burst_off_prob}};
}

void traffic_from(const Json& j, sim::SliceTrafficProfile& p, const std::string& section) {
  check_keys(j, {"mean_arrival_kbps", "packet_size_bytes", "burst_on_prob", "burst_off_prob"}, section);
  take(j, "mean_arrival_kbps", p.mean_arrival_kbps);
  take(j, "packet_size_bytes", p.packet_size_bytes);
  take(j, "burst_on_prob", p.burst_on_prob);
  take(j, "burst_off_prob", p.burst_off_prob);
}

Json distribution_json(const datagen::SliceKpiDistribution& d) {
  return Json{{"mean", d.mean}, {"stddev", d.stddev}, {"correlation", d.correlation}};
}

void distribution_from(const Json& j, datagen::SliceKpiDistribution& d, const std::string& section) {
  check_keys(j, {"mean", "stddev", "correlation"}, section);
  take(j, "mean", d.mean);
  take(j, "stddev", d.stddev);
  take(j, "correlation", d.correlation);
}

Json drift_json(const sim::DriftSpec& d) {
  return Json{{"slice", slice_name(d.slice)},
              {"parameter", d.parameter},
              {"multiplier", d.multiplier},
              {"start_window", d.start_window}};
}

sim::DriftSpec drift_from(const Json& j) {
  check_keys(j, {"slice", "parameter", "multiplier", "start_window"}, "inject.drifts[]");
  sim::DriftSpec d;
  take_named(j, "slice", d.slice, &parse_slice, "slice");
  take(j, "parameter", d.parameter);
  take(j, "multiplier", d.multiplier);
  take(j, "start_window", d.start_window);
  return d;
}

Json class_metrics_json(const metrics::ClassMetrics& m) {
  return Json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

metrics::ClassMetrics class_metrics_from(const Json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>(),
          j.at("support").get<std::int64_t>()};
}

// ---- run helpers -----------------------------------------------------------

struct SliceMeans {
  std::array<double, kNumSlices> bitrate{};
  std::array<double, kNumSlices> buffer{};
};

SliceMeans slice_means(std::span<const UserKpi> users) {
  SliceMeans m;
  std::array<double, kNumSlices> n{};
  for (const auto& u : users) {
    const auto s = index_of(u.slice);
    m.bitrate[s] += u.tx_bitrate_mbps;
    m.buffer[s] += static_cast<double>(u.dl_buffer_bytes);
    n[s] += 1.0;
  }
  for (std::size_t s = 0; s < kNumSlices; ++s) {
    if (n[s] > 0) {
      m.bitrate[s] /= n[s];
      m.buffer[s] /= n[s];
    }
  }
  return m;
}

void tally(EventSummary& events, const verify::Verdict& v, std::int64_t budget_us) {
  ++events.verdicts;
  events.misclass += v.flags.misclass ? 1 : 0;
  events.conflict += v.flags.conflict ? 1 : 0;
  events.drift_flagged += v.flags.drift ? 1 : 0;
  events.over_budget += v.latency_us > budget_us ? 1 : 0;
}

metrics::ClassificationReport report_of(std::span<const verify::Verdict> verdicts) {
  metrics::ConfusionMatrix m{};
  for (const auto& v : verdicts) ++m[index_of(v.true_slice)][index_of(v.predicted_slice)];
  return metrics::classification_report(m);
}

// Fits the companion model used by the conflict injection: same samples,
// labels rotated by one class, drift references kept from the real model.
verify::VerifierModel rotated_model(std::span<const UserKpi> subset, const verify::VerifierModel& real,
                                    const verify::VerifierParams& params) {
  std::vector<UserKpi> rotated(subset.begin(), subset.end());
  for (auto& k : rotated) k.slice = slice_from_index((index_of(k.slice) + 1) % kNumSlices);
  auto model = verify::fit_verifier(rotated, real.train_fraction, params);
  model.slice_reference = real.slice_reference;
  model.normalization = real.normalization;
  return model;
}

ReportBundle base_bundle(const ExperimentConfig& config) {
  ReportBundle b;
  b.mode = config.mode;
  b.seed = config.seed;
  b.scenario = std::string(agent::mode_name(config.agent_mode));
  b.config = to_json(config);
  return b;
}

class RunAbort {
 public:
  void fail(std::exception_ptr e, std::initializer_list<bus::Endpoint*> endpoints) {
    std::call_once(once_, [&] {
      error_ = e;
      for (auto* ep : endpoints) {
        if (ep != nullptr) ep->close();
      }
    });
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::once_flag once_;
  std::exception_ptr error_;
};

RunResult run_closed_loop(const ExperimentConfig& config) {
  const std::int32_t total_prbs = config.sim.total_prbs;
  const auto equal = sim::RanSimulator::equal_split(total_prbs, SchedulerPolicy::kRoundRobin);

  // Warm-up runs on the loop's own simulator so the loop starts from
  // steady-state queues rather than empty ones.
  sim::SimConfig sim_cfg = config.sim;
  sim_cfg.seed = derive_seed(config.seed, kSimStream);
  sim::RanSimulator sim(sim_cfg);
  agent::StateReference reference;
  if (config.warmup_windows > 0) {
    std::vector<sim::KpiReport> reports;
    for (std::int64_t w = 0; w < config.warmup_windows; ++w) reports.push_back(sim.run_window(equal).report);
    reference = agent::build_state_reference(reports);
  }

  const auto ep_cfg = bus::parse_endpoint_uri(config.bus);
  auto xapp_side = bus::open_endpoint(ep_cfg);
  std::unique_ptr<bus::Endpoint> client;
  bus::Endpoint* ran_side = xapp_side.get();
  if (ep_cfg.mode == bus::EndpointConfig::Mode::kTcp) {
    client = bus::connect_endpoint({bus::EndpointConfig::Mode::kTcp, xapp_side->bound_address(), ep_cfg.queue_depth});
    ran_side = client.get();
  }
  auto agent_in = xapp_side->subscribe({bus::MessageType::kKpiReport});
  auto verifier_in = xapp_side->subscribe({bus::MessageType::kKpiReport});
  auto ran_in = ran_side->subscribe({bus::MessageType::kControl});

  std::ofstream verdict_log;
  if (!config.verdict_log.empty()) {
    verdict_log.open(config.verdict_log, std::ios::binary);
    if (!verdict_log) throw Error("cannot write verdict log " + config.verdict_log);
  }

  RunAbort abort;
  const auto last = config.run_windows - 1;

  std::thread agent_thread([&] {
    try {
      std::optional<agent::QLearningAgent> learner;
      std::optional<agent::HeuristicPolicy> heuristic;
      if (config.policy == PolicyKind::kQLearning) {
        learner.emplace(config.agent_mode, total_prbs, reference, config.q, derive_seed(config.seed, kAgentStream));
      } else if (config.policy == PolicyKind::kHeuristic) {
        heuristic.emplace(config.agent_mode, total_prbs);
      }
      bool first = true;
      while (auto msg = agent_in->next()) {
        const auto& report = std::get<bus::KpiReportMsg>(*msg);
        SlicingAction action = equal;
        if (learner) {
          action = learner->act(report.users);
        } else if (heuristic) {
          action = heuristic->step(first ? std::nullopt
                                         : std::optional(agent::compute_reward(report.users, config.agent_mode)));
        }
        first = false;
        xapp_side->publish(bus::ControlMsg{report.window_id + 1, action});
        if (report.window_id >= last) break;
      }
    } catch (...) {
      abort.fail(std::current_exception(), {xapp_side.get(), client.get()});
    }
  });

  std::vector<verify::Verdict> verdicts;
  std::vector<WindowRecord> verifier_records(static_cast<std::size_t>(config.run_windows));
  std::vector<bus::EscalationMsg> escalations;
  std::optional<verify::VerifierModel> model;
  EventSummary events;

  std::thread verifier_thread([&] {
    try {
      std::vector<UserKpi> corpus;
      std::optional<verify::VerifierModel> swapped;
      verify::VerifierState state(config.verifier);
      verify::Escalator escalator(config.escalation);
      std::mt19937_64 split_rng(derive_seed(config.seed, kSplitStream));
      auto emit = [&](const std::vector<bus::EscalationMsg>& raised) {
        for (const auto& e : raised) {
          escalations.push_back(e);
          xapp_side->publish(e);
        }
      };
      while (auto msg = verifier_in->next()) {
        const auto& report = std::get<bus::KpiReportMsg>(*msg);
        const auto w = report.window_id;
        if (w < config.train_windows) {
          corpus.insert(corpus.end(), report.users.begin(), report.users.end());
          if (w == config.train_windows - 1) {
            std::vector<UserKpi> subset = corpus;
            const double fraction = config.loop_train_fraction;
            if (fraction < 1.0) subset = datagen::stratified_split(corpus, fraction, split_rng).subset;
            model = verify::fit_verifier(subset, fraction, config.verifier);
            if (config.inject.conflict_window) swapped = rotated_model(subset, *model, config.verifier);
          }
        } else if (model) {
          const bool use_swapped = swapped && w >= *config.inject.conflict_window;
          const auto& active = use_swapped ? *swapped : *model;
          auto& rec = verifier_records[static_cast<std::size_t>(w)];
          for (const auto& user : report.users) {
            const auto v = verify::verify_sample(active, state, user);
            verdicts.push_back(v);
            tally(events, v, config.latency_budget_us);
            ++rec.verdicts;
            rec.misclass += v.flags.misclass ? 1 : 0;
            xapp_side->publish(v);
            if (verdict_log.is_open()) verdict_log << bus::encode_msg(v);
            emit(escalator.observe(v));
          }
          const auto checks = verify::evaluate_drift(active, state);
          bool breach = false;
          for (SliceId s : kAllSlices) {
            const auto i = index_of(s);
            rec.drift[i] = checks[i];
            rec.breached[i] = checks[i].evaluated && state.drift.slice(s).breached;
            if (!checks[i].evaluated) continue;
            ++events.drift_evaluations;
            events.drift_over_threshold += checks[i].over_threshold ? 1 : 0;
            events.drift_breached += rec.breached[i] ? 1 : 0;
            breach = breach || rec.breached[i];
          }
          emit(escalator.close_window(w, breach));
        }
        if (w >= last) break;
      }
    } catch (...) {
      abort.fail(std::current_exception(), {xapp_side.get(), client.get()});
    }
  });

  RunResult result;
  result.bundle = base_bundle(config);
  LoopSummary loop;
  try {
    // Drift start windows count loop windows, which begin after the warm-up.
    for (auto d : config.inject.drifts) {
      d.start_window += config.warmup_windows;
      sim.inject_drift(d);
    }
    SlicingAction action = equal;
    for (std::int64_t w = 0; w < config.run_windows; ++w) {
      auto window = sim.run_window(action);
      for (auto& u : window.report.users) u.window_id = w;
      const auto means = slice_means(window.report.users);
      WindowRecord rec;
      rec.window_id = w;
      rec.mean_bitrate_mbps = means.bitrate;
      rec.mean_buffer_bytes = means.buffer;
      rec.reward = agent::compute_reward(window.report.users, config.agent_mode);
      rec.action_rejected = window.report.action_rejected;
      result.windows.push_back(rec);
      events.rejected_actions += rec.action_rejected ? 1 : 0;

      ran_side->publish(bus::KpiReportMsg{w, window.report.action_rejected, std::move(window.report.users)});
      if (w == last) break;
      auto reply = ran_in->next();
      if (!reply) break;  // a worker failed; its error is rethrown below
      const auto& control = std::get<bus::ControlMsg>(*reply);
      if (control.window_id != w + 1) throw Error("closed loop: control for window " +
                                                 std::to_string(control.window_id) + ", expected " +
                                                 std::to_string(w + 1));
      action = control.allocations;
    }
  } catch (...) {
    abort.fail(std::current_exception(), {xapp_side.get(), client.get()});
  }
  agent_thread.join();
  verifier_thread.join();
  events.dropped_messages = static_cast<std::int64_t>(xapp_side->dropped_count()) +
                            (client ? static_cast<std::int64_t>(client->dropped_count()) : 0);
  if (client) client->close();
  xapp_side->close();
  abort.rethrow();

  for (auto& rec : result.windows) {
    const auto& v = verifier_records[static_cast<std::size_t>(rec.window_id)];
    rec.drift = v.drift;
    rec.breached = v.breached;
    rec.misclass = v.misclass;
    rec.verdicts = v.verdicts;
    for (std::size_t s = 0; s < kNumSlices; ++s) {
      loop.mean_bitrate_mbps[s] += rec.mean_bitrate_mbps[s];
      loop.mean_buffer_bytes[s] += rec.mean_buffer_bytes[s];
    }
    loop.mean_reward += rec.reward;
  }
  loop.windows = static_cast<std::int64_t>(result.windows.size());
  if (loop.windows > 0) {
    const double n = static_cast<double>(loop.windows);
    for (std::size_t s = 0; s < kNumSlices; ++s) {
      loop.mean_bitrate_mbps[s] /= n;
      loop.mean_buffer_bytes[s] /= n;
    }
    loop.mean_reward /= n;
  }

  auto& b = result.bundle;
  b.report = report_of(verdicts);
  if (config.include_timing) b.latency = verify::latency_stats(verdicts);
  if (!config.include_timing) events.over_budget = 0;
  b.events = events;
  b.escalations = escalations;
  b.loop = loop;
  b.dataset.train_size = model ? static_cast<std::int64_t>(model->train_size) : 0;
  b.dataset.eval_size = static_cast<std::int64_t>(verdicts.size());
  result.verdicts = std::move(verdicts);
  result.model = std::move(model);
  return result;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

std::string_view run_mode_name(RunMode m) { return m == RunMode::kOffline ? "offline" : "closed_loop"; }

std::string_view policy_name(PolicyKind p) {
  switch (p) {
    case PolicyKind::kQLearning:
      return "qlearning";
    case PolicyKind::kHeuristic:
      return "heuristic";
    case PolicyKind::kStatic:
      return "static";
  }
  return "qlearning";
}

void validate_config(const ExperimentConfig& c) {
  sim::validate_sim_config(c.sim);
  verify::validate_verifier_params(c.verifier);
  for (const auto& d : c.inject.drifts) sim::validate_drift(d);
  if (c.data.preset != "auto" && c.data.preset != "embb" && c.data.preset != "urllc" && c.data.preset != "custom") {
    throw ValidationError("config: data.preset must be auto, embb, urllc or custom");
  }
  if (c.data.data_path.empty()) datagen::validate_gen_config(resolve_gen_config(c));
  if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) {
    throw ValidationError("config: verifier.train_fraction must lie in (0,1]");
  }
  if (!(c.q.alpha >= 0.0 && c.q.alpha <= 1.0) || !(c.q.gamma >= 0.0 && c.q.gamma < 1.0) ||
      !(c.q.epsilon >= 0.0 && c.q.epsilon <= 1.0)) {
    throw ValidationError("config: agent alpha, epsilon must lie in [0,1] and gamma in [0,1)");
  }
  if (!(c.escalation.misclass_rate_threshold >= 0.0 && c.escalation.misclass_rate_threshold <= 1.0) ||
      c.escalation.misclass_windows == 0) {
    throw ValidationError("config: escalation threshold must lie in [0,1] with misclass_windows > 0");
  }
  if (c.latency_budget_us <= 0) throw ValidationError("config: run.latency_budget_us must be > 0");
  bus::parse_endpoint_uri(c.bus);
  if (c.mode == RunMode::kOffline) {
    if (c.train_fraction >= 1.0) {
      throw ValidationError("config: offline runs need train_fraction < 1 to keep a held-out set");
    }
    return;
  }
  if (!(c.loop_train_fraction > 0.0 && c.loop_train_fraction <= 1.0)) {
    throw ValidationError("config: run.train_fraction must lie in (0,1]");
  }
  if (c.run_windows <= 0) throw ValidationError("config: run.windows must be > 0");
  if (c.warmup_windows < 0) throw ValidationError("config: run.warmup_windows must be >= 0");
  if (c.train_windows <= 0 || c.train_windows >= c.run_windows) {
    throw ValidationError("config: run.train_windows must lie in [1, run.windows)");
  }
  if (c.inject.conflict_window && *c.inject.conflict_window < c.train_windows) {
    throw ValidationError("config: inject.conflict_window must not precede the end of training");
  }
}

datagen::GenConfig resolve_gen_config(const ExperimentConfig& c) {
  const std::string preset =
      c.data.preset == "auto" ? std::string(agent::mode_name(c.agent_mode)) : c.data.preset;
  datagen::GenConfig gen = preset == "urllc" ? datagen::GenConfig::urllc_oriented() : datagen::GenConfig::embb_oriented();
  if (preset == "custom") gen.slices = c.data.slices;
  gen.n_samples = c.data.n_samples;
  gen.class_weights = c.data.class_weights;
  gen.overlap = c.data.overlap;
  gen.seed = c.seed;
  return gen;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["mode"] = run_mode_name(c.mode);
  j["seed"] = c.seed;
  j["agent"] = Json{{"mode", agent::mode_name(c.agent_mode)},
                    {"policy", policy_name(c.policy)},
                    {"alpha", c.q.alpha},
                    {"gamma", c.q.gamma},
                    {"epsilon", c.q.epsilon}};
  Json traffic;
  for (SliceId s : kAllSlices) traffic[std::string(slice_name(s))] = traffic_json(c.sim.traffic[index_of(s)]);
  j["sim"] = Json{{"total_prbs", c.sim.total_prbs},
                  {"tti_per_window", c.sim.tti_per_window},
                  {"users_per_slice", c.sim.users_per_slice},
                  {"fading_sigma", c.sim.fading_sigma},
                  {"median_spectral_eff", c.sim.median_spectral_eff},
                  {"max_queue_bytes", c.sim.max_queue_bytes},
                  {"traffic", std::move(traffic)}};
  Json data{{"preset", c.data.preset},
            {"n_samples", c.data.n_samples},
            {"class_weights", c.data.class_weights},
            {"overlap", c.data.overlap},
            {"data_path", c.data.data_path}};
  if (c.data.preset == "custom") {
    Json slices;
    for (SliceId s : kAllSlices) slices[std::string(slice_name(s))] = distribution_json(c.data.slices[index_of(s)]);
    data["slices"] = std::move(slices);
  }
  j["data"] = std::move(data);
  const auto& v = c.verifier;
  j["verifier"] = Json{{"classifier", verify::classifier_name(v.classifier)},
                       {"train_fraction", c.train_fraction},
                       {"min_per_class", v.min_per_class},
                       {"tree",
                        {{"max_depth", v.tree.max_depth},
                         {"min_samples_split", v.tree.min_samples_split},
                         {"min_gain", v.tree.min_gain}}},
                       {"ensemble", {{"rounds", v.ensemble.rounds}, {"learning_rate", v.ensemble.learning_rate}}},
                       {"drift_window", v.drift_window},
                       {"psi_threshold", v.psi_threshold},
                       {"breach_persistence", v.breach_persistence},
                       {"conflict_cache_size", v.conflict_cache_size},
                       {"conflict_epsilon", v.conflict_epsilon}};
  j["escalation"] = Json{{"misclass_rate_threshold", c.escalation.misclass_rate_threshold},
                         {"misclass_windows", c.escalation.misclass_windows}};
  j["run"] = Json{{"windows", c.run_windows},
                  {"warmup_windows", c.warmup_windows},
                  {"train_windows", c.train_windows},
                  {"train_fraction", c.loop_train_fraction},
                  {"latency_budget_us", c.latency_budget_us}};
  Json drifts = Json::array();
  for (const auto& d : c.inject.drifts) drifts.push_back(drift_json(d));
  j["inject"] = Json{{"drifts", std::move(drifts)},
                     {"conflict_window", c.inject.conflict_window ? Json(*c.inject.conflict_window) : Json(nullptr)}};
  j["bus"] = c.bus;
  j["output"] = Json{{"verdict_log", c.verdict_log}, {"include_timing", c.include_timing}};
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, {"mode", "seed", "agent", "sim", "data", "verifier", "escalation", "run", "inject", "bus", "output"},
               "config");
    take_named(j, "mode", c.mode, &parse_run_mode, "mode");
    take(j, "seed", c.seed);
    if (j.contains("agent")) {
      const auto& a = j.at("agent");
      check_keys(a, {"mode", "policy", "alpha", "gamma", "epsilon"}, "agent");
      take_named(a, "mode", c.agent_mode, &agent::parse_mode, "agent mode");
      take_named(a, "policy", c.policy, &parse_policy, "policy");
      take(a, "alpha", c.q.alpha);
      take(a, "gamma", c.q.gamma);
      take(a, "epsilon", c.q.epsilon);
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      check_keys(s, {"total_prbs", "tti_per_window", "users_per_slice", "fading_sigma", "median_spectral_eff",
                     "max_queue_bytes", "traffic"},
                 "sim");
      take(s, "total_prbs", c.sim.total_prbs);
      take(s, "tti_per_window", c.sim.tti_per_window);
      take(s, "users_per_slice", c.sim.users_per_slice);
      take(s, "fading_sigma", c.sim.fading_sigma);
      take(s, "median_spectral_eff", c.sim.median_spectral_eff);
      take(s, "max_queue_bytes", c.sim.max_queue_bytes);
      if (s.contains("traffic")) {
        const auto& t = s.at("traffic");
        check_keys(t, {"embb", "mmtc", "urllc"}, "sim.traffic");
        for (SliceId id : kAllSlices) {
          const std::string name(slice_name(id));
          if (t.contains(name)) traffic_from(t.at(name), c.sim.traffic[index_of(id)], "sim.traffic." + name);
        }
      }
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      check_keys(d, {"preset", "n_samples", "class_weights", "overlap", "data_path", "slices"}, "data");
      take(d, "preset", c.data.preset);
      take(d, "n_samples", c.data.n_samples);
      take(d, "class_weights", c.data.class_weights);
      take(d, "overlap", c.data.overlap);
      take(d, "data_path", c.data.data_path);
      if (d.contains("slices")) {
        const auto& sl = d.at("slices");
        check_keys(sl, {"embb", "mmtc", "urllc"}, "data.slices");
        for (SliceId id : kAllSlices) {
          const std::string name(slice_name(id));
          if (!sl.contains(name)) throw ValidationError("config: data.slices." + name + " missing");
          distribution_from(sl.at(name), c.data.slices[index_of(id)], "data.slices." + name);
        }
      } else if (c.data.preset == "custom") {
        throw ValidationError("config: data.preset custom needs data.slices");
      }
    }
    if (j.contains("verifier")) {
      const auto& v = j.at("verifier");
      check_keys(v, {"classifier", "train_fraction", "min_per_class", "tree", "ensemble", "drift_window",
                     "psi_threshold", "breach_persistence", "conflict_cache_size", "conflict_epsilon"},
                 "verifier");
      take_named(v, "classifier", c.verifier.classifier, &verify::parse_classifier, "classifier");
      take(v, "train_fraction", c.train_fraction);
      take(v, "min_per_class", c.verifier.min_per_class);
      if (v.contains("tree")) {
        const auto& t = v.at("tree");
        check_keys(t, {"max_depth", "min_samples_split", "min_gain"}, "verifier.tree");
        take(t, "max_depth", c.verifier.tree.max_depth);
        take(t, "min_samples_split", c.verifier.tree.min_samples_split);
        take(t, "min_gain", c.verifier.tree.min_gain);
      }
      if (v.contains("ensemble")) {
        const auto& e = v.at("ensemble");
        check_keys(e, {"rounds", "learning_rate"}, "verifier.ensemble");
        take(e, "rounds", c.verifier.ensemble.rounds);
        take(e, "learning_rate", c.verifier.ensemble.learning_rate);
      }
      take(v, "drift_window", c.verifier.drift_window);
      take(v, "psi_threshold", c.verifier.psi_threshold);
      take(v, "breach_persistence", c.verifier.breach_persistence);
      take(v, "conflict_cache_size", c.verifier.conflict_cache_size);
      take(v, "conflict_epsilon", c.verifier.conflict_epsilon);
    }
    if (j.contains("escalation")) {
      const auto& e = j.at("escalation");
      check_keys(e, {"misclass_rate_threshold", "misclass_windows"}, "escalation");
      take(e, "misclass_rate_threshold", c.escalation.misclass_rate_threshold);
      take(e, "misclass_windows", c.escalation.misclass_windows);
    }
    if (j.contains("run")) {
      const auto& r = j.at("run");
      check_keys(r, {"windows", "warmup_windows", "train_windows", "train_fraction", "latency_budget_us"}, "run");
      take(r, "windows", c.run_windows);
      take(r, "warmup_windows", c.warmup_windows);
      take(r, "train_windows", c.train_windows);
      take(r, "train_fraction", c.loop_train_fraction);
      take(r, "latency_budget_us", c.latency_budget_us);
    }
    if (j.contains("inject")) {
      const auto& in = j.at("inject");
      check_keys(in, {"drifts", "conflict_window"}, "inject");
      if (in.contains("drifts")) {
        for (const auto& d : in.at("drifts")) c.inject.drifts.push_back(drift_from(d));
      }
      if (in.contains("conflict_window") && !in.at("conflict_window").is_null()) {
        c.inject.conflict_window = in.at("conflict_window").get<std::int64_t>();
      }
    }
    take(j, "bus", c.bus);
    if (j.contains("output")) {
      const auto& o = j.at("output");
      check_keys(o, {"verdict_log", "include_timing"}, "output");
      take(o, "verdict_log", c.verdict_log);
      take(o, "include_timing", c.include_timing);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const Json j = Json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw ValidationError("config: " + path.string() + " is not valid JSON");
  return config_from_json(j);
}

Json to_json(const ReportBundle& b) {
  Json j;
  j["mode"] = run_mode_name(b.mode);
  j["seed"] = b.seed;
  j["scenario"] = b.scenario;
  Json classes;
  for (SliceId s : kAllSlices) classes[std::string(slice_name(s))] = class_metrics_json(b.report.per_class[index_of(s)]);
  j["report"] = Json{{"classes", std::move(classes)},
                     {"accuracy", b.report.accuracy},
                     {"macro", class_metrics_json(b.report.macro)},
                     {"weighted", class_metrics_json(b.report.weighted)},
                     {"total", b.report.total},
                     {"confusion", b.report.matrix}};
  j["latency"] = b.latency ? Json{{"p50_us", b.latency->p50},
                                  {"p95_us", b.latency->p95},
                                  {"p99_us", b.latency->p99},
                                  {"max_us", b.latency->max}}
                           : Json(nullptr);
  const auto& e = b.events;
  j["events"] = Json{{"verdicts", e.verdicts},
                     {"misclass", e.misclass},
                     {"conflict", e.conflict},
                     {"drift_flagged", e.drift_flagged},
                     {"drift_evaluations", e.drift_evaluations},
                     {"drift_over_threshold", e.drift_over_threshold},
                     {"drift_breached", e.drift_breached},
                     {"over_budget", e.over_budget},
                     {"rejected_actions", e.rejected_actions},
                     {"dropped_messages", e.dropped_messages}};
  Json esc = Json::array();
  for (const auto& x : b.escalations) esc.push_back(Json{{"reason", x.reason}, {"window_id", x.window_id}});
  j["escalations"] = std::move(esc);
  j["loop"] = b.loop ? Json{{"windows", b.loop->windows},
                            {"mean_bitrate_mbps", b.loop->mean_bitrate_mbps},
                            {"mean_buffer_bytes", b.loop->mean_buffer_bytes},
                            {"mean_reward", b.loop->mean_reward}}
                     : Json(nullptr);
  j["dataset"] = Json{{"train_size", b.dataset.train_size},
                      {"eval_size", b.dataset.eval_size},
                      {"imputed", b.dataset.imputed}};
  j["config"] = b.config;
  return j;
}

ReportBundle bundle_from_json(const Json& j) {
  try {
    ReportBundle b;
    const auto mode = parse_run_mode(j.at("mode").get<std::string>());
    if (!mode) throw ValidationError("report: unknown mode");
    b.mode = *mode;
    b.seed = j.at("seed").get<std::uint64_t>();
    b.scenario = j.at("scenario").get<std::string>();
    const auto& r = j.at("report");
    for (SliceId s : kAllSlices) {
      b.report.per_class[index_of(s)] = class_metrics_from(r.at("classes").at(std::string(slice_name(s))));
    }
    b.report.accuracy = r.at("accuracy").get<double>();
    b.report.macro = class_metrics_from(r.at("macro"));
    b.report.weighted = class_metrics_from(r.at("weighted"));
    b.report.total = r.at("total").get<std::int64_t>();
    b.report.matrix = r.at("confusion").get<metrics::ConfusionMatrix>();
    if (const auto& l = j.at("latency"); !l.is_null()) {
      b.latency = verify::LatencyStats{l.at("p50_us").get<std::int64_t>(), l.at("p95_us").get<std::int64_t>(),
                                       l.at("p99_us").get<std::int64_t>(), l.at("max_us").get<std::int64_t>()};
    }
    const auto& e = j.at("events");
    b.events = {e.at("verdicts").get<std::int64_t>(),          e.at("misclass").get<std::int64_t>(),
                e.at("conflict").get<std::int64_t>(),          e.at("drift_flagged").get<std::int64_t>(),
                e.at("drift_evaluations").get<std::int64_t>(), e.at("drift_over_threshold").get<std::int64_t>(),
                e.at("drift_breached").get<std::int64_t>(),    e.at("over_budget").get<std::int64_t>(),
                e.at("rejected_actions").get<std::int64_t>(),  e.at("dropped_messages").get<std::int64_t>()};
    for (const auto& x : j.at("escalations")) {
      b.escalations.push_back({x.at("reason").get<std::string>(), x.at("window_id").get<std::int64_t>()});
    }
    if (const auto& l = j.at("loop"); !l.is_null()) {
      b.loop = LoopSummary{l.at("windows").get<std::int64_t>(),
                           l.at("mean_bitrate_mbps").get<std::array<double, kNumSlices>>(),
                           l.at("mean_buffer_bytes").get<std::array<double, kNumSlices>>(),
                           l.at("mean_reward").get<double>()};
    }
    const auto& d = j.at("dataset");
    b.dataset = {d.at("train_size").get<std::int64_t>(), d.at("eval_size").get<std::int64_t>(),
                 d.at("imputed").get<std::int64_t>()};
    b.config = j.at("config");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
}

datagen::CsvData offline_dataset(const ExperimentConfig& config) {
  if (!config.data.data_path.empty()) return datagen::load_csv(config.data.data_path);
  return {datagen::sample_dataset(resolve_gen_config(config)), 0};
}

TrainOutput train_offline(const ExperimentConfig& config) {
  validate_config(config);
  auto data = offline_dataset(config);
  TrainOutput out;
  out.imputed = data.imputed;
  std::mt19937_64 rng(derive_seed(config.seed, kSplitStream));
  if (config.train_fraction < 1.0) {
    auto split = datagen::stratified_split(data.rows, config.train_fraction, rng);
    out.train = std::move(split.subset);
    out.holdout = std::move(split.remainder);
  } else {
    out.train = std::move(data.rows);
  }
  out.model = verify::fit_verifier(out.train, config.train_fraction, config.verifier);
  return out;
}

RunResult evaluate_model(const verify::VerifierModel& model, std::span<const UserKpi> data,
                         const ExperimentConfig& config) {
  if (data.empty()) throw ValidationError("evaluate: empty dataset");
  RunResult result;
  result.bundle = base_bundle(config);
  verify::VerifierState state(config.verifier);
  EventSummary events;
  result.verdicts.reserve(data.size());
  for (const auto& k : data) {
    const auto v = verify::verify_sample(model, state, k);
    result.verdicts.push_back(v);
    tally(events, v, config.latency_budget_us);
  }
  auto& b = result.bundle;
  b.report = report_of(result.verdicts);
  if (config.include_timing) {
    b.latency = verify::latency_stats(result.verdicts);
  } else {
    events.over_budget = 0;
  }
  b.events = events;
  b.dataset.train_size = static_cast<std::int64_t>(model.train_size);
  b.dataset.eval_size = static_cast<std::int64_t>(data.size());
  result.model = model;
  return result;
}

RunResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  if (config.mode == RunMode::kClosedLoop) return run_closed_loop(config);
  auto trained = train_offline(config);
  auto result = evaluate_model(trained.model, trained.holdout, config);
  result.bundle.dataset.train_size = static_cast<std::int64_t>(trained.train.size());
  result.bundle.dataset.imputed = static_cast<std::int64_t>(trained.imputed);
  return result;
}

}  // namespace slicever::experiment
