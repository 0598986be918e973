// Experiment orchestration. Offline runs generate or load a labeled dataset,
// train the verifier on a stratified fraction and evaluate it on the rest.
// Closed-loop runs wire the simulator, the control agent and the verifier
// over the bus, one thread each, in lock-step: the action for window k+1 is
// computed from the report of window k.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicever/agent.h"
#include "slicever/datagen.h"
#include "slicever/metrics.h"
#include "slicever/ran_sim.h"
#include "slicever/verifier.h"

namespace slicever::experiment {

using Json = nlohmann::ordered_json;

enum class RunMode : std::uint8_t { kOffline, kClosedLoop };
std::string_view run_mode_name(RunMode m);  // "offline" | "closed_loop"

enum class PolicyKind : std::uint8_t { kQLearning, kHeuristic, kStatic };
std::string_view policy_name(PolicyKind p);  // "qlearning" | "heuristic" | "static"

// Dataset section. `preset` "auto" follows the agent mode; "embb" / "urllc"
// pin a preset; "custom" takes `slices` as given. A non-empty `data_path`
// loads a CSV instead of generating.
struct DataConfig {
  std::string preset = "auto";
  std::array<datagen::SliceKpiDistribution, kNumSlices> slices{};  // custom only
  std::size_t n_samples = 10'000;
  std::array<double, kNumSlices> class_weights{1.0, 1.0, 1.0};
  double overlap = 0.5;
  std::string data_path;

  bool operator==(const DataConfig&) const = default;
};

struct InjectionConfig {
  std::vector<sim::DriftSpec> drifts;
  // From this window on the verifier runs a model fitted with rotated labels,
  // so its predictions contradict the ones cached before the swap.
  std::optional<std::int64_t> conflict_window;

  bool operator==(const InjectionConfig&) const = default;
};

struct ExperimentConfig {
  RunMode mode = RunMode::kOffline;
  std::uint64_t seed = 42;

  agent::AgentMode agent_mode = agent::AgentMode::kEmbbOriented;
  PolicyKind policy = PolicyKind::kQLearning;
  agent::QParams q;

  sim::SimConfig sim;
  DataConfig data;

  verify::VerifierParams verifier;
  double train_fraction = 0.05;
  verify::EscalationPolicy escalation;

  std::int64_t run_windows = 2000;
  std::int64_t warmup_windows = 100;  // equal-split RR run that fixes the agent's state quartiles
  std::int64_t train_windows = 100;   // first loop windows forming the verifier's corpus
  // Share of that corpus the loop verifier is fitted on. Kept separate from
  // train_fraction: the loop corpus is small and the drift reference comes
  // from the same subset.
  double loop_train_fraction = 1.0;
  std::int64_t latency_budget_us = 10'000;

  InjectionConfig inject;

  std::string bus = "inproc";
  std::string verdict_log;     // NDJSON verdict file; empty = none
  bool include_timing = true;  // wall-clock latency in the report

  bool operator==(const ExperimentConfig&) const = default;
};

// Throws ValidationError naming the first offending field.
void validate_config(const ExperimentConfig& config);

// The generator configuration an offline run would use.
datagen::GenConfig resolve_gen_config(const ExperimentConfig& config);

Json to_json(const ExperimentConfig& config);
// Keys absent from `j` keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct EventSummary {
  std::int64_t verdicts = 0;
  std::int64_t misclass = 0;
  std::int64_t conflict = 0;
  std::int64_t drift_flagged = 0;     // verdicts carrying the drift flag
  std::int64_t drift_evaluations = 0; // per-slice PSI evaluations
  std::int64_t drift_over_threshold = 0;
  std::int64_t drift_breached = 0;    // evaluations with a slice in breach
  std::int64_t over_budget = 0;       // verdicts slower than the latency budget
  std::int64_t rejected_actions = 0;
  std::int64_t dropped_messages = 0;

  bool operator==(const EventSummary&) const = default;
};

struct LoopSummary {
  std::int64_t windows = 0;
  std::array<double, kNumSlices> mean_bitrate_mbps{};
  std::array<double, kNumSlices> mean_buffer_bytes{};
  double mean_reward = 0.0;

  bool operator==(const LoopSummary&) const = default;
};

struct DatasetSummary {
  std::int64_t train_size = 0;
  std::int64_t eval_size = 0;
  std::int64_t imputed = 0;

  bool operator==(const DatasetSummary&) const = default;
};

struct ReportBundle {
  RunMode mode = RunMode::kOffline;
  std::uint64_t seed = 0;
  std::string scenario;  // "embb" | "urllc"
  metrics::ClassificationReport report;
  std::optional<verify::LatencyStats> latency;
  EventSummary events;
  std::vector<bus::EscalationMsg> escalations;
  std::optional<LoopSummary> loop;
  DatasetSummary dataset;
  Json config;  // echo; config_from_json(config) reproduces the run

  bool operator==(const ReportBundle&) const = default;
};

Json to_json(const ReportBundle& bundle);
ReportBundle bundle_from_json(const Json& j);

// Per-window trace of a closed-loop run, for analysis beyond the report.
struct WindowRecord {
  std::int64_t window_id = 0;
  std::array<double, kNumSlices> mean_bitrate_mbps{};
  std::array<double, kNumSlices> mean_buffer_bytes{};
  double reward = 0.0;
  bool action_rejected = false;
  // Per-slice drift evaluation of this window (verifier phase only).
  std::array<verify::DriftCheck, kNumSlices> drift{};
  std::array<bool, kNumSlices> breached{};
  std::int64_t misclass = 0;
  std::int64_t verdicts = 0;
};

struct RunResult {
  ReportBundle bundle;
  std::vector<WindowRecord> windows;      // closed loop only
  std::vector<verify::Verdict> verdicts;  // every verdict in order
  std::optional<verify::VerifierModel> model;
};

// Validates, then runs. Deterministic under config.seed except for the
// latency figures.
RunResult run_experiment(const ExperimentConfig& config);

// Evaluates an existing model on a labeled dataset (all rows).
RunResult evaluate_model(const verify::VerifierModel& model, std::span<const UserKpi> data,
                         const ExperimentConfig& config);

// Fits the verifier on the stratified training share of the offline dataset.
struct TrainOutput {
  verify::VerifierModel model;
  std::vector<UserKpi> train;
  std::vector<UserKpi> holdout;
  std::size_t imputed = 0;
};
TrainOutput train_offline(const ExperimentConfig& config);

// Loads `data.data_path` or samples the configured generator.
datagen::CsvData offline_dataset(const ExperimentConfig& config);

// Independent stream seeds derived from the experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace slicever::experiment
