// slicever: command-line front end for the slice verification harness.
//
// Exit codes: 0 ok, 1 validation error, 2 runtime error, 3 escalation raised.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "slicever/experiment.h"
#include "slicever/model_io.h"
#include "slicever/report.h"

namespace fs = std::filesystem;
using namespace slicever;
using experiment::ExperimentConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitEscalation = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out_dir;
  std::string format = "text";
  std::string verdict_log;
  std::string bus;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (absent keys keep defaults)");
  cmd->add_option("--seed", f.seed, "Experiment seed");
  cmd->add_option("--mode", f.mode, "Agent objective")->check(CLI::IsMember({"embb", "urllc"}));
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_option("--format", f.format, "Report format")->check(CLI::IsMember({"text", "markdown", "json"}));
  cmd->add_option("--verdict-log", f.verdict_log, "Write every verdict as NDJSON to this file");
  cmd->add_option("--bus", f.bus, "inproc or tcp://HOST:PORT");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig c = f.config_path.empty() ? ExperimentConfig{} : experiment::load_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (!f.mode.empty()) c.agent_mode = *agent::parse_mode(f.mode);
  if (!f.verdict_log.empty()) c.verdict_log = f.verdict_log;
  if (!f.bus.empty()) c.bus = f.bus;
  return c;
}

fs::path out_path(const CommonFlags& f, const std::string& name) {
  const fs::path dir = f.out_dir.empty() ? fs::path(".") : fs::path(f.out_dir);
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string extension(report::Format f) {
  switch (f) {
    case report::Format::kMarkdown:
      return "md";
    case report::Format::kJson:
      return "json";
    case report::Format::kText:
      break;
  }
  return "txt";
}

// Prints the report and, with --out, stores report.json plus the rendered
// form. Returns the exit code implied by the bundle.
int emit(const experiment::ReportBundle& bundle, const CommonFlags& f) {
  const auto format = *report::parse_format(f.format);
  const auto rendered = report::render_report(bundle, format);
  std::cout << rendered;
  if (!f.out_dir.empty()) {
    write_file(out_path(f, "report.json"), report::render_report(bundle, report::Format::kJson));
    if (format != report::Format::kJson) write_file(out_path(f, "report." + extension(format)), rendered);
  }
  if (!bundle.escalations.empty()) {
    for (const auto& e : bundle.escalations) {
      std::cerr << "escalation: " << e.reason << " at window " << e.window_id << "\n";
    }
    return kExitEscalation;
  }
  return kExitOk;
}

sim::DriftSpec parse_drift(const std::string& text) {
  // SLICE:PARAMETER:MULTIPLIER:START_WINDOW
  std::vector<std::string> parts;
  std::stringstream in(text);
  for (std::string p; std::getline(in, p, ':');) parts.push_back(p);
  if (parts.size() != 4) throw ValidationError("--drift expects SLICE:PARAMETER:MULTIPLIER:START, got '" + text + "'");
  const auto slice = parse_slice(parts[0]);
  if (!slice) throw ValidationError("--drift: unknown slice '" + parts[0] + "'");
  sim::DriftSpec d;
  d.slice = *slice;
  d.parameter = parts[1];
  try {
    d.multiplier = std::stod(parts[2]);
    d.start_window = std::stoll(parts[3]);
  } catch (const std::exception&) {
    throw ValidationError("--drift: bad number in '" + text + "'");
  }
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop RAN slicing harness with a tree-based slice verifier"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* gen = app.add_subcommand("gen-data", "Sample a labeled KPI dataset to OUT/dataset.csv");
  add_common(gen, flags);

  std::string data_path;
  auto* train = app.add_subcommand("train", "Fit the verifier; writes OUT/model.json and OUT/holdout.csv");
  add_common(train, flags);
  train->add_option("--data", data_path, "Labeled CSV instead of the generator");

  std::string model_path;
  auto* evaluate = app.add_subcommand("evaluate", "Offline train/evaluate, or evaluate --model on --data");
  add_common(evaluate, flags);
  evaluate->add_option("--model", model_path, "Saved model; without it the offline pipeline trains first");
  evaluate->add_option("--data", data_path, "Labeled CSV to evaluate on");

  auto* run = app.add_subcommand("run", "Closed loop: simulator, agent and verifier over the bus");
  add_common(run, flags);

  std::vector<std::string> drifts;
  std::optional<std::int64_t> conflict_window;
  auto* inject = app.add_subcommand("inject", "Closed loop with drift and/or conflict injection");
  add_common(inject, flags);
  inject->add_option("--drift", drifts, "SLICE:PARAMETER:MULTIPLIER:START (repeatable)");
  inject->add_option("--conflict-window", conflict_window, "Swap in a label-rotated model from this window");

  std::string input_path;
  auto* report_cmd = app.add_subcommand("report", "Render a stored report.json");
  add_common(report_cmd, flags);
  report_cmd->add_option("--input", input_path, "report.json written by another subcommand")->required();

  bool print_defaults = false;
  auto* config_cmd = app.add_subcommand("config", "Configuration helpers");
  config_cmd->add_flag("--print-defaults", print_defaults, "Print the full default config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (config_cmd->parsed()) {
      if (!print_defaults) throw ValidationError("config: nothing to do (try --print-defaults)");
      std::cout << experiment::to_json(ExperimentConfig{}).dump(2) << "\n";
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      const auto j = experiment::Json::parse(read_file(input_path), nullptr, false);
      if (j.is_discarded()) throw ValidationError("report: " + input_path + " is not valid JSON");
      return emit(experiment::bundle_from_json(j), flags);
    }

    ExperimentConfig config = resolve_config(flags);
    if (!data_path.empty()) config.data.data_path = data_path;

    if (gen->parsed()) {
      experiment::validate_config(config);
      const auto rows = datagen::sample_dataset(experiment::resolve_gen_config(config));
      const auto path = out_path(flags, "dataset.csv");
      datagen::save_csv(rows, path);
      std::cout << "wrote " << rows.size() << " rows to " << path.string() << "\n";
      return kExitOk;
    }

    if (train->parsed()) {
      config.mode = experiment::RunMode::kOffline;
      const auto t = experiment::train_offline(config);
      const auto model_out = out_path(flags, "model.json");
      model_io::save_model(t.model, model_out);
      datagen::save_csv(t.holdout, out_path(flags, "holdout.csv"));
      const auto kind = std::holds_alternative<tree::Tree>(t.model.classifier) ? verify::ClassifierKind::kTree
                                                                               : verify::ClassifierKind::kGbdt;
      std::cout << "trained " << verify::classifier_name(kind) << " on " << t.train.size()
                << " samples; wrote " << model_out.string() << " and " << t.holdout.size() << " held-out rows\n";
      return kExitOk;
    }

    if (evaluate->parsed()) {
      config.mode = experiment::RunMode::kOffline;
      if (model_path.empty()) return emit(experiment::run_experiment(config).bundle, flags);
      if (data_path.empty()) throw ValidationError("evaluate: --model needs --data");
      const auto model = model_io::load_model(model_path);
      const auto data = datagen::load_csv(data_path);
      auto result = experiment::evaluate_model(model, data.rows, config);
      result.bundle.dataset.imputed = static_cast<std::int64_t>(data.imputed);
      return emit(result.bundle, flags);
    }

    config.mode = experiment::RunMode::kClosedLoop;
    if (inject->parsed()) {
      for (const auto& d : drifts) config.inject.drifts.push_back(parse_drift(d));
      if (conflict_window) config.inject.conflict_window = conflict_window;
      if (config.inject.drifts.empty() && !config.inject.conflict_window) {
        throw ValidationError("inject: give --drift and/or --conflict-window (or inject.* in the config)");
      }
    }
    return emit(experiment::run_experiment(config).bundle, flags);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
