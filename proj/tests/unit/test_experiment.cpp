#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "slicever/experiment.h"
#include "slicever/report.h"

using namespace slicever;
using namespace slicever::experiment;

namespace {

ExperimentConfig small_offline() {
  ExperimentConfig c;
  c.data.n_samples = 1500;
  c.train_fraction = 0.2;
  c.verifier.ensemble.rounds = 10;
  return c;
}

ExperimentConfig small_loop() {
  ExperimentConfig c;
  c.mode = RunMode::kClosedLoop;
  c.run_windows = 40;
  c.warmup_windows = 10;
  c.train_windows = 20;
  c.verifier.ensemble.rounds = 5;
  c.loop_train_fraction = 0.5;
  c.include_timing = false;
  return c;
}

std::size_t count_rows(const std::string& md) {
  std::istringstream in(md);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.starts_with("| ") && !line.starts_with("| |")) ++rows;
  }
  return rows;
}

}  // namespace

TEST_CASE("config: defaults round trip and unknown keys are rejected") {
  const ExperimentConfig defaults;
  CHECK(config_from_json(to_json(defaults)) == defaults);
  CHECK(config_from_json(Json::object()) == defaults);

  auto c = small_loop();
  c.inject.drifts.push_back({SliceId::kMmtc, "mean_arrival_kbps", 3.0, 25});
  c.inject.conflict_window = 30;
  c.data.preset = "custom";
  c.data.slices = datagen::GenConfig::urllc_oriented().slices;
  CHECK(config_from_json(to_json(c)) == c);

  CHECK_THROWS_WITH_AS(config_from_json(Json::parse(R"({"run":{"windowz":3}})")),
                       "config: unknown key 'run.windowz'", ValidationError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"seed":"x"})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"agent":{"policy":"greedy"}})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"data":{"preset":"custom"}})")), ValidationError);
}

TEST_CASE("validation happens before the run") {
  auto c = small_loop();
  c.run_windows = 0;
  CHECK_THROWS_AS(run_experiment(c), ValidationError);
  c = small_loop();
  c.train_windows = c.run_windows;
  CHECK_THROWS_AS(run_experiment(c), ValidationError);
  c = small_offline();
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(run_experiment(c), ValidationError);
  c = small_offline();
  c.bus = "udp://x";
  CHECK_THROWS_AS(run_experiment(c), ValidationError);
}

TEST_CASE("offline: separated slices are classified almost perfectly") {
  auto c = small_offline();
  c.data.overlap = 0.0;
  const auto r = run_experiment(c);
  CHECK(r.bundle.report.macro.f1 >= 0.95);
  CHECK(r.bundle.dataset.train_size + r.bundle.dataset.eval_size == 1500);
  CHECK(r.bundle.events.verdicts == r.bundle.dataset.eval_size);
}

TEST_CASE("offline: training and evaluation rows are disjoint") {
  const auto t = train_offline(small_offline());
  std::set<std::int64_t> train_ids;
  for (const auto& k : t.train) train_ids.insert(k.user_id);
  CHECK(train_ids.size() == t.train.size());
  for (const auto& k : t.holdout) CHECK(train_ids.count(k.user_id) == 0);
  CHECK(t.train.size() + t.holdout.size() == 1500);
}

TEST_CASE("offline: identical config gives byte-identical bundles") {
  auto c = small_offline();
  c.include_timing = false;
  const auto a = to_json(run_experiment(c).bundle).dump();
  const auto b = to_json(run_experiment(config_from_json(to_json(c))).bundle).dump();
  CHECK(a == b);
}

TEST_CASE("closed loop: one control per report, verdicts for every post-training user") {
  const auto c = small_loop();
  const auto r = run_experiment(c);
  REQUIRE(r.windows.size() == 40);
  const auto users = static_cast<std::int64_t>(3 * c.sim.users_per_slice);
  CHECK(r.bundle.events.verdicts == (c.run_windows - c.train_windows) * users);
  CHECK(r.bundle.loop->windows == 40);
  CHECK(r.bundle.events.rejected_actions == 0);
  CHECK(r.bundle.events.dropped_messages == 0);
  for (const auto& w : r.windows) {
    CHECK(w.verdicts == (w.window_id < c.train_windows ? 0 : users));
  }
  CHECK(to_json(r.bundle).dump() == to_json(run_experiment(c).bundle).dump());
}

TEST_CASE("closed loop over tcp matches inproc") {
  auto c = small_loop();
  const auto inproc = run_experiment(c);
  c.bus = "tcp://127.0.0.1:0";
  const auto tcp = run_experiment(c);
  auto a = to_json(inproc.bundle);
  auto b = to_json(tcp.bundle);
  a.erase("config");
  b.erase("config");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("closed loop: policies and verdict log") {
  const auto log = std::filesystem::temp_directory_path() / "slicever_test_verdicts.ndjson";
  for (auto p : {PolicyKind::kHeuristic, PolicyKind::kStatic}) {
    auto c = small_loop();
    c.policy = p;
    c.verdict_log = log.string();
    const auto r = run_experiment(c);
    std::ifstream in(log);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
      CHECK(std::holds_alternative<bus::VerdictMsg>(bus::decode_msg(line)));
      ++lines;
    }
    CHECK(lines == r.verdicts.size());
  }
  std::filesystem::remove(log);
}

TEST_CASE("closed loop: conflict injection multiplies conflict flags after the swap") {
  auto count_after = [](const RunResult& r, std::int64_t from) {
    return std::count_if(r.verdicts.begin(), r.verdicts.end(),
                         [&](const auto& v) { return v.window_id >= from && v.flags.conflict; });
  };
  auto c = small_loop();
  const auto baseline = run_experiment(c);
  c.inject.conflict_window = 30;
  const auto injected = run_experiment(c);
  CHECK(count_after(injected, 30) > 5 * count_after(baseline, 30) + 10);
  // Windows before the swap are untouched.
  CHECK(count_after(injected, 0) - count_after(injected, 30) == count_after(baseline, 0) - count_after(baseline, 30));
  const auto& esc = injected.bundle.escalations;
  CHECK(std::any_of(esc.begin(), esc.end(), [](const auto& e) { return e.reason == "conflict"; }));
}

TEST_CASE("render_report layout") {
  ReportBundle b;
  b.scenario = "embb";
  metrics::ConfusionMatrix m{};
  m[0][0] = 5;
  m[1][1] = 4;
  m[2][2] = 3;
  b.report = metrics::classification_report(m);
  b.config = to_json(ExperimentConfig{});

  const auto md = report::render_report(b, report::Format::kMarkdown);
  CHECK(count_rows(md) == 6);
  CHECK(md.find("| eMBB | 1.00 | 1.00 | 1.00 | 5 |") != std::string::npos);
  CHECK(md.find("| Accuracy |  |  | 1.00 | 12 |") != std::string::npos);
  CHECK(md.find("| Weighted Avg. | 1.00 | 1.00 | 1.00 | 12 |") != std::string::npos);
  const auto md_order = {"| eMBB", "| mMTC", "| URLLC", "| Accuracy", "| Macro Avg.", "| Weighted Avg."};
  std::size_t at = 0;
  for (const auto* label : md_order) {
    const auto pos = md.find(label, at);
    REQUIRE(pos != std::string::npos);
    at = pos;
  }

  const auto text = report::render_report(b, report::Format::kText);
  CHECK(text.find("Macro Avg.") != std::string::npos);

  const auto json = report::render_report(b, report::Format::kJson);
  CHECK(bundle_from_json(Json::parse(json)) == b);
}

TEST_CASE("report json keeps full precision") {
  auto c = small_offline();
  const auto bundle = run_experiment(c).bundle;
  const auto back = bundle_from_json(Json::parse(report::render_report(bundle, report::Format::kJson)));
  CHECK(back == bundle);
  CHECK(config_from_json(back.config) == c);
}
