#include <benchmark/benchmark.h>

#include "slicever/datagen.h"
#include "slicever/experiment.h"
#include "slicever/ran_sim.h"

using namespace slicever;

namespace {

const verify::VerifierModel& trained_model() {
  static const auto model = experiment::train_offline(experiment::ExperimentConfig{}).model;
  return model;
}

const std::vector<UserKpi>& samples() {
  static const auto rows = [] {
    auto gen = datagen::GenConfig::embb_oriented();
    gen.n_samples = 4096;
    gen.seed = 9;
    return datagen::sample_dataset(gen);
  }();
  return rows;
}

void BM_VerifySample(benchmark::State& state) {
  const auto& model = trained_model();
  const auto& rows = samples();
  verify::VerifierState vs;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(verify::verify_sample(model, vs, rows[i++ % rows.size()]));
  }
}
BENCHMARK(BM_VerifySample);

void BM_VerifyWindow(benchmark::State& state) {
  const auto& model = trained_model();
  const auto& rows = samples();
  verify::VerifierState vs;
  std::size_t i = 0;
  for (auto _ : state) {
    for (int k = 0; k < 18; ++k) benchmark::DoNotOptimize(verify::verify_sample(model, vs, rows[i++ % rows.size()]));
    benchmark::DoNotOptimize(verify::evaluate_drift(model, vs));
  }
}
BENCHMARK(BM_VerifyWindow)->Unit(benchmark::kMicrosecond);

void BM_FitGbdt(benchmark::State& state) {
  auto gen = datagen::GenConfig::embb_oriented();
  gen.n_samples = static_cast<std::size_t>(state.range(0));
  const auto data = tree::Dataset::from_kpis(datagen::sample_dataset(gen));
  for (auto _ : state) benchmark::DoNotOptimize(tree::fit_gbdt(data, {}, {}));
}
BENCHMARK(BM_FitGbdt)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_RunWindow(benchmark::State& state) {
  sim::SimConfig cfg;
  sim::RanSimulator sim(cfg);
  const auto action = sim::RanSimulator::equal_split(cfg.total_prbs, SchedulerPolicy::kProportionalFair);
  for (auto _ : state) benchmark::DoNotOptimize(sim.run_window(action));
}
BENCHMARK(BM_RunWindow)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
