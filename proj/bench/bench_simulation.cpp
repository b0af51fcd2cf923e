// Serial vs OpenMP execution of one scenario and of a small sweep.

#include <benchmark/benchmark.h>

#include "cavsim/experiment.hpp"
#include "cavsim/simulation.hpp"

using namespace cavsim;

namespace {

ScenarioConfig scenario(ExecutionPolicy policy) {
  ScenarioConfig c;
  c.duration = 300.0;
  c.fleet = {static_cast<std::size_t>(100), 0.3, 0.3, VehicleClass::kCAVuLC};
  c.seed = 17;
  c.policy = policy;
  return c;
}

void BM_Scenario(benchmark::State& state) {
  const auto policy = static_cast<ExecutionPolicy>(state.range(0));
  const ScenarioConfig c = scenario(policy);
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(c).metrics);
  state.SetItemsProcessed(state.iterations() * c.steps());
  state.SetLabel(policy == ExecutionPolicy::kSerial ? "serial" : "parallel");
}

void BM_Sweep(benchmark::State& state) {
  const auto policy = static_cast<ExecutionPolicy>(state.range(0));
  ExperimentConfig ex;
  ex.replicates = 2;
  ex.cv_mprs = {0.1, 0.4};
  ex.base.duration = 300.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep(ex, policy).runs.size());
  state.SetLabel(policy == ExecutionPolicy::kSerial ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_Scenario)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
