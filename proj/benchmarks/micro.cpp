#include <benchmark/benchmark.h>

#include <filesystem>

#include "stencilperf/cache_sim.hpp"
#include "stencilperf/codegen.hpp"
#include "stencilperf/interpreter.hpp"
#include "stencilperf/layer_condition.hpp"
#include "stencilperf/machine.hpp"
#include "stencilperf/perf_model.hpp"

using namespace sperf;

namespace {

MachineModel toy() {
  return load_machine(std::filesystem::path(STENCILPERF_MACHINE_DIR) / "toy.yml");
}

StencilSpec spec_of(int radius, StencilKind kind) {
  StencilSpec s;
  s.radius = radius;
  s.kind = kind;
  return s;
}

void BM_BuildAndEmit(benchmark::State& state) {
  const auto spec = spec_of(static_cast<int>(state.range(0)), StencilKind::box);
  for (auto _ : state) {
    const auto k = build_kernel(spec);
    benchmark::DoNotOptimize(emit_c(k));
  }
}
BENCHMARK(BM_BuildAndEmit)->Arg(1)->Arg(2)->Arg(4);

void BM_LayerConditions(benchmark::State& state) {
  const auto m = toy();
  const auto k = build_kernel(spec_of(2, StencilKind::star));
  const auto dims = GridDims::cubic(k.spec, 200);
  for (auto _ : state) benchmark::DoNotOptimize(layer_conditions(k, m, dims));
}
BENCHMARK(BM_LayerConditions);

void BM_Ecm(benchmark::State& state) {
  const auto m = toy();
  const auto k = build_kernel(spec_of(1, StencilKind::star));
  const auto traffic = layer_conditions(k, m, GridDims::cubic(k.spec, 100)).traffic;
  for (auto _ : state) benchmark::DoNotOptimize(ecm(k, m, traffic));
}
BENCHMARK(BM_Ecm);

void BM_CacheSimulation(benchmark::State& state) {
  const auto m = toy();
  const auto k = build_kernel(spec_of(1, StencilKind::star));
  const auto dims = GridDims::cubic(k.spec, state.range(0));
  SimulationOptions o;
  o.warmup_sweeps = 0;
  std::uint64_t accesses = 0;
  for (auto _ : state) accesses += simulate_cache(k, m, dims, o).accesses;
  state.counters["accesses/s"] = benchmark::Counter(static_cast<double>(accesses),
                                                    benchmark::Counter::kIsRate);
}
BENCHMARK(BM_CacheSimulation)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Interpreter(benchmark::State& state) {
  const auto k = build_kernel(spec_of(1, StencilKind::star));
  const auto dims = GridDims::cubic(k.spec, state.range(0));
  const auto inputs = make_inputs<double>(k, dims, 1);
  for (auto _ : state) benchmark::DoNotOptimize(interpret<double>(k, dims, inputs));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(dims.interior_points(1)));
}
BENCHMARK(BM_Interpreter)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
