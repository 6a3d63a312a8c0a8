// OpenMP kernels against their serial references on the bundled scenarios.

#include "scenario_io.hpp"

#include "hocbf/geometry.hpp"
#include "hocbf/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace hocbf;

namespace {

const cli::ScenarioFile& planar() {
  static const cli::ScenarioFile f =
      cli::load_scenario(std::string(HOCBF_SCENARIO_DIR) + "/planar_double_integrator.json");
  return f;
}

std::vector<Vec> starts(std::size_t count) {
  const auto& f = planar();
  const ClosedLoop loop = prepare(f.scenario());
  return sample_in_S(loop.chains, f.samples->lo, f.samples->hi, count, 11);
}

template <class Raster>
void raster_xb(benchmark::State& state, Raster&& raster) {
  const Scenario& sc = planar().scenario();
  const ClosedLoop loop = prepare(sc);
  const Membership in_xb = [&](const Vec& x) { return feasible_at(loop.stack, sc.input_set, x).feasible; };
  const int res = static_cast<int>(state.range(0));
  const Slice slice{2, 3, Vec::Zero(4)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(raster(in_xb, Window{-1, 1, -1, 1}, res, res, slice).count());
  }
  state.SetItemsProcessed(state.iterations() * res * res);
}

void BM_RasterSerial(benchmark::State& s) { raster_xb(s, rasterize_set_serial); }
void BM_RasterParallel(benchmark::State& s) { raster_xb(s, rasterize_set); }

template <class Batch>
void batch(benchmark::State& state, Batch&& run) {
  Scenario sc = planar().scenario();
  sc.horizon = 5.0;
  const auto x0s = starts(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run(sc, x0s, SimulationOptions{}).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchSerial(benchmark::State& s) { batch(s, simulate_batch_serial); }
void BM_BatchParallel(benchmark::State& s) { batch(s, simulate_batch); }

}  // namespace

BENCHMARK(BM_RasterSerial)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RasterParallel)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
