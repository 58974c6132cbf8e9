#include "dyadapt/calibration.hpp"
#include "dyadapt/density.hpp"
#include "dyadapt/dyadic.hpp"
#include "dyadapt/lepski.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace dyadapt;

namespace {

const PiecewiseDensity&
cusp()
{
  static const auto f = PiecewiseDensity::create(
    { { 0.0, 1.0, 0.48365396477444733, 1.0, 0.75, 0.5 } }, 0.45, 1.4);
  return f;
}

void
BM_BuildPyramid(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto xs = sample(cusp(), n, 1);
  const int j_max = default_j_max(n);
  for (auto _ : state)
    benchmark::DoNotOptimize(build_pyramid(xs, j_max));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_BuildPyramid)->RangeMultiplier(4)->Range(1 << 10, 1 << 20);

void
BM_SelectAll(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = build_pyramid(sample(cusp(), n, 2), default_j_max(n));
  const Threshold zeta(1.8 * std::sqrt(std::log(static_cast<double>(n))));
  for (auto _ : state)
    benchmark::DoNotOptimize(select_all(p, 0, zeta));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.finest_bins()));
}
BENCHMARK(BM_SelectAll)->RangeMultiplier(4)->Range(1 << 10, 1 << 20);

void
BM_LhsCurve(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const int j_max = default_j_max(n);
  auto cfg = make_calibration_config(n, j_max, { .reps = 4096, .seed = 3 });
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_lhs_curve(cfg, 0, 4, Parallelism{ 1 }));
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_LhsCurve)->Arg(1 << 10)->Arg(1 << 13)->Arg(1 << 16)->Unit(benchmark::kMillisecond);

void
BM_SimulateChain(benchmark::State& state)
{
  std::uint64_t r = 0;
  for (auto _ : state) {
    Substream rng(7, { r++ });
    benchmark::DoNotOptimize(simulate_chain(8192, 0.01, 0, 6, rng));
  }
}
BENCHMARK(BM_SimulateChain);

} // namespace

BENCHMARK_MAIN();
