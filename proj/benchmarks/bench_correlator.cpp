// Throughput benchmarks for the hot paths: the log-binned correlator sweep,
// the diffusion-averaged short-delay curve, and the density-matrix oracle.

#include <benchmark/benchmark.h>

#include <vector>

#include "specdiff/correlator.hpp"
#include "specdiff/inhom.hpp"
#include "specdiff/montecarlo.hpp"
#include "specdiff/tls.hpp"

using namespace specdiff;

namespace {

constexpr double kT1 = 1.83e-9;

void BM_correlate(benchmark::State& state) {
  auto n = static_cast<double>(state.range(0));
  // constant-rate stream sized so both channels together hold ~n events
  auto [a, b] = constant_rate_stream(2e5, n / 2e5, 11, 0.5);
  auto edges = make_log_bins({1e-9, 10.0, 10});
  for (auto _ : state) {
    auto counts = correlate(a, b, edges);
    benchmark::DoNotOptimize(counts);
  }
  state.SetItemsProcessed(
      state.iterations() *
      static_cast<std::int64_t>(a.timestamps.size() + b.timestamps.size()));
}

void BM_correlate_symmetrized(benchmark::State& state) {
  auto n = static_cast<double>(state.range(0));
  auto [a, b] = constant_rate_stream(2e5, n / 2e5, 11, 0.5);
  auto edges = make_log_bins({1e-9, 10.0, 10});
  for (auto _ : state) {
    auto counts = correlate_symmetrized(a, b, edges);
    benchmark::DoNotOptimize(counts);
  }
  state.SetItemsProcessed(
      state.iterations() *
      static_cast<std::int64_t>(a.timestamps.size() + b.timestamps.size()));
}

void BM_diffusive_curve(benchmark::State& state) {
  EmitterParams e{kT1, kT1, 0.0, 4e9};
  DriveParams drv{static_cast<double>(state.range(0)) / kT1, 0.0};
  std::vector<double> taus;
  for (int k = 0; k <= 60; ++k) taus.push_back(static_cast<double>(k) * 0.25e-9);
  for (auto _ : state) {
    auto curve = g2_diffusive_curve(taus, drv, e);
    benchmark::DoNotOptimize(curve);
  }
}

void BM_master_equation(benchmark::State& state) {
  EmitterParams e{kT1, 2.0 * kT1, 0.0, 0.0};
  DriveParams drv{static_cast<double>(state.range(0)) / kT1, 0.0};
  std::vector<double> taus;
  for (int k = 0; k <= 600; ++k)
    taus.push_back(20.0 * e.t2 * static_cast<double>(k) / 600.0);
  for (auto _ : state) {
    auto g2 = integrate_master_equation(drv, e, 0.0, taus);
    benchmark::DoNotOptimize(g2);
  }
}

} // namespace

BENCHMARK(BM_correlate)
    ->Arg(100000)
    ->Arg(1000000)
    ->Arg(4000000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_correlate_symmetrized)
    ->Arg(1000000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_diffusive_curve)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_master_equation)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
