#include <benchmark/benchmark.h>

#include <cmath>

#include "plml/certify.hpp"

using namespace plml;

static void bm_residuals(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        constraint_residuals(1.0, 2.0, 0.01, 1.5, 1.0, 1.0, 0.5));
  }
}
BENCHMARK(bm_residuals);

static void bm_certify_rate(benchmark::State& state) {
  const double gamma = std::pow(10.0, -static_cast<double>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(certify_rate(1.0, 1.0, 0.0, gamma, std::sqrt(2.0)));
  }
}
BENCHMARK(bm_certify_rate)->Arg(2)->Arg(4);

static void bm_certify_rate_noisy(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(certify_rate(0.02, 0.06, 100.0, 0.001, 0.3));
  }
}
BENCHMARK(bm_certify_rate_noisy);

static void bm_recursive_bound(benchmark::State& state) {
  const std::vector<double> gammas(state.range(0), 0.005);
  for (auto _ : state) {
    benchmark::DoNotOptimize(recursive_bound(gammas, std::sqrt(2.0) + 0.01,
                                             std::sqrt(2.0), std::sqrt(2.0),
                                             1.0, 1.0, 0.0, 0.5, 1.5));
  }
}
BENCHMARK(bm_recursive_bound)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
