#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "plml/landscape.hpp"
#include "plml/sde.hpp"

using namespace plml;

static void bm_euler_maruyama(benchmark::State& state) {
  ProblemSpec spec = make_quadratic({1.0});
  spec.sigma = 1.0;
  SdeParams params;
  params.mu = 1.5;
  params.dt = 1e-3;
  params.t_end = 1.0;
  params.n_paths = state.range(0);
  params.init = InitialLaw::point(Eigen::VectorXd::Ones(1),
                                  Eigen::VectorXd::Zero(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(euler_maruyama_msgd(spec, params));
  }
  state.SetItemsProcessed(state.iterations() * params.n_paths * 1000);
}
BENCHMARK(bm_euler_maruyama)->Arg(16)->Arg(128);

static void bm_moment_evolution(benchmark::State& state) {
  const MomentMatrix ode = moment_ode_quadratic(1.0, 1.5, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evolve_moments(ode, {1.0, 0.0, 0.0}, 5.0));
  }
}
BENCHMARK(bm_moment_evolution);

static void bm_optimal_rate(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(sde_optimal_rate(0.5, 1.0, 1.5));
  }
}
BENCHMARK(bm_optimal_rate);

BENCHMARK_MAIN();
