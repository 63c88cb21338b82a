#include <benchmark/benchmark.h>

#include <cmath>

#include <Eigen/Core>

#include "plml/discrete.hpp"
#include "plml/landscape.hpp"

using namespace plml;

static void bm_msgd_step(benchmark::State& state) {
  const ProblemSpec spec = make_quadratic(std::vector<double>(state.range(0), 1.0));
  PathState path;
  path.x = Eigen::VectorXd::Ones(spec.dim);
  path.v = Eigen::VectorXd::Zero(spec.dim);
  const Eigen::VectorXd noise = Eigen::VectorXd::Zero(spec.dim);
  for (auto _ : state) {
    path = msgd_step(path, 0.01, spec, std::sqrt(2.0), noise);
    benchmark::DoNotOptimize(path.x.data());
  }
}
BENCHMARK(bm_msgd_step)->Arg(1)->Arg(16)->Arg(256);

static void bm_ensemble(benchmark::State& state) {
  ProblemSpec spec = make_quadratic({1.0, 0.5});
  spec.sigma = 1.0;
  DiscreteParams params;
  params.schedule = StepSchedule::constant(0.01);
  params.mu = std::sqrt(2.0);
  params.n_steps = 200;
  params.n_paths = state.range(0);
  params.init = InitialLaw::point(Eigen::VectorXd::Ones(2),
                                  Eigen::VectorXd::Zero(2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_msgd(spec, params, LyapunovCoeffs{}));
  }
  state.SetItemsProcessed(state.iterations() * params.n_paths * params.n_steps);
}
BENCHMARK(bm_ensemble)->Arg(64)->Arg(512);

static void bm_decay_fit(benchmark::State& state) {
  std::vector<double> values(5000), times(5000);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::exp(-0.01 * static_cast<double>(i));
    times[i] = 0.01 * static_cast<double>(i);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_decay_factor(values, times));
  }
}
BENCHMARK(bm_decay_fit);

BENCHMARK_MAIN();
