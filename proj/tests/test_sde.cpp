#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plml/certify.hpp"
#include "plml/landscape.hpp"
#include "plml/sde.hpp"

using namespace plml;

namespace {

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

double max_x2_error_msgd(double dt) {
  const ProblemSpec spec = make_quadratic({1.0});
  SdeParams params;
  params.mu = 2.0;
  params.dt = dt;
  params.t_end = 5.0;
  params.init = InitialLaw::point(scalar(1.0), scalar(0.0));
  const SdeTrajectoryStats stats = euler_maruyama_msgd(spec, params);
  double worst = 0.0;
  for (std::size_t k = 0; k < stats.t.size(); ++k) {
    const double t = stats.t[k];
    const double exact = (1.0 + t) * std::exp(-t);  // critically damped
    worst = std::max(worst, std::abs(stats.mean_x2[k] - exact * exact));
  }
  return worst;
}

double max_x2_error_sgd(double dt) {
  const ProblemSpec spec = make_quadratic({1.0});
  SdeParams params;
  params.dt = dt;
  params.t_end = 5.0;
  params.init = InitialLaw::point(scalar(1.0), scalar(0.0));
  const SdeTrajectoryStats stats = euler_maruyama_sgd(spec, params);
  double worst = 0.0;
  for (std::size_t k = 0; k < stats.t.size(); ++k) {
    const double exact = std::exp(-stats.t[k]);  // gradient flow
    worst = std::max(worst, std::abs(stats.mean_x2[k] - exact * exact));
  }
  return worst;
}

}  // namespace

TEST_CASE("noise-free momentum paths converge at first order in dt") {
  const double coarse = max_x2_error_msgd(0.004);
  const double fine = max_x2_error_msgd(0.002);
  CHECK(coarse < 0.01);
  CHECK(coarse / fine > 1.7);
  CHECK(coarse / fine < 2.3);
}

TEST_CASE("noise-free gradient-flow paths converge at first order in dt") {
  const double coarse = max_x2_error_sgd(0.004);
  const double fine = max_x2_error_sgd(0.002);
  CHECK(coarse < 0.01);
  CHECK(coarse / fine > 1.7);
  CHECK(coarse / fine < 2.3);
}

TEST_CASE("the minimizer is an equilibrium even with noise switched on") {
  ProblemSpec spec = make_quadratic({1.0});
  spec.sigma = 1.0;  // diffusion sqrt(sigma f) vanishes at f = 0
  SdeParams params;
  params.mu = 2.0;
  params.dt = 0.01;
  params.t_end = 1.0;
  params.seed = 5;
  params.init = InitialLaw::point(scalar(0.0), scalar(0.0));
  const SdeTrajectoryStats stats = euler_maruyama_msgd(spec, params);
  for (std::size_t k = 0; k < stats.t.size(); ++k) {
    CHECK(stats.mean_x2[k] == 0.0);
    CHECK(stats.mean_f[k] == 0.0);
    CHECK(stats.alive_fraction[k] == 1.0);
  }
  CHECK_FALSE(stats.truncated);
}

TEST_CASE("paths never die on the whole space") {
  ProblemSpec spec = make_quadratic({1.0});
  spec.sigma = 2.0;
  SdeParams params;
  params.mu = 1.0;
  params.dt = 0.01;
  params.t_end = 2.0;
  params.n_paths = 50;
  params.seed = 6;
  params.init = InitialLaw::point(scalar(1.0), scalar(0.0));
  const SdeTrajectoryStats stats = euler_maruyama_msgd(spec, params);
  for (double a : stats.alive_fraction) CHECK(a == 1.0);
}

TEST_CASE("trajectories are reproducible across worker counts") {
  ProblemSpec spec = make_quadratic({1.0, 2.0});
  spec.sigma = 1.0;
  SdeParams params;
  params.mu = 1.5;
  params.dt = 0.01;
  params.t_end = 1.0;
  params.n_paths = 150;
  params.seed = 7;
  params.init = InitialLaw::point(Eigen::VectorXd::Ones(2),
                                  Eigen::VectorXd::Zero(2));

  setenv("PLML_THREADS", "1", 1);
  const SdeTrajectoryStats serial = euler_maruyama_msgd(spec, params);
  setenv("PLML_THREADS", "3", 1);
  const SdeTrajectoryStats threaded = euler_maruyama_msgd(spec, params);
  unsetenv("PLML_THREADS");

  REQUIRE(serial.t.size() == threaded.t.size());
  for (std::size_t k = 0; k < serial.t.size(); ++k) {
    CHECK(serial.mean_f[k] == threaded.mean_f[k]);
    CHECK(serial.mean_x2[k] == threaded.mean_x2[k]);
    CHECK(serial.mean_v2[k] == threaded.mean_v2[k]);
  }
}

TEST_CASE("simulator parameters are validated") {
  const ProblemSpec spec = make_quadratic({1.0});
  SdeParams params;
  params.init = InitialLaw::point(scalar(1.0), scalar(0.0));

  SdeParams bad_dt = params;
  bad_dt.dt = 0.0;
  CHECK_THROWS_AS(euler_maruyama_msgd(spec, bad_dt), std::invalid_argument);

  SdeParams short_horizon = params;
  short_horizon.dt = 0.5;
  short_horizon.t_end = 0.1;
  CHECK_THROWS_AS(euler_maruyama_msgd(spec, short_horizon),
                  std::invalid_argument);

  SdeParams bad_mu = params;
  bad_mu.mu = -1.0;
  CHECK_THROWS_AS(euler_maruyama_msgd(spec, bad_mu), std::invalid_argument);

  SdeParams no_paths = params;
  no_paths.n_paths = 0;
  CHECK_THROWS_AS(euler_maruyama_msgd(spec, no_paths), std::invalid_argument);

  SdeParams wrong_dim = params;
  wrong_dim.init = InitialLaw::point(Eigen::VectorXd::Ones(2),
                                     Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(euler_maruyama_msgd(spec, wrong_dim), std::invalid_argument);
}

TEST_CASE("an unstable step size reports the offending path and step") {
  const ProblemSpec spec = make_quadratic({100.0});
  SdeParams params;
  params.mu = 1.0;
  params.dt = 1.0;
  params.t_end = 400.0;
  params.init = InitialLaw::point(scalar(1.0), scalar(0.0));
  try {
    euler_maruyama_msgd(spec, params);
    FAIL("expected overflow");
  } catch (const std::overflow_error& e) {
    const std::string what = e.what();
    CHECK(what.find("path 0") != std::string::npos);
    CHECK(what.find("step") != std::string::npos);
  }
}

TEST_CASE("second-moment matrix structure and dominant eigenvalues") {
  const MomentMatrix crit = moment_ode_quadratic(1.0, 2.0, 0.0);
  CHECK(crit.M(0, 0) == 0.0);
  CHECK(crit.M(0, 1) == 2.0);
  CHECK(crit.M(0, 2) == 0.0);
  CHECK(crit.M(2, 0) == 0.0);  // no noise feed-in at sigma = 0
  // critical damping makes -2 a defective triple eigenvalue, where solver
  // accuracy degrades to roughly the cube root of machine precision
  CHECK(crit.dominant_eig_real == doctest::Approx(-2.0).epsilon(1e-4));

  const MomentMatrix over = moment_ode_quadratic(1.0, 3.0, 0.0);
  CHECK(over.dominant_eig_real ==
        doctest::Approx(-(3.0 - std::sqrt(5.0))).epsilon(1e-9));

  const MomentMatrix noisy = moment_ode_quadratic(2.0, 1.0, 3.0);
  CHECK(noisy.M(2, 0) == 3.0);  // sigma lambda / 2
  CHECK(noisy.M(2, 1) == -4.0);
  CHECK(noisy.M(2, 2) == -2.0);

  CHECK_THROWS_AS(moment_ode_quadratic(0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(moment_ode_quadratic(1.0, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(moment_ode_quadratic(1.0, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("moment evolution matches the closed-form damped solution") {
  // lambda = 1, mu = 2, sigma = 0 from x0 = 1, v0 = 0:
  // x(t) = (1+t)e^{-t}, v(t) = -t e^{-t}
  const MomentMatrix ode = moment_ode_quadratic(1.0, 2.0, 0.0);
  const Eigen::Vector3d m1 = evolve_moments(ode, {1.0, 0.0, 0.0}, 1.0);
  const double e2 = std::exp(-2.0);
  CHECK(m1(0) == doctest::Approx(4.0 * e2).epsilon(1e-9));
  CHECK(m1(1) == doctest::Approx(-2.0 * e2).epsilon(1e-9));
  CHECK(m1(2) == doctest::Approx(e2).epsilon(1e-9));

  const Eigen::Vector3d m0 = evolve_moments(ode, {1.0, 0.0, 0.0}, 0.0);
  CHECK(m0(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(evolve_moments(ode, {1.0, 0.0, 0.0}, -1.0),
                  std::invalid_argument);
}

TEST_CASE("friction window edges") {
  const SdeMuBounds collapsed = sde_mu_bounds(1.0, 1.0, 1.0, 0.0);
  CHECK(collapsed.mu_minus == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(collapsed.mu_plus == doctest::Approx(2.0).epsilon(1e-14));

  const SdeMuBounds curved = sde_mu_bounds(std::sqrt(2.0), 2.0, 1.0, 0.0);
  CHECK(curved.mu_minus ==
        doctest::Approx(2.0 * std::sqrt(2.0) - 1.0).epsilon(1e-12));

  CHECK_THROWS_AS(sde_mu_bounds(2.0, 1.0, 1.0, 2.5), std::invalid_argument);
  CHECK_THROWS_AS(sde_mu_bounds(0.0, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("friction windows stay inside the admissible strip") {
  const double L = 1.0, C_L = 1.5, sigma = 0.5;
  const double b_max = 4.0 * L / sigma;
  for (int i = 0; i < 200; ++i) {
    const double b =
        std::exp(std::log(0.01) +
                 (std::log(b_max * 0.999) - std::log(0.01)) * i / 199.0);
    const SdeMuBounds w = sde_mu_bounds(b, C_L, L, sigma);
    REQUIRE(std::isfinite(w.mu_minus));
    REQUIRE(std::isfinite(w.mu_plus));
    CHECK(w.mu_minus <= w.mu_plus);
    CHECK(C_L / b < w.mu_minus);
    CHECK(w.mu_plus < b + 2.0 * C_L / b);
  }
}

TEST_CASE("branch discriminant polynomial") {
  CHECK(sde_phi(1.0, 1.0, 1.0, 0.0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(sde_phi(std::sqrt(2.0), 2.0, 1.0, 0.0) ==
        doctest::Approx(7.0).epsilon(1e-12));
  // b -> 0 limit is C_L^2
  CHECK(sde_phi(1e-8, 3.0, 1.0, 0.0) == doctest::Approx(9.0).epsilon(1e-9));
}

TEST_CASE("continuous-time rate for a concrete friction") {
  CHECK(sde_rate_for(1.0, 1.5, 1.0, 1.0, 0.0, 1e-6) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sde_rate_for(1.0, 2.0, 1.0, 1.0, 0.0, 1e-6) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // exactly at the branch point the rate backs off by epsilon
  CHECK(sde_rate_for(1.0, 5.0 / 3.0, 1.0, 1.0, 0.0, 1e-3) ==
        doctest::Approx(4.0 / 3.0 - 1e-3).epsilon(1e-12));
}

TEST_CASE("continuous-time rate rejects frictions outside the union") {
  // b = 1, C_L = 2, L = 1: band (2.382, 4.618) inside (2, 5)
  CHECK_THROWS_AS(sde_rate_for(1.0, 2.0, 2.0, 1.0, 0.0, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(sde_rate_for(1.0, 3.0, 2.0, 1.0, 0.0, 1e-6),
                  std::invalid_argument);
  CHECK_THROWS_AS(sde_rate_for(1.0, 5.0, 2.0, 1.0, 0.0, 1e-6),
                  std::invalid_argument);
  CHECK(sde_rate_for(1.0, 2.2, 2.0, 1.0, 0.0, 1e-6) ==
        doctest::Approx(0.4).epsilon(1e-9));
  // the window edge itself is admissible
  const SdeMuBounds w = sde_mu_bounds(1.0, 2.0, 1.0, 0.0);
  CHECK_NOTHROW(sde_rate_for(1.0, w.mu_minus, 2.0, 1.0, 0.0, 1e-6));
}

TEST_CASE("tuned rate closed form") {
  const SdeTunedRate noisy = sde_tuned_rate(1.0, 1.0, 1.0);
  CHECK(noisy.c_star == doctest::Approx(1.125).epsilon(1e-14));
  CHECK(noisy.mu == doctest::Approx(1.49669).epsilon(1e-5));
  CHECK(noisy.m == doctest::Approx(0.87206).epsilon(1e-5));

  const SdeTunedRate quiet = sde_tuned_rate(1.0, 1.0, 0.0);
  CHECK(quiet.m == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  const double boundary = 4.0 / std::sqrt(1.125);
  CHECK_THROWS_AS(sde_tuned_rate(1.0, 1.0, boundary), std::domain_error);
  CHECK_THROWS_AS(sde_tuned_rate(1.0, 1.0, boundary + 1.0), std::domain_error);
}

TEST_CASE("plain gradient-flow rate") {
  CHECK(sgd_sde_rate(1.0, 1.0, 0.0) == 2.0);
  CHECK(sgd_sde_rate(1.0, 1.0, 4.0) == 0.0);
  CHECK(sgd_sde_rate(0.5, 1.0, 2.0) == 0.0);
  CHECK(sgd_sde_rate(1.0, 1.0, 8.0) == -2.0);
}

TEST_CASE("optimized rate recovers the closed form on a curved problem") {
  const SdeRate best = sde_optimal_rate(1.0, 2.0, 0.0);
  CHECK(best.m == doctest::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-9));
  CHECK(best.b == doctest::Approx(std::sqrt(2.0)).epsilon(1e-4));
  CHECK(best.c_star == 2.0);
  CHECK(best.phi >= 0.0);
  CHECK(best.mu == doctest::Approx(best.mu_minus).epsilon(1e-12));
}

TEST_CASE("optimized rate stays positive under heavy noise") {
  const SdeRate defiant = sde_optimal_rate(1.0, 1.0, 8.0);
  CHECK(defiant.m > 0.0);
  CHECK(defiant.b < 4.0 * 1.0 / 8.0);
  CHECK(sgd_sde_rate(1.0, 1.0, 8.0) < 0.0);
}

TEST_CASE("optimized rate dominates the tuned closed form") {
  for (double L : {0.5, 1.0, 2.0}) {
    for (double kappa : {1.0, 1.05, 1.5, 3.0}) {
      const double C_L = kappa * L;
      for (double sigma : {0.0, 0.3, 1.0}) {
        const double c_star = std::max(C_L, 1.125 * L);
        if (sigma >= 4.0 * L / std::sqrt(c_star)) continue;
        const SdeTunedRate tuned = sde_tuned_rate(L, C_L, sigma);
        const SdeRate best = sde_optimal_rate(L, C_L, sigma);
        CHECK(best.m >= tuned.m - 1e-9);
      }
    }
  }
}

TEST_CASE("more noise never certifies a faster optimized rate") {
  double previous = std::numeric_limits<double>::infinity();
  for (double sigma : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    const double m = sde_optimal_rate(1.0, 1.0, sigma).m;
    CHECK(m <= previous + 1e-9);
    previous = m;
  }
}

TEST_CASE("moment oracle never beats the certified rate") {
  // the rate parameterization must lower-bound the true spectral decay
  CounterRng rng(31, 0);
  int tested = 0;
  while (tested < 30) {
    const double lambda = 0.2 + 1.8 * rng.next_double();
    const double sigma = rng.next_double();
    const double b_cap = sigma > 0.0 ? 4.0 * lambda / sigma : 10.0;
    const double b = std::min(b_cap * 0.9, 0.1 + 3.0 * rng.next_double());
    const SdeMuBounds w = sde_mu_bounds(b, lambda, lambda, sigma);
    const double mu = w.mu_minus;  // edge of the lower window
    if (!(mu > lambda / b)) continue;
    const double m = sde_rate_for(b, mu, lambda, lambda, sigma, 1e-6);
    const MomentMatrix ode = moment_ode_quadratic(lambda, mu, sigma);
    CHECK(ode.dominant_eig_real <= -m + 1e-9);
    ++tested;
  }
}

TEST_CASE("sde exit probability behaves at the extremes") {
  ProblemSpec spec = make_quadratic({1.0});
  spec.domain = Domain::ball(scalar(0.0), 1.0);
  SdeParams params;
  params.mu = 2.0;
  params.dt = 0.01;
  params.t_end = 2.0;
  params.n_paths = 200;
  params.seed = 8;
  params.init = InitialLaw::point(scalar(0.0), scalar(0.0));

  // sigma = 0 and a contracting start: nobody leaves
  const Estimate quiet = sde_exit_probability(spec, params, 0.1);
  CHECK(quiet.value == 0.0);
  CHECK(quiet.std_error == 0.0);

  CHECK_THROWS_AS(sde_exit_probability(spec, params, 1.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(sde_exit_probability(spec, params, 0.0),
                  std::invalid_argument);

  ProblemSpec open = make_quadratic({1.0});
  CHECK_THROWS_AS(sde_exit_probability(open, params, 0.1),
                  std::invalid_argument);

  // violent noise in a tiny domain: nearly everyone leaves before the
  // f-proportional diffusion can quiet down near the minimizer
  ProblemSpec loud = make_quadratic({1.0});
  loud.sigma = 5000.0;
  loud.domain = Domain::ball(scalar(0.0), 0.5);
  const Estimate p = sde_exit_probability(loud, params, 0.4);
  CHECK(p.value >= 0.95);
}

TEST_CASE("sde exit probability shrinks with the start radius") {
  ProblemSpec spec = make_quadratic({1.0});
  spec.sigma = 1.0;
  spec.domain = Domain::ball(scalar(0.0), 0.8);
  SdeParams params;
  params.mu = 1.0;
  params.dt = 0.01;
  params.t_end = 2.0;
  params.n_paths = 500;
  params.seed = 9;
  params.init = InitialLaw::point(scalar(0.0), scalar(0.0));
  const Estimate wide = sde_exit_probability(spec, params, 0.6);
  const Estimate narrow = sde_exit_probability(spec, params, 0.15);
  CHECK(narrow.value <= wide.value + 3.0 * wide.std_error);
}

TEST_CASE("trajectory csv round trips bitwise") {
  ProblemSpec spec = make_quadratic({1.0});
  spec.sigma = 1.0;
  SdeParams params;
  params.mu = 1.5;
  params.dt = 0.05;
  params.t_end = 1.0;
  params.n_paths = 20;
  params.seed = 10;
  params.init = InitialLaw::point(scalar(1.0), scalar(0.0));
  const SdeTrajectoryStats stats = euler_maruyama_msgd(spec, params);

  std::stringstream buf;
  stats.write_csv(buf);
  const SdeTrajectoryStats back = SdeTrajectoryStats::read_csv(buf);
  REQUIRE(back.t.size() == stats.t.size());
  for (std::size_t k = 0; k < stats.t.size(); ++k) {
    CHECK(back.t[k] == stats.t[k]);
    CHECK(back.mean_f[k] == stats.mean_f[k]);
    CHECK(back.mean_x2[k] == stats.mean_x2[k]);
    CHECK(back.mean_v2[k] == stats.mean_v2[k]);
    CHECK(back.alive_fraction[k] == stats.alive_fraction[k]);
  }
}

TEST_CASE("trajectory csv reader reports malformed input") {
  {
    std::stringstream empty;
    CHECK_THROWS_WITH_AS(SdeTrajectoryStats::read_csv(empty),
                         "empty trajectory csv", std::runtime_error);
  }
  {
    std::stringstream bad("a,b,c\n");
    try {
      SdeTrajectoryStats::read_csv(bad);
      FAIL("expected a header error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("unexpected trajectory csv header") == 0);
    }
  }
  {
    std::stringstream only_header("t,mean_f,mean_x2,mean_v2,alive_fraction\n");
    CHECK_THROWS_WITH_AS(SdeTrajectoryStats::read_csv(only_header),
                         "trajectory csv has no data rows", std::runtime_error);
  }
  {
    std::stringstream short_row(
        "t,mean_f,mean_x2,mean_v2,alive_fraction\n0,1,1\n");
    CHECK_THROWS_WITH_AS(SdeTrajectoryStats::read_csv(short_row),
                         "expected 5 fields on line 2", std::runtime_error);
  }
}
