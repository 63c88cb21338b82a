#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "plml/certify.hpp"
#include "plml/rng.hpp"

using namespace plml;

namespace {

const double root2 = std::sqrt(2.0);

// tuple with all three strict small-step conditions comfortably negative,
// so small positive steps stay feasible
struct Tuple {
  double a, b, gamma, mu, L, C_L, sigma;
};
const Tuple loose{1.0, 0.75, 0.01, 1.25, 0.51, 0.55, 0.0};

}  // namespace

TEST_CASE("step coefficients match hand evaluation") {
  const CoefficientSet c = step_coefficients(1.0, 2.0, 0.1, 1.0, 1.0, 0.0);
  CHECK(c.B == doctest::Approx(1.105).epsilon(1e-14));
  CHECK(c.alpha == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.beta == doctest::Approx(-0.09895).epsilon(1e-12));
  CHECK(c.delta == doctest::Approx(0.7911).epsilon(1e-12));
  CHECK(c.eps == doctest::Approx(0.89505).epsilon(1e-12));

  // sigma only enters through alpha
  const CoefficientSet noisy = step_coefficients(1.0, 2.0, 0.1, 1.0, 1.0, 2.0);
  CHECK(noisy.alpha == doctest::Approx(1.0221).epsilon(1e-12));
  CHECK(noisy.beta == c.beta);
  CHECK(noisy.delta == c.delta);
  CHECK(noisy.eps == c.eps);
}

TEST_CASE("step coefficients collapse correctly at zero step size") {
  const CoefficientSet c = step_coefficients(3.0, 5.0, 0.0, 2.0, 4.0, 7.0);
  CHECK(c.alpha == 3.0);
  CHECK(c.beta == 0.0);
  CHECK(c.delta == 1.0);
  CHECK(c.eps == 2.5);
  CHECK_THROWS_AS(step_coefficients(1.0, 1.0, -0.1, 1.0, 1.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("residuals flag the side constraints") {
  // ab < C_L
  const ConstraintResiduals tiny =
      constraint_residuals(0.1, 0.1, 0.01, 1.0, 1.0, 1.0, 0.0);
  CHECK(tiny.r5 < 0.0);
  CHECK_FALSE(tiny.feasible);

  // gamma above b / C_L
  const ConstraintResiduals big =
      constraint_residuals(2.0, 1.0, 1.5, 1.0, 1.0, 1.0, 0.0);
  CHECK(big.r6 < 0.0);
  CHECK_FALSE(big.feasible);
}

TEST_CASE("residuals accept the tuned construction") {
  // b = mu = sqrt(2) saturates the gradient inequality in the zero-step
  // limit; the a offset buys only quadratic slack, so the step must be
  // small enough for that slack to cover the linear-in-gamma correction
  const ConstraintResiduals r = constraint_residuals(
      root2 + 0.01, root2, 1e-5, root2, 1.0, 1.0, 0.0);
  CHECK(r.feasible);
  CHECK(r.r1 <= 0.0);
  CHECK(r.r2 <= 0.0);
  CHECK(r.r3 <= 0.0);
  CHECK(r.r4 >= 0.0);
  CHECK(r.r5 >= 0.0);
  CHECK(r.r6 >= 0.0);
}

TEST_CASE("residuals accept a strictly interior tuple") {
  const Tuple& t = loose;
  const ConstraintResiduals r =
      constraint_residuals(t.a, t.b, t.gamma, t.mu, t.L, t.C_L, t.sigma);
  CHECK(r.feasible);
  CHECK(r.r1 < 0.0);
  CHECK(r.r2 < 0.0);
  CHECK(r.r3 < 0.0);
  CHECK(r.r4 > 0.0);
}

TEST_CASE("polynomial and coefficient forms agree on a random cloud") {
  CounterRng rng(17, 0);
  for (int i = 0; i < 10000; ++i) {
    const double a = std::pow(10.0, -2.0 + 4.0 * rng.next_double());
    const double b = std::pow(10.0, -2.0 + 4.0 * rng.next_double());
    const double gamma = std::pow(10.0, -4.0 + 4.0 * rng.next_double());
    const double mu = 5.0 * rng.next_double();
    const double L = 0.1 + 1.9 * rng.next_double();
    const double C_L = L * (1.0 + 4.0 * rng.next_double());
    const double sigma = 10.0 * rng.next_double();
    // the call itself cross-checks both forms and throws on disagreement
    CHECK_NOTHROW(constraint_residuals(a, b, gamma, mu, L, C_L, sigma));
  }
}

TEST_CASE("residuals reproduce their coefficient-form definitions") {
  const Tuple& t = loose;
  const ConstraintResiduals r =
      constraint_residuals(t.a, t.b, t.gamma, t.mu, t.L, t.C_L, t.sigma);
  const CoefficientSet c =
      step_coefficients(t.a, t.b, t.gamma, t.mu, t.C_L, t.sigma);
  CHECK(r.r1 == doctest::Approx(c.beta / t.gamma).epsilon(1e-12));
  CHECK(r.r2 == doctest::Approx((c.alpha - t.a * c.delta + 2.0 * c.beta * t.L) /
                                t.gamma)
                    .epsilon(1e-9));
  CHECK(r.r3 ==
        doctest::Approx((c.eps - 0.5 * t.b * c.delta) / t.gamma).epsilon(1e-9));
  CHECK(r.r4 == doctest::Approx(c.delta).epsilon(1e-12));
}

TEST_CASE("certify_rate is deterministic and internally consistent") {
  const auto first = certify_rate(1.0, 1.0, 0.0, 0.01, root2);
  const auto second = certify_rate(1.0, 1.0, 0.0, 0.01, root2);
  REQUIRE(first.has_value());
  REQUIRE(second.has_value());
  CHECK(first->a == second->a);
  CHECK(first->b == second->b);
  CHECK(first->rho_star == second->rho_star);

  CHECK(first->residuals.feasible);
  CHECK(first->delta == first->residuals.r4);
  const double position = 1.0 / (1.0 + first->a * first->gamma);
  CHECK(first->rho_star == std::max(position, first->delta));
  CHECK(first->r == 1.0 / first->rho_star);
  CHECK(first->boundary ==
        ((1.0 + first->a * first->gamma) * first->delta == 1.0));
}

TEST_CASE("certified rate approaches the tuned small-step value") {
  const auto cert = certify_rate(1.0, 1.0, 0.0, 0.01, root2);
  REQUIRE(cert.has_value());
  CHECK(cert->r > 1.0);
  const double rate = std::log(cert->r) / 0.01;
  CHECK(rate >= 0.9 * root2);
  CHECK(rate <= 1.05 * root2);
}

TEST_CASE("certify_rate reports no certificate for wild steps") {
  // gamma = mu = 3 with L = C_L = 1: the velocity residual
  // -1 + gamma (b/2 - a) + gamma^2 C_L + gamma^3 C_L a / 2
  // = 8 + 1.5 b + 10.5 a stays positive for every a, b > 0
  CHECK_FALSE(certify_rate(1.0, 1.0, 0.0, 3.0, 3.0).has_value());
  CHECK_THROWS_AS(certify_rate(1.0, 1.0, 0.0, -0.01, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(certify_rate(1.0, 0.5, 0.0, 0.01, 1.0),
                  std::invalid_argument);
}

namespace {

std::vector<double> closed_form_bounds(const Tuple& t, std::size_t n,
                                       double f0, double E0) {
  const CoefficientSet c =
      step_coefficients(t.a, t.b, t.gamma, t.mu, t.C_L, t.sigma);
  const double lift = 1.0 + t.a * t.gamma;
  const double q = lift * c.delta;
  std::vector<double> out(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double series =
        q == 1.0 ? static_cast<double>(k)
                 : q * (std::pow(q, static_cast<double>(k)) - 1.0) / (q - 1.0);
    out[k - 1] =
        (f0 + (t.gamma / lift) * E0 * series) / std::pow(lift, static_cast<double>(k));
  }
  return out;
}

}  // namespace

TEST_CASE("constant-step bounds match the geometric closed form") {
  // one tuple with (1 + a gamma) delta below 1, one above
  const Tuple contracting{0.98, 0.75, 0.01, 1.25, 0.51, 0.55, 0.0};
  const Tuple expanding{1.2, 0.75, 0.01, 1.25, 0.51, 0.55, 0.0};
  for (const Tuple& t : {contracting, expanding}) {
    const std::size_t n = 200;
    const std::vector<double> gammas(n, t.gamma);
    const std::vector<double> got = recursive_bound(
        gammas, t.a, t.b, t.mu, t.L, t.C_L, t.sigma, 0.3, 1.7);
    const std::vector<double> want = closed_form_bounds(t, n, 0.3, 1.7);
    REQUIRE(got.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero initial data gives zero bounds") {
  const Tuple& t = loose;
  const std::vector<double> gammas(50, t.gamma);
  for (double v :
       recursive_bound(gammas, t.a, t.b, t.mu, t.L, t.C_L, t.sigma, 0.0, 0.0)) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("a decaying schedule yields finite, eventually decreasing bounds") {
  // the energy term makes the bound climb first; with step sums growing
  // like 2 sqrt(n) / 100 the turnover sits near n = 5000, so the horizon
  // has to reach well past that before the start value is undercut
  const Tuple& t = loose;
  std::vector<double> gammas(20000);
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    gammas[i] = 0.01 / std::sqrt(static_cast<double>(i + 1));
  }
  const std::vector<double> bounds =
      recursive_bound(gammas, t.a, t.b, t.mu, t.L, t.C_L, t.sigma, 1.0, 2.0);
  REQUIRE(bounds.size() == 20000);
  for (double v : bounds) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v > 0.0);
  }
  CHECK(bounds.back() < bounds.front());
  // decreasing over the tail
  for (std::size_t i = 19000; i + 1 < 20000; ++i) {
    CHECK(bounds[i + 1] <= bounds[i]);
  }
}

TEST_CASE("schedule violations name the offending step") {
  const Tuple& t = loose;
  try {
    recursive_bound({0.01, 0.01, 10.0}, t.a, t.b, t.mu, t.L, t.C_L, t.sigma,
                    1.0, 1.0);
    FAIL("expected infeasible_schedule_error");
  } catch (const infeasible_schedule_error& e) {
    CHECK(e.step_index == 2);
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
  try {
    recursive_bound({0.01, 0.0}, t.a, t.b, t.mu, t.L, t.C_L, t.sigma, 1.0, 1.0);
    FAIL("expected infeasible_schedule_error");
  } catch (const infeasible_schedule_error& e) {
    CHECK(e.step_index == 1);
    CHECK(std::string(e.what()).find("non-positive") != std::string::npos);
  }
}

TEST_CASE("feasible_pair reproduces the tuned construction") {
  const FeasiblePair p = feasible_pair(root2, 1.0, 1.0, 0.01, root2);
  CHECK(p.a == doctest::Approx(root2 + 0.01).epsilon(1e-14));
  CHECK(p.ab_at_least_CL);

  // the constructed pair satisfies the strict small-step conditions
  const SmallStepRate rate = small_step_rate(p.a, root2, root2, 1.0, 1.0, 0.0);
  CHECK(rate.feasible);
  CHECK(rate.m == doctest::Approx(root2 - 0.01).epsilon(1e-12));
}

TEST_CASE("feasible_pair rejects frictions outside the admissible union") {
  CHECK_THROWS_AS(feasible_pair(0.5, 1.0, 1.0, 0.01, root2),
                  std::domain_error);  // at or below C_L/b + eps/2
  CHECK_THROWS_AS(feasible_pair(10.0, 1.0, 1.0, 0.01, root2),
                  std::domain_error);  // at or above b + 2C_L/b + eps
  CHECK_THROWS_AS(feasible_pair(2.0, 1.0, 1.0, 0.01, 1.0),
                  std::domain_error);  // inside the excluded band
  CHECK_THROWS_AS(feasible_pair(1.0, 1.0, 1.0, 0.0, 1.0),
                  std::invalid_argument);  // eps must be positive
}

TEST_CASE("feasible_pair discriminant never goes negative") {
  CounterRng rng(23, 0);
  for (int i = 0; i < 2000; ++i) {
    const double L = 0.05 + 2.0 * rng.next_double();
    const double C_L = L * (1.0 + 4.0 * rng.next_double());
    const double b = std::pow(10.0, -1.0 + 2.0 * rng.next_double());
    const double eps = 0.001 + rng.next_double();
    const double half_sum = b + C_L / b + 0.5 * eps;
    CHECK(half_sum * half_sum - 4.0 * L >= 0.0);
  }
}

TEST_CASE("feasible_pair tracks whether ab stays above C_L") {
  // upper window with mu beyond b + C_L/b + eps: a exists but ab < C_L
  // b = 1, C_L = L = 0.1, eps = 0.01: union (0.105, 0.2045) u (1.1105, 1.21)
  const double b = 1.0, C_L = 0.1, L = 0.1, eps = 0.01;
  const FeasiblePair hi = feasible_pair(1.15, C_L, L, eps, b);
  CHECK(1.15 > hi.mu_plus);
  CHECK_FALSE(hi.ab_at_least_CL);
  CHECK(hi.a * b < C_L);

  const FeasiblePair lo = feasible_pair(0.2, C_L, L, eps, b);
  CHECK(0.2 < lo.mu_minus);
  CHECK(lo.ab_at_least_CL);
  CHECK(lo.a * b >= C_L);
}

TEST_CASE("small_step_rate picks the binding branch") {
  const SmallStepRate velocity =
      small_step_rate(root2 + 0.01, root2, root2, 1.0, 1.0, 0.0);
  REQUIRE(velocity.feasible);
  CHECK(velocity.m == doctest::Approx(1.40421).epsilon(1e-5));
  CHECK_FALSE(velocity.position_branch);
  CHECK_FALSE(velocity.boundary);

  // a = mu - a + b exactly: tie, both branches agree
  const SmallStepRate tie = small_step_rate(1.0, 0.75, 1.25, 0.51, 0.55, 0.0);
  REQUIRE(tie.feasible);
  CHECK(tie.m == 1.0);
  CHECK(tie.position_branch);
  CHECK(tie.boundary);
}

TEST_CASE("small_step_rate needs strict inequalities") {
  // a mu - a^2 + a b - 2 L = 2 - 4 + 4 - 2 = 0: on the boundary, rejected
  const SmallStepRate flat = small_step_rate(2.0, 2.0, 1.0, 1.0, 1.0, 0.0);
  CHECK_FALSE(flat.feasible);
  CHECK(flat.r_gradient == 0.0);
  CHECK(std::isnan(flat.m));
}

TEST_CASE("canonical-pair rate evaluates both branches") {
  // branch point at (b + 4 C_L/b + 2 eps)/3 = 5/3
  CHECK(discrete_rate_for(1.0, 1.5, 0.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(discrete_rate_for(1.0, 2.0, 0.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(discrete_rate_for(1.0, 5.0 / 3.0, 0.0, 1.0, 1.0) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  // continuity across the branch point
  const double below = discrete_rate_for(1.0, 5.0 / 3.0 - 1e-9, 0.0, 1.0, 1.0);
  const double above = discrete_rate_for(1.0, 5.0 / 3.0 + 1e-9, 0.0, 1.0, 1.0);
  CHECK(std::abs(below - above) < 1e-8);
}

TEST_CASE("canonical-pair rate rejects inadmissible frictions") {
  // b = 2, C_L = L = 1: band (1, 2.5), edges at C_L/b = 0.5 and 4
  CHECK_THROWS_AS(discrete_rate_for(2.0, 1.5, 0.0, 1.0, 1.0),
                  std::domain_error);
  CHECK_THROWS_AS(discrete_rate_for(2.0, 0.4, 0.0, 1.0, 1.0),
                  std::domain_error);
  CHECK_THROWS_AS(discrete_rate_for(2.0, 4.0, 0.0, 1.0, 1.0),
                  std::domain_error);
  // the band edges themselves are admissible
  CHECK(discrete_rate_for(2.0, 1.0, 0.0, 1.0, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(discrete_rate_for(2.0, 2.5, 0.0, 1.0, 1.0) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("optimal friction: flat problems keep a whole window") {
  const TheoreticalRate flat = optimal_friction_discrete(1.0, 1.0);
  CHECK(flat.kappa == 1.0);
  CHECK(flat.m == doctest::Approx(root2).epsilon(1e-14));
  CHECK(flat.mu_lo == doctest::Approx(4.0 / std::sqrt(8.0)).epsilon(1e-12));
  CHECK(flat.mu_hi == doctest::Approx(6.0 / std::sqrt(8.0)).epsilon(1e-12));

  const TheoreticalRate curved = optimal_friction_discrete(1.0, 2.0);
  CHECK(curved.mu_lo == curved.mu_hi);
  CHECK(curved.mu_lo == doctest::Approx(2.0 * root2 - 1.0).epsilon(1e-12));
  CHECK(curved.m == doctest::Approx(2.0 * (root2 - 1.0)).epsilon(1e-12));

  CHECK_THROWS_AS(optimal_friction_discrete(1.0, 0.5), std::invalid_argument);
}

TEST_CASE("optimal friction is continuous at the window collapse") {
  const double kappa = 9.0 / 8.0;
  for (double L : {1.0, 0.02, 3.7}) {
    const TheoreticalRate at = optimal_friction_discrete(L, kappa * L);
    const double mu_window = 5.0 * std::sqrt(L) / std::sqrt(8.0);
    const double mu_unique =
        (2.0 * std::sqrt(kappa) - std::sqrt(kappa - 1.0)) * std::sqrt(L);
    CHECK(at.mu_lo == doctest::Approx(mu_window).epsilon(1e-12));
    CHECK(at.mu_lo == doctest::Approx(mu_unique).epsilon(1e-12));
    CHECK(at.m == doctest::Approx(std::sqrt(2.0 * L)).epsilon(1e-12));
  }
}

TEST_CASE("plain gradient factor and its threshold") {
  const SgdFactor f = sgd_step_factor(1.0, 1.0, 0.0, 0.01);
  CHECK(f.rho == doctest::Approx(0.9801).epsilon(1e-14));
  CHECK(f.convergent);
  CHECK(f.gamma_threshold == doctest::Approx(2.0).epsilon(1e-14));

  const SgdFactor still = sgd_step_factor(1.0, 1.0, 0.0, 0.0);
  CHECK(still.rho == 1.0);
  CHECK_FALSE(still.convergent);

  // at the threshold the factor returns to exactly 1
  const double thr = sgd_step_factor(1.0, 1.0, 5.0, 0.01).gamma_threshold;
  const SgdFactor edge = sgd_step_factor(1.0, 1.0, 5.0, thr);
  CHECK(edge.rho == doctest::Approx(1.0).epsilon(1e-12));
}
