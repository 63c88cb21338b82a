#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace plml {

// Step coefficients of the one-step energy recursion
//   E' = a f + <grad f, v> + (b/2) |v|^2  evolving as
//   E[a f'] <= alpha f + beta |grad f|^2 + ... , collected so that the
// recursion contracts by delta per step.  B is the shared kinetic weight
// b/2 + C_L gamma (1 + gamma a / 2).
struct CoefficientSet {
  double alpha = 0.0;
  double beta = 0.0;
  double delta = 0.0;
  double eps = 0.0;
  double B = 0.0;
};

CoefficientSet step_coefficients(double a, double b, double gamma, double mu,
                                 double C_L, double sigma);

// Residuals of the six feasibility relations for the energy contraction.
// r1..r3 are the velocity, gradient and kinetic inequalities as polynomials
// in gamma, feasible when <= 0.  r4 is the contraction factor delta,
// feasible when >= 0.  r5 = a b - C_L and r6 = b / C_L - gamma, both
// feasible when >= 0.
struct ConstraintResiduals {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  double r5 = 0.0;
  double r6 = 0.0;
  bool feasible = false;
};

// Evaluates the polynomial forms and cross-checks them against the
// coefficient forms beta/gamma, (alpha - a delta + 2 beta L)/gamma and
// (eps - b/2 delta)/gamma.  Disagreement beyond 1e-12 relative indicates a
// transcription fault and throws std::logic_error.
ConstraintResiduals constraint_residuals(double a, double b, double gamma,
                                         double mu, double L, double C_L,
                                         double sigma);

// Certified per-step decay for a concrete (gamma, mu): the bound
//   E[f(X_n)] <= C * rho_star^n  with rho_star = max(1/(1+a gamma), delta).
// r = 1/rho_star is the reported rate factor, > 1 when the bound contracts.
struct RateCertificate {
  double a = 0.0;
  double b = 0.0;
  double gamma = 0.0;
  double mu = 0.0;
  double delta = 0.0;
  double rho_star = 0.0;
  double r = 0.0;
  bool boundary = false;  // 1 + a gamma == 1/delta, bound carries an extra n
  ConstraintResiduals residuals;
};

// Maximizes r(a, b) = min(1 + a gamma, 1/delta) over the feasible set.
// Deterministic: a 32x32 logarithmic grid on [1e-4, 1e4]^2 seeds a
// Nelder-Mead refinement in log coordinates with hard rejection of
// infeasible points; the best feasible point ever evaluated is returned
// after an exact feasibility re-verification.  Empty when no feasible
// point was found.
std::optional<RateCertificate> certify_rate(double L, double C_L, double sigma,
                                            double gamma, double mu);

// A step in the schedule violated one of the per-step sign conditions.
class infeasible_schedule_error : public std::runtime_error {
 public:
  infeasible_schedule_error(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_index(step) {}
  std::size_t step_index;
};

// Bound sequence for a variable step-size schedule:
//   bound_n = (prod_i (1+a g_i))^-1 (f0 + sum_i g_i/(1+a g_i)
//             (prod_{j<=i} (1+a g_j) delta_j) E0).
// gammas holds gamma_1..gamma_n; the returned vector holds the bounds for
// steps 1..n.  Throws infeasible_schedule_error naming the first offending
// step when a sign condition fails.
std::vector<double> recursive_bound(const std::vector<double>& gammas, double a,
                                    double b, double mu, double L, double C_L,
                                    double sigma, double f0, double E0);

// Lyapunov parameter pair built from (mu, b): a = b + 2 C_L / b - mu + eps,
// valid when mu lies in the admissible union
//   (C_L/b + eps/2, mu_minus) u (mu_plus, b + 2 C_L / b + eps).
// ab >= C_L holds additionally iff mu <= b + C_L / b + eps.
struct FeasiblePair {
  double a = 0.0;
  double mu_minus = 0.0;
  double mu_plus = 0.0;
  bool ab_at_least_CL = false;
};

FeasiblePair feasible_pair(double mu, double C_L, double L, double eps, double b);

// Small-step limit rate m = min(a, mu - a + b) under the strict conditions
//   mu - a + b > 0,  a mu - a^2 + a b - 2 L < 0,  C_L - b/2 (mu + a - b) < 0.
// The rate itself does not depend on sigma; the noise level only shrinks
// the step-size threshold below which the rate is attained.
struct SmallStepRate {
  bool feasible = false;
  double r_velocity = 0.0;  // -(mu - a + b), feasible when < 0
  double r_gradient = 0.0;  // a mu - a^2 + a b - 2 L, feasible when < 0
  double r_kinetic = 0.0;   // C_L - b/2 (mu + a - b), feasible when < 0
  double m = 0.0;
  bool position_branch = false;  // m attained by a
  bool boundary = false;         // a == mu - a + b exactly
};

SmallStepRate small_step_rate(double a, double b, double mu, double L,
                              double C_L, double sigma);

// Small-step rate for the canonical pair a = b + 2 C_L / b - mu + eps:
//   m = 2 (mu - C_L/b - eps)        if mu <  (b + 4 C_L / b + 2 eps) / 3,
//   m = b + 2 C_L / b - mu          otherwise.
// Throws std::domain_error naming the violated window edge when mu is
// outside the admissible union.
double discrete_rate_for(double b, double mu, double eps, double C_L, double L);

// Friction choice maximizing the small-step rate as a function of the
// conditioning kappa = C_L / L.  For kappa < 9/8 a whole window of
// frictions attains m = sqrt(2 L); above, the maximizer is unique.
struct TheoreticalRate {
  double m = 0.0;
  double mu_lo = 0.0;
  double mu_hi = 0.0;  // equals mu_lo when the maximizer is unique
  double kappa = 0.0;
};

TheoreticalRate optimal_friction_discrete(double L, double C_L);

// Per-step factor of plain gradient descent with the same noise model:
//   rho = 1 - 2 L gamma + gamma^2 C_L (2 L + sigma) / 2,
// contracting iff gamma < 4 L / (C_L (2 L + sigma)).
struct SgdFactor {
  double rho = 0.0;
  bool convergent = false;
  double gamma_threshold = 0.0;
};

SgdFactor sgd_step_factor(double L, double C_L, double sigma, double gamma);

}  // namespace plml
