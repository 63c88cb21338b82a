#include "plml/certify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "plml/numerics.hpp"

namespace plml {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// term_scale carries the magnitude of the summands that produced poly and
// coeff; near-total cancellation leaves rounding noise proportional to that,
// not to the residual value itself
void check_consistency(double poly, double coeff, double term_scale,
                       const char* name) {
  const double scale =
      std::max({1.0, std::abs(poly), std::abs(coeff), term_scale});
  if (std::abs(poly - coeff) > 1e-12 * scale) {
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  " (poly=%.17g coeff=%.17g scale=%.3g)", poly, coeff, scale);
    throw std::logic_error(std::string("constraint_residuals: polynomial and "
                                       "coefficient forms disagree for ") +
                           name + detail);
  }
}

}  // namespace

CoefficientSet step_coefficients(double a, double b, double gamma, double mu,
                                 double C_L, double sigma) {
  // gamma = 0 is allowed so the small-step limit (a, 0, 1, b/2) is reachable
  require(gamma >= 0.0 && std::isfinite(gamma),
          "step_coefficients: gamma must be >= 0 and finite");
  require(C_L > 0.0, "step_coefficients: C_L must be > 0");
  require(sigma >= 0.0, "step_coefficients: sigma must be >= 0");

  CoefficientSet c;
  c.B = 0.5 * b + C_L * gamma * (1.0 + 0.5 * gamma * a);
  c.alpha = a + c.B * gamma * gamma * sigma;
  c.beta = -gamma - a * gamma * gamma + c.B * gamma * gamma;
  c.delta = 1.0 - mu * gamma + a * (gamma - gamma * gamma * mu) -
            2.0 * c.B * (gamma - gamma * gamma * mu);
  const double damp = 1.0 - gamma * mu;
  c.eps = c.B * damp * damp;
  return c;
}

ConstraintResiduals constraint_residuals(double a, double b, double gamma,
                                         double mu, double L, double C_L,
                                         double sigma) {
  require(L > 0.0, "constraint_residuals: L must be > 0");
  require(C_L >= L, "constraint_residuals: C_L must be >= L");
  require(gamma > 0.0, "constraint_residuals: gamma must be > 0");

  const double g = gamma, g2 = gamma * gamma, g3 = g2 * gamma, g4 = g2 * g2;

  ConstraintResiduals r;
  r.r1 = -1.0 + g * (0.5 * b - a) + g2 * C_L + g3 * 0.5 * C_L * a;
  r.r2 = a * mu + a * b - a * a - 2.0 * L +
         g * (0.5 * b * sigma + a * (2.0 * C_L - mu * b + mu * a) -
              2.0 * L * (a - 0.5 * b)) +
         g2 * C_L * (sigma + a * a - 2.0 * a * mu + 2.0 * L) +
         g3 * C_L * a * (0.5 * sigma - a * mu + L);
  r.r3 = C_L - 0.5 * b * (mu + a - b) +
         g * (0.5 * b * mu * mu + 0.5 * C_L * a - 2.0 * C_L * mu +
              0.5 * b * a * mu - 0.5 * b * b * mu + C_L * b) +
         g2 * C_L * (mu * mu - a * mu + 0.5 * b * a - b * mu) +
         g3 * 0.5 * C_L * a * mu * (mu - b);
  r.r4 = 1.0 + g * (a - mu - b) + g2 * (b * mu - a * mu - 2.0 * C_L) +
         g3 * (2.0 * C_L * mu - C_L * a) + g4 * C_L * a * mu;
  r.r5 = a * b - C_L;
  r.r6 = b / C_L - gamma;

  const CoefficientSet c = step_coefficients(a, b, gamma, mu, C_L, sigma);
  // same expressions with every subtraction flipped to addition
  const double beta_mag = g + a * g2 + c.B * g2;
  const double delta_mag = 1.0 + mu * g + (a + 2.0 * c.B) * (g + g2 * mu);
  const double bump = 1.0 + g * mu;
  const double eps_mag = c.B * bump * bump;
  check_consistency(r.r1, c.beta / gamma, beta_mag / gamma,
                    "the velocity inequality");
  check_consistency(r.r2, (c.alpha - a * c.delta + 2.0 * c.beta * L) / gamma,
                    (c.alpha + a * delta_mag + 2.0 * beta_mag * L) / gamma,
                    "the gradient inequality");
  check_consistency(r.r3, (c.eps - 0.5 * b * c.delta) / gamma,
                    (eps_mag + 0.5 * b * delta_mag) / gamma,
                    "the kinetic inequality");
  check_consistency(r.r4, c.delta, delta_mag, "the contraction factor");

  r.feasible = r.r1 <= 0.0 && r.r2 <= 0.0 && r.r3 <= 0.0 && r.r4 >= 0.0 &&
               r.r5 >= 0.0 && r.r6 >= 0.0;
  return r;
}

namespace {

// rate factor r(a, b) = min(1 + a gamma, 1/delta), -inf when infeasible
double rate_factor(double a, double b, double gamma, double mu, double L,
                   double C_L, double sigma) {
  if (!(a > 0.0) || !(b > 0.0)) return -inf;
  const ConstraintResiduals res =
      constraint_residuals(a, b, gamma, mu, L, C_L, sigma);
  if (!res.feasible) return -inf;
  const double position = 1.0 + a * gamma;
  return res.r4 > 0.0 ? std::min(position, 1.0 / res.r4) : position;
}

}  // namespace

std::optional<RateCertificate> certify_rate(double L, double C_L, double sigma,
                                            double gamma, double mu) {
  require(L > 0.0, "certify_rate: L must be > 0");
  require(C_L >= L, "certify_rate: C_L must be >= L");
  require(sigma >= 0.0, "certify_rate: sigma must be >= 0");
  require(gamma > 0.0, "certify_rate: gamma must be > 0");
  require(mu >= 0.0, "certify_rate: mu must be >= 0");

  auto objective_log = [&](const std::array<double, 2>& p) {
    return rate_factor(std::pow(10.0, p[0]), std::pow(10.0, p[1]), gamma, mu, L,
                       C_L, sigma);
  };

  constexpr int grid_n = 32;
  std::array<double, 2> best{0.0, 0.0};
  double best_value = -inf;
  for (int i = 0; i < grid_n; ++i) {
    for (int j = 0; j < grid_n; ++j) {
      const std::array<double, 2> p{-4.0 + 8.0 * i / (grid_n - 1),
                                    -4.0 + 8.0 * j / (grid_n - 1)};
      const double v = objective_log(p);
      if (v > best_value) {
        best_value = v;
        best = p;
      }
    }
  }
  if (!std::isfinite(best_value)) return std::nullopt;

  const PlaneMax refined =
      nelder_mead_max(objective_log, best, 0.25, 1e-10, 400);
  if (refined.value > best_value) {
    best = refined.x;
    best_value = refined.value;
  }

  RateCertificate cert;
  cert.a = std::pow(10.0, best[0]);
  cert.b = std::pow(10.0, best[1]);
  cert.gamma = gamma;
  cert.mu = mu;
  cert.residuals =
      constraint_residuals(cert.a, cert.b, gamma, mu, L, C_L, sigma);
  if (!cert.residuals.feasible) return std::nullopt;  // exact re-verification
  cert.delta = cert.residuals.r4;
  const double position = 1.0 / (1.0 + cert.a * gamma);
  cert.rho_star = std::max(position, cert.delta);
  cert.r = 1.0 / cert.rho_star;
  cert.boundary = (1.0 + cert.a * gamma) * cert.delta == 1.0;
  return cert;
}

std::vector<double> recursive_bound(const std::vector<double>& gammas, double a,
                                    double b, double mu, double L, double C_L,
                                    double sigma, double f0, double E0) {
  require(a > 0.0 && b > 0.0, "recursive_bound: a and b must be > 0");
  require(L > 0.0 && C_L >= L, "recursive_bound: need 0 < L <= C_L");
  require(f0 >= 0.0, "recursive_bound: f0 must be >= 0");

  std::vector<double> bounds;
  bounds.reserve(gammas.size());
  double growth = 1.0;   // prod (1 + a gamma_j)
  double product = 1.0;  // prod (1 + a gamma_j) delta_j
  double series = f0;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const double g = gammas[i];
    if (!(g > 0.0)) {
      throw infeasible_schedule_error(
          i, "recursive_bound: step " + std::to_string(i) +
                 " has a non-positive step size");
    }
    const CoefficientSet c = step_coefficients(a, b, g, mu, C_L, sigma);
    const char* violated = nullptr;
    if (c.beta > 0.0) violated = "the velocity condition";
    else if (c.alpha - a * c.delta + 2.0 * c.beta * L > 0.0)
      violated = "the gradient condition";
    else if (c.eps - 0.5 * b * c.delta > 0.0) violated = "the kinetic condition";
    else if (0.5 * C_L * g * g - 0.5 * b * g > 0.0)
      violated = "the step-size cap";
    else if (c.delta < 0.0) violated = "non-negativity of the contraction factor";
    if (violated) {
      throw infeasible_schedule_error(
          i, "recursive_bound: step " + std::to_string(i) + " violates " +
                 violated);
    }
    const double lift = 1.0 + a * g;
    growth *= lift;
    product *= lift * c.delta;
    series += (g / lift) * product * E0;
    bounds.push_back(series / growth);
  }
  return bounds;
}

FeasiblePair feasible_pair(double mu, double C_L, double L, double eps,
                           double b) {
  require(L > 0.0 && C_L >= L, "feasible_pair: need 0 < L <= C_L");
  require(eps > 0.0, "feasible_pair: eps must be > 0");
  require(b > 0.0, "feasible_pair: b must be > 0");
  require(mu > 0.0, "feasible_pair: mu must be > 0");

  const double lo = C_L / b + 0.5 * eps;
  const double hi = b + 2.0 * C_L / b + eps;
  const double half_sum = b + C_L / b + 0.5 * eps;
  const double disc = std::max(0.0, half_sum * half_sum - 4.0 * L);
  const double root = std::sqrt(disc);
  const double mu_minus = 0.5 * (b + 3.0 * C_L / b + 1.5 * eps - root);
  const double mu_plus = 0.5 * (b + 3.0 * C_L / b + 1.5 * eps + root);

  if (!(mu > lo)) {
    throw std::domain_error("feasible_pair: mu = " + std::to_string(mu) +
                            " is not above the lower edge C_L/b + eps/2 = " +
                            std::to_string(lo));
  }
  if (!(mu < hi)) {
    throw std::domain_error("feasible_pair: mu = " + std::to_string(mu) +
                            " is not below the upper edge b + 2 C_L/b + eps = " +
                            std::to_string(hi));
  }
  if (mu >= mu_minus && mu <= mu_plus) {
    throw std::domain_error(
        "feasible_pair: mu = " + std::to_string(mu) +
        " lies in the excluded band [" + std::to_string(mu_minus) + ", " +
        std::to_string(mu_plus) + "]");
  }

  FeasiblePair pair;
  pair.a = b + 2.0 * C_L / b - mu + eps;
  pair.mu_minus = mu_minus;
  pair.mu_plus = mu_plus;
  pair.ab_at_least_CL = mu <= b + C_L / b + eps;
  return pair;
}

SmallStepRate small_step_rate(double a, double b, double mu, double L,
                              double C_L, [[maybe_unused]] double sigma) {
  require(L > 0.0 && C_L >= L, "small_step_rate: need 0 < L <= C_L");
  require(a > 0.0 && b > 0.0, "small_step_rate: a and b must be > 0");

  SmallStepRate out;
  out.r_velocity = -(mu - a + b);
  out.r_gradient = a * mu - a * a + a * b - 2.0 * L;
  out.r_kinetic = C_L - 0.5 * b * (mu + a - b);
  out.feasible =
      out.r_velocity < 0.0 && out.r_gradient < 0.0 && out.r_kinetic < 0.0;
  if (!out.feasible) {
    out.m = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double velocity_rate = mu - a + b;
  out.m = std::min(a, velocity_rate);
  out.position_branch = a <= velocity_rate;
  out.boundary = a == velocity_rate;
  return out;
}

double discrete_rate_for(double b, double mu, double eps, double C_L,
                         double L) {
  require(L > 0.0 && C_L >= L, "discrete_rate_for: need 0 < L <= C_L");
  require(b > 0.0, "discrete_rate_for: b must be > 0");
  require(eps >= 0.0, "discrete_rate_for: eps must be >= 0");

  // Same window as feasible_pair, but closed at mu_{-}/mu_{+} and with
  // eps = 0 allowed: the rate formula extends continuously onto the band
  // edges even though the strict construction needs eps > 0.
  const double lo = C_L / b + 0.5 * eps;
  const double hi = b + 2.0 * C_L / b + eps;
  const double half_sum = b + C_L / b + 0.5 * eps;
  const double disc = std::max(0.0, half_sum * half_sum - 4.0 * L);
  const double root = std::sqrt(disc);
  const double mu_minus = 0.5 * (b + 3.0 * C_L / b + 1.5 * eps - root);
  const double mu_plus = 0.5 * (b + 3.0 * C_L / b + 1.5 * eps + root);
  if (!(mu > lo)) {
    throw std::domain_error("discrete_rate_for: mu = " + std::to_string(mu) +
                            " is not above the lower edge C_L/b + eps/2 = " +
                            std::to_string(lo));
  }
  if (!(mu < hi)) {
    throw std::domain_error(
        "discrete_rate_for: mu = " + std::to_string(mu) +
        " is not below the upper edge b + 2 C_L/b + eps = " +
        std::to_string(hi));
  }
  if (mu > mu_minus && mu < mu_plus) {
    throw std::domain_error("discrete_rate_for: mu = " + std::to_string(mu) +
                            " lies strictly inside the excluded band (" +
                            std::to_string(mu_minus) + ", " +
                            std::to_string(mu_plus) + ")");
  }

  const double branch = (b + 4.0 * C_L / b + 2.0 * eps) / 3.0;
  if (mu < branch) return 2.0 * (mu - C_L / b - eps);
  return b + 2.0 * C_L / b - mu;
}

TheoreticalRate optimal_friction_discrete(double L, double C_L) {
  require(L > 0.0, "optimal_friction_discrete: L must be > 0");
  require(C_L >= L, "optimal_friction_discrete: C_L must be >= L");

  TheoreticalRate out;
  out.kappa = C_L / L;
  const double sqrt_l = std::sqrt(L);
  if (out.kappa < 9.0 / 8.0) {
    const double s = std::sqrt(9.0 - 8.0 * out.kappa);
    const double scale = sqrt_l / std::sqrt(8.0);
    out.mu_lo = (5.0 - s) * scale;
    out.mu_hi = (5.0 + s) * scale;
    out.m = std::sqrt(2.0 * L);
  } else {
    const double sk = std::sqrt(out.kappa);
    const double sk1 = std::sqrt(out.kappa - 1.0);
    out.mu_lo = out.mu_hi = (2.0 * sk - sk1) * sqrt_l;
    out.m = 2.0 * (sk - sk1) * sqrt_l;
  }
  return out;
}

SgdFactor sgd_step_factor(double L, double C_L, double sigma, double gamma) {
  require(L > 0.0 && C_L >= L, "sgd_step_factor: need 0 < L <= C_L");
  require(sigma >= 0.0, "sgd_step_factor: sigma must be >= 0");
  require(gamma >= 0.0, "sgd_step_factor: gamma must be >= 0");

  SgdFactor out;
  out.rho = 1.0 - 2.0 * L * gamma + gamma * gamma * C_L * (2.0 * L + sigma) / 2.0;
  out.gamma_threshold = 4.0 * L / (C_L * (2.0 * L + sigma));
  out.convergent = out.rho < 1.0;
  return out;
}

}  // namespace plml
