#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "plml/discrete.hpp"
#include "plml/landscape.hpp"

namespace plml {

// Kinetic Langevin system
//   dX = V dt,  dV = -(mu V + grad f(X)) dt + Sigma(X) dW
// integrated by Euler-Maruyama with the velocity updated first, mirroring
// the discrete momentum recursion.  The diffusion is scalar (one Brownian
// driver feeding the first velocity coordinate); the default scale
// sqrt(sigma f(x)) saturates the noise bound exactly.
struct SdeParams {
  double mu = 0.0;
  double dt = 1e-3;
  double t_end = 1.0;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  InitialLaw init;
  std::function<double(const Eigen::VectorXd&)> diffusion;  // empty: default
};

// Indicator means over paths still inside the domain, one row per grid time
// k dt.  Dividing by alive_fraction recovers conditional means.
struct SdeTrajectoryStats {
  std::vector<double> t;
  std::vector<double> mean_f;
  std::vector<double> mean_x2;
  std::vector<double> mean_v2;
  std::vector<double> alive_fraction;
  std::size_t n_paths = 0;
  bool truncated = false;
  std::size_t truncated_at = 0;

  void write_csv(std::ostream& out) const;
  static SdeTrajectoryStats read_csv(std::istream& in);
};

SdeTrajectoryStats euler_maruyama_msgd(const ProblemSpec& spec,
                                       const SdeParams& params);

// First-order companion dX = -grad f(X) dt + Sigma(X) dW.
SdeTrajectoryStats euler_maruyama_sgd(const ProblemSpec& spec,
                                      const SdeParams& params);

// Exact second-moment dynamics on the scalar quadratic f(x) = lambda x^2 / 2
// with squared diffusion sigma f(x): the vector (E[X^2], E[XV], E[V^2])
// satisfies d/dt m = M m.
struct MomentMatrix {
  Eigen::Matrix3d M;
  double dominant_eig_real = 0.0;
};

MomentMatrix moment_ode_quadratic(double lambda, double mu, double sigma);

// exp(t M) applied to the initial moments.
Eigen::Vector3d evolve_moments(const MomentMatrix& ode,
                               const Eigen::Vector3d& m0, double t);

// Roots mu_-, mu_+ of the quadratic feasibility constraint at fixed b:
//   mu_+- = (b + 3 C_L/b +- sqrt((b + C_L/b)^2 - 4L + b sigma)) / 2.
// Requires b < 4L/sigma when sigma > 0.
struct SdeMuBounds {
  double mu_minus = 0.0;
  double mu_plus = 0.0;
};

SdeMuBounds sde_mu_bounds(double b, double C_L, double L, double sigma);

// Phi(b) = b^4 + (9/8) sigma b^3 + (2 C_L - (9/2) L) b^2 + C_L^2.  Its sign
// decides which branch of the rate is optimal at this b.
double sde_phi(double b, double C_L, double L, double sigma);

// Continuous-time rate at fixed (b, mu):
//   m = 2 (mu - C_L/b)        for mu below (b + 4 C_L/b)/3,
//   m = b + 2 C_L/b - mu      above it,
//   m = (2/3)(b + C_L/b) - epsilon   exactly at the branch point.
// mu must lie in (C_L/b, mu_-] u [mu_+, b + 2 C_L/b).
double sde_rate_for(double b, double mu, double C_L, double L, double sigma,
                    double epsilon = 1e-6);

struct SdeRate {
  double b = 0.0;
  double mu = 0.0;
  double m = 0.0;
  double mu_minus = 0.0;
  double mu_plus = 0.0;
  double phi = 0.0;
  double c_star = 0.0;  // max(C_L, 9L/8)
};

// Maximizes m(b, mu) over admissible b (log grid plus golden-section
// refinement), taking mu = mu_-^b where Phi(b) >= 0 and the branch point
// otherwise.
SdeRate sde_optimal_rate(double L, double C_L, double sigma);

// Closed-form near-optimal tuning at b = sqrt(c_star):
//   mu = 2 sqrt(c_star) - sqrt(c_star - L + sigma sqrt(c_star)/4),
//   m = 2 (sqrt(c_star) - sqrt(c_star - L + sigma sqrt(c_star)/4)).
// Needs sigma < 4L / sqrt(c_star); sigma = 0 is the continuous extension.
struct SdeTunedRate {
  double mu = 0.0;
  double m = 0.0;
  double c_star = 0.0;
};

SdeTunedRate sde_tuned_rate(double L, double C_L, double sigma);

// Rate of the first-order system; 2L - C_L sigma / 2, possibly negative.
double sgd_sde_rate(double L, double C_L, double sigma);

// Monte Carlo fraction of paths leaving the ball domain before t_end,
// started from X_0 uniform in the r0-ball about the minimizer and V_0
// uniform in the sqrt(r0)-ball so that E|V_0|^2 <= r0.
Estimate sde_exit_probability(const ProblemSpec& spec, const SdeParams& params,
                              double r0);

}  // namespace plml
