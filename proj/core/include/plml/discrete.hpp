#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "plml/landscape.hpp"
#include "plml/rng.hpp"

namespace plml {

// Step-size sequence gamma_1, gamma_2, ... indexed from 1.
class StepSchedule {
 public:
  static StepSchedule constant(double gamma);
  static StepSchedule sequence(std::function<double(std::size_t)> gamma_at);

  double at(std::size_t step) const;  // step >= 1
  bool is_constant() const { return constant_ > 0.0; }
  double constant_value() const { return constant_; }

 private:
  double constant_ = 0.0;
  std::function<double(std::size_t)> gamma_at_;
};

// How an ensemble is initialized.  Point starts use x0 and v0 directly;
// ball starts draw X_0 uniformly from the ball of radius x_radius about x0
// and V_0 uniformly from the ball of radius v_radius about v0.
struct InitialLaw {
  enum class Kind { point, ball };
  Kind kind = Kind::point;
  Eigen::VectorXd x0;
  Eigen::VectorXd v0;
  double x_radius = 0.0;
  double v_radius = 0.0;

  static InitialLaw point(Eigen::VectorXd x0, Eigen::VectorXd v0);
  static InitialLaw ball(Eigen::VectorXd x0, double x_radius,
                         Eigen::VectorXd v0, double v_radius);
};

struct DiscreteParams {
  StepSchedule schedule = StepSchedule::constant(0.01);
  double mu = 0.0;
  std::size_t n_steps = 0;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  InitialLaw init;
};

// One trajectory.  A path dies when its position leaves the domain and is
// frozen from then on; dead paths drop out of ensemble averages but keep
// their state so conditional statistics stay recoverable.
struct PathState {
  Eigen::VectorXd x;
  Eigen::VectorXd v;
  bool alive = true;
};

struct LyapunovCoeffs {
  double a = 1.0;
  double b = 1.0;
};

// E = a f(x) + <grad f(x), v> + b/2 |v|^2.  Non-negative whenever
// a b >= C_L, which is what makes it usable as an exit barrier.
double lyapunov_energy(const ProblemSpec& spec, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& v, const LyapunovCoeffs& coeffs);

// Velocity-first momentum update
//   V' = V - gamma mu V - gamma grad f(X) + gamma D,
//   X' = X + gamma V'.
// Dead paths pass through unchanged.  A non-finite incoming or produced
// state throws std::overflow_error.
PathState msgd_step(const PathState& state, double gamma,
                    const ProblemSpec& spec, double mu,
                    const Eigen::VectorXd& noise);

// Per-step ensemble aggregates.  The mean_* arrays are indicator means over
// all paths, restricted to the paths still alive at that step, i.e.
// (1/n_paths) sum_p [alive_p] value_p; dividing by alive_fraction recovers
// the conditional mean.  Arrays have one entry per recorded step including
// step 0.  If every path has died the arrays end at that step and
// truncated marks where.
struct EnsembleStats {
  std::vector<double> t;      // numerical time t_n = sum gamma_i
  std::vector<double> mean_f;
  std::vector<double> mean_v2;
  std::vector<double> mean_energy;
  std::vector<double> alive_fraction;
  std::size_t n_paths = 0;
  bool truncated = false;
  std::size_t truncated_at = 0;

  void write_csv(std::ostream& out) const;
  static EnsembleStats read_csv(std::istream& in);
};

// Runs n_paths momentum trajectories with per-path noise streams keyed by
// (seed, path index).  Paths are processed in fixed chunks whose partial
// sums are combined in chunk order by pairwise summation, so the result is
// bitwise identical for any worker count.
EnsembleStats run_msgd(const ProblemSpec& spec, const DiscreteParams& params,
                       const LyapunovCoeffs& coeffs);

// Same loop without a velocity: X' = X - gamma grad f(X) + gamma D.
// mean_v2 is zero and mean_energy coincides with mean_f.
EnsembleStats run_sgd(const ProblemSpec& spec, const DiscreteParams& params);

// Decay-factor fit on a positive series sampled at times t: drops the first
// 10% as burn-in, averages blocks of max(10, len/50) consecutive entries,
// drops non-positive block means and fits log block mean against block mean
// time.  Empty when fewer than 3 usable blocks remain.  rho_hat is the
// per-step factor exp(-m_hat * mean step).
struct DecayFit {
  double m_hat = 0.0;        // continuous-time rate, slope of -log values
  double rho_hat = 0.0;      // per-step factor
  double m_stderr = 0.0;
  double rho_stderr = 0.0;   // delta-method propagation of m_stderr
  std::size_t n_blocks = 0;
  double mean_step = 0.0;
};

std::optional<DecayFit> estimate_decay_factor(const std::vector<double>& values,
                                              const std::vector<double>& times);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte Carlo probability that a path leaves the domain within the horizon,
// started from X_0 uniform in the ball of radius r0 about the minimizer and
// V_0 uniform in the ball of radius sqrt(v0_scale * r0), so that
// E|V_0|^2 <= r0 holds for v0_scale <= 1.  The domain must be a ball
// containing that start ball.  std_error is the binomial standard error.
Estimate exit_probability(const ProblemSpec& spec, const DiscreteParams& params,
                          double r0, double v0_scale);

// One-step transition matrix of the momentum recursion on an eigenmode of
// curvature lambda:
//   A = [[1 - gamma^2 lambda, gamma (1 - gamma mu)],
//        [   - gamma lambda,        1 - gamma mu  ]],
// acting on (x, v).  rho2 is the squared spectral radius, the exact decay
// factor of f along that mode; det A = 1 - gamma mu.
struct TransitionMatrix {
  Eigen::Matrix2d A;
  double rho2 = 0.0;
};

TransitionMatrix transition_matrix_quadratic(double lambda, double gamma,
                                             double mu);

}  // namespace plml
