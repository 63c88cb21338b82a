#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "plml/rng.hpp"

namespace plml {

// Region on which the curvature and noise bounds are assumed to hold.
// Trajectories that leave it are frozen and drop out of ensemble averages.
struct Domain {
  enum class Kind { whole_space, ball };

  Kind kind = Kind::whole_space;
  Eigen::VectorXd center;  // ball only
  double radius = 0.0;     // ball only

  static Domain whole_space() { return {}; }
  static Domain ball(Eigen::VectorXd center, double radius);

  bool contains(const Eigen::VectorXd& x) const;
};

enum class NoiseModel {
  // D = sqrt(sigma * f(x) / d) * xi with xi standard normal, so the
  // conditional second moment E[|D|^2 | x] equals sigma * f(x) exactly
  scaled_gaussian,
  // D = grad f(x) - g_i(x) for a uniformly drawn sample index i, available
  // for least-squares problems; unbiased by the averaging identity
  lsq_minibatch,
};

// Random interpolation problem: inputs theta_i (columns) and targets
// zeta_i (columns) for a linear model W theta.
struct LsqDataset {
  Eigen::MatrixXd inputs;   // d_in x N
  Eigen::MatrixXd targets;  // d_out x N
  std::uint64_t seed = 0;
};

// Generator parameters kept for config-document round trips.
struct QuadraticSource {
  std::vector<double> eigenvalues;
};
struct LsqSource {
  std::uint64_t seed = 0;
  Eigen::Index n_samples = 0;
  Eigen::Index d_in = 0;
  Eigen::Index d_out = 0;
};

// Objective together with the constants the rate theory consumes:
// |grad f|^2 >= 2 L f and |grad f|^2 <= 2 C_L f on the domain, plus the
// noise intensity sigma used when sampling gradient perturbations.
struct ProblemSpec {
  Eigen::Index dim = 0;
  std::function<double(const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_f;
  double L = 0.0;
  double C_L = 0.0;
  double sigma = 0.0;
  Domain domain;
  std::optional<Eigen::VectorXd> minimizer;
  NoiseModel noise_model = NoiseModel::scaled_gaussian;
  std::shared_ptr<const LsqDataset> dataset;  // set for least-squares problems
  std::variant<std::monostate, QuadraticSource, LsqSource> source;
};

struct NoiseSample {
  Eigen::VectorXd value;
  std::optional<std::uint64_t> batch_index;  // minibatch mode only
};

// f(x) = 1/2 sum_i lambda_i x_i^2 with L = min lambda, C_L = max lambda.
// All eigenvalues must be positive.  sigma stays 0 until the caller sets it.
ProblemSpec make_quadratic(const std::vector<double>& eigenvalues);

struct LsqProblem {
  ProblemSpec spec;
  std::shared_ptr<const LsqDataset> data;
};

// Overparametrized linear least squares: W is d_out x d_in, the state is
// x = vec(W), f(x) = 1/(2N) |W Theta - Z|_F^2.  Requires d_in > N so the
// data interpolates exactly; the stored minimizer solves W Theta = Z and
// attains f below 1e-20.  L is the smallest nonzero and C_L the largest
// eigenvalue of the data Gram matrix Theta Theta^T / N.
LsqProblem make_overparam_lsq(std::uint64_t seed, Eigen::Index n_samples,
                              Eigen::Index d_in, Eigen::Index d_out);

// Gradient of the single-sample loss 1/2 |W theta_i - zeta_i|^2 as a vector.
Eigen::VectorXd lsq_sample_gradient(const ProblemSpec& spec,
                                    const Eigen::VectorXd& x,
                                    Eigen::Index sample);

// Exact conditional second moment E[|D|^2 | x] of the minibatch noise,
// (1/N) sum_i |g_i(x)|^2 - |grad f(x)|^2.
double minibatch_noise_second_moment(const ProblemSpec& spec,
                                     const Eigen::VectorXd& x);

NoiseSample sample_noise(const ProblemSpec& spec, const Eigen::VectorXd& x,
                         CounterRng& rng);

// Scan of the ratio |grad f|^2 / (2 f) against the claimed [L, C_L] bracket.
// Points with f(x) = 0 are skipped; a violation is a ratio outside the
// bracket by more than 1e-10 in relative terms.
struct PlReport {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::size_t n_checked = 0;
  std::size_t n_skipped = 0;
  std::size_t n_violations = 0;
  bool empty = true;  // every point was skipped
};

PlReport verify_pl(const ProblemSpec& spec,
                   const std::vector<Eigen::VectorXd>& points);

// Max componentwise error between grad_f and a central finite difference,
// relative with an absolute floor of 1: |g_i - fd_i| / max(1, |g_i|, |fd_i|).
double check_gradient(const ProblemSpec& spec, const Eigen::VectorXd& x,
                      double step = 1e-5);

// Config-document round trip.  Quadratics serialize their eigenvalues,
// least-squares problems their generator parameters; the noise model,
// sigma and the domain ride along.  Functions are rebuilt by the factories.
std::string problem_to_config(const ProblemSpec& spec);
ProblemSpec problem_from_config(const std::string& json_text);
ProblemSpec load_problem_config(const std::string& path);

}  // namespace plml
