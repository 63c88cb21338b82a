#include "plml/sde.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "plml/csv.hpp"
#include "plml/numerics.hpp"
#include "plml/parallel.hpp"

namespace plml {

namespace {

constexpr std::size_t kChunkPaths = 64;
constexpr double kBranchEps = 1e-6;

void check_rate_inputs(double L, double C_L, double sigma) {
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw std::invalid_argument("L must be positive and finite");
  }
  if (!(C_L >= L) || !std::isfinite(C_L)) {
    throw std::invalid_argument("C_L must be finite and at least L");
  }
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw std::invalid_argument("sigma must be non-negative and finite");
  }
}

struct SdeChunkSums {
  std::vector<double> f;
  std::vector<double> x2;
  std::vector<double> v2;
  std::vector<double> alive;
};

SdeTrajectoryStats run_sde(const ProblemSpec& spec, const SdeParams& params,
                           bool momentum) {
  if (spec.dim < 1) throw std::invalid_argument("problem dimension must be positive");
  if (!(params.dt > 0.0) || !std::isfinite(params.dt)) {
    throw std::invalid_argument("dt must be positive and finite");
  }
  if (!(params.t_end >= params.dt)) {
    throw std::invalid_argument("horizon must cover at least one step");
  }
  if (params.n_paths < 1) throw std::invalid_argument("need at least one path");
  if (!std::isfinite(params.mu) || params.mu < 0.0) {
    throw std::invalid_argument("friction must be finite and non-negative");
  }
  if (params.init.x0.size() != spec.dim ||
      params.init.v0.size() != spec.dim) {
    throw std::invalid_argument("initial law dimension does not match the problem");
  }

  const double dt = params.dt;
  const double sqrt_dt = std::sqrt(dt);
  const auto n_steps =
      static_cast<std::size_t>(std::llround(params.t_end / dt));
  const std::size_t n_rec = std::max<std::size_t>(n_steps, 1) + 1;

  const std::size_t n_chunks = (params.n_paths + kChunkPaths - 1) / kChunkPaths;
  std::vector<SdeChunkSums> sums(n_chunks);

  parallel_chunks(params.n_paths, kChunkPaths,
                  [&](std::size_t ci, std::size_t begin, std::size_t end) {
    SdeChunkSums& s = sums[ci];
    s.f.assign(n_rec, 0.0);
    s.x2.assign(n_rec, 0.0);
    s.v2.assign(n_rec, 0.0);
    s.alive.assign(n_rec, 0.0);
    for (std::size_t p = begin; p < end; ++p) {
      CounterRng rng(params.seed, p);
      Eigen::VectorXd x, v;
      if (params.init.kind == InitialLaw::Kind::point) {
        x = params.init.x0;
        v = params.init.v0;
      } else {
        x = rng.uniform_ball(params.init.x0, params.init.x_radius);
        v = rng.uniform_ball(params.init.v0, params.init.v_radius);
      }
      if (!momentum) v.setZero();
      bool alive = spec.domain.contains(x);
      for (std::size_t k = 0; k < n_rec; ++k) {
        if (!alive) break;
        const double fx = spec.f(x);
        s.f[k] += fx;
        s.x2[k] += x.squaredNorm();
        s.v2[k] += v.squaredNorm();
        s.alive[k] += 1.0;
        if (k + 1 == n_rec) break;
        try {
          if (!x.allFinite() || !v.allFinite()) {
            throw std::overflow_error("non-finite state");
          }
          const double scale =
              params.diffusion
                  ? params.diffusion(x)
                  : std::sqrt(spec.sigma * std::max(0.0, fx));
          const double xi = rng.next_normal();
          const Eigen::VectorXd grad = spec.grad_f(x);
          if (momentum) {
            v = v - dt * (params.mu * v + grad);
            v(0) += sqrt_dt * scale * xi;
            x = x + dt * v;
          } else {
            x = x - dt * grad;
            x(0) += sqrt_dt * scale * xi;
          }
          if (!x.allFinite() || !v.allFinite()) {
            throw std::overflow_error("step produced a non-finite state");
          }
        } catch (const std::overflow_error& e) {
          throw std::overflow_error(std::string(e.what()) + " (path " +
                                    std::to_string(p) + ", step " +
                                    std::to_string(k + 1) + ")");
        }
        alive = spec.domain.contains(x);
      }
    }
  });

  SdeTrajectoryStats out;
  out.n_paths = params.n_paths;
  out.t.resize(n_rec);
  for (std::size_t k = 0; k < n_rec; ++k) out.t[k] = static_cast<double>(k) * dt;
  out.mean_f.resize(n_rec);
  out.mean_x2.resize(n_rec);
  out.mean_v2.resize(n_rec);
  out.alive_fraction.resize(n_rec);
  std::vector<double> scratch(n_chunks);
  const double inv_paths = 1.0 / static_cast<double>(params.n_paths);
  auto combine = [&](const std::vector<double> SdeChunkSums::* field,
                     std::size_t k) {
    for (std::size_t c = 0; c < n_chunks; ++c) scratch[c] = (sums[c].*field)[k];
    return pairwise_sum(scratch.data(), scratch.size());
  };
  for (std::size_t k = 0; k < n_rec; ++k) {
    out.mean_f[k] = combine(&SdeChunkSums::f, k) * inv_paths;
    out.mean_x2[k] = combine(&SdeChunkSums::x2, k) * inv_paths;
    out.mean_v2[k] = combine(&SdeChunkSums::v2, k) * inv_paths;
    out.alive_fraction[k] = combine(&SdeChunkSums::alive, k) * inv_paths;
  }
  for (std::size_t k = 0; k < n_rec; ++k) {
    if (out.alive_fraction[k] == 0.0) {
      out.truncated = true;
      out.truncated_at = k;
      out.t.resize(k + 1);
      out.mean_f.resize(k + 1);
      out.mean_x2.resize(k + 1);
      out.mean_v2.resize(k + 1);
      out.alive_fraction.resize(k + 1);
      break;
    }
  }
  return out;
}

}  // namespace

SdeTrajectoryStats euler_maruyama_msgd(const ProblemSpec& spec,
                                       const SdeParams& params) {
  return run_sde(spec, params, true);
}

SdeTrajectoryStats euler_maruyama_sgd(const ProblemSpec& spec,
                                      const SdeParams& params) {
  return run_sde(spec, params, false);
}

void SdeTrajectoryStats::write_csv(std::ostream& out) const {
  out << "t,mean_f,mean_x2,mean_v2,alive_fraction\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    out << format_double(t[k]) << ',' << format_double(mean_f[k]) << ','
        << format_double(mean_x2[k]) << ',' << format_double(mean_v2[k])
        << ',' << format_double(alive_fraction[k]) << '\n';
  }
}

SdeTrajectoryStats SdeTrajectoryStats::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty trajectory csv");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,mean_f,mean_x2,mean_v2,alive_fraction") {
    throw std::runtime_error("unexpected trajectory csv header: " + line);
  }
  SdeTrajectoryStats stats;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) {
      throw std::runtime_error("expected 5 fields on line " +
                               std::to_string(line_no));
    }
    stats.t.push_back(parse_csv_double(fields[0], line_no));
    stats.mean_f.push_back(parse_csv_double(fields[1], line_no));
    stats.mean_x2.push_back(parse_csv_double(fields[2], line_no));
    stats.mean_v2.push_back(parse_csv_double(fields[3], line_no));
    stats.alive_fraction.push_back(parse_csv_double(fields[4], line_no));
  }
  if (stats.t.empty()) {
    throw std::runtime_error("trajectory csv has no data rows");
  }
  return stats;
}

MomentMatrix moment_ode_quadratic(double lambda, double mu, double sigma) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("curvature must be positive");
  }
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("friction must be positive");
  }
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw std::invalid_argument("sigma must be non-negative");
  }
  MomentMatrix ode;
  ode.M << 0.0, 2.0, 0.0,
      -lambda, -mu, 1.0,
      sigma * lambda / 2.0, -2.0 * lambda, -2.0 * mu;
  const Eigen::EigenSolver<Eigen::Matrix3d> es(ode.M);
  ode.dominant_eig_real = es.eigenvalues().real().maxCoeff();
  return ode;
}

Eigen::Vector3d evolve_moments(const MomentMatrix& ode,
                               const Eigen::Vector3d& m0, double t) {
  if (!std::isfinite(t) || t < 0.0) {
    throw std::invalid_argument("time must be non-negative and finite");
  }
  const Eigen::Matrix3d e = (t * ode.M).exp();
  return e * m0;
}

SdeMuBounds sde_mu_bounds(double b, double C_L, double L, double sigma) {
  check_rate_inputs(L, C_L, sigma);
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw std::invalid_argument("b must be positive and finite");
  }
  if (sigma > 0.0 && b >= 4.0 * L / sigma) {
    throw std::invalid_argument("b must be below 4L/sigma = " +
                                format_double(4.0 * L / sigma));
  }
  const double s = b + C_L / b;
  const double disc = s * s - 4.0 * L + b * sigma;
  const double root = std::sqrt(std::max(0.0, disc));
  SdeMuBounds bounds;
  bounds.mu_minus = 0.5 * (b + 3.0 * C_L / b - root);
  bounds.mu_plus = 0.5 * (b + 3.0 * C_L / b + root);
  return bounds;
}

double sde_phi(double b, double C_L, double L, double sigma) {
  check_rate_inputs(L, C_L, sigma);
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw std::invalid_argument("b must be positive and finite");
  }
  const double b2 = b * b;
  return b2 * b2 + 1.125 * sigma * b2 * b + (2.0 * C_L - 4.5 * L) * b2 +
         C_L * C_L;
}

double sde_rate_for(double b, double mu, double C_L, double L, double sigma,
                    double epsilon) {
  const SdeMuBounds bounds = sde_mu_bounds(b, C_L, L, sigma);
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw std::invalid_argument("epsilon must be non-negative");
  }
  const double lower = C_L / b;
  const double upper = b + 2.0 * C_L / b;
  if (!(mu > lower)) {
    throw std::invalid_argument("friction must exceed C_L/b = " +
                                format_double(lower));
  }
  if (!(mu < upper)) {
    throw std::invalid_argument("friction must stay below b + 2 C_L/b = " +
                                format_double(upper));
  }
  if (mu > bounds.mu_minus && mu < bounds.mu_plus) {
    throw std::invalid_argument(
        "friction falls in the excluded band (" +
        format_double(bounds.mu_minus) + ", " + format_double(bounds.mu_plus) +
        ")");
  }
  const double branch = (b + 4.0 * C_L / b) / 3.0;
  if (mu < branch) return 2.0 * (mu - lower);
  if (mu > branch) return upper - mu;
  return (2.0 / 3.0) * (b + C_L / b) - epsilon;
}

SdeRate sde_optimal_rate(double L, double C_L, double sigma) {
  check_rate_inputs(L, C_L, sigma);
  const double c_star = std::max(C_L, 1.125 * L);

  auto rate_at = [&](double b) {
    const double phi = sde_phi(b, C_L, L, sigma);
    if (phi >= 0.0) {
      const double s = b + C_L / b;
      return s - std::sqrt(std::max(0.0, s * s - 4.0 * L + b * sigma));
    }
    return (2.0 / 3.0) * (b + C_L / b) - kBranchEps;
  };

  const double b_hi = sigma > 0.0 ? (4.0 * L / sigma) * (1.0 - 1e-9)
                                  : 1e3 * std::sqrt(C_L);
  double b_lo = 1e-6 * std::sqrt(C_L);
  if (b_lo >= b_hi) b_lo = b_hi * 1e-9;

  constexpr int kGrid = 1000;
  const double log_lo = std::log(b_lo);
  const double log_hi = std::log(b_hi);
  double best_b = b_lo;
  double best_v = rate_at(b_lo);
  int best_i = 0;
  for (int i = 1; i < kGrid; ++i) {
    const double b = std::exp(log_lo + (log_hi - log_lo) * i / (kGrid - 1));
    const double v = rate_at(b);
    if (v > best_v) {
      best_v = v;
      best_b = b;
      best_i = i;
    }
  }
  const double bracket_lo =
      std::exp(log_lo + (log_hi - log_lo) * std::max(0, best_i - 1) / (kGrid - 1));
  const double bracket_hi =
      std::exp(log_lo + (log_hi - log_lo) * std::min(kGrid - 1, best_i + 1) / (kGrid - 1));
  const ScalarMax refined = golden_section_max(rate_at, bracket_lo, bracket_hi, 200);
  if (refined.value > best_v) {
    best_v = refined.value;
    best_b = refined.x;
  }
  // the closed-form tuning uses this b; never report anything worse
  const double b_closed = std::sqrt(c_star);
  if (b_closed < b_hi) {
    const double v = rate_at(b_closed);
    if (v > best_v) {
      best_v = v;
      best_b = b_closed;
    }
  }

  SdeRate out;
  out.b = best_b;
  out.m = best_v;
  out.phi = sde_phi(best_b, C_L, L, sigma);
  const SdeMuBounds bounds = sde_mu_bounds(best_b, C_L, L, sigma);
  out.mu_minus = bounds.mu_minus;
  out.mu_plus = bounds.mu_plus;
  out.mu = out.phi >= 0.0 ? bounds.mu_minus
                          : (best_b + 4.0 * C_L / best_b) / 3.0;
  out.c_star = c_star;
  return out;
}

SdeTunedRate sde_tuned_rate(double L, double C_L, double sigma) {
  check_rate_inputs(L, C_L, sigma);
  const double c_star = std::max(C_L, 1.125 * L);
  const double root_c = std::sqrt(c_star);
  if (sigma >= 4.0 * L / root_c) {
    throw std::domain_error("noise level must be below 4L/sqrt(c_star) = " +
                            format_double(4.0 * L / root_c));
  }
  const double root = std::sqrt(c_star - L + 0.25 * root_c * sigma);
  SdeTunedRate out;
  out.mu = 2.0 * root_c - root;
  out.m = 2.0 * (root_c - root);
  out.c_star = c_star;
  return out;
}

double sgd_sde_rate(double L, double C_L, double sigma) {
  check_rate_inputs(L, C_L, sigma);
  return 2.0 * L - 0.5 * C_L * sigma;
}

Estimate sde_exit_probability(const ProblemSpec& spec, const SdeParams& params,
                              double r0) {
  if (spec.domain.kind != Domain::Kind::ball) {
    throw std::invalid_argument("exit probability needs a ball domain");
  }
  if (!spec.minimizer) {
    throw std::invalid_argument("problem has no recorded minimizer");
  }
  if (!(r0 > 0.0) || !std::isfinite(r0)) {
    throw std::invalid_argument("start radius must be positive");
  }
  const Eigen::VectorXd& y = *spec.minimizer;
  const double offset = (spec.domain.center - y).norm();
  if (offset + r0 > spec.domain.radius) {
    throw std::invalid_argument("start ball of radius " + format_double(r0) +
                                " is not contained in the domain");
  }
  SdeParams run = params;
  run.init = InitialLaw::ball(y, r0, Eigen::VectorXd::Zero(spec.dim),
                              std::sqrt(r0));
  const SdeTrajectoryStats stats = euler_maruyama_msgd(spec, run);
  const double p = 1.0 - stats.alive_fraction.back();
  const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) /
                              static_cast<double>(params.n_paths));
  return {p, se};
}

}  // namespace plml
