#include "plml/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "plml/csv.hpp"
#include "plml/numerics.hpp"
#include "plml/parallel.hpp"

namespace plml {

namespace {

constexpr std::size_t kChunkPaths = 64;

void require_positive_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("step size must be positive and finite");
  }
}

// Applies V' = V - gamma mu V - gamma grad + gamma noise, X' = X + gamma V'.
// Both msgd_step and the ensemble runner go through here so a single path
// stepped either way stays bitwise identical.
void momentum_update(Eigen::VectorXd& x, Eigen::VectorXd& v, double gamma,
                     double mu, const Eigen::VectorXd& grad,
                     const Eigen::VectorXd& noise) {
  v = v - gamma * mu * v - gamma * grad + gamma * noise;
  x = x + gamma * v;
}

PathState draw_initial(const InitialLaw& init, const ProblemSpec& spec,
                       CounterRng& rng) {
  PathState st;
  if (init.kind == InitialLaw::Kind::point) {
    st.x = init.x0;
    st.v = init.v0;
  } else {
    st.x = rng.uniform_ball(init.x0, init.x_radius);
    st.v = rng.uniform_ball(init.v0, init.v_radius);
  }
  st.alive = spec.domain.contains(st.x);
  return st;
}

struct ChunkSums {
  std::vector<double> f;
  std::vector<double> v2;
  std::vector<double> energy;
  std::vector<double> alive;
};

EnsembleStats run_ensemble(const ProblemSpec& spec,
                           const DiscreteParams& params,
                           const LyapunovCoeffs* coeffs, bool momentum) {
  if (spec.dim < 1) throw std::invalid_argument("problem dimension must be positive");
  if (params.n_paths < 1) throw std::invalid_argument("need at least one path");
  if (params.init.x0.size() != spec.dim ||
      params.init.v0.size() != spec.dim) {
    throw std::invalid_argument("initial law dimension does not match the problem");
  }
  if (!std::isfinite(params.mu) || params.mu < 0.0) {
    throw std::invalid_argument("friction must be finite and non-negative");
  }

  const std::size_t n_rec = params.n_steps + 1;
  std::vector<double> gammas(n_rec, 0.0);
  std::vector<double> t(n_rec, 0.0);
  for (std::size_t n = 1; n < n_rec; ++n) {
    gammas[n] = params.schedule.at(n);
    require_positive_gamma(gammas[n]);
    t[n] = t[n - 1] + gammas[n];
  }

  const std::size_t n_chunks = (params.n_paths + kChunkPaths - 1) / kChunkPaths;
  std::vector<ChunkSums> sums(n_chunks);

  parallel_chunks(params.n_paths, kChunkPaths,
                  [&](std::size_t ci, std::size_t begin, std::size_t end) {
    ChunkSums& s = sums[ci];
    s.f.assign(n_rec, 0.0);
    s.v2.assign(n_rec, 0.0);
    s.energy.assign(n_rec, 0.0);
    s.alive.assign(n_rec, 0.0);
    for (std::size_t p = begin; p < end; ++p) {
      CounterRng rng(params.seed, p);
      PathState st = draw_initial(params.init, spec, rng);
      if (!momentum) st.v.setZero();
      for (std::size_t n = 0; n < n_rec; ++n) {
        if (n > 0) {
          try {
            if (!st.x.allFinite() || !st.v.allFinite()) {
              throw std::overflow_error("non-finite state");
            }
            const NoiseSample noise = sample_noise(spec, st.x, rng);
            if (momentum) {
              const Eigen::VectorXd grad = spec.grad_f(st.x);
              momentum_update(st.x, st.v, gammas[n], params.mu, grad,
                              noise.value);
            } else {
              const Eigen::VectorXd grad = spec.grad_f(st.x);
              st.x = st.x - gammas[n] * grad + gammas[n] * noise.value;
            }
            if (!st.x.allFinite() || !st.v.allFinite()) {
              throw std::overflow_error("step produced a non-finite state");
            }
          } catch (const std::overflow_error& e) {
            throw std::overflow_error(std::string(e.what()) + " (path " +
                                      std::to_string(p) + ", step " +
                                      std::to_string(n) + ")");
          }
          st.alive = spec.domain.contains(st.x);
        }
        if (!st.alive) break;  // contributes zeros from here on
        const double fx = spec.f(st.x);
        const double v2 = st.v.squaredNorm();
        s.f[n] += fx;
        s.v2[n] += v2;
        if (momentum) {
          const double e = coeffs->a * fx + spec.grad_f(st.x).dot(st.v) +
                           0.5 * coeffs->b * v2;
          s.energy[n] += e;
        } else {
          s.energy[n] += fx;
        }
        s.alive[n] += 1.0;
      }
    }
  });

  EnsembleStats out;
  out.n_paths = params.n_paths;
  out.t = t;
  out.mean_f.resize(n_rec);
  out.mean_v2.resize(n_rec);
  out.mean_energy.resize(n_rec);
  out.alive_fraction.resize(n_rec);
  std::vector<double> scratch(n_chunks);
  const double inv_paths = 1.0 / static_cast<double>(params.n_paths);
  auto combine = [&](const std::vector<double> ChunkSums::* field,
                     std::size_t n) {
    for (std::size_t c = 0; c < n_chunks; ++c) scratch[c] = (sums[c].*field)[n];
    return pairwise_sum(scratch.data(), scratch.size());
  };
  for (std::size_t n = 0; n < n_rec; ++n) {
    out.mean_f[n] = combine(&ChunkSums::f, n) * inv_paths;
    out.mean_v2[n] = combine(&ChunkSums::v2, n) * inv_paths;
    out.mean_energy[n] = combine(&ChunkSums::energy, n) * inv_paths;
    out.alive_fraction[n] = combine(&ChunkSums::alive, n) * inv_paths;
  }

  for (std::size_t n = 0; n < n_rec; ++n) {
    if (out.alive_fraction[n] == 0.0) {
      out.truncated = true;
      out.truncated_at = n;
      out.t.resize(n + 1);
      out.mean_f.resize(n + 1);
      out.mean_v2.resize(n + 1);
      out.mean_energy.resize(n + 1);
      out.alive_fraction.resize(n + 1);
      break;
    }
  }
  return out;
}

}  // namespace

StepSchedule StepSchedule::constant(double gamma) {
  require_positive_gamma(gamma);
  StepSchedule s;
  s.constant_ = gamma;
  return s;
}

StepSchedule StepSchedule::sequence(std::function<double(std::size_t)> gamma_at) {
  if (!gamma_at) throw std::invalid_argument("schedule callback is empty");
  StepSchedule s;
  s.gamma_at_ = std::move(gamma_at);
  return s;
}

double StepSchedule::at(std::size_t step) const {
  if (step < 1) throw std::invalid_argument("schedule steps are indexed from 1");
  if (constant_ > 0.0) return constant_;
  const double g = gamma_at_(step);
  require_positive_gamma(g);
  return g;
}

InitialLaw InitialLaw::point(Eigen::VectorXd x0, Eigen::VectorXd v0) {
  if (x0.size() != v0.size()) {
    throw std::invalid_argument("position and velocity dimensions differ");
  }
  InitialLaw law;
  law.kind = Kind::point;
  law.x0 = std::move(x0);
  law.v0 = std::move(v0);
  return law;
}

InitialLaw InitialLaw::ball(Eigen::VectorXd x0, double x_radius,
                            Eigen::VectorXd v0, double v_radius) {
  if (x0.size() != v0.size()) {
    throw std::invalid_argument("position and velocity dimensions differ");
  }
  if (x_radius < 0.0 || v_radius < 0.0) {
    throw std::invalid_argument("ball radii must be non-negative");
  }
  InitialLaw law;
  law.kind = Kind::ball;
  law.x0 = std::move(x0);
  law.v0 = std::move(v0);
  law.x_radius = x_radius;
  law.v_radius = v_radius;
  return law;
}

double lyapunov_energy(const ProblemSpec& spec, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& v, const LyapunovCoeffs& coeffs) {
  return coeffs.a * spec.f(x) + spec.grad_f(x).dot(v) +
         0.5 * coeffs.b * v.squaredNorm();
}

PathState msgd_step(const PathState& state, double gamma,
                    const ProblemSpec& spec, double mu,
                    const Eigen::VectorXd& noise) {
  if (!state.alive) return state;
  require_positive_gamma(gamma);
  if (noise.size() != state.x.size()) {
    throw std::invalid_argument("noise dimension does not match the state");
  }
  if (!state.x.allFinite() || !state.v.allFinite()) {
    throw std::overflow_error("non-finite state");
  }
  PathState next = state;
  const Eigen::VectorXd grad = spec.grad_f(state.x);
  momentum_update(next.x, next.v, gamma, mu, grad, noise);
  if (!next.x.allFinite() || !next.v.allFinite()) {
    throw std::overflow_error("step produced a non-finite state");
  }
  next.alive = spec.domain.contains(next.x);
  return next;
}

EnsembleStats run_msgd(const ProblemSpec& spec, const DiscreteParams& params,
                       const LyapunovCoeffs& coeffs) {
  return run_ensemble(spec, params, &coeffs, true);
}

EnsembleStats run_sgd(const ProblemSpec& spec, const DiscreteParams& params) {
  return run_ensemble(spec, params, nullptr, false);
}

void EnsembleStats::write_csv(std::ostream& out) const {
  out << "step,t_n,mean_f,mean_v2,mean_energy,alive_fraction\n";
  for (std::size_t n = 0; n < t.size(); ++n) {
    out << n << ',' << format_double(t[n]) << ',' << format_double(mean_f[n])
        << ',' << format_double(mean_v2[n]) << ','
        << format_double(mean_energy[n]) << ','
        << format_double(alive_fraction[n]) << '\n';
  }
}

EnsembleStats EnsembleStats::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty ensemble csv");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "step,t_n,mean_f,mean_v2,mean_energy,alive_fraction") {
    throw std::runtime_error("unexpected ensemble csv header: " + line);
  }
  EnsembleStats stats;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) {
      throw std::runtime_error("expected 6 fields on line " +
                               std::to_string(line_no));
    }
    parse_csv_double(fields[0], line_no);
    stats.t.push_back(parse_csv_double(fields[1], line_no));
    stats.mean_f.push_back(parse_csv_double(fields[2], line_no));
    stats.mean_v2.push_back(parse_csv_double(fields[3], line_no));
    stats.mean_energy.push_back(parse_csv_double(fields[4], line_no));
    stats.alive_fraction.push_back(parse_csv_double(fields[5], line_no));
  }
  if (stats.t.empty()) {
    throw std::runtime_error("ensemble csv has no data rows");
  }
  return stats;
}

std::optional<DecayFit> estimate_decay_factor(
    const std::vector<double>& values, const std::vector<double>& times) {
  if (values.size() != times.size()) {
    throw std::invalid_argument("values and times lengths differ");
  }
  const std::size_t n = values.size();
  if (n < 20) return std::nullopt;
  const std::size_t burn = n / 10;
  const std::size_t block = std::max<std::size_t>(10, n / 50);

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t start = burn; start + block <= n; start += block) {
    double mv = 0.0;
    double mt = 0.0;
    for (std::size_t i = start; i < start + block; ++i) {
      mv += values[i];
      mt += times[i];
    }
    mv /= static_cast<double>(block);
    mt /= static_cast<double>(block);
    if (mv > 0.0 && std::isfinite(mv)) {
      xs.push_back(mt);
      ys.push_back(std::log(mv));
    }
  }
  if (xs.size() < 3) return std::nullopt;

  LineFit fit;
  try {
    fit = fit_line(xs, ys);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }

  DecayFit d;
  d.m_hat = -fit.slope;
  d.m_stderr = fit.slope_stderr;
  d.n_blocks = xs.size();
  d.mean_step = (times[n - 1] - times[burn]) /
                static_cast<double>(n - 1 - burn);
  d.rho_hat = std::exp(fit.slope * d.mean_step);
  d.rho_stderr = d.rho_hat * d.mean_step * d.m_stderr;
  return d;
}

Estimate exit_probability(const ProblemSpec& spec,
                          const DiscreteParams& params, double r0,
                          double v0_scale) {
  if (spec.domain.kind != Domain::Kind::ball) {
    throw std::invalid_argument("exit probability needs a ball domain");
  }
  if (!spec.minimizer) {
    throw std::invalid_argument("problem has no recorded minimizer");
  }
  if (!(r0 > 0.0) || !std::isfinite(r0)) {
    throw std::invalid_argument("start radius must be positive");
  }
  if (v0_scale < 0.0 || !std::isfinite(v0_scale)) {
    throw std::invalid_argument("velocity scale must be non-negative");
  }
  const Eigen::VectorXd& y = *spec.minimizer;
  const double offset = (spec.domain.center - y).norm();
  if (offset + r0 > spec.domain.radius) {
    throw std::invalid_argument(
        "start ball of radius " + format_double(r0) +
        " is not contained in the domain");
  }

  DiscreteParams run = params;
  run.init = InitialLaw::ball(y, r0, Eigen::VectorXd::Zero(spec.dim),
                              std::sqrt(v0_scale * r0));
  const EnsembleStats stats = run_msgd(spec, run, LyapunovCoeffs{});
  const double p = 1.0 - stats.alive_fraction.back();
  const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) /
                              static_cast<double>(params.n_paths));
  return {p, se};
}

TransitionMatrix transition_matrix_quadratic(double lambda, double gamma,
                                             double mu) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("curvature must be positive");
  }
  if (gamma < 0.0 || !std::isfinite(gamma)) {
    throw std::invalid_argument("step size must be non-negative and finite");
  }
  if (mu < 0.0 || !std::isfinite(mu)) {
    throw std::invalid_argument("friction must be non-negative");
  }
  TransitionMatrix tm;
  tm.A << 1.0 - gamma * gamma * lambda, gamma * (1.0 - gamma * mu),
      -gamma * lambda, 1.0 - gamma * mu;
  const double tr = tm.A(0, 0) + tm.A(1, 1);
  const double det = tm.A(0, 0) * tm.A(1, 1) - tm.A(0, 1) * tm.A(1, 0);
  const double disc = tr * tr - 4.0 * det;
  if (disc < 0.0) {
    // complex pair: |eig|^2 = det = 1 - gamma mu
    tm.rho2 = det;
  } else {
    const double s = std::sqrt(disc);
    const double r = std::max(std::abs(tr + s), std::abs(tr - s)) / 2.0;
    tm.rho2 = r * r;
  }
  return tm;
}

}  // namespace plml
