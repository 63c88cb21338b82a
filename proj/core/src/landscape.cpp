#include "plml/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "json.hpp"

namespace plml {

Domain Domain::ball(Eigen::VectorXd center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("domain ball needs radius > 0");
  Domain d;
  d.kind = Kind::ball;
  d.center = std::move(center);
  d.radius = radius;
  return d;
}

bool Domain::contains(const Eigen::VectorXd& x) const {
  if (kind == Kind::whole_space) return true;
  return (x - center).norm() <= radius;
}

ProblemSpec make_quadratic(const std::vector<double>& eigenvalues) {
  if (eigenvalues.empty()) {
    throw std::invalid_argument("make_quadratic: eigenvalue list is empty");
  }
  for (double lam : eigenvalues) {
    if (!(lam > 0.0)) {
      throw std::invalid_argument("make_quadratic: eigenvalues must be positive");
    }
  }
  auto lam = std::make_shared<Eigen::VectorXd>(
      Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(),
                                        static_cast<Eigen::Index>(eigenvalues.size())));

  ProblemSpec spec;
  spec.dim = lam->size();
  spec.f = [lam](const Eigen::VectorXd& x) {
    return 0.5 * lam->cwiseProduct(x).dot(x);
  };
  spec.grad_f = [lam](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return lam->cwiseProduct(x);
  };
  spec.L = lam->minCoeff();
  spec.C_L = lam->maxCoeff();
  spec.minimizer = Eigen::VectorXd::Zero(spec.dim);
  spec.source = QuadraticSource{eigenvalues};
  return spec;
}

LsqProblem make_overparam_lsq(std::uint64_t seed, Eigen::Index n_samples,
                              Eigen::Index d_in, Eigen::Index d_out) {
  if (n_samples < 1 || d_in < 1 || d_out < 1) {
    throw std::invalid_argument("make_overparam_lsq: dimensions must be positive");
  }
  if (d_in <= n_samples) {
    throw std::invalid_argument(
        "make_overparam_lsq: needs d_in > n_samples so the data interpolates");
  }

  CounterRng rng(seed, 0);
  auto data = std::make_shared<LsqDataset>();
  data->seed = seed;
  data->inputs.resize(d_in, n_samples);
  data->targets.resize(d_out, n_samples);
  for (Eigen::Index j = 0; j < n_samples; ++j) {
    for (Eigen::Index i = 0; i < d_in; ++i) data->inputs(i, j) = rng.next_normal();
  }
  for (Eigen::Index j = 0; j < n_samples; ++j) {
    for (Eigen::Index i = 0; i < d_out; ++i) data->targets(i, j) = rng.next_normal();
  }

  const double inv_n = 1.0 / static_cast<double>(n_samples);
  const Eigen::MatrixXd gram = data->inputs * data->inputs.transpose() * inv_n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  const double top = ev[ev.size() - 1];
  const double cutoff = top * 1e-12;
  double smallest_nonzero = top;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > cutoff) {
      smallest_nonzero = ev[i];
      break;
    }
  }

  // minimal-residual interpolant: W Theta = Z with Theta of full column rank
  const Eigen::MatrixXd tt = data->inputs.transpose() * data->inputs;
  const Eigen::MatrixXd w_star =
      data->targets * tt.ldlt().solve(data->inputs.transpose());

  ProblemSpec spec;
  spec.dim = d_in * d_out;
  spec.dataset = data;
  const Eigen::Index rows = d_out, cols = d_in;
  auto shape = [rows, cols](const Eigen::VectorXd& x) {
    return Eigen::Map<const Eigen::MatrixXd>(x.data(), rows, cols);
  };
  spec.f = [data, shape, inv_n](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd r = shape(x) * data->inputs - data->targets;
    return 0.5 * inv_n * r.squaredNorm();
  };
  spec.grad_f = [data, shape, inv_n](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::MatrixXd r = shape(x) * data->inputs - data->targets;
    const Eigen::MatrixXd g = inv_n * r * data->inputs.transpose();
    return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
  };
  spec.L = smallest_nonzero;
  spec.C_L = top;
  spec.minimizer = Eigen::Map<const Eigen::VectorXd>(w_star.data(), w_star.size());
  spec.source = LsqSource{seed, n_samples, d_in, d_out};
  return {std::move(spec), data};
}

Eigen::VectorXd lsq_sample_gradient(const ProblemSpec& spec,
                                    const Eigen::VectorXd& x,
                                    Eigen::Index sample) {
  if (!spec.dataset) {
    throw std::invalid_argument("lsq_sample_gradient: problem has no dataset");
  }
  const LsqDataset& data = *spec.dataset;
  if (sample < 0 || sample >= data.inputs.cols()) {
    throw std::invalid_argument("lsq_sample_gradient: sample index out of range");
  }
  const Eigen::Index rows = data.targets.rows(), cols = data.inputs.rows();
  const Eigen::Map<const Eigen::MatrixXd> w(x.data(), rows, cols);
  const Eigen::VectorXd residual = w * data.inputs.col(sample) - data.targets.col(sample);
  const Eigen::MatrixXd g = residual * data.inputs.col(sample).transpose();
  return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
}

double minibatch_noise_second_moment(const ProblemSpec& spec,
                                     const Eigen::VectorXd& x) {
  if (!spec.dataset) {
    throw std::invalid_argument(
        "minibatch_noise_second_moment: problem has no dataset");
  }
  const Eigen::Index n = spec.dataset->inputs.cols();
  double mean_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    mean_sq += lsq_sample_gradient(spec, x, i).squaredNorm();
  }
  mean_sq /= static_cast<double>(n);
  return mean_sq - spec.grad_f(x).squaredNorm();
}

NoiseSample sample_noise(const ProblemSpec& spec, const Eigen::VectorXd& x,
                         CounterRng& rng) {
  if (spec.noise_model == NoiseModel::scaled_gaussian) {
    if (spec.sigma < 0.0) {
      throw std::invalid_argument("sample_noise: sigma must be non-negative");
    }
    const double fx = std::max(0.0, spec.f(x));
    const double scale =
        std::sqrt(spec.sigma * fx / static_cast<double>(spec.dim));
    return {scale * rng.normal_vector(spec.dim), std::nullopt};
  }
  if (!spec.dataset) {
    throw std::invalid_argument(
        "sample_noise: minibatch mode needs a least-squares dataset");
  }
  const std::uint64_t i =
      rng.next_index(static_cast<std::uint64_t>(spec.dataset->inputs.cols()));
  Eigen::VectorXd d =
      spec.grad_f(x) - lsq_sample_gradient(spec, x, static_cast<Eigen::Index>(i));
  return {std::move(d), i};
}

PlReport verify_pl(const ProblemSpec& spec,
                   const std::vector<Eigen::VectorXd>& points) {
  PlReport report;
  constexpr double tol = 1e-10;
  for (const auto& x : points) {
    const double fx = spec.f(x);
    if (!(fx > 1e-300)) {
      ++report.n_skipped;
      continue;
    }
    const double ratio = spec.grad_f(x).squaredNorm() / (2.0 * fx);
    if (report.n_checked == 0) {
      report.min_ratio = report.max_ratio = ratio;
    } else {
      report.min_ratio = std::min(report.min_ratio, ratio);
      report.max_ratio = std::max(report.max_ratio, ratio);
    }
    ++report.n_checked;
    if (ratio < spec.L * (1.0 - tol) || ratio > spec.C_L * (1.0 + tol)) {
      ++report.n_violations;
    }
  }
  report.empty = report.n_checked == 0;
  return report;
}

double check_gradient(const ProblemSpec& spec, const Eigen::VectorXd& x,
                      double step) {
  if (!(step > 0.0)) throw std::invalid_argument("check_gradient: step must be > 0");
  const Eigen::VectorXd g = spec.grad_f(x);
  Eigen::VectorXd probe = x;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = spec.f(probe);
    probe[i] = x[i] - step;
    const double fm = spec.f(probe);
    probe[i] = x[i];
    const double fd = (fp - fm) / (2.0 * step);
    const double scale = std::max({1.0, std::abs(g[i]), std::abs(fd)});
    worst = std::max(worst, std::abs(g[i] - fd) / scale);
  }
  return worst;
}

namespace {

nlohmann::json domain_to_json(const Domain& d) {
  if (d.kind == Domain::Kind::whole_space) return {{"type", "whole-space"}};
  return {{"type", "ball"},
          {"center", std::vector<double>(d.center.data(), d.center.data() + d.center.size())},
          {"radius", d.radius}};
}

Domain domain_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "whole-space") return Domain::whole_space();
  if (type == "ball") {
    const auto center = j.at("center").get<std::vector<double>>();
    return Domain::ball(
        Eigen::Map<const Eigen::VectorXd>(center.data(),
                                          static_cast<Eigen::Index>(center.size())),
        j.at("radius").get<double>());
  }
  throw std::invalid_argument("unknown domain type: " + type);
}

}  // namespace

std::string problem_to_config(const ProblemSpec& spec) {
  nlohmann::json j;
  if (const auto* q = std::get_if<QuadraticSource>(&spec.source)) {
    j["kind"] = "quadratic";
    j["eigenvalues"] = q->eigenvalues;
  } else if (const auto* l = std::get_if<LsqSource>(&spec.source)) {
    j["kind"] = "lsq";
    j["lsq"] = {{"seed", l->seed},
                {"n_samples", l->n_samples},
                {"d_in", l->d_in},
                {"d_out", l->d_out}};
  } else {
    throw std::invalid_argument(
        "problem_to_config: problem was not built by a serializable factory");
  }
  j["sigma"] = spec.sigma;
  j["noise"] =
      spec.noise_model == NoiseModel::scaled_gaussian ? "gaussian" : "minibatch";
  j["domain"] = domain_to_json(spec.domain);
  return j.dump(2);
}

ProblemSpec problem_from_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("problem config is not valid JSON: ") +
                                e.what());
  }
  const std::string kind = j.at("kind").get<std::string>();
  ProblemSpec spec;
  if (kind == "quadratic") {
    spec = make_quadratic(j.at("eigenvalues").get<std::vector<double>>());
  } else if (kind == "lsq") {
    const auto& l = j.at("lsq");
    spec = make_overparam_lsq(l.at("seed").get<std::uint64_t>(),
                              l.at("n_samples").get<Eigen::Index>(),
                              l.at("d_in").get<Eigen::Index>(),
                              l.at("d_out").get<Eigen::Index>())
               .spec;
  } else {
    throw std::invalid_argument("unknown problem kind: " + kind);
  }
  spec.sigma = j.value("sigma", 0.0);
  if (spec.sigma < 0.0) {
    throw std::invalid_argument("problem config: sigma must be non-negative");
  }
  if (j.contains("noise")) {
    const std::string noise = j.at("noise").get<std::string>();
    if (noise == "gaussian") {
      spec.noise_model = NoiseModel::scaled_gaussian;
    } else if (noise == "minibatch") {
      if (!spec.dataset) {
        throw std::invalid_argument(
            "problem config: minibatch noise needs a least-squares problem");
      }
      spec.noise_model = NoiseModel::lsq_minibatch;
    } else {
      throw std::invalid_argument("unknown noise model: " + noise);
    }
  }
  if (j.contains("domain")) spec.domain = domain_from_json(j.at("domain"));
  return spec;
}

ProblemSpec load_problem_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return problem_from_config(buf.str());
}

}  // namespace plml
