#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "plml/certify.hpp"
#include "plml/csv.hpp"
#include "plml/discrete.hpp"
#include "plml/landscape.hpp"
#include "plml/render.hpp"
#include "plml/sde.hpp"
#include "plml/sweep.hpp"
#include "plml/version.hpp"

namespace {

using namespace plml;

void kv(const std::string& key, double value) {
  std::cout << key << '=' << format_double(value) << '\n';
}

void kv(const std::string& key, const std::string& value) {
  std::cout << key << '=' << value << '\n';
}

Eigen::VectorXd parse_vector(const std::string& text, Eigen::Index dim) {
  std::vector<double> values;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (...) {
      throw std::invalid_argument("bad vector literal: " + text);
    }
  }
  if (values.empty()) throw std::invalid_argument("empty vector literal");
  if (values.size() == 1 && dim > 1) {
    return Eigen::VectorXd::Constant(dim, values[0]);
  }
  if (static_cast<Eigen::Index>(values.size()) != dim) {
    throw std::invalid_argument("vector literal has " +
                                std::to_string(values.size()) +
                                " entries, problem dimension is " +
                                std::to_string(dim));
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(),
                                     static_cast<Eigen::Index>(values.size()));
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (...) {
      throw std::invalid_argument("bad number list: " + text);
    }
  }
  if (values.empty()) throw std::invalid_argument("empty number list");
  return values;
}

struct ProblemFlags {
  std::string config_path;
  std::string lambdas = "1";
  double sigma = 0.0;
  double domain_radius = 0.0;
  bool lsq = false;
  std::uint64_t lsq_seed = 1;
  long lsq_samples = 8;
  long lsq_din = 32;
  long lsq_dout = 2;
  bool minibatch = false;
};

void add_problem_flags(CLI::App* cmd, ProblemFlags& pf) {
  cmd->add_option("--problem-config", pf.config_path,
                  "problem config json; overrides the inline flags");
  cmd->add_option("--lambda", pf.lambdas,
                  "quadratic eigenvalues, comma separated");
  cmd->add_option("--sigma", pf.sigma, "noise intensity bound");
  cmd->add_option("--domain-radius", pf.domain_radius,
                  "ball domain radius about the minimizer; 0 = whole space");
  cmd->add_flag("--lsq", pf.lsq, "use a random overparametrized least-squares problem");
  cmd->add_option("--lsq-seed", pf.lsq_seed, "least-squares generator seed");
  cmd->add_option("--lsq-samples", pf.lsq_samples, "least-squares sample count");
  cmd->add_option("--lsq-din", pf.lsq_din, "least-squares input dimension");
  cmd->add_option("--lsq-dout", pf.lsq_dout, "least-squares output dimension");
  cmd->add_flag("--minibatch", pf.minibatch,
                "single-sample minibatch noise (least-squares only)");
}

ProblemSpec build_problem(const ProblemFlags& pf) {
  if (!pf.config_path.empty()) {
    return load_problem_config(pf.config_path);
  }
  ProblemSpec spec;
  if (pf.lsq) {
    spec = make_overparam_lsq(pf.lsq_seed, pf.lsq_samples, pf.lsq_din,
                              pf.lsq_dout)
               .spec;
  } else {
    spec = make_quadratic(parse_list(pf.lambdas));
  }
  spec.sigma = pf.sigma;
  if (pf.minibatch) {
    if (!spec.dataset) {
      throw std::invalid_argument("minibatch noise needs a least-squares problem");
    }
    spec.noise_model = NoiseModel::lsq_minibatch;
  }
  if (pf.domain_radius > 0.0) {
    if (!spec.minimizer) {
      throw std::invalid_argument("ball domain needs a problem with a minimizer");
    }
    spec.domain = Domain::ball(*spec.minimizer, pf.domain_radius);
  }
  return spec;
}

InitialLaw build_init(const ProblemSpec& spec, const std::string& x0_text,
                      const std::string& v0_text, double x_radius,
                      double v_radius) {
  const Eigen::VectorXd x0 = x0_text.empty()
                                 ? Eigen::VectorXd::Ones(spec.dim).eval()
                                 : parse_vector(x0_text, spec.dim);
  const Eigen::VectorXd v0 = v0_text.empty()
                                 ? Eigen::VectorXd::Zero(spec.dim).eval()
                                 : parse_vector(v0_text, spec.dim);
  if (x_radius > 0.0 || v_radius > 0.0) {
    return InitialLaw::ball(x0, x_radius, v0, v_radius);
  }
  return InitialLaw::point(x0, v0);
}

void write_stats_output(const std::string& out_path, const auto& stats) {
  if (out_path.empty() || out_path == "-") {
    stats.write_csv(std::cout);
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + out_path);
  stats.write_csv(out);
  out.flush();
  if (!out.good()) throw std::runtime_error("write failure on " + out_path);
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(int argc, char** argv) {
  CLI::App app{"momentum-vs-plain gradient rate certificates, simulators and sweeps"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);

  // certify
  auto* certify = app.add_subcommand(
      "certify", "search a per-step contraction certificate at fixed (gamma, mu)");
  struct {
    double L = 1.0, C_L = 1.0, sigma = 0.0, gamma = 0.01, mu = 1.0;
  } cert_opt;
  certify->add_option("--L", cert_opt.L, "curvature lower bound")->required();
  certify->add_option("--CL", cert_opt.C_L, "curvature upper bound")->required();
  certify->add_option("--sigma", cert_opt.sigma, "noise intensity bound");
  certify->add_option("--gamma", cert_opt.gamma, "step size")->required();
  certify->add_option("--mu", cert_opt.mu, "friction")->required();
  certify->callback([&] {
    const auto cert = certify_rate(cert_opt.L, cert_opt.C_L, cert_opt.sigma,
                                   cert_opt.gamma, cert_opt.mu);
    if (!cert) {
      throw std::domain_error("no feasible certificate at these parameters");
    }
    kv("a", cert->a);
    kv("b", cert->b);
    kv("gamma", cert->gamma);
    kv("mu", cert->mu);
    kv("delta", cert->delta);
    kv("rho_star", cert->rho_star);
    kv("r", cert->r);
    kv("boundary", cert->boundary ? "true" : "false");
    kv("r1", cert->residuals.r1);
    kv("r2", cert->residuals.r2);
    kv("r3", cert->residuals.r3);
    kv("r4", cert->residuals.r4);
    kv("r5", cert->residuals.r5);
    kv("r6", cert->residuals.r6);
  });

  // rate-theory
  auto* theory = app.add_subcommand(
      "rate-theory", "evaluate a closed-form rate formula");
  struct {
    bool optimal_friction = false, fixed_b = false, sde_tuned = false;
    bool sde_fixed_b = false, sde_optimal = false, sgd = false;
    double L = 1.0, sigma = 0.0, gamma = 0.01, b = 1.0, mu = 1.0;
    std::optional<double> C_L, kappa, eps;
  } th;
  theory->add_flag("--optimal-friction", th.optimal_friction,
                   "best discrete friction and rate for (L, C_L)");
  theory->add_flag("--fixed-b", th.fixed_b,
                   "discrete small-step rate at fixed (b, mu)");
  theory->add_flag("--sde-tuned", th.sde_tuned,
                   "closed-form continuous-time tuning");
  theory->add_flag("--sde-fixed-b", th.sde_fixed_b,
                   "continuous-time rate at fixed (b, mu)");
  theory->add_flag("--sde-optimal", th.sde_optimal,
                   "continuous-time rate optimized over (b, mu)");
  theory->add_flag("--sgd", th.sgd, "plain gradient step factor");
  theory->add_option("--L", th.L, "curvature lower bound");
  theory->add_option("--CL", [&th](const std::vector<std::string>& v) {
    th.C_L = std::stod(v[0]);
    return true;
  }, "curvature upper bound");
  theory->add_option("--kappa", [&th](const std::vector<std::string>& v) {
    th.kappa = std::stod(v[0]);
    return true;
  }, "condition number C_L / L");
  theory->add_option("--sigma", th.sigma, "noise intensity bound");
  theory->add_option("--gamma", th.gamma, "step size (sgd formula)");
  theory->add_option("--b", th.b, "kinetic weight b");
  theory->add_option("--mu", th.mu, "friction");
  theory->add_option("--eps", [&th](const std::vector<std::string>& v) {
    th.eps = std::stod(v[0]);
    return true;
  }, "slack parameter");
  theory->callback([&] {
    const int picked = th.optimal_friction + th.fixed_b + th.sde_tuned +
                       th.sde_fixed_b + th.sde_optimal + th.sgd;
    if (picked != 1) {
      throw std::invalid_argument("pick exactly one formula flag");
    }
    if (th.C_L && th.kappa) {
      throw std::invalid_argument("give either --CL or --kappa, not both");
    }
    const double C_L = th.C_L ? *th.C_L
                              : th.kappa ? *th.kappa * th.L : th.L;
    if (th.optimal_friction) {
      const TheoreticalRate rate = optimal_friction_discrete(th.L, C_L);
      kv("kappa", rate.kappa);
      kv("mu_lo", rate.mu_lo);
      kv("mu_hi", rate.mu_hi);
      kv("m", rate.m);
    } else if (th.fixed_b) {
      const double m =
          discrete_rate_for(th.b, th.mu, th.eps.value_or(0.0), C_L, th.L);
      kv("m", m);
    } else if (th.sde_tuned) {
      const SdeTunedRate rate = sde_tuned_rate(th.L, C_L, th.sigma);
      kv("c_star", rate.c_star);
      kv("mu", rate.mu);
      kv("m", rate.m);
    } else if (th.sde_fixed_b) {
      const double m = sde_rate_for(th.b, th.mu, C_L, th.L, th.sigma,
                                    th.eps.value_or(1e-6));
      kv("m", m);
    } else if (th.sde_optimal) {
      const SdeRate rate = sde_optimal_rate(th.L, C_L, th.sigma);
      kv("b", rate.b);
      kv("mu", rate.mu);
      kv("m", rate.m);
      kv("mu_minus", rate.mu_minus);
      kv("mu_plus", rate.mu_plus);
      kv("phi", rate.phi);
      kv("c_star", rate.c_star);
      kv("m_sgd", sgd_sde_rate(th.L, C_L, th.sigma));
    } else {
      const SgdFactor factor = sgd_step_factor(th.L, C_L, th.sigma, th.gamma);
      kv("rho", factor.rho);
      kv("r", 1.0 / factor.rho);
      kv("convergent", factor.convergent ? "true" : "false");
      kv("gamma_threshold", factor.gamma_threshold);
    }
  });

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "run a discrete ensemble and emit per-step statistics");
  struct {
    ProblemFlags problem;
    double gamma = 0.01, mu = 1.0, a = 1.0, b = 1.0;
    std::size_t steps = 1000, paths = 1;
    std::uint64_t seed = 0;
    std::string x0, v0, algo = "msgd", out;
    double x_radius = 0.0, v_radius = 0.0;
  } sim;
  add_problem_flags(simulate, sim.problem);
  simulate->add_option("--gamma", sim.gamma, "step size");
  simulate->add_option("--mu", sim.mu, "friction (momentum runs)");
  simulate->add_option("--steps", sim.steps, "number of steps");
  simulate->add_option("--paths", sim.paths, "ensemble size");
  simulate->add_option("--seed", sim.seed, "rng seed");
  simulate->add_option("--a", sim.a, "energy weight on f");
  simulate->add_option("--b", sim.b, "energy weight on |v|^2");
  simulate->add_option("--x0", sim.x0, "initial position, comma separated");
  simulate->add_option("--v0", sim.v0, "initial velocity, comma separated");
  simulate->add_option("--x-radius", sim.x_radius, "uniform ball radius around x0");
  simulate->add_option("--v-radius", sim.v_radius, "uniform ball radius around v0");
  simulate->add_option("--algo", sim.algo, "msgd or sgd");
  simulate->add_option("--out", sim.out, "output csv path (default stdout)");
  simulate->callback([&] {
    const ProblemSpec spec = build_problem(sim.problem);
    DiscreteParams params;
    params.schedule = StepSchedule::constant(sim.gamma);
    params.mu = sim.mu;
    params.n_steps = sim.steps;
    params.n_paths = sim.paths;
    params.seed = sim.seed;
    params.init = build_init(spec, sim.x0, sim.v0, sim.x_radius, sim.v_radius);
    if (sim.algo == "msgd") {
      write_stats_output(sim.out, run_msgd(spec, params, {sim.a, sim.b}));
    } else if (sim.algo == "sgd") {
      write_stats_output(sim.out, run_sgd(spec, params));
    } else {
      throw std::invalid_argument("unknown algorithm: " + sim.algo);
    }
  });

  // sde-simulate
  auto* sde_sim = app.add_subcommand(
      "sde-simulate", "integrate the kinetic Langevin ensemble");
  struct {
    ProblemFlags problem;
    double mu = 1.0, dt = 1e-3, t_end = 1.0;
    std::size_t paths = 1;
    std::uint64_t seed = 0;
    std::string x0, v0, algo = "msgd", out;
    double x_radius = 0.0, v_radius = 0.0;
  } sde_opt;
  add_problem_flags(sde_sim, sde_opt.problem);
  sde_sim->add_option("--mu", sde_opt.mu, "friction (momentum runs)");
  sde_sim->add_option("--dt", sde_opt.dt, "time step");
  sde_sim->add_option("--t-end", sde_opt.t_end, "horizon");
  sde_sim->add_option("--paths", sde_opt.paths, "ensemble size");
  sde_sim->add_option("--seed", sde_opt.seed, "rng seed");
  sde_sim->add_option("--x0", sde_opt.x0, "initial position, comma separated");
  sde_sim->add_option("--v0", sde_opt.v0, "initial velocity, comma separated");
  sde_sim->add_option("--x-radius", sde_opt.x_radius, "uniform ball radius around x0");
  sde_sim->add_option("--v-radius", sde_opt.v_radius, "uniform ball radius around v0");
  sde_sim->add_option("--algo", sde_opt.algo, "msgd or sgd");
  sde_sim->add_option("--out", sde_opt.out, "output csv path (default stdout)");
  sde_sim->callback([&] {
    const ProblemSpec spec = build_problem(sde_opt.problem);
    SdeParams params;
    params.mu = sde_opt.mu;
    params.dt = sde_opt.dt;
    params.t_end = sde_opt.t_end;
    params.n_paths = sde_opt.paths;
    params.seed = sde_opt.seed;
    params.init = build_init(spec, sde_opt.x0, sde_opt.v0, sde_opt.x_radius,
                             sde_opt.v_radius);
    if (sde_opt.algo == "msgd") {
      write_stats_output(sde_opt.out, euler_maruyama_msgd(spec, params));
    } else if (sde_opt.algo == "sgd") {
      write_stats_output(sde_opt.out, euler_maruyama_sgd(spec, params));
    } else {
      throw std::invalid_argument("unknown algorithm: " + sde_opt.algo);
    }
  });

  // estimate-rate
  auto* estimate = app.add_subcommand(
      "estimate-rate", "fit a decay rate to a statistics csv");
  struct {
    std::string in;
  } est;
  estimate->add_option("--in", est.in, "ensemble or trajectory csv; - for stdin")
      ->required();
  estimate->callback([&] {
    const std::string text = read_input(est.in);
    std::vector<double> values, times;
    try {
      std::istringstream in(text);
      const EnsembleStats stats = EnsembleStats::read_csv(in);
      values = stats.mean_f;
      times = stats.t;
    } catch (const std::runtime_error&) {
      std::istringstream in(text);
      const SdeTrajectoryStats stats = SdeTrajectoryStats::read_csv(in);
      values = stats.mean_f;
      times = stats.t;
    }
    const auto fit = estimate_decay_factor(values, times);
    if (!fit) {
      throw std::domain_error("could not fit a decay rate: too few usable blocks");
    }
    kv("m_hat", fit->m_hat);
    kv("m_stderr", fit->m_stderr);
    kv("rho_hat", fit->rho_hat);
    kv("rho_stderr", fit->rho_stderr);
    kv("n_blocks", static_cast<double>(fit->n_blocks));
    kv("mean_step", fit->mean_step);
  });

  // exit-prob
  auto* exitp = app.add_subcommand(
      "exit-prob", "estimate the probability of leaving the domain");
  struct {
    ProblemFlags problem;
    double gamma = 0.01, mu = 1.0, r0 = 0.1, v0_scale = 1.0;
    double dt = 1e-3, t_end = 1.0;
    std::size_t steps = 1000, paths = 1000;
    std::uint64_t seed = 0;
    bool sde = false;
  } ex;
  add_problem_flags(exitp, ex.problem);
  exitp->add_option("--gamma", ex.gamma, "step size (discrete)");
  exitp->add_option("--mu", ex.mu, "friction");
  exitp->add_option("--steps", ex.steps, "horizon in steps (discrete)");
  exitp->add_option("--paths", ex.paths, "ensemble size");
  exitp->add_option("--seed", ex.seed, "rng seed");
  exitp->add_option("--r0", ex.r0, "start ball radius")->required();
  exitp->add_option("--v0-scale", ex.v0_scale,
                    "velocity ball radius is sqrt(v0-scale * r0)");
  exitp->add_flag("--sde", ex.sde, "use the continuous-time process");
  exitp->add_option("--dt", ex.dt, "time step (sde)");
  exitp->add_option("--t-end", ex.t_end, "horizon (sde)");
  exitp->callback([&] {
    const ProblemSpec spec = build_problem(ex.problem);
    Estimate estimate;
    if (ex.sde) {
      SdeParams params;
      params.mu = ex.mu;
      params.dt = ex.dt;
      params.t_end = ex.t_end;
      params.n_paths = ex.paths;
      params.seed = ex.seed;
      params.init = InitialLaw::point(Eigen::VectorXd::Zero(spec.dim),
                                      Eigen::VectorXd::Zero(spec.dim));
      estimate = sde_exit_probability(spec, params, ex.r0);
    } else {
      DiscreteParams params;
      params.schedule = StepSchedule::constant(ex.gamma);
      params.mu = ex.mu;
      params.n_steps = ex.steps;
      params.n_paths = ex.paths;
      params.seed = ex.seed;
      params.init = InitialLaw::point(Eigen::VectorXd::Zero(spec.dim),
                                      Eigen::VectorXd::Zero(spec.dim));
      estimate = exit_probability(spec, params, ex.r0, ex.v0_scale);
    }
    kv("exit_probability", estimate.value);
    kv("stderr", estimate.std_error);
  });

  // sweep-discrete / sweep-sde
  auto* sweep_d = app.add_subcommand(
      "sweep-discrete", "evaluate a discrete rate-comparison grid");
  auto* sweep_s = app.add_subcommand(
      "sweep-sde", "evaluate continuous-time rate curves");
  struct SweepOpt {
    std::string config;
    std::string output;
  };
  SweepOpt sd, ss;
  for (const auto& [cmd, opt] : {std::pair{sweep_d, &sd}, std::pair{sweep_s, &ss}}) {
    cmd->add_option("--config", opt->config, "sweep config json")->required();
    cmd->add_option("--output", opt->output, "override the configured csv path");
  }
  auto run_sweep = [](const SweepOpt& opt, bool discrete) {
    SweepConfig cfg = load_sweep_config(opt.config);
    if (!opt.output.empty()) cfg.output = opt.output;
    const RunManifest manifest = discrete ? sweep_discrete(cfg) : sweep_sde(cfg);
    kv("output", cfg.output);
    kv("manifest", cfg.output + ".manifest.json");
    kv("rows", static_cast<double>(manifest.rows));
    kv("config_hash", manifest.config_hash);
    kv("wall_seconds", manifest.wall_seconds);
  };
  sweep_d->callback([&] { run_sweep(sd, true); });
  sweep_s->callback([&] { run_sweep(ss, false); });

  // render
  auto* render = app.add_subcommand("render", "draw a sweep csv as png or svg");
  struct {
    std::string in, out, style = "auto";
  } rn;
  render->add_option("--in", rn.in, "sweep csv path")->required();
  render->add_option("--out", rn.out, "image path, .png or .svg")->required();
  render->add_option("--style", rn.style, "auto, diff, scaled-diff or curves");
  render->callback([&] {
    RenderStyle style;
    if (rn.style == "auto") {
      style = RenderStyle::auto_detect;
    } else if (rn.style == "diff") {
      style = RenderStyle::diff;
    } else if (rn.style == "scaled-diff") {
      style = RenderStyle::scaled_diff;
    } else if (rn.style == "curves") {
      style = RenderStyle::curves;
    } else {
      throw std::invalid_argument("unknown style: " + rn.style);
    }
    const RenderInfo info = render_file(rn.in, rn.out, style);
    kv("kind", info.kind);
    kv("nx", static_cast<double>(info.nx));
    kv("ny", static_cast<double>(info.ny));
    kv("width", static_cast<double>(info.width));
    kv("height", static_cast<double>(info.height));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const infeasible_schedule_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::overflow_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
