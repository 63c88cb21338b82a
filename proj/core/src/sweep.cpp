#include "plml/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "plml/csv.hpp"
#include "plml/numerics.hpp"
#include "plml/parallel.hpp"
#include "plml/version.hpp"

namespace plml {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string mode_name(SweepMode mode) {
  switch (mode) {
    case SweepMode::discrete_heatmap: return "discrete-heatmap";
    case SweepMode::discrete_friction_map: return "discrete-friction-map";
    case SweepMode::sde_curves: return "sde-curves";
  }
  return "?";
}

SweepMode parse_mode(const std::string& s) {
  if (s == "discrete-heatmap") return SweepMode::discrete_heatmap;
  if (s == "discrete-friction-map") return SweepMode::discrete_friction_map;
  if (s == "sde-curves") return SweepMode::sde_curves;
  throw std::invalid_argument("unknown sweep mode: " + s);
}

std::string friction_name(FrictionPolicy policy) {
  switch (policy) {
    case FrictionPolicy::optimize: return "optimize";
    case FrictionPolicy::fixed: return "fixed";
    case FrictionPolicy::grid: return "grid";
  }
  return "?";
}

FrictionPolicy parse_friction(const std::string& s) {
  if (s == "optimize") return FrictionPolicy::optimize;
  if (s == "fixed") return FrictionPolicy::fixed;
  if (s == "grid") return FrictionPolicy::grid;
  throw std::invalid_argument("unknown friction policy: " + s);
}

AxisSpec parse_axis(const json& j) {
  AxisSpec axis;
  axis.name = j.at("name").get<std::string>();
  axis.min = j.at("min").get<double>();
  axis.max = j.at("max").get<double>();
  axis.n_points = j.value<std::size_t>("points", 1);
  const std::string scale = j.value<std::string>("scale", "linear");
  if (scale == "linear") {
    axis.scale = AxisSpec::Scale::linear;
  } else if (scale == "log") {
    axis.scale = AxisSpec::Scale::log;
  } else {
    throw std::invalid_argument("unknown axis scale: " + scale);
  }
  return axis;
}

bool axis_named(const SweepConfig& cfg, const std::string& name) {
  return cfg.x.name == name || (cfg.y && cfg.y->name == name);
}

void validate_common(const SweepConfig& cfg) {
  if (static_cast<bool>(cfg.kappa) == static_cast<bool>(cfg.C_L)) {
    throw std::invalid_argument("specify exactly one of kappa and CL");
  }
  if (cfg.y && cfg.x.name == cfg.y->name) {
    throw std::invalid_argument("axes must name distinct parameters");
  }
}

void validate_discrete(const SweepConfig& cfg) {
  validate_common(cfg);
  if (cfg.mode == SweepMode::sde_curves) {
    throw std::invalid_argument("config mode is not a discrete sweep");
  }
  if (!cfg.y) {
    throw std::invalid_argument("discrete sweeps need both axes");
  }
  const auto known = {"L", "kappa", "CL", "gamma", "sigma", "mu"};
  for (const auto* axis : {&cfg.x, &*cfg.y}) {
    if (std::find(known.begin(), known.end(), axis->name) == known.end()) {
      throw std::invalid_argument("unknown axis parameter: " + axis->name);
    }
  }
  const bool mu_axis = axis_named(cfg, "mu");
  if (cfg.mode == SweepMode::discrete_friction_map) {
    if (cfg.friction != FrictionPolicy::grid) {
      throw std::invalid_argument("friction-map sweeps take friction from an axis");
    }
  } else if (cfg.friction == FrictionPolicy::grid) {
    throw std::invalid_argument("grid friction belongs to the friction-map mode");
  }
  if (cfg.friction == FrictionPolicy::grid && !mu_axis) {
    throw std::invalid_argument("grid friction needs an axis named mu");
  }
  if (cfg.friction != FrictionPolicy::grid && mu_axis) {
    throw std::invalid_argument("a mu axis requires the grid friction policy");
  }
  if (cfg.friction == FrictionPolicy::fixed && !cfg.mu) {
    throw std::invalid_argument("fixed friction needs a mu value");
  }
}

void validate_sde(const SweepConfig& cfg) {
  validate_common(cfg);
  if (cfg.mode != SweepMode::sde_curves) {
    throw std::invalid_argument("config mode is not an sde sweep");
  }
  if (cfg.y) {
    throw std::invalid_argument("sde sweeps take a single sigma axis");
  }
  if (cfg.x.name != "sigma") {
    throw std::invalid_argument("sde sweeps vary sigma; got axis " + cfg.x.name);
  }
}

struct CellParams {
  double L = 0.0;
  double C_L = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  std::optional<double> mu;
};

CellParams resolve_cell(const SweepConfig& cfg, double xv,
                        std::optional<double> yv) {
  double L = cfg.L;
  double gamma = cfg.gamma;
  double sigma = cfg.sigma;
  std::optional<double> kappa = cfg.kappa;
  std::optional<double> C_L = cfg.C_L;
  std::optional<double> mu = cfg.mu;
  auto apply = [&](const std::string& name, double v) {
    if (name == "L") {
      L = v;
    } else if (name == "gamma") {
      gamma = v;
    } else if (name == "sigma") {
      sigma = v;
    } else if (name == "mu") {
      mu = v;
    } else if (name == "kappa") {
      kappa = v;
      C_L.reset();
    } else if (name == "CL") {
      C_L = v;
      kappa.reset();
    }
  };
  if (cfg.y && yv) apply(cfg.y->name, *yv);
  apply(cfg.x.name, xv);

  CellParams p;
  p.L = L;
  p.gamma = gamma;
  p.sigma = sigma;
  p.mu = mu;
  if (kappa) {
    p.kappa = *kappa;
    p.C_L = *kappa * L;
  } else {
    p.C_L = *C_L;
    p.kappa = *C_L / L;
  }
  return p;
}

HeatmapCell eval_cell(const CellParams& p, FrictionPolicy policy) {
  HeatmapCell cell;
  cell.L = p.L;
  cell.kappa = p.kappa;
  cell.C_L = p.C_L;
  cell.gamma = p.gamma;
  cell.sigma = p.sigma;
  cell.sgd = sgd_step_factor(p.L, p.C_L, p.sigma, p.gamma);

  if (policy == FrictionPolicy::optimize) {
    auto objective = [&](double mu) {
      const auto cert = certify_rate(p.L, p.C_L, p.sigma, p.gamma, mu);
      return cert ? cert->r : -kInf;
    };
    constexpr int kGrid = 64;
    const double mu_lo = 1e-2 * std::sqrt(p.L);
    const double mu_hi = 1e2 * std::sqrt(p.L);
    const double log_lo = std::log(mu_lo);
    const double log_hi = std::log(mu_hi);
    auto grid_mu = [&](int i) {
      return std::exp(log_lo + (log_hi - log_lo) * i / (kGrid - 1));
    };
    double best_v = -kInf;
    double best_mu = 0.0;
    int best_i = -1;
    for (int i = 0; i < kGrid; ++i) {
      const double mu = grid_mu(i);
      const double v = objective(mu);
      if (v > best_v) {
        best_v = v;
        best_mu = mu;
        best_i = i;
      }
    }
    if (best_i >= 0) {
      const ScalarMax refined =
          golden_section_max(objective, grid_mu(std::max(0, best_i - 1)),
                             grid_mu(std::min(kGrid - 1, best_i + 1)), 32);
      double mu_star = best_mu;
      if (refined.value > best_v) mu_star = refined.x;
      cell.cert = certify_rate(p.L, p.C_L, p.sigma, p.gamma, mu_star);
      if (!cell.cert) {
        mu_star = best_mu;
        cell.cert = certify_rate(p.L, p.C_L, p.sigma, p.gamma, best_mu);
      }
      cell.mu_star = mu_star;
    }
  } else {
    cell.mu_star = *p.mu;
    cell.cert = certify_rate(p.L, p.C_L, p.sigma, p.gamma, *p.mu);
  }

  const double r_sgd = 1.0 / cell.sgd.rho;
  if (!cell.sgd.convergent) {
    cell.winner = "sgd-divergent";
  } else if (cell.cert && cell.cert->r > r_sgd) {
    cell.winner = "msgd";
  } else {
    cell.winner = "sgd";
  }
  return cell;
}

void append_optional(std::string& row, const std::optional<double>& v) {
  row.push_back(',');
  if (v) row += format_double(*v);
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string axis_canonical(const AxisSpec& axis) {
  return axis.name + ":" +
         (axis.scale == AxisSpec::Scale::log ? "log" : "linear") + ":" +
         format_double(axis.min) + ":" + format_double(axis.max) + ":" +
         std::to_string(axis.n_points);
}

RunManifest finish_sweep(const SweepConfig& config, std::size_t rows,
                         const std::string& csv_body,
                         std::chrono::steady_clock::time_point start) {
  std::ofstream out(config.output, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write output file: " + config.output);
  }
  out << csv_body;
  out.flush();
  if (!out.good()) {
    throw std::runtime_error("write failure on " + config.output);
  }

  RunManifest manifest;
  manifest.config_hash = "fnv1a:" + hash_hex(fnv1a(canonical_config(config)));
  manifest.seed = config.seed;
  manifest.version = std::string(version);
  manifest.rows = rows;
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  const std::string manifest_path = config.output + ".manifest.json";
  std::ofstream mout(manifest_path, std::ios::binary);
  if (!mout) {
    throw std::runtime_error("cannot write manifest file: " + manifest_path);
  }
  write_manifest(manifest, mout);
  mout.flush();
  if (!mout.good()) {
    throw std::runtime_error("write failure on " + manifest_path);
  }
  return manifest;
}

}  // namespace

std::vector<double> AxisSpec::values() const {
  if (n_points < 1) throw std::invalid_argument("axis needs at least one point");
  if (!std::isfinite(min) || !std::isfinite(max) || min > max) {
    throw std::invalid_argument("axis range must be finite with min <= max");
  }
  if (scale == Scale::log && !(min > 0.0)) {
    throw std::invalid_argument("log axis needs a positive minimum");
  }
  std::vector<double> out(n_points);
  if (n_points == 1) {
    out[0] = min;
    return out;
  }
  for (std::size_t i = 0; i < n_points; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n_points - 1);
    if (scale == Scale::linear) {
      out[i] = min + (max - min) * u;
    } else {
      out[i] = std::exp(std::log(min) + (std::log(max) - std::log(min)) * u);
    }
  }
  return out;
}

SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse failure in " + path + ": " +
                                e.what());
  }
  try {
    SweepConfig cfg;
    const json& problem = doc.at("problem");
    cfg.L = problem.at("L").get<double>();
    if (problem.contains("kappa")) cfg.kappa = problem["kappa"].get<double>();
    if (problem.contains("CL")) cfg.C_L = problem["CL"].get<double>();
    cfg.sigma = problem.value("sigma", 0.0);

    const json& sweep = doc.at("sweep");
    cfg.mode = parse_mode(sweep.at("mode").get<std::string>());
    cfg.gamma = sweep.value("gamma", 0.01);
    cfg.friction = parse_friction(sweep.value<std::string>("friction", "optimize"));
    if (sweep.contains("mu")) cfg.mu = sweep["mu"].get<double>();
    cfg.seed = sweep.value<std::uint64_t>("seed", 0);
    cfg.x = parse_axis(sweep.at("x"));
    if (sweep.contains("y")) cfg.y = parse_axis(sweep["y"]);

    cfg.output = doc.at("output").at("csv").get<std::string>();
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config field error in " + path + ": " +
                                e.what());
  }
}

std::string canonical_config(const SweepConfig& config) {
  std::string s;
  s += "mode=" + mode_name(config.mode) + "\n";
  s += "L=" + format_double(config.L) + "\n";
  s += "kappa=" + (config.kappa ? format_double(*config.kappa) : "") + "\n";
  s += "CL=" + (config.C_L ? format_double(*config.C_L) : "") + "\n";
  s += "gamma=" + format_double(config.gamma) + "\n";
  s += "sigma=" + format_double(config.sigma) + "\n";
  s += "mu=" + (config.mu ? format_double(*config.mu) : "") + "\n";
  s += "friction=" + friction_name(config.friction) + "\n";
  s += "seed=" + std::to_string(config.seed) + "\n";
  s += "x=" + axis_canonical(config.x) + "\n";
  s += "y=" + (config.y ? axis_canonical(*config.y) : "") + "\n";
  s += "output=" + config.output + "\n";
  return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<HeatmapCell> sweep_discrete_cells(const SweepConfig& config) {
  validate_discrete(config);
  const std::vector<double> xs = config.x.values();
  const std::vector<double> ys = config.y->values();
  const std::size_t nx = xs.size();
  std::vector<HeatmapCell> cells(nx * ys.size());
  parallel_chunks(cells.size(), 4,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t iy = idx / nx;
      const std::size_t ix = idx % nx;
      cells[idx] =
          eval_cell(resolve_cell(config, xs[ix], ys[iy]), config.friction);
    }
  });
  return cells;
}

std::vector<SdeCurvePoint> sweep_sde_points(const SweepConfig& config) {
  validate_sde(config);
  const std::vector<double> xs = config.x.values();
  std::vector<SdeCurvePoint> points(xs.size());
  parallel_chunks(points.size(), 4,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const CellParams p = resolve_cell(config, xs[idx], std::nullopt);
      SdeCurvePoint& pt = points[idx];
      pt.L = p.L;
      pt.C_L = p.C_L;
      pt.sigma = p.sigma;
      pt.rate = sde_optimal_rate(p.L, p.C_L, p.sigma);
      pt.m_sgd = sgd_sde_rate(p.L, p.C_L, p.sigma);
    }
  });
  return points;
}

void write_discrete_csv(const std::vector<HeatmapCell>& cells,
                        std::ostream& out) {
  out << "L,kappa,CL,gamma,sigma,mu_star,a,b,delta,r_msgd,rho_sgd,r_sgd,"
         "diff,scaled_diff,winner\n";
  for (const HeatmapCell& cell : cells) {
    std::string row = format_double(cell.L);
    row += ',' + format_double(cell.kappa);
    row += ',' + format_double(cell.C_L);
    row += ',' + format_double(cell.gamma);
    row += ',' + format_double(cell.sigma);
    append_optional(row, cell.mu_star);
    if (cell.cert) {
      row += ',' + format_double(cell.cert->a);
      row += ',' + format_double(cell.cert->b);
      row += ',' + format_double(cell.cert->delta);
      row += ',' + format_double(cell.cert->r);
    } else {
      row += ",,,,";
    }
    row += ',' + format_double(cell.sgd.rho);
    const double r_sgd = 1.0 / cell.sgd.rho;
    row += ',' + format_double(r_sgd);
    if (cell.cert) {
      const double diff = cell.cert->r - r_sgd;
      row += ',' + format_double(diff);
      row += ',' + format_double(diff / cell.gamma);
    } else {
      row += ",,";
    }
    row += ',' + cell.winner;
    out << row << '\n';
  }
}

void write_sde_csv(const std::vector<SdeCurvePoint>& points,
                   std::ostream& out) {
  out << "L,CL,sigma,b_star,mu_star,m_msgd,m_sgd\n";
  for (const SdeCurvePoint& pt : points) {
    out << format_double(pt.L) << ',' << format_double(pt.C_L) << ','
        << format_double(pt.sigma) << ',' << format_double(pt.rate.b) << ','
        << format_double(pt.rate.mu) << ',' << format_double(pt.rate.m) << ','
        << format_double(pt.m_sgd) << '\n';
  }
}

void write_manifest(const RunManifest& manifest, std::ostream& out) {
  json doc;
  doc["config_hash"] = manifest.config_hash;
  doc["seed"] = manifest.seed;
  doc["version"] = manifest.version;
  doc["wall_seconds"] = manifest.wall_seconds;
  doc["rows"] = manifest.rows;
  out << doc.dump(2) << '\n';
}

RunManifest sweep_discrete(const SweepConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<HeatmapCell> cells = sweep_discrete_cells(config);
  std::ostringstream body;
  write_discrete_csv(cells, body);
  return finish_sweep(config, cells.size(), body.str(), start);
}

RunManifest sweep_sde(const SweepConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<SdeCurvePoint> points = sweep_sde_points(config);
  std::ostringstream body;
  write_sde_csv(points, body);
  return finish_sweep(config, points.size(), body.str(), start);
}

}  // namespace plml
