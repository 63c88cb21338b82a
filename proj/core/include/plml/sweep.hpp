#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plml/certify.hpp"
#include "plml/sde.hpp"

namespace plml {

struct AxisSpec {
  std::string name;  // parameter the axis varies: L, kappa, gamma, sigma, mu
  double min = 0.0;
  double max = 0.0;
  std::size_t n_points = 1;
  enum class Scale { linear, log } scale = Scale::linear;

  std::vector<double> values() const;
};

enum class SweepMode { discrete_heatmap, discrete_friction_map, sde_curves };
enum class FrictionPolicy { optimize, fixed, grid };

// A sweep is a grid of independent cells; fixed parameters come from here
// and the axes override one parameter each.  Exactly one of kappa / C_L is
// given; the other is derived per cell.
struct SweepConfig {
  SweepMode mode = SweepMode::discrete_heatmap;
  double L = 1.0;
  std::optional<double> kappa;
  std::optional<double> C_L;
  double gamma = 0.01;
  double sigma = 0.0;
  std::optional<double> mu;  // required for FrictionPolicy::fixed
  FrictionPolicy friction = FrictionPolicy::optimize;
  AxisSpec x;
  std::optional<AxisSpec> y;  // row axis; absent for sde_curves
  std::uint64_t seed = 0;
  std::string output;  // csv path; the manifest lands beside it
};

// Reads the nested {problem, sweep, output} document.
SweepConfig load_sweep_config(const std::string& path);

// Stable key=value serialization; equal configs hash equal across runs.
std::string canonical_config(const SweepConfig& config);
std::uint64_t fnv1a(std::string_view bytes);

// One evaluated grid cell.  cert is empty when no feasible certificate
// exists at this cell; mu_star is empty when the friction search found
// nothing feasible.
struct HeatmapCell {
  double L = 0.0;
  double kappa = 0.0;
  double C_L = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  std::optional<double> mu_star;
  std::optional<RateCertificate> cert;
  SgdFactor sgd;
  std::string winner;  // msgd | sgd | sgd-divergent
};

struct SdeCurvePoint {
  double L = 0.0;
  double C_L = 0.0;
  double sigma = 0.0;
  SdeRate rate;
  double m_sgd = 0.0;
};

// Cell evaluation in row-major axis order (y outer, x inner); cells run in
// parallel but land in a preallocated slot per index, so output order never
// depends on the worker count.
std::vector<HeatmapCell> sweep_discrete_cells(const SweepConfig& config);
std::vector<SdeCurvePoint> sweep_sde_points(const SweepConfig& config);

void write_discrete_csv(const std::vector<HeatmapCell>& cells,
                        std::ostream& out);
void write_sde_csv(const std::vector<SdeCurvePoint>& points,
                   std::ostream& out);

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  double wall_seconds = 0.0;
  std::size_t rows = 0;
};

void write_manifest(const RunManifest& manifest, std::ostream& out);

// Evaluates the grid, writes the CSV to config.output and the manifest to
// config.output + ".manifest.json".  I/O failures throw std::runtime_error.
RunManifest sweep_discrete(const SweepConfig& config);
RunManifest sweep_sde(const SweepConfig& config);

}  // namespace plml
