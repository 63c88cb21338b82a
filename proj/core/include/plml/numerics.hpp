#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace plml {

// Ordinary least squares line y = slope * x + intercept.  slope_stderr is
// the usual residual-based standard error, 0 when there are too few points
// to estimate it (n < 3) or the fit is exact.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t n = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Golden-section maximization on [lo, hi] with a fixed iteration count, so
// results are reproducible bit for bit.  The objective may return -inf to
// reject a point.  Returns the best point ever evaluated (including the
// bracket ends), which can only improve on the caller's seed.
struct ScalarMax {
  double x = 0.0;
  double value = 0.0;
};

ScalarMax golden_section_max(const std::function<double(double)>& f,
                             double lo, double hi, int iterations);

// Nelder-Mead maximization in two variables.  Infeasible points signal
// themselves with a -inf objective and are simply the worst vertex; the
// returned point is the best point ever evaluated, so a feasible seed can
// never be lost.  Deterministic: fixed initial simplex, fixed coefficients,
// termination on value spread <= tol or max_iterations.
struct PlaneMax {
  std::array<double, 2> x{0.0, 0.0};
  double value = 0.0;
};

PlaneMax nelder_mead_max(
    const std::function<double(const std::array<double, 2>&)>& f,
    const std::array<double, 2>& seed, double step, double tol,
    int max_iterations);

}  // namespace plml
