#include "plml/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace plml {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("fit_line: x and y lengths differ");
  }
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("fit_line: need at least 2 points");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");

  LineFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n >= 3) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * x[i]);
      ssr += r * r;
    }
    fit.slope_stderr =
        std::sqrt(std::max(0.0, ssr / (static_cast<double>(n) - 2.0)) / sxx);
  }
  return fit;
}

ScalarMax golden_section_max(const std::function<double(double)>& f,
                             double lo, double hi, int iterations) {
  if (!(lo <= hi)) std::swap(lo, hi);
  constexpr double inv_phi = 0.6180339887498948482;

  ScalarMax best{lo, -std::numeric_limits<double>::infinity()};
  auto consider = [&](double x) {
    const double v = f(x);
    if (v > best.value) best = {x, v};
    return v;
  };

  consider(lo);
  consider(hi);
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = consider(c);
  double fd = consider(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = consider(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = consider(d);
    }
  }
  return best;
}

PlaneMax nelder_mead_max(
    const std::function<double(const std::array<double, 2>&)>& f,
    const std::array<double, 2>& seed, double step, double tol,
    int max_iterations) {
  using Point = std::array<double, 2>;

  PlaneMax best{seed, -std::numeric_limits<double>::infinity()};
  auto eval = [&](const Point& p) {
    const double v = f(p);
    if (v > best.value) best = {p, v};
    return v;
  };

  std::array<Point, 3> p{seed,
                         Point{seed[0] + step, seed[1]},
                         Point{seed[0], seed[1] + step}};
  std::array<double, 3> v{eval(p[0]), eval(p[1]), eval(p[2])};

  auto order = [&] {
    // descending by value; stable so ties keep insertion order
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2 - i; ++j)
        if (v[j + 1] > v[j]) {
          std::swap(v[j], v[j + 1]);
          std::swap(p[j], p[j + 1]);
        }
  };

  for (int it = 0; it < max_iterations; ++it) {
    order();
    if (std::isfinite(v[2]) && v[0] - v[2] <= tol) break;

    const Point centroid{(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0};
    auto along = [&](double t) {
      return Point{centroid[0] + t * (centroid[0] - p[2][0]),
                   centroid[1] + t * (centroid[1] - p[2][1])};
    };

    const Point xr = along(1.0);
    const double vr = eval(xr);
    if (vr > v[0]) {
      const Point xe = along(2.0);
      const double ve = eval(xe);
      if (ve > vr) {
        p[2] = xe;
        v[2] = ve;
      } else {
        p[2] = xr;
        v[2] = vr;
      }
      continue;
    }
    if (vr > v[1]) {
      p[2] = xr;
      v[2] = vr;
      continue;
    }
    const Point xc = along(-0.5);
    const double vc = eval(xc);
    if (vc > v[2]) {
      p[2] = xc;
      v[2] = vc;
      continue;
    }
    // shrink toward the best vertex
    for (int i = 1; i < 3; ++i) {
      p[i] = Point{p[0][0] + 0.5 * (p[i][0] - p[0][0]),
                   p[0][1] + 0.5 * (p[i][1] - p[0][1])};
      v[i] = eval(p[i]);
    }
  }
  return best;
}

}  // namespace plml
