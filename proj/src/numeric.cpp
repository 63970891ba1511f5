#include "qsat/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "qsat/errors.hpp"

namespace qsat::numeric {

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  if (a == b) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 20, rel_tol, &error, &l1);
  if (!std::isfinite(value) || error > rel_tol * std::max(std::abs(l1), 1e-300) * 10.0) {
    throw ConvergenceError("adaptive quadrature did not reach relative tolerance " +
                           std::to_string(rel_tol));
  }
  return value;
}

double integrate_piecewise(const std::function<double(double)>& f,
                           std::span<const double> breakpoints, double rel_tol) {
  CompensatedSum<double> total;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    total.add(integrate(f, breakpoints[i], breakpoints[i + 1], rel_tol));
  }
  return total.value();
}

GoldenResult golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                double x_tol, int max_iter) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && std::abs(b - a) > x_tol; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  const double fx = f(x);
  // The bracket endpoints can beat the interior when the maximum sits on a boundary.
  GoldenResult best{x, fx};
  for (double edge : {lo, hi}) {
    const double fe = f(edge);
    if (fe > best.value) best = {edge, fe};
  }
  if (fc > best.value) best = {c, fc};
  if (fd > best.value) best = {d, fd};
  return best;
}

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

double bessel_i0_scaled(double x) {
  x = std::abs(x);
  if (x < 500.0) return boost::math::cyl_bessel_i(0, x) * std::exp(-x);
  // Asymptotic expansion; the truncation error at x >= 500 is below 1e-12.
  const double inv = 1.0 / x;
  const double series = 1.0 + inv * (1.0 / 8.0 + inv * (9.0 / 128.0 + inv * (225.0 / 3072.0)));
  return series / std::sqrt(2.0 * std::numbers::pi * x);
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

}  // namespace qsat::numeric
