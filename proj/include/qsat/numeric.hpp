#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qsat::numeric {

/// Compensated (Kahan-Neumaier) summation.
template <typename T>
class CompensatedSum {
 public:
  void add(T value) {
    const T t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

/// Adaptive Gauss-Kronrod quadrature over [a, b]. Throws ConvergenceError if the
/// estimated relative error exceeds rel_tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-9);

/// Same, splitting [a, b] at the given interior breakpoints first.
double integrate_piecewise(const std::function<double(double)>& f,
                           std::span<const double> breakpoints, double rel_tol = 1e-9);

struct GoldenResult {
  double x;
  double value;
};

/// Maximises a unimodal function on [lo, hi].
GoldenResult golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                double x_tol = 1e-10, int max_iter = 200);

/// Piecewise-linear interpolation on an ascending grid. Queries outside the
/// grid clamp to the end values.
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

/// exp(-x) * I0(x) for x >= 0, stable for large arguments.
double bessel_i0_scaled(double x);

/// Binary entropy in bits, with H2(0) = H2(1) = 0.
double binary_entropy(double p);

std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace qsat::numeric
