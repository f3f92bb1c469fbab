#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <type_traits>
#include <vector>

namespace delaykit {

using cplx = std::complex<double>;

// Central difference refined by one Richardson step: evaluates D(h) and D(h/2)
// and returns (4 D(h/2) - D(h)) / 3, an O(h^4) estimate.  Works for any value
// type with +, -, scalar *; each step is stored in the function's return type
// so lazily evaluated expression types (Eigen) never outlive their operands.
template <class F>
auto derivative(F&& f, double x, double h) {
  using R = std::decay_t<decltype(f(x))>;
  R d1 = (f(x + h) - f(x - h)) * (1.0 / (2.0 * h));
  R d2 = (f(x + h / 2) - f(x - h / 2)) * (1.0 / h);
  return R((d2 * 4.0 - d1) * (1.0 / 3.0));
}

template <class F>
auto second_derivative(F&& f, double x, double h) {
  using R = std::decay_t<decltype(f(x))>;
  R c = f(x);
  R d1 = (f(x + h) + f(x - h) - c * 2.0) * (1.0 / (h * h));
  R d2 = (f(x + h / 2) + f(x - h / 2) - c * 2.0) * (4.0 / (h * h));
  return R((d2 * 4.0 - d1) * (1.0 / 3.0));
}

inline double trapezoid(const std::vector<double>& y, double h) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * h;
}

// Trapezoid weight for node i of an n-node uniform grid with step h.
inline double trapezoid_weight(std::size_t i, std::size_t n, double h) {
  return (i == 0 || i + 1 == n) ? 0.5 * h : h;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double corr = 0.0;         // Pearson correlation coefficient
  double slope_stderr = 0.0; // standard error of the slope
  bool degenerate = false;   // zero variance in y (correlation undefined)
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Continues phi onto the branch nearest to prev (multiples of 2*pi).
inline double unwrap_near(double phi, double prev) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double d = phi - prev;
  d -= two_pi * std::round(d / two_pi);
  return prev + d;
}

// Static block partition of [0, n); each index is processed exactly once, so
// results written per-index are identical for any thread count.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace delaykit
