#include "delaykit/numerics.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace delaykit {

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 matching samples");
  const double n = double(x.size());
  double sx = 0, sy = 0;
  double ylo = y[0], yhi = y[0];
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    ylo = std::min(ylo, y[i]);
    yhi = std::max(yhi, y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissa");

  LinearFit fit;
  // ylo == yhi, not syy == 0: rounding in the mean leaves syy ~ eps^2 even
  // for bit-identical samples.
  if (ylo == yhi) {
    fit.degenerate = true;  // flat data: slope 0, correlation undefined
    fit.intercept = my;
    fit.corr = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.corr = sxy / std::sqrt(sxx * syy);
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  if (x.size() > 2)
    fit.slope_stderr = std::sqrt(ss_res / (n - 2.0) / sxx);
  return fit;
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  unsigned t = std::max(1u, threads);
  t = unsigned(std::min<std::size_t>(t, n));
  if (t == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  const std::size_t chunk = (n + t - 1) / t;
  for (unsigned w = 0; w < t; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace delaykit
