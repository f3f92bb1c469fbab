#include "delaykit/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "delaykit/errors.hpp"
#include "delaykit/numerics.hpp"

namespace delaykit {

namespace {

constexpr double pi = 3.14159265358979323846264338327950288;
constexpr double two_pi = 2.0 * pi;
constexpr double inf = std::numeric_limits<double>::infinity();

void check_channels(const SMatrixModel& model, int i, int f) {
  if (i < 0 || i >= model.n_channels() || f < 0 || f >= model.n_channels())
    throw InvalidParameterError("channel index outside the model's range");
}

// Delay-grid Nyquist bound: the integrand oscillates up to the top of the
// envelope support, so the sampled density can carry structure up to that
// frequency; require >= 8 samples per period there.
double max_grid_step(const Envelope& env, Dispersion disp, const Units& u,
                     double eps_i) {
  if (disp == Dispersion::em_linear) return pi / (4.0 * env.support_hi());
  const double e_hi = energy_of_k(env.support_hi(), u, disp, eps_i);
  return pi * u.hbar / (4.0 * e_hi);
}

void check_resolution(const DelayGrid& grid, const Envelope& env,
                      Dispersion disp, const Units& u, double eps_i) {
  if (grid.n < 2) throw InvalidParameterError("delay grid needs >= 2 points");
  const double need = max_grid_step(env, disp, u, eps_i);
  if (grid.step() > need * (1.0 + 1e-12))
    throw ResolutionError(
        "delay grid step " + std::to_string(grid.step()) +
        " too coarse for oscillations over the envelope support; need step <= " +
        std::to_string(need));
}

// k-quadrature packed once per channel list: density evaluation then only
// rotates the precomputed weights.  The phase conjugate to the delay is
// polynomial in the node index (linear in k for EM, quadratic through E(k)
// otherwise): phase_j = p0 + p1 j + p2 j^2.
struct Integrand {
  double p0 = 0.0, p1 = 0.0, p2 = 0.0;
  std::vector<std::vector<cplx>> w;   // per requested channel f
  double prefactor = 0.0;
  double k_step = 0.0;
};

Integrand build_integrand(const SMatrixModel& model, const Envelope& env, int i,
                          const std::vector<int>& fs, Dispersion disp,
                          const DistributionOptions& opt, double delay_absmax) {
  const Units& u = opt.units;
  const double sigma = env.sigma();
  const double klo = env.support_lo(), khi = env.support_hi();
  const double t = std::max(delay_absmax, 1e-12);
  double hk;
  if (disp == Dispersion::em_linear) {
    hk = std::min(sigma, pi / (4.0 * t)) / 2.0;
  } else {
    const double rate_hi = u.hbar * khi / u.mass;  // d(E/hbar)/dk at the top
    hk = std::min(sigma, pi / (4.0 * rate_hi * t)) / 2.0;
  }
  if (opt.k_step_scale > 0.0 && opt.k_step_scale < 1.0) hk *= opt.k_step_scale;
  const std::size_t nk = std::max<std::size_t>(3, std::size_t(std::ceil((khi - klo) / hk)) + 1);
  hk = (khi - klo) / double(nk - 1);

  Integrand out;
  out.k_step = hk;
  out.prefactor = disp == Dispersion::em_linear
                      ? 1.0 / two_pi
                      : u.hbar / (two_pi * u.mass);
  if (disp == Dispersion::em_linear) {
    out.p0 = klo;
    out.p1 = hk;
  } else {
    const double a = u.hbar / (2.0 * u.mass);  // phase = a k^2 + eps/hbar
    out.p0 = a * klo * klo + opt.eps_i / u.hbar;
    out.p1 = 2.0 * a * klo * hk;
    out.p2 = a * hk * hk;
  }
  out.w.assign(fs.size(), std::vector<cplx>(nk));
  for (std::size_t j = 0; j < nk; ++j) {
    const double k = klo + double(j) * hk;
    const double om = env(k);
    double amp = om * trapezoid_weight(j, nk, hk);
    // sqrt(k) weight; disabling freezes it at the carrier so only the
    // band-variation effect on the normalization is probed
    if (disp == Dispersion::qm_quadratic)
      amp *= std::sqrt(opt.use_sqrt_k ? std::max(0.0, k) : env.k0());
    if (amp == 0.0) {
      for (std::size_t c = 0; c < fs.size(); ++c) out.w[c][j] = 0.0;
      continue;
    }
    const Eigen::MatrixXcd s = model.at_k(k, u, disp, opt.eps_i);
    for (std::size_t c = 0; c < fs.size(); ++c)
      out.w[c][j] = amp * s(fs[c], i);
  }
  return out;
}

std::vector<double> eval_density(const Integrand& ig, std::size_t c,
                                 const DelayGrid& grid, unsigned threads) {
  std::vector<double> dens(grid.n);
  const auto& w = ig.w[c];
  // e^{-i phase_j s} by first differences of the phase polynomial: the step
  // ratio r_j = e^{-i (p1 + (2j+1) p2) s} itself advances by the constant
  // q = e^{-i 2 p2 s}, so the row costs three sin/cos total.  The rotation
  // accumulates ~n_k * eps of phase error, far below the tail tolerances.
  parallel_for(grid.n, threads, [&](std::size_t m) {
    const double s = grid.at(m);
    cplx u = std::polar(1.0, -ig.p0 * s);
    cplx r = std::polar(1.0, -(ig.p1 + ig.p2) * s);
    const cplx q = std::polar(1.0, -2.0 * ig.p2 * s);
    cplx acc(0.0, 0.0);
    for (std::size_t j = 0; j < w.size(); ++j) {
      acc += w[j] * u;
      u *= r;
      r *= q;
    }
    dens[m] = ig.prefactor * std::norm(acc);
  });
  return dens;
}

// Tail mass outside one end of the grid, from the log slope of the chunk
// maxima of the outermost two of ten chunks.  +inf when not decaying.
double one_sided_tail(const std::vector<double>& dens, double step, bool hi_end) {
  const std::size_t n = dens.size();
  const std::size_t chunk = std::max<std::size_t>(2, n / 10);
  auto chunk_max = [&](std::size_t a, std::size_t b) {
    double m = 0.0;
    for (std::size_t j = a; j < b && j < n; ++j) m = std::max(m, dens[j]);
    return m;
  };
  double m_inner, m_outer;
  if (hi_end) {
    m_inner = chunk_max(n - 2 * chunk, n - chunk);
    m_outer = chunk_max(n - chunk, n);
  } else {
    m_inner = chunk_max(chunk, 2 * chunk);
    m_outer = chunk_max(0, chunk);
  }
  if (m_outer <= 0.0) return 0.0;
  if (m_outer >= m_inner) return inf;
  const double slope = std::log(m_inner / m_outer) / (double(chunk) * step);
  return m_outer / slope;
}

double tail_estimate_of(const std::vector<double>& dens, double step) {
  return one_sided_tail(dens, step, false) + one_sided_tail(dens, step, true);
}

DelayDistribution assemble(const SMatrixModel& model, const Envelope& env,
                           int i, int f, const DelayGrid& grid, Dispersion disp,
                           const DistributionOptions& opt) {
  check_channels(model, i, f);
  check_resolution(grid, env, disp, opt.units, opt.eps_i);
  const double t = std::max(std::abs(grid.lo), std::abs(grid.hi));
  const Integrand ig = build_integrand(model, env, i, {f}, disp, opt, t);

  DelayDistribution d;
  d.dispersion = disp;
  d.channel_i = i;
  d.channel_f = f;
  d.grid = grid;
  d.k0 = env.k0();
  d.sigma = env.sigma();
  d.k_step = ig.k_step;
  d.density = eval_density(ig, 0, grid, opt.threads);
  d.tail_estimate = tail_estimate_of(d.density, grid.step());
  return d;
}

}  // namespace

double DelayDistribution::mass() const { return trapezoid(density, grid.step()); }

double DelayDistribution::peak() const {
  double m = 0.0;
  for (double v : density) m = std::max(m, v);
  return m;
}

DelayDistribution delay_distribution_em(const SMatrixModel& model,
                                        const Envelope& env, int i, int f,
                                        const DelayGrid& s_grid,
                                        const DistributionOptions& opt) {
  return assemble(model, env, i, f, s_grid, Dispersion::em_linear, opt);
}

DelayDistribution delay_distribution_qm(const SMatrixModel& model,
                                        const Envelope& env, int i, int f,
                                        const DelayGrid& tau_grid,
                                        const DistributionOptions& opt) {
  return assemble(model, env, i, f, tau_grid, Dispersion::qm_quadratic, opt);
}

std::vector<DelayDistribution> delay_distributions_auto(
    const SMatrixModel& model, const Envelope& env, int i, Dispersion disp,
    const DistributionOptions& opt) {
  if (i < 0 || i >= model.n_channels())
    throw InvalidParameterError("channel index outside the model's range");
  const Units& u = opt.units;
  const int n = model.n_channels();

  // Pulse width in the delay variable and a cheap center estimate from the
  // phase delay of each element at the carrier.
  const double sigma = env.sigma();
  double width;
  if (disp == Dispersion::em_linear) {
    width = 1.0 / sigma;
  } else {
    const double sig_e = u.hbar * u.hbar * env.k0() * sigma / u.mass;
    width = u.hbar / sig_e;
  }
  double ws_min = 0.0, ws_max = 0.0;
  {
    const double x0 = disp == Dispersion::em_linear
                          ? env.k0()
                          : energy_of_k(env.k0(), u, disp, opt.eps_i);
    const double h = (disp == Dispersion::em_linear ? sigma : 2.0 * env.k0() * sigma) / 100.0;
    for (int f = 0; f < n; ++f) {
      auto sfi = [&](double x) {
        return disp == Dispersion::em_linear ? model.at_k(x, u, disp, opt.eps_i)(f, i)
                                             : model.at_energy(x, u, disp, opt.eps_i)(f, i);
      };
      const cplx s0 = sfi(x0);
      if (std::abs(s0) < 1e-12) continue;
      const cplx ds = derivative(sfi, x0, h);
      double delay = std::imag(std::conj(s0) * ds) / std::norm(s0);
      if (disp == Dispersion::qm_quadratic) delay *= u.hbar;
      ws_min = std::min(ws_min, delay);
      ws_max = std::max(ws_max, delay);
    }
  }

  double lo = ws_min - 6.0 * width;
  double hi = ws_max + 8.0 * width;
  const double res = max_grid_step(env, disp, u, opt.eps_i);
  const double target_step = std::min(width / 40.0, 0.9 * res);

  std::vector<DelayDistribution> dists;
  for (std::size_t pass = 0;; ++pass) {
    DelayGrid grid;
    grid.lo = lo;
    grid.hi = hi;
    grid.n = std::size_t(std::ceil((hi - lo) / target_step)) + 1;

    const double t = std::max(std::abs(lo), std::abs(hi));
    std::vector<int> fs(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f) fs[std::size_t(f)] = f;
    const Integrand ig = build_integrand(model, env, i, fs, disp, opt, t);

    dists.clear();
    std::vector<double> total(grid.n, 0.0);
    for (int f = 0; f < n; ++f) {
      DelayDistribution d;
      d.dispersion = disp;
      d.channel_i = i;
      d.channel_f = f;
      d.grid = grid;
      d.k0 = env.k0();
      d.sigma = sigma;
      d.k_step = ig.k_step;
      d.density = eval_density(ig, std::size_t(f), grid, opt.threads);
      for (std::size_t m = 0; m < grid.n; ++m) total[m] += d.density[m];
      dists.push_back(std::move(d));
    }

    const double mass_total = trapezoid(total, grid.step());
    const double tail_lo = one_sided_tail(total, grid.step(), false);
    const double tail_hi = one_sided_tail(total, grid.step(), true);
    const double bound = opt.tail_threshold * std::max(mass_total, 1e-300);
    const bool ok_lo = tail_lo <= bound;
    const bool ok_hi = tail_hi <= bound;
    if (ok_lo && ok_hi) {
      for (auto& d : dists)
        d.tail_estimate = tail_estimate_of(d.density, grid.step());
      return dists;
    }
    if (pass >= opt.max_extensions)
      throw MassCoverageError(
          "delay grid tail mass never dropped below the coverage threshold "
          "(tail estimate " +
          std::to_string(std::min(tail_lo + tail_hi, 1e300)) + " after " +
          std::to_string(pass) + " extensions)");
    const double span = hi - lo;
    if (!ok_hi) hi += 0.6 * span;
    if (!ok_lo) lo -= 0.6 * span;
  }
}

cplx autocorrelation_em(const SMatrixModel& model, int i, int f, double k0,
                        double sigma, double eta,
                        const DistributionOptions& opt) {
  check_channels(model, i, f);
  if (!(k0 > 2.0 * sigma))
    throw ApproximationDomainError(
        "autocorrelation route requires k0 > 2 sigma (whole-line Gaussian "
        "integration)");
  const Units& u = opt.units;
  const double xlo = k0 - 7.0 * sigma, xhi = k0 + 7.0 * sigma;
  const std::size_t nx = std::size_t(std::ceil((xhi - xlo) / (sigma / 24.0))) + 1;
  const double hx = (xhi - xlo) / double(nx - 1);
  cplx acc(0.0, 0.0);
  for (std::size_t j = 0; j < nx; ++j) {
    const double xi = xlo + double(j) * hx;
    const double d = (xi - k0) / sigma;
    const double wgt = std::exp(-2.0 * d * d) * trapezoid_weight(j, nx, hx);
    const cplx sp = model.at_k(xi + eta / 2.0, u, Dispersion::em_linear)(f, i);
    const cplx sm = model.at_k(xi - eta / 2.0, u, Dispersion::em_linear)(f, i);
    acc += wgt * sp * std::conj(sm);
  }
  return std::sqrt(2.0 / (pi * sigma * sigma)) * acc;
}

cplx autocorrelation_energy(const SMatrixModel& model, int i, int f, double E0,
                            double rho, double epsilon,
                            const DistributionOptions& opt, bool* clipped) {
  check_channels(model, i, f);
  if (!(E0 > 0.0) || !(rho > 0.0))
    throw InvalidParameterError("autocorrelation_energy needs E0 > 0, rho > 0");
  const Units& u = opt.units;
  // u-substitution u = sqrt(E): the weight becomes a plain Gaussian of std
  // rho/2 around sqrt(E0); the lower E-limit max(0, eps/2) clips the grid.
  const double u0 = std::sqrt(E0);
  double ulo = u0 - 7.0 * rho;
  const double uhi = u0 + 7.0 * rho;
  const double floor_u = std::sqrt(std::max(0.0, epsilon / 2.0));
  bool did_clip = false;
  if (ulo < floor_u) {
    ulo = floor_u;
    did_clip = true;
  }
  if (clipped) *clipped = did_clip;
  if (!(ulo < uhi))
    throw ApproximationDomainError(
        "autocorrelation_energy: weight support entirely below the E >= eps/2 "
        "clip");
  const std::size_t nu = std::size_t(std::ceil((uhi - ulo) / (rho / 24.0))) + 1;
  const double hu = (uhi - ulo) / double(nu - 1);
  cplx acc(0.0, 0.0);
  for (std::size_t j = 0; j < nu; ++j) {
    const double uv = ulo + double(j) * hu;
    const double d = (uv - u0) / rho;
    const double wgt = std::exp(-2.0 * d * d) * trapezoid_weight(j, nu, hu);
    const double E = uv * uv;
    const cplx sp =
        model.at_energy(E + epsilon / 2.0, u, Dispersion::qm_quadratic, opt.eps_i)(f, i);
    const cplx sm =
        model.at_energy(E - epsilon / 2.0, u, Dispersion::qm_quadratic, opt.eps_i)(f, i);
    acc += wgt * sp * std::conj(sm);
  }
  return std::sqrt(2.0 / (pi * rho * rho)) * acc;
}

DelayDistribution delay_distribution_em_autocorr(
    const SMatrixModel& model, const Envelope& env, int i, int f,
    const DelayGrid& s_grid, const DistributionOptions& opt) {
  check_channels(model, i, f);
  if (!bandwidth_ratio_check(env, 2.0))
    throw ApproximationDomainError(
        "autocorrelation route requires k0 > 2 sigma");
  check_resolution(s_grid, env, Dispersion::em_linear, opt.units, opt.eps_i);
  const double k0 = env.k0(), sigma = env.sigma();
  const double s_absmax = std::max(std::abs(s_grid.lo), std::abs(s_grid.hi));
  const double eta_max = 8.0 * sigma;
  const double he0 = std::min(sigma / 8.0, pi / (8.0 * std::max(s_absmax, 1e-12)));
  const std::size_t ne = std::size_t(std::ceil(eta_max / he0)) + 1;
  const double he = eta_max / double(ne - 1);

  std::vector<cplx> c(ne);
  for (std::size_t j = 0; j < ne; ++j)
    c[j] = autocorrelation_em(model, i, f, k0, sigma, double(j) * he, opt);

  DelayDistribution d;
  d.dispersion = Dispersion::em_linear;
  d.channel_i = i;
  d.channel_f = f;
  d.grid = s_grid;
  d.k0 = k0;
  d.sigma = sigma;
  d.k_step = he;
  d.density.resize(s_grid.n);
  parallel_for(s_grid.n, opt.threads, [&](std::size_t m) {
    const double s = s_grid.at(m);
    // integrand at -eta is the conjugate of +eta, so fold the line integral
    double acc = std::real(c[0]);
    for (std::size_t j = 1; j < ne; ++j) {
      const double eta = double(j) * he;
      const double win = std::exp(-eta * eta / (2.0 * sigma * sigma));
      const double endw = (j + 1 == ne) ? 0.5 : 1.0;
      acc += 2.0 * endw * win *
             std::real(std::polar(1.0, -eta * s) * c[j]);
    }
    d.density[m] = std::max(0.0, acc * he / two_pi);
  });
  d.tail_estimate = tail_estimate_of(d.density, s_grid.step());
  return d;
}

DelayDistribution delay_distribution_qm_autocorr(
    const SMatrixModel& model, const Envelope& env, int i, int f,
    const DelayGrid& tau_grid, const DistributionOptions& opt) {
  check_channels(model, i, f);
  if (!bandwidth_ratio_check(env, 2.0))
    throw ApproximationDomainError(
        "autocorrelation route requires k0 > 2 sigma");
  check_resolution(tau_grid, env, Dispersion::qm_quadratic, opt.units, opt.eps_i);
  const Units& u = opt.units;
  const double k0 = env.k0(), sigma = env.sigma();
  const double E0 = u.hbar * u.hbar * k0 * k0 / (2.0 * u.mass);  // kinetic
  const double rho = sigma * u.hbar / std::sqrt(2.0 * u.mass);
  const double u0 = std::sqrt(E0);
  const double t_absmax = std::max(std::abs(tau_grid.lo), std::abs(tau_grid.hi));
  const double eps_max = 16.0 * rho * u0;
  const double he0 =
      std::min(rho * u0 / 4.0, pi * u.hbar / (8.0 * std::max(t_absmax, 1e-12)));
  const std::size_t ne = std::size_t(std::ceil(eps_max / he0)) + 1;
  const double he = eps_max / double(ne - 1);

  std::vector<cplx> c(ne);
  bool clipped_any = false;
  for (std::size_t j = 0; j < ne; ++j) {
    bool clipped = false;
    c[j] = autocorrelation_energy(model, i, f, E0, rho, double(j) * he, opt,
                                  &clipped);
    clipped_any = clipped_any || clipped;
  }

  DelayDistribution d;
  d.dispersion = Dispersion::qm_quadratic;
  d.channel_i = i;
  d.channel_f = f;
  d.grid = tau_grid;
  d.k0 = k0;
  d.sigma = sigma;
  d.k_step = he;
  if (clipped_any)
    d.warnings.push_back(
        "energy autocorrelation grid clipped at E = eps/2; correlation window "
        "truncated");
  d.density.resize(tau_grid.n);
  parallel_for(tau_grid.n, opt.threads, [&](std::size_t m) {
    const double tau = tau_grid.at(m);
    double acc = std::real(c[0]);
    for (std::size_t j = 1; j < ne; ++j) {
      const double ep = double(j) * he;
      const double win = std::exp(-ep * ep / (8.0 * rho * rho * E0));
      const double endw = (j + 1 == ne) ? 0.5 : 1.0;
      acc += 2.0 * endw * win *
             std::real(std::polar(1.0, -ep * tau / u.hbar) * c[j]);
    }
    d.density[m] = std::max(0.0, acc * he / (two_pi * u.hbar));
  });
  d.tail_estimate = tail_estimate_of(d.density, tau_grid.step());
  return d;
}

double total_mass(const std::vector<DelayDistribution>& dists) {
  if (dists.empty())
    throw InvalidParameterError("total_mass over an empty channel set");
  double mass = 0.0, tail = 0.0;
  for (auto& d : dists) {
    mass += d.mass();
    tail += d.tail_estimate;
  }
  if (!(tail <= 1e-5 * std::max(mass, 1e-300)))
    throw MassCoverageError(
        "delay grid does not cover >= 1 - 1e-5 of the mass (tail estimate " +
        std::to_string(tail) + ", mass " + std::to_string(mass) + ")");
  return mass;
}

double dispersion_width(double sigma, double t, double m, double hbar) {
  if (!(sigma > 0.0)) throw InvalidParameterError("dispersion_width: sigma > 0");
  if (!(m > 0.0)) throw InvalidParameterError("dispersion_width: m > 0");
  const double x = sigma * sigma * hbar * t / (2.0 * m);
  return 2.0 / sigma * std::sqrt(1.0 + x * x);
}

}  // namespace delaykit
