#include "delaykit/moments.hpp"

#include <cmath>

#include "delaykit/errors.hpp"
#include "delaykit/numerics.hpp"

namespace delaykit {

namespace {

void check_channels(const SMatrixModel& model, int i, int f) {
  if (i < 0 || i >= model.n_channels() || f < 0 || f >= model.n_channels())
    throw InvalidParameterError("channel index outside the model's range");
}

cplx element_at_energy(const SMatrixModel& model, int i, int f, double E,
                       const Units& u) {
  return model.at_energy(E, u, Dispersion::qm_quadratic, 0.0)(f, i);
}

}  // namespace

double distribution_moment(const DelayDistribution& dist, int order) {
  if (order != 1 && order != 2)
    throw InvalidParameterError("moment order must be 1 or 2");
  const double mass = dist.mass();
  if (!(mass > 1e-300))
    throw UndefinedMomentError("zero-mass channel pair has no delay moments");
  if (!(dist.tail_estimate <= 1e-5 * mass))
    throw MassCoverageError(
        "grid tail mass exceeds 1e-5 of the pair mass; the moment would be "
        "biased by the truncation");
  const double h = dist.grid.step();
  const std::size_t n = dist.density.size();
  double acc = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double s = dist.grid.at(m);
    const double sp = order == 1 ? s : s * s;
    acc += trapezoid_weight(m, n, h) * sp * dist.density[m];
  }
  return acc / mass;
}

MomentReport moment_report(const DelayDistribution& dist, double ws_reference) {
  MomentReport r;
  r.channel_i = dist.channel_i;
  r.channel_f = dist.channel_f;
  r.sigma = dist.sigma;
  r.pair_mass = dist.mass();
  r.mean = distribution_moment(dist, 1);
  r.second_moment = distribution_moment(dist, 2);
  r.variance = r.second_moment - r.mean * r.mean;
  r.mean_raw = r.mean * r.pair_mass;
  r.second_moment_raw = r.second_moment * r.pair_mass;
  r.ws_reference = ws_reference;
  return r;
}

double wigner_smith_element(const SMatrixModel& model, int i, int f, double E0,
                            double h, const Units& u) {
  check_channels(model, i, f);
  if (!(h > 0.0)) throw InvalidParameterError("derivative step must be > 0");
  auto sfi = [&](double E) { return element_at_energy(model, i, f, E, u); };
  const cplx s0 = sfi(E0);
  const cplx ds = derivative(sfi, E0, h);
  return u.hbar * std::imag(std::conj(s0) * ds);
}

double wigner_smith_element_k(const SMatrixModel& model, int i, int f,
                              double k0, double h, const Units& u) {
  check_channels(model, i, f);
  if (!(h > 0.0)) throw InvalidParameterError("derivative step must be > 0");
  auto sfi = [&](double k) {
    return model.at_k(k, u, Dispersion::em_linear, 0.0)(f, i);
  };
  const cplx s0 = sfi(k0);
  const cplx ds = derivative(sfi, k0, h);
  return std::imag(std::conj(s0) * ds);
}

double wigner_smith_trace(const SMatrixModel& model, double E0, double h,
                          const Units& u) {
  if (!(h > 0.0)) throw InvalidParameterError("derivative step must be > 0");
  const int n = model.n_channels();
  auto s_of = [&](double E) {
    return model.at_energy(E, u, Dispersion::qm_quadratic, 0.0);
  };
  const Eigen::MatrixXcd s0 = s_of(E0);
  const Eigen::MatrixXcd ds = derivative(s_of, E0, h);
  const cplx tr = (s0.adjoint() * ds).trace();
  return u.hbar * tr.imag() / double(n);
}

ConvergenceTable monochromatic_limit_check(const SMatrixModel& model, int i,
                                           int f, double x0,
                                           const std::vector<double>& sigmas,
                                           Dispersion disp,
                                           const DistributionOptions& opt) {
  check_channels(model, i, f);
  if (sigmas.size() < 2)
    throw InvalidParameterError("need at least two bandwidths to compare");
  for (std::size_t j = 1; j < sigmas.size(); ++j)
    if (!(sigmas[j] < sigmas[j - 1]))
      throw InvalidParameterError("sigma sequence must be strictly decreasing");

  const Units& u = opt.units;
  ConvergenceTable table;
  for (double sx : sigmas) {
    double k0, sk, ws;
    if (disp == Dispersion::em_linear) {
      k0 = x0;
      sk = sx;
      ws = wigner_smith_element_k(model, i, f, k0, sk / 1000.0, u);
    } else {
      k0 = k_of_energy(x0, u, disp, opt.eps_i);
      sk = sx * u.mass / (u.hbar * u.hbar * k0);  // energy bandwidth -> k
      ws = wigner_smith_element(model, i, f, x0, sx / 1000.0, u);
    }
    const Envelope env = Envelope::gaussian(k0, sk);
    auto dists = delay_distributions_auto(model, env, i, disp, opt);
    const double mean = distribution_moment(dists[std::size_t(f)], 1);
    table.rows.push_back({sx, mean, ws, std::abs(mean - ws)});
  }

  bool mono = true;
  int slips = 0;
  for (std::size_t j = 1; j < table.rows.size(); ++j) {
    const double prev = table.rows[j - 1].abs_error;
    const double cur = table.rows[j].abs_error;
    if (cur > prev) {
      if (cur <= prev * 1.05)
        ++slips;
      else
        mono = false;
    }
  }
  table.monotone = mono && slips <= 1;
  return table;
}

double second_moment_smallband(const SMatrixModel& model, int i, int f,
                               double k0, double sigma,
                               const DistributionOptions& opt) {
  check_channels(model, i, f);
  if (!(sigma > 0.0)) throw InvalidParameterError("sigma must be > 0");
  const Units& u = opt.units;
  auto sfi = [&](double k) {
    return model.at_k(k, u, Dispersion::em_linear, opt.eps_i)(f, i);
  };
  const cplx s0 = sfi(k0);
  const double ref = std::abs(s0);
  if (!(ref > 1e-300))
    throw ApproximationDomainError(
        "vanishing S element: small-band expansion undefined");
  double var = 0.0;
  for (int j = 0; j <= 32; ++j) {
    const double k = k0 + sigma * (double(j) / 16.0 - 1.0);
    var = std::max(var, std::abs(sfi(k) - s0));
  }
  if (!(var / ref < 0.01))
    throw ApproximationDomainError(
        "S varies by " + std::to_string(100.0 * var / ref) +
        "% over the band; the small-band second-moment expansion needs < 1%");
  const double h = sigma / 1000.0;
  const cplx d1 = derivative(sfi, k0, h);
  const cplx d2 = second_derivative(sfi, k0, h);
  const double curv = std::real(std::conj(s0) * d2) - std::norm(d1);
  return std::norm(s0) / (sigma * sigma) - 0.5 * curv;
}

}  // namespace delaykit
