#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "delaykit/envelope.hpp"
#include "delaykit/smatrix.hpp"

namespace delaykit {

struct DelayGrid {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;  // number of samples, >= 2
  double step() const { return (hi - lo) / double(n - 1); }
  double at(std::size_t i) const { return lo + double(i) * step(); }
};

// Sampled delay-time probability density for one i->f transition.
// EM: argument s = c t (length units); quantum: argument tau (time units).
struct DelayDistribution {
  Dispersion dispersion = Dispersion::em_linear;
  int channel_i = 0;
  int channel_f = 0;
  DelayGrid grid;
  std::vector<double> density;

  // metadata
  double k0 = 0.0;
  double sigma = 0.0;
  double k_step = 0.0;        // quadrature step of the k-integral
  double tail_estimate = 0.0; // extrapolated mass outside the grid
  std::vector<std::string> warnings;

  double mass() const;                 // trapezoid integral of the density
  double peak() const;                 // max density value
};

struct DistributionOptions {
  Units units;
  double eps_i = 0.0;         // incoming-channel threshold (quantum)
  unsigned threads = 1;
  bool use_sqrt_k = true;     // quantum sqrt(k) weight (tests may disable)
  double k_step_scale = 1.0;  // < 1 refines the k-quadrature step
  // auto-grid parameters
  double tail_threshold = 1e-8;  // extend until tail estimate < this * mass
  std::size_t max_extensions = 24;
};

// Direct route, linear dispersion:
// P(s) = (1/2pi) | int_0^inf dk omega(k) S_fi(k) e^{-iks} |^2.
DelayDistribution delay_distribution_em(const SMatrixModel& model,
                                        const Envelope& env, int i, int f,
                                        const DelayGrid& s_grid,
                                        const DistributionOptions& opt = {});

// Direct route, quadratic dispersion, E(k) = hbar^2 k^2/(2m) + eps_i:
// P(tau) = (hbar/2pi m) | int_0^inf dk sqrt(k) omega(k) S_fi(E(k))
//                         e^{-i E(k) tau / hbar} |^2.
DelayDistribution delay_distribution_qm(const SMatrixModel& model,
                                        const Envelope& env, int i, int f,
                                        const DelayGrid& tau_grid,
                                        const DistributionOptions& opt = {});

// All open channels f on a shared automatically-extended grid.  The grid is
// grown geometrically until the extrapolated tail mass drops below
// opt.tail_threshold * mass (MassCoverageError if it never decays).
std::vector<DelayDistribution> delay_distributions_auto(
    const SMatrixModel& model, const Envelope& env, int i, Dispersion disp,
    const DistributionOptions& opt = {});

// S-matrix autocorrelation at wavenumber split eta around the carrier:
// C(eta) = sqrt(2/(pi sigma^2)) int dxi e^{-2(xi-k0)^2/sigma^2}
//          S_fi(xi+eta/2) S*_fi(xi-eta/2).
// Precondition: k0 > 2 sigma (whole-line approximation).
cplx autocorrelation_em(const SMatrixModel& model, int i, int f, double k0,
                        double sigma, double eta,
                        const DistributionOptions& opt = {});

// Energy autocorrelation with rho = sigma hbar / sqrt(2m): weighted mean of
// S(E+eps/2) S*(E-eps/2) under (1/2) sqrt(2/(pi rho^2)) E^{-1/2}
// e^{-2(sqrt(E)-sqrt(E0))^2/rho^2}.  The E-grid is clipped at max(0, eps/2)
// with a warning flag when clipping occurs.
cplx autocorrelation_energy(const SMatrixModel& model, int i, int f, double E0,
                            double rho, double epsilon,
                            const DistributionOptions& opt = {},
                            bool* clipped = nullptr);

// Distribution assembled from the autocorrelation (form-factor) route:
// P(s) = (1/2pi) int deta e^{-i eta s} e^{-eta^2/(2 sigma^2)} C(eta).
DelayDistribution delay_distribution_em_autocorr(
    const SMatrixModel& model, const Envelope& env, int i, int f,
    const DelayGrid& s_grid, const DistributionOptions& opt = {});

// P(tau) = (1/2pi hbar) int deps e^{-i eps tau/hbar} e^{-eps^2/(8 rho^2 E0)}
//          C_E(eps); agrees with the direct route to O((sigma/k0)^2).
DelayDistribution delay_distribution_qm_autocorr(
    const SMatrixModel& model, const Envelope& env, int i, int f,
    const DelayGrid& tau_grid, const DistributionOptions& opt = {});

// Sum over channels of the trapezoid mass; MassCoverageError when the summed
// tail estimate exceeds 1e-5 of the total.
double total_mass(const std::vector<DelayDistribution>& dists);

// Effective spatial width of a dispersing quantum packet:
// (2/sigma) sqrt(1 + (sigma^2 hbar t / (2m))^2).
double dispersion_width(double sigma, double t, double m, double hbar = 1.0);

}  // namespace delaykit
