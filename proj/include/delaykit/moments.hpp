#pragma once

#include <vector>

#include "delaykit/distribution.hpp"

namespace delaykit {

struct MomentReport {
  int channel_i = 0;
  int channel_f = 0;
  double sigma = 0.0;
  double pair_mass = 0.0;
  // normalized by the pair's own mass
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;
  // branching-weighted (unnormalized) moments
  double mean_raw = 0.0;
  double second_moment_raw = 0.0;
  double ws_reference = 0.0;
};

// Trapezoid moment of the sampled density, order 1 or 2, normalized by the
// pair's own mass.  Zero-mass pair -> UndefinedMomentError.
double distribution_moment(const DelayDistribution& dist, int order);

MomentReport moment_report(const DelayDistribution& dist, double ws_reference);

// Wigner-Smith delay of one matrix element at E0:
// hbar * Im[ conj(S_fi) dS_fi/dE ] = hbar * dphi/dE (phase delay).
double wigner_smith_element(const SMatrixModel& model, int i, int f, double E0,
                            double h, const Units& u = {});

// EM variant with k in place of E: s_WS = Im[ conj(S_fi) dS_fi/dk ].
double wigner_smith_element_k(const SMatrixModel& model, int i, int f,
                              double k0, double h, const Units& u = {});

// (hbar / N0) Im tr[ S^dag dS/dE ]; all channels must be open at E0.
double wigner_smith_trace(const SMatrixModel& model, double E0, double h,
                          const Units& u = {});

struct ConvergenceRow {
  double sigma = 0.0;
  double mean = 0.0;
  double ws_reference = 0.0;
  double abs_error = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  bool monotone = false;  // errors non-increasing (one <5% slip tolerated)
};

// Distribution means for a decreasing sigma sequence against the WS value.
// disp selects the dispersion used for the distributions; x0 is the carrier
// (k0 for EM, where E = hbar c k).
ConvergenceTable monochromatic_limit_check(const SMatrixModel& model, int i,
                                           int f, double x0,
                                           const std::vector<double>& sigmas,
                                           Dispersion disp,
                                           const DistributionOptions& opt = {});

// Small-bandwidth second moment around k0 (EM):
// (1/sigma^2)|S(k0)|^2 - (1/2) Re[ S* d2S/dk2 - |dS/dk|^2 ].
// Precondition: relative S variation over (k0-sigma, k0+sigma) below 1%.
double second_moment_smallband(const SMatrixModel& model, int i, int f,
                               double k0, double sigma,
                               const DistributionOptions& opt = {});

}  // namespace delaykit
