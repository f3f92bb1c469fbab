#pragma once

#include <string>
#include <utility>
#include <vector>

namespace delaykit {

enum class EnvelopeKind { gaussian, tabulated };

// Spectral weight omega(k) of the incoming packet, square-normalized on the
// half line: integral of omega^2 over [0, inf) = 1.  omega(k) = 0 for k < 0.
class Envelope {
public:
  // omega(k) = A (2/(pi sigma^2))^{1/4} exp(-(k-k0)^2/sigma^2) with A fixed
  // numerically so the half-line square integral is 1.
  static Envelope gaussian(double k0, double sigma);

  // Piecewise-linear table, renormalized on construction.  Multi-modal tables
  // are accepted but flagged with a warning.
  static Envelope tabulated(std::vector<std::pair<double, double>> samples);

  double operator()(double k) const;

  EnvelopeKind kind() const { return kind_; }
  // Carrier: exact k0 for gaussian, argmax of the table otherwise.
  double k0() const { return k0_; }
  // Bandwidth: exact sigma for gaussian, 2*std of the omega^2 density
  // otherwise (coincides with sigma for a Gaussian).
  double sigma() const { return sigma_; }
  double norm_const() const { return norm_const_; }
  double support_lo() const { return support_lo_; }
  double support_hi() const { return support_hi_; }
  bool multimodal() const { return multimodal_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Quadrature of omega^2 over the support (diagnostic; ~1 by construction).
  double squared_mass() const;

private:
  Envelope() = default;
  EnvelopeKind kind_ = EnvelopeKind::gaussian;
  double k0_ = 0.0;
  double sigma_ = 0.0;
  double norm_const_ = 1.0;
  double support_lo_ = 0.0;
  double support_hi_ = 0.0;
  bool multimodal_ = false;
  std::vector<std::string> warnings_;
  // tabulated kind
  std::vector<double> ks_, ws_;
};

// True iff k0 > q * sigma (strict); gates the whole-line Gaussian-integral
// approximation used by the autocorrelation route.
bool bandwidth_ratio_check(const Envelope& env, double q);

}  // namespace delaykit
