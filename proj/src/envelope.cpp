#include "delaykit/envelope.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>

#include "delaykit/errors.hpp"

namespace delaykit {

namespace {

constexpr double pi = 3.14159265358979323846264338327950288;

// 3-point Gauss-Legendre on [a,b]: exact through degree 5, enough for the
// cubic/quartic segment moments of a piecewise-linear omega.
template <class F>
double gauss3(F&& f, double a, double b) {
  static const double xg = std::sqrt(0.6);
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  return h * ((5.0 / 9.0) * f(c - h * xg) + (8.0 / 9.0) * f(c) +
              (5.0 / 9.0) * f(c + h * xg));
}

}  // namespace

Envelope Envelope::gaussian(double k0, double sigma) {
  if (!(k0 > 0.0)) throw InvalidParameterError("envelope.k0 must be > 0");
  if (!(sigma > 0.0)) throw InvalidParameterError("envelope.sigma must be > 0");

  Envelope env;
  env.kind_ = EnvelopeKind::gaussian;
  env.k0_ = k0;
  env.sigma_ = sigma;
  env.support_lo_ = std::max(0.0, k0 - 8.0 * sigma);
  env.support_hi_ = k0 + 8.0 * sigma;

  // A(k0) from adaptive quadrature of the half-line square integral; the
  // prefactor (2/pi sigma^2)^{1/4} makes the whole-line integral exactly 1,
  // so A ~ 1 up to the truncation tail.
  const double b2 = std::sqrt(2.0 / (pi * sigma * sigma));
  auto integrand = [=](double k) {
    const double d = (k - k0) / sigma;
    return b2 * std::exp(-2.0 * d * d);
  };
  using boost::math::quadrature::gauss_kronrod;
  const double mass = gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, k0 + 12.0 * sigma, 12, 1e-13);
  env.norm_const_ = 1.0 / std::sqrt(mass);
  return env;
}

Envelope Envelope::tabulated(std::vector<std::pair<double, double>> samples) {
  if (samples.size() < 2)
    throw InvalidParameterError("envelope.samples needs >= 2 points");
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].first < 0.0)
      throw InvalidParameterError("envelope.samples: k must be >= 0");
    if (samples[i].second < 0.0)
      throw InvalidParameterError("envelope.samples: omega must be >= 0");
    if (i > 0 && !(samples[i].first > samples[i - 1].first))
      throw InvalidParameterError("envelope.samples: k values must be distinct");
  }

  Envelope env;
  env.kind_ = EnvelopeKind::tabulated;
  env.ks_.reserve(samples.size());
  env.ws_.reserve(samples.size());
  for (auto& [k, w] : samples) {
    env.ks_.push_back(k);
    env.ws_.push_back(w);
  }

  // Exact square mass of the piecewise-linear table, then renormalize.
  double mass = 0.0;
  for (std::size_t i = 0; i + 1 < env.ks_.size(); ++i) {
    const double dk = env.ks_[i + 1] - env.ks_[i];
    const double a = env.ws_[i], b = env.ws_[i + 1];
    mass += dk / 3.0 * (a * a + a * b + b * b);
  }
  if (mass <= 0.0)
    throw InvalidParameterError("envelope.samples: identically zero table");
  const double scale = 1.0 / std::sqrt(mass);
  for (auto& w : env.ws_) w *= scale;
  env.norm_const_ = scale;

  env.support_lo_ = env.ks_.front();
  env.support_hi_ = env.ks_.back();

  // Carrier = argmax node; bandwidth = 2 * std of the omega^2 density
  // (recovers sigma exactly for the gaussian kind).
  std::size_t imax = 0;
  for (std::size_t i = 1; i < env.ws_.size(); ++i)
    if (env.ws_[i] > env.ws_[imax]) imax = i;
  env.k0_ = env.ks_[imax];

  auto sq = [&](double k) {
    const double w = env(k);
    return w * w;
  };
  double m1 = 0.0;
  for (std::size_t i = 0; i + 1 < env.ks_.size(); ++i)
    m1 += gauss3([&](double k) { return k * sq(k); }, env.ks_[i], env.ks_[i + 1]);
  double m2 = 0.0;
  for (std::size_t i = 0; i + 1 < env.ks_.size(); ++i)
    m2 += gauss3([&](double k) { return (k - m1) * (k - m1) * sq(k); },
                 env.ks_[i], env.ks_[i + 1]);
  env.sigma_ = 2.0 * std::sqrt(std::max(0.0, m2));

  // Count strict interior maxima; more than one means a multi-modal table.
  int maxima = 0;
  for (std::size_t i = 0; i < env.ws_.size(); ++i) {
    const double w = env.ws_[i];
    const bool up = (i == 0) || env.ws_[i - 1] < w;
    const bool down = (i + 1 == env.ws_.size()) || env.ws_[i + 1] < w;
    if (up && down && w > 0.0) ++maxima;
  }
  if (maxima > 1) {
    env.multimodal_ = true;
    env.warnings_.push_back(
        "tabulated envelope has " + std::to_string(maxima) +
        " local maxima; effective k0/sigma describe the dominant peak only");
  }
  return env;
}

double Envelope::operator()(double k) const {
  if (k < 0.0) return 0.0;
  if (kind_ == EnvelopeKind::gaussian) {
    const double d = (k - k0_) / sigma_;
    const double pref = std::pow(2.0 / (pi * sigma_ * sigma_), 0.25);
    return norm_const_ * pref * std::exp(-d * d);
  }
  if (k < ks_.front() || k > ks_.back()) return 0.0;
  auto it = std::upper_bound(ks_.begin(), ks_.end(), k);
  if (it == ks_.begin()) return ws_.front();
  if (it == ks_.end()) return ws_.back();
  const std::size_t j = std::size_t(it - ks_.begin());
  const double t = (k - ks_[j - 1]) / (ks_[j] - ks_[j - 1]);
  return ws_[j - 1] + t * (ws_[j] - ws_[j - 1]);
}

double Envelope::squared_mass() const {
  if (kind_ == EnvelopeKind::tabulated) {
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < ks_.size(); ++i) {
      const double dk = ks_[i + 1] - ks_[i];
      const double a = ws_[i], b = ws_[i + 1];
      mass += dk / 3.0 * (a * a + a * b + b * b);
    }
    return mass;
  }
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(
      [this](double k) {
        const double w = (*this)(k);
        return w * w;
      },
      0.0, k0_ + 12.0 * sigma_, 12, 1e-13);
}

bool bandwidth_ratio_check(const Envelope& env, double q) {
  if (!(q > 0.0)) throw InvalidParameterError("bandwidth ratio q must be > 0");
  return env.k0() > q * env.sigma();
}

}  // namespace delaykit
