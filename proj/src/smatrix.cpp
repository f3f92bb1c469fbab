#include "delaykit/smatrix.hpp"

#include <algorithm>
#include <cmath>

#include "delaykit/errors.hpp"

namespace delaykit {

namespace {

const cplx I_unit(0.0, 1.0);

std::string pair_str(int a, int b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

double k_of_energy(double E, const Units& u, Dispersion d, double eps) {
  if (d == Dispersion::em_linear) {
    return E / (u.hbar * u.c);
  }
  const double kin = E - eps;
  if (kin < 0.0)
    throw ClosedChannelError("energy " + std::to_string(E) +
                             " below channel threshold " + std::to_string(eps));
  return std::sqrt(2.0 * u.mass * kin) / u.hbar;
}

SMatrixModel SMatrixModel::identity(int n_channels) {
  if (n_channels < 1)
    throw InvalidParameterError("model.channels must be >= 1");
  SMatrixModel m;
  m.n_ = n_channels;
  m.kind_ = SMatrixKind::identity;
  m.var_ = SVariable::energy;
  m.exactly_unitary_ = true;
  m.label_ = "identity";
  return m;
}

SMatrixModel SMatrixModel::blaschke(
    const std::vector<std::pair<double, double>>& poles) {
  SMatrixModel m;
  m.n_ = 1;
  m.var_ = SVariable::energy;
  m.exactly_unitary_ = true;
  if (poles.empty()) {
    m.kind_ = SMatrixKind::identity;
    m.label_ = "identity";
    m.warnings_.push_back("blaschke model with no poles degrades to identity");
    return m;
  }
  m.kind_ = SMatrixKind::blaschke_product;
  m.label_ = "blaschke";
  for (auto& [E, Gamma] : poles) {
    if (!(Gamma > 0.0))
      throw InvalidParameterError("blaschke pole width Gamma must be > 0");
    Resonance r;
    r.E = E;
    r.Gamma = Gamma;
    m.resonances_.push_back(r);
  }
  return m;
}

SMatrixModel SMatrixModel::feshbach(const std::vector<Resonance>& resonances,
                                    const Eigen::MatrixXcd& prompt) {
  if (prompt.rows() != prompt.cols() || prompt.rows() < 1)
    throw InvalidParameterError("feshbach prompt matrix must be square");
  const int n = int(prompt.rows());
  const double prompt_defect =
      (prompt.adjoint() * prompt - Eigen::MatrixXcd::Identity(n, n))
          .cwiseAbs()
          .maxCoeff();
  if (prompt_defect > 1e-10)
    throw InvalidParameterError("feshbach prompt matrix is not unitary (defect " +
                                std::to_string(prompt_defect) + ")");
  for (std::size_t mu = 0; mu < resonances.size(); ++mu) {
    const auto& r = resonances[mu];
    if (!(r.Gamma > 0.0))
      throw InvalidParameterError("feshbach Gamma must be > 0");
    if (r.g.size() != n)
      throw InvalidParameterError("feshbach partial-width vector length != channels");
    for (std::size_t nu = 0; nu <= mu; ++nu) {
      const double want = (mu == nu) ? r.Gamma : 0.0;
      const double got = r.g.dot(resonances[nu].g);
      if (std::abs(got - want) > 1e-8)
        throw InvalidParameterError(
            "feshbach width rows violate the orthogonality constraint at pair " +
            pair_str(int(mu), int(nu)) + ": sum_k g g = " + std::to_string(got) +
            ", expected " + std::to_string(want));
    }
  }
  SMatrixModel m;
  m.n_ = n;
  m.kind_ = SMatrixKind::feshbach_pole;
  m.var_ = SVariable::energy;
  m.exactly_unitary_ = false;  // defect reported, not asserted
  m.label_ = "feshbach";
  m.resonances_ = resonances;
  m.prompt_ = prompt;
  return m;
}

SMatrixModel SMatrixModel::kmatrix_cayley(
    const std::vector<Resonance>& resonances, const Eigen::MatrixXd& background) {
  if (background.rows() != background.cols() || background.rows() < 1)
    throw InvalidParameterError("kmatrix background must be square");
  if (!background.isApprox(background.transpose(), 1e-12))
    throw InvalidParameterError("kmatrix background must be symmetric");
  const int n = int(background.rows());
  for (auto& r : resonances)
    if (r.g.size() != n)
      throw InvalidParameterError("kmatrix coupling vector length != channels");
  SMatrixModel m;
  m.n_ = n;
  m.kind_ = SMatrixKind::kmatrix_cayley;
  m.var_ = SVariable::energy;
  m.exactly_unitary_ = true;
  m.label_ = "kmatrix_cayley";
  m.resonances_ = resonances;
  m.background_ = background;
  return m;
}

SMatrixModel SMatrixModel::tabulated(std::vector<double> x,
                                     std::vector<Eigen::MatrixXcd> values,
                                     SVariable var) {
  if (x.size() != values.size() || x.size() < 2)
    throw InvalidParameterError("tabulated model needs >= 2 samples");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1]))
      throw InvalidParameterError("tabulated model abscissae must increase");
  const int n = int(values.front().rows());
  for (auto& v : values)
    if (v.rows() != n || v.cols() != n)
      throw InvalidParameterError("tabulated model matrices must share one shape");
  SMatrixModel m;
  m.n_ = n;
  m.kind_ = SMatrixKind::tabulated;
  m.var_ = var;
  m.exactly_unitary_ = false;
  m.label_ = "tabulated";
  m.xs_ = std::move(x);
  m.values_ = std::move(values);
  return m;
}

SMatrixModel SMatrixModel::pure_delay(double L) {
  SMatrixModel m;
  m.n_ = 1;
  m.kind_ = SMatrixKind::pure_delay;
  m.var_ = SVariable::wavenumber;
  m.exactly_unitary_ = true;
  m.label_ = "pure_delay";
  m.delay_length_ = L;
  return m;
}

SMatrixModel SMatrixModel::scalar_function(std::function<cplx(double)> fn,
                                           SVariable var, std::string label,
                                           bool exactly_unitary) {
  SMatrixModel m;
  m.n_ = 1;
  m.kind_ = SMatrixKind::semiclassical_disc;
  m.var_ = var;
  m.exactly_unitary_ = exactly_unitary;
  m.label_ = std::move(label);
  m.fn_ = std::move(fn);
  return m;
}

Eigen::MatrixXcd SMatrixModel::eval_kmatrix(double E) const {
  const int n = n_;
  // Pole terms closer than 1e-6 * scale are peeled off and reinserted through
  // the Woodbury identity, which stays finite at the pole itself.
  std::vector<int> near;
  Eigen::MatrixXd K = background_;
  for (std::size_t mu = 0; mu < resonances_.size(); ++mu) {
    const auto& r = resonances_[mu];
    if (r.g.squaredNorm() == 0.0) continue;
    const double scale = std::max(1.0, std::abs(r.E));
    if (std::abs(r.E - E) < 1e-6 * scale) {
      near.push_back(int(mu));
    } else {
      K += 0.5 / (r.E - E) * (r.g * r.g.transpose());
    }
  }

  const Eigen::MatrixXcd A =
      Eigen::MatrixXcd::Identity(n, n) - I_unit * K.cast<cplx>();
  {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (!(smin > 0.0) || smax / smin > 1e12)
      throw NumericalSingularityError(
          "kmatrix_cayley: I - iK conditioning exceeds 1e12 at E = " +
          std::to_string(E));
  }
  const Eigen::MatrixXcd Ainv = A.inverse();

  Eigen::MatrixXcd inv_ImiK;
  if (near.empty()) {
    inv_ImiK = Ainv;
  } else {
    const int p = int(near.size());
    Eigen::MatrixXcd U(n, p);
    Eigen::MatrixXcd Cinv = Eigen::MatrixXcd::Zero(p, p);
    for (int j = 0; j < p; ++j) {
      const auto& r = resonances_[std::size_t(near[j])];
      U.col(j) = r.g.cast<cplx>();
      // K pole term is t uu^T with t = 1/(2(E_mu - E)); I - iK adds
      // U C U^T with C = -i t, so C^{-1} = i * 2 (E_mu - E) -> 0 at the pole.
      Cinv(j, j) = I_unit * 2.0 * (r.E - E);
    }
    const Eigen::MatrixXcd M = Cinv + U.transpose() * Ainv * U;
    inv_ImiK = Ainv - Ainv * U * M.inverse() * U.transpose() * Ainv;
  }
  // S = (I+iK)(I-iK)^{-1} = 2 (I-iK)^{-1} - I.
  return 2.0 * inv_ImiK - Eigen::MatrixXcd::Identity(n, n);
}

Eigen::MatrixXcd SMatrixModel::at(double x) const {
  switch (kind_) {
    case SMatrixKind::identity:
      return Eigen::MatrixXcd::Identity(n_, n_);
    case SMatrixKind::blaschke_product: {
      cplx s(1.0, 0.0);
      for (auto& r : resonances_)
        s *= (x - r.E - I_unit * (r.Gamma / 2.0)) /
             (x - r.E + I_unit * (r.Gamma / 2.0));
      Eigen::MatrixXcd out(1, 1);
      out(0, 0) = s;
      return out;
    }
    case SMatrixKind::feshbach_pole: {
      Eigen::MatrixXcd s = prompt_;
      for (auto& r : resonances_) {
        const cplx denom = x - r.E + I_unit * (r.Gamma / 2.0);
        s -= (I_unit / denom) * (r.g * r.g.transpose()).cast<cplx>();
      }
      return s;
    }
    case SMatrixKind::kmatrix_cayley:
      return eval_kmatrix(x);
    case SMatrixKind::tabulated: {
      if (x < xs_.front() || x > xs_.back())
        throw ApproximationDomainError(
            "tabulated model queried at " + std::to_string(x) + " outside [" +
            std::to_string(xs_.front()) + ", " + std::to_string(xs_.back()) + "]");
      auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
      if (it == xs_.begin()) return values_.front();
      if (it == xs_.end()) return values_.back();
      const std::size_t j = std::size_t(it - xs_.begin());
      const double t = (x - xs_[j - 1]) / (xs_[j] - xs_[j - 1]);
      return (1.0 - t) * values_[j - 1] + t * values_[j];
    }
    case SMatrixKind::pure_delay: {
      Eigen::MatrixXcd out(1, 1);
      out(0, 0) = std::polar(1.0, delay_length_ * x);
      return out;
    }
    case SMatrixKind::semiclassical_disc: {
      Eigen::MatrixXcd out(1, 1);
      out(0, 0) = fn_(x);
      return out;
    }
  }
  throw InvalidParameterError("unknown S-matrix kind");
}

cplx SMatrixModel::element(double x, int i, int f) const {
  return at(x)(f, i);
}

Eigen::MatrixXcd SMatrixModel::at_k(double k, const Units& u, Dispersion d,
                                    double eps) const {
  if (var_ == SVariable::wavenumber) return at(k);
  return at(energy_of_k(k, u, d, eps));
}

Eigen::MatrixXcd SMatrixModel::at_energy(double E, const Units& u, Dispersion d,
                                         double eps) const {
  if (var_ == SVariable::energy) return at(E);
  return at(k_of_energy(E, u, d, eps));
}

double unitarity_defect(const SMatrixModel& model,
                        const std::vector<double>& grid) {
  if (grid.empty())
    throw InvalidParameterError("unitarity_defect needs a non-empty grid");
  const Eigen::MatrixXcd id =
      Eigen::MatrixXcd::Identity(model.n_channels(), model.n_channels());
  double worst = 0.0;
  for (double x : grid) {
    const Eigen::MatrixXcd s = model.at(x);
    worst = std::max(worst, (s.adjoint() * s - id).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::vector<Eigen::VectorXd> orthogonalize_widths(
    const std::vector<Eigen::VectorXd>& seeds,
    const std::vector<double>& gammas) {
  if (seeds.size() != gammas.size() || seeds.empty())
    throw InvalidParameterError("orthogonalize_widths: seeds/gammas mismatch");
  const Eigen::Index n = seeds.front().size();
  if (Eigen::Index(seeds.size()) > n)
    throw InvalidParameterError(
        "orthogonalize_widths: more resonances than channels");
  std::vector<Eigen::VectorXd> out;
  for (std::size_t mu = 0; mu < seeds.size(); ++mu) {
    if (seeds[mu].size() != n)
      throw InvalidParameterError("orthogonalize_widths: ragged seed vectors");
    if (!(gammas[mu] > 0.0))
      throw InvalidParameterError("orthogonalize_widths: Gamma must be > 0");
    Eigen::VectorXd v = seeds[mu];
    for (auto& prev : out) v -= prev.dot(v) / prev.squaredNorm() * prev;
    if (v.norm() < 1e-12 * std::max(1.0, seeds[mu].norm()))
      throw InvalidParameterError(
          "orthogonalize_widths: seed " + std::to_string(mu) +
          " is linearly dependent on earlier seeds");
    out.push_back(std::sqrt(gammas[mu]) / v.norm() * v);
  }
  return out;
}

}  // namespace delaykit
