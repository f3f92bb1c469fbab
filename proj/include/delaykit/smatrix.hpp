#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "delaykit/numerics.hpp"

namespace delaykit {

enum class Dispersion { em_linear, qm_quadratic };

// Default unit system: hbar = c = 1, m = 1/2, so E = k^2 in quantum mode and
// E = k in EM mode.  All three are overridable from the run config.
struct Units {
  double hbar = 1.0;
  double c = 1.0;
  double mass = 0.5;
};

inline double energy_of_k(double k, const Units& u, Dispersion d,
                          double eps = 0.0) {
  return d == Dispersion::em_linear ? u.hbar * u.c * k
                                    : u.hbar * u.hbar * k * k / (2.0 * u.mass) + eps;
}

// Inverse of energy_of_k; throws ClosedChannelError below threshold.
double k_of_energy(double E, const Units& u, Dispersion d, double eps = 0.0);

struct Resonance {
  double E = 0.0;      // pole position E_mu
  double Gamma = 0.0;  // width Gamma_mu > 0
  Eigen::VectorXd g;   // partial widths, one entry per channel
};

enum class SMatrixKind {
  identity,
  blaschke_product,
  feshbach_pole,
  kmatrix_cayley,
  tabulated,
  pure_delay,
  semiclassical_disc,
};

// Which independent variable the model is naturally parameterized by.
enum class SVariable { energy, wavenumber };

// Evaluable on-shell S-matrix model.  Immutable after construction; at() is a
// pure function safe for concurrent calls.
class SMatrixModel {
public:
  static SMatrixModel identity(int n_channels);

  // Single channel, exactly unitary:
  // S(E) = prod_mu (E - E_mu - i Gamma_mu/2) / (E - E_mu + i Gamma_mu/2).
  // Empty pole list degrades to the identity model with a warning.
  static SMatrixModel blaschke(
      const std::vector<std::pair<double, double>>& poles);

  // Constant-width pole expansion S = S^(P) - i sum_mu g g^T/(E - E_mu + i G/2).
  // Requires orthogonal width rows (sum_k g_mu,k g_mu',k = delta Gamma_mu,
  // tolerance 1e-8) and a unitary prompt; only approximately unitary overall,
  // defect reported rather than asserted.
  static SMatrixModel feshbach(const std::vector<Resonance>& resonances,
                               const Eigen::MatrixXcd& prompt);

  // K(E) = background + 1/2 sum_mu g g^T/(E_mu - E), S = (I+iK)(I-iK)^{-1}.
  // Exactly unitary and symmetric; K-matrix poles are evaluated through the
  // residue-free Woodbury limit, never by dividing by zero.
  static SMatrixModel kmatrix_cayley(const std::vector<Resonance>& resonances,
                                     const Eigen::MatrixXd& background);

  // Entrywise linear interpolation between stored sample matrices.
  static SMatrixModel tabulated(std::vector<double> x,
                                std::vector<Eigen::MatrixXcd> values,
                                SVariable var = SVariable::energy);

  // S(k) = e^{ikL}, exactly unitary, natural variable k.
  static SMatrixModel pure_delay(double L);

  // Scalar callable in the given variable (used by the billiard bridge).
  static SMatrixModel scalar_function(std::function<cplx(double)> fn,
                                      SVariable var, std::string label,
                                      bool exactly_unitary);

  int n_channels() const { return n_; }
  SMatrixKind kind() const { return kind_; }
  SVariable variable() const { return var_; }
  bool exactly_unitary() const { return exactly_unitary_; }
  const std::string& label() const { return label_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Evaluation in the model's own variable.
  Eigen::MatrixXcd at(double x) const;
  cplx element(double x, int i, int f) const;

  // Evaluation at wavenumber / energy with conversion through the dispersion
  // relation when the natural variable differs.  eps is the channel threshold
  // entering E(k) = hbar^2 k^2 / (2m) + eps; E < eps is a closed channel.
  Eigen::MatrixXcd at_k(double k, const Units& u, Dispersion d,
                        double eps = 0.0) const;
  Eigen::MatrixXcd at_energy(double E, const Units& u, Dispersion d,
                             double eps = 0.0) const;

private:
  SMatrixModel() = default;

  int n_ = 1;
  SMatrixKind kind_ = SMatrixKind::identity;
  SVariable var_ = SVariable::energy;
  bool exactly_unitary_ = true;
  std::string label_;
  std::vector<std::string> warnings_;

  std::vector<Resonance> resonances_;
  Eigen::MatrixXcd prompt_;
  Eigen::MatrixXd background_;
  std::vector<double> xs_;
  std::vector<Eigen::MatrixXcd> values_;
  double delay_length_ = 0.0;
  std::function<cplx(double)> fn_;

  Eigen::MatrixXcd eval_kmatrix(double E) const;
};

// max over the grid of ||S^dag S - I||_max (largest absolute entry).
double unitarity_defect(const SMatrixModel& model,
                        const std::vector<double>& grid);

// Gram-Schmidt over the seed vectors, rescaled to norms sqrt(Gamma_mu); makes
// the feshbach orthogonality constraint constructively satisfiable.  Requires
// count <= channel dimension and independent seeds.
std::vector<Eigen::VectorXd> orthogonalize_widths(
    const std::vector<Eigen::VectorXd>& seeds, const std::vector<double>& gammas);

}  // namespace delaykit
