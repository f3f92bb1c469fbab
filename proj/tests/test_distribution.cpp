#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "delaykit/distribution.hpp"
#include "delaykit/errors.hpp"
#include "delaykit/numerics.hpp"
#include "delaykit/smatrix.hpp"

using namespace delaykit;

namespace {

double analytic_free_pulse(double sigma, double s) {
  return sigma / std::sqrt(2.0 * M_PI) * std::exp(-0.5 * sigma * sigma * s * s);
}

LinearFit log_density_fit(const DelayDistribution& d, double a, double b) {
  std::vector<double> x, y;
  for (std::size_t m = 0; m < d.grid.n; ++m) {
    const double t = d.grid.at(m);
    if (t < a || t > b || d.density[m] <= 0.0) continue;
    x.push_back(t);
    y.push_back(std::log(d.density[m]));
  }
  return fit_line(x, y);
}

}  // namespace

TEST_SUITE("distribution") {

TEST_CASE("EM identity: free Gaussian pulse, analytic profile") {
  SMatrixModel id = SMatrixModel::identity(1);
  Envelope env = Envelope::gaussian(10.0, 1.0);
  DelayGrid grid{-8.0, 8.0, 2001};
  DelayDistribution d = delay_distribution_em(id, env, 0, 0, grid);

  double max_dev = 0.0;
  for (std::size_t m = 0; m < grid.n; ++m) {
    CHECK(d.density[m] >= 0.0);
    max_dev = std::max(max_dev,
                       std::abs(d.density[m] - analytic_free_pulse(1.0, grid.at(m))));
  }
  CHECK(max_dev < 1e-3);
  CHECK(d.peak() == doctest::Approx(0.3989).epsilon(1e-3 / 0.3989));
  // peak sits at s = 0 within one grid step
  std::size_t imax = 0;
  for (std::size_t m = 1; m < grid.n; ++m)
    if (d.density[m] > d.density[imax]) imax = m;
  CHECK(std::abs(grid.at(imax)) <= grid.step() * (1 + 1e-12));
  CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("EM pure delay: pulse translated by L") {
  SMatrixModel delay = SMatrixModel::pure_delay(3.0);
  Envelope env = Envelope::gaussian(10.0, 1.0);
  DelayGrid grid{-5.0, 11.0, 2001};
  DelayDistribution d = delay_distribution_em(delay, env, 0, 0, grid);
  double max_dev = 0.0;
  for (std::size_t m = 0; m < grid.n; ++m)
    max_dev = std::max(max_dev, std::abs(d.density[m] -
                                         analytic_free_pulse(1.0, grid.at(m) - 3.0)));
  CHECK(max_dev < 1e-3);

  // shift covariance: P_delay(s + L) = P_free(s) point by point
  SMatrixModel id = SMatrixModel::identity(1);
  DelayGrid base{-8.0, 8.0, 2001};
  DelayGrid moved{-5.0, 11.0, 2001};
  DelayDistribution p0 = delay_distribution_em(id, env, 0, 0, base);
  DelayDistribution p3 = delay_distribution_em(delay, env, 0, 0, moved);
  for (std::size_t m = 0; m < base.n; ++m)
    CHECK(p3.density[m] == doctest::Approx(p0.density[m]).epsilon(1e-9).scale(p0.peak()));
}

TEST_CASE("EM identity off-diagonal element: density identically zero") {
  SMatrixModel id = SMatrixModel::identity(2);
  Envelope env = Envelope::gaussian(10.0, 1.0);
  DelayGrid grid{-4.0, 4.0, 401};
  DelayDistribution d = delay_distribution_em(id, env, 0, 1, grid);
  for (double v : d.density) CHECK(v == 0.0);
}

TEST_CASE("grid validation: resolution bound and channel range") {
  SMatrixModel id = SMatrixModel::identity(1);
  Envelope env = Envelope::gaussian(10.0, 1.0);
  CHECK_THROWS_AS(delay_distribution_em(id, env, 0, 0, DelayGrid{-5.0, 5.0, 3}),
                  ResolutionError);
  CHECK_THROWS_AS(delay_distribution_qm(id, env, 0, 0, DelayGrid{-5.0, 5.0, 11}),
                  ResolutionError);
  CHECK_THROWS_AS(delay_distribution_em(id, env, 0, 1, DelayGrid{-4.0, 4.0, 401}),
                  InvalidParameterError);
  CHECK_THROWS_AS(delay_distribution_em(id, env, -1, 0, DelayGrid{-4.0, 4.0, 401}),
                  InvalidParameterError);
}

TEST_CASE("QM identity: peak at zero delay, unit mass") {
  SMatrixModel id = SMatrixModel::identity(1);
  Envelope env = Envelope::gaussian(10.0, 1.0);
  auto dists = delay_distributions_auto(id, env, 0, Dispersion::qm_quadratic);
  REQUIRE(dists.size() == 1);
  const DelayDistribution& d = dists[0];
  std::size_t imax = 0;
  for (std::size_t m = 1; m < d.grid.n; ++m)
    if (d.density[m] > d.density[imax]) imax = m;
  CHECK(std::abs(d.grid.at(imax)) <= d.grid.step() * (1 + 1e-12));
  CHECK(total_mass(dists) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("QM sqrt(k) weight: required for unit mass, O(sigma/k0) without") {
  SMatrixModel id = SMatrixModel::identity(1);
  Envelope env = Envelope::gaussian(4.0, 1.6);  // wide band: sigma/k0 = 0.4
  DelayGrid grid{-2.0, 2.0, 1601};
  DistributionOptions opt;
  DelayDistribution with = delay_distribution_qm(id, env, 0, 0, grid, opt);
  CHECK(with.mass() == doctest::Approx(1.0).epsilon(1e-4));

  opt.use_sqrt_k = false;
  DelayDistribution without = delay_distribution_qm(id, env, 0, 0, grid, opt);
  const double err = std::abs(without.mass() - 1.0);
  CHECK(err > 1e-4);
  CHECK(err <= 1.6 / 4.0);
}

TEST_CASE("QM isolated resonance: exponential decay at rate Gamma/hbar") {
  SMatrixModel pole = SMatrixModel::blaschke({{100.0, 1.0}});  // E0 = k0^2
  Envelope env = Envelope::gaussian(10.0, 0.05);
  DelayGrid grid{-6.0, 10.0, 2501};
  DelayDistribution d = delay_distribution_qm(pole, env, 0, 0, grid);
  // tau >> 1/Gamma: fit the log density on [5, 9] lifetimes
  LinearFit fit = log_density_fit(d, 5.0, 9.0);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(fit.corr < -0.999);
}

TEST_CASE("auto grid: extends until the tail estimate is below threshold") {
  SMatrixModel pole = SMatrixModel::blaschke({{10.0, 1.0}});
  Envelope env = Envelope::gaussian(10.0, 1.0);
  auto dists = delay_distributions_auto(pole, env, 0, Dispersion::em_linear);
  REQUIRE(dists.size() == 1);
  // the resonance tail forces growth beyond the initial [ws-6w, ws+8w] window
  CHECK(dists[0].grid.hi > 12.0);
  // each side is held below 1e-8 of the mass, so the sum is below 2e-8
  CHECK(dists[0].tail_estimate <= 2e-8 * dists[0].mass() * (1 + 1e-9));
  CHECK(total_mass(dists) == doctest::Approx(1.0).epsilon(1e-4));

  DistributionOptions starved;
  starved.max_extensions = 0;
  CHECK_THROWS_AS(
      delay_distributions_auto(pole, env, 0, Dispersion::em_linear, starved),
      MassCoverageError);
}

TEST_CASE("autocorrelation_em: closed forms and domain gate") {
  SMatrixModel id = SMatrixModel::identity(1);
  for (double eta : {0.0, 1.7}) {
    const cplx c = autocorrelation_em(id, 0, 0, 10.0, 1.0, eta);
    CHECK(std::abs(c - cplx(1.0, 0.0)) < 1e-10);
  }
  SMatrixModel delay = SMatrixModel::pure_delay(3.0);
  for (double eta : {0.3, 1.1}) {
    const cplx c = autocorrelation_em(delay, 0, 0, 10.0, 1.0, eta);
    CHECK(std::abs(c - std::polar(1.0, eta * 3.0)) < 1e-10);
  }
  // k0 > 2 sigma is strict
  CHECK_THROWS_AS(autocorrelation_em(id, 0, 0, 4.0, 2.0, 0.1),
                  ApproximationDomainError);
}

TEST_CASE("EM route equivalence: direct vs autocorrelation") {
  SMatrixModel pole = SMatrixModel::blaschke({{10.0, 1.0}});
  Envelope env = Envelope::gaussian(10.0, 1.0);
  DelayGrid grid{-8.0, 16.0, 961};
  DelayDistribution direct = delay_distribution_em(pole, env, 0, 0, grid);
  DelayDistribution ac = delay_distribution_em_autocorr(pole, env, 0, 0, grid);
  double max_dev = 0.0;
  for (std::size_t m = 0; m < grid.n; ++m)
    max_dev = std::max(max_dev, std::abs(direct.density[m] - ac.density[m]));
  CHECK(max_dev < 1e-3 * direct.peak());

  Envelope wide = Envelope::gaussian(4.0, 2.0);
  CHECK_THROWS_AS(delay_distribution_em_autocorr(pole, wide, 0, 0,
                                                 DelayGrid{-2.0, 2.0, 801}),
                  ApproximationDomainError);
}

TEST_CASE("autocorrelation_energy: identity, reality at eps = 0, clipping") {
  SMatrixModel id = SMatrixModel::identity(1);
  for (double eps : {0.0, 0.3}) {
    const cplx c = autocorrelation_energy(id, 0, 0, 100.0, 0.1, eps);
    CHECK(std::abs(c - cplx(1.0, 0.0)) < 1e-6);
  }
  // eps = 0 is a weighted mean of |S|^2: real, and 1 for a unitary channel
  SMatrixModel pole = SMatrixModel::blaschke({{100.0, 1.0}});
  const cplx c0 = autocorrelation_energy(pole, 0, 0, 100.0, 0.1, 0.0);
  CHECK(std::abs(std::imag(c0)) < 1e-12);
  CHECK(std::real(c0) == doctest::Approx(1.0).epsilon(1e-6));

  bool clipped = false;
  autocorrelation_energy(id, 0, 0, 1.0, 0.3, 0.0, {}, &clipped);
  CHECK(clipped);  // weight support reaches below E = 0
  clipped = false;
  autocorrelation_energy(id, 0, 0, 100.0, 0.1, 0.5, {}, &clipped);
  CHECK_FALSE(clipped);
  // clip swallowing the whole weight support
  CHECK_THROWS_AS(autocorrelation_energy(id, 0, 0, 1.0, 0.1, 60.0, {}, nullptr),
                  ApproximationDomainError);
}

TEST_CASE("QM route equivalence: energy autocorrelation vs direct") {
  SMatrixModel pole = SMatrixModel::blaschke({{100.0, 1.0}});
  Envelope env = Envelope::gaussian(10.0, 0.1);  // sigma/k0 = 0.01
  DelayGrid grid{-4.0, 8.0, 1983};
  DelayDistribution direct = delay_distribution_qm(pole, env, 0, 0, grid);
  DelayDistribution ac = delay_distribution_qm_autocorr(pole, env, 0, 0, grid);
  double max_dev = 0.0;
  for (std::size_t m = 0; m < grid.n; ++m)
    max_dev = std::max(max_dev, std::abs(direct.density[m] - ac.density[m]));
  CHECK(max_dev < 1e-3 * direct.peak());
}

TEST_CASE("total_mass: unitary models give 1, coverage enforced") {
  Envelope env = Envelope::gaussian(5.0, 0.5);

  SMatrixModel id = SMatrixModel::identity(1);
  auto free_d = delay_distributions_auto(id, env, 0, Dispersion::em_linear);
  CHECK(total_mass(free_d) == doctest::Approx(1.0).epsilon(1e-4));

  Resonance r1, r2;
  r1.E = 4.0;
  r1.g = (Eigen::VectorXd(3) << 0.6, -0.3, 0.2).finished();
  r1.Gamma = r1.g.squaredNorm();
  r2.E = 6.0;
  r2.g = (Eigen::VectorXd(3) << 0.1, 0.5, -0.4).finished();
  r2.Gamma = r2.g.squaredNorm();
  SMatrixModel km = SMatrixModel::kmatrix_cayley({r1, r2}, Eigen::MatrixXd::Zero(3, 3));
  auto dists = delay_distributions_auto(km, env, 0, Dispersion::em_linear);
  CHECK(dists.size() == 3);
  CHECK(total_mass(dists) == doctest::Approx(1.0).epsilon(1e-4));

  CHECK_THROWS_AS(total_mass({}), InvalidParameterError);
  DelayDistribution fat;
  fat.grid = DelayGrid{0.0, 1.0, 11};
  fat.density.assign(11, 1.0);
  fat.tail_estimate = 0.5;
  CHECK_THROWS_AS(total_mass({fat}), MassCoverageError);
}

TEST_CASE("total_mass under a unitarity defect: deviation tracks the defect") {
  auto gs = orthogonalize_widths(
      {Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(1.0, 0.0)}, {0.5, 0.5});
  Resonance r1, r2;
  r1.E = 4.9;
  r1.Gamma = 0.5;
  r1.g = gs[0];
  r2.E = 5.1;
  r2.Gamma = 0.5;
  r2.g = gs[1];
  const double th = 0.3;
  Eigen::MatrixXcd prompt(2, 2);
  prompt << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  SMatrixModel m = SMatrixModel::feshbach({r1, r2}, prompt);

  Envelope env = Envelope::gaussian(5.0, 0.25);
  auto dists = delay_distributions_auto(m, env, 0, Dispersion::em_linear);
  const double mass = total_mass(dists);
  std::vector<double> sweep;
  for (int j = 0; j <= 200; ++j) sweep.push_back(3.0 + 4.0 * j / 200.0);
  const double defect = unitarity_defect(m, sweep);
  CHECK(std::abs(mass - 1.0) < 50.0 * defect);  // loosely bounded by the defect
  CHECK(mass > 0.0);
  CHECK(std::abs(mass - 1.0) == doctest::Approx(0.139033974301).epsilon(1e-9));
}

TEST_CASE("grid-refinement stability: halving the quadrature step") {
  SMatrixModel pole = SMatrixModel::blaschke({{10.0, 1.0}});
  Envelope env = Envelope::gaussian(10.0, 1.0);
  DelayGrid grid{-8.0, 16.0, 961};
  DistributionOptions coarse, fine;
  fine.k_step_scale = 0.5;
  DelayDistribution a = delay_distribution_em(pole, env, 0, 0, grid, coarse);
  DelayDistribution b = delay_distribution_em(pole, env, 0, 0, grid, fine);
  CHECK(b.k_step < a.k_step);
  std::size_t imax = 0;
  for (std::size_t m = 1; m < grid.n; ++m)
    if (a.density[m] > a.density[imax]) imax = m;
  CHECK(std::abs(a.density[imax] - b.density[imax]) < 1e-6 * a.density[imax]);
}

TEST_CASE("dispersion_width") {
  CHECK(dispersion_width(0.5, 0.0, 0.5) == doctest::Approx(4.0));
  // equal-contribution point sigma^2 hbar t / 2m = 1
  CHECK(dispersion_width(1.0, 1.0, 0.5) == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(dispersion_width(1.0, 3.0, 0.5) == doctest::Approx(2.0 * std::sqrt(10.0)));
  CHECK_THROWS_AS(dispersion_width(0.0, 1.0, 0.5), InvalidParameterError);
  CHECK_THROWS_AS(dispersion_width(1.0, 1.0, 0.0), InvalidParameterError);
}

}  // TEST_SUITE
