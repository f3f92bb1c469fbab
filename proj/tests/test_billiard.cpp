#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <optional>
#include <vector>

#include "delaykit/billiard.hpp"
#include "delaykit/distribution.hpp"
#include "delaykit/envelope.hpp"
#include "delaykit/errors.hpp"

using namespace delaykit;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent restatement of the reflection conditions for a two-bounce
// chain: specular law at each bounce written as a tangential projection.
struct TwoBounceOracle {
  DiscConfiguration cfg;
  Code code;
  Vec2 wi, wf;

  Vec2 point(int m, double th) const {
    return cfg.centers[code[m]] + from_angle(th);
  }
  // F1 = (wi - u12).T1, F2 = (u12 - wf).T2 with u12 the chord direction
  std::pair<double, double> residual(double t1, double t2) const {
    const Vec2 r1 = point(0, t1), r2 = point(1, t2);
    const Vec2 u12 = unit(r2 - r1);
    const Vec2 tan1{-std::sin(t1), std::cos(t1)};
    const Vec2 tan2{-std::sin(t2), std::cos(t2)};
    return {dot(wi - u12, tan1), dot(u12 - wf, tan2)};
  }
  bool feasible(double t1, double t2) const {
    const Vec2 r1 = point(0, t1), r2 = point(1, t2);
    const Vec2 n1 = from_angle(t1), n2 = from_angle(t2);
    const Vec2 u12 = unit(r2 - r1);
    if (!(dot(wi, n1) < -1e-6)) return false;   // must hit the facing side
    if (!(dot(u12, n2) < -1e-6)) return false;
    const Vec2 refl1 = wi - 2.0 * dot(wi, n1) * n1;
    if (norm(refl1 - u12) > 1e-6) return false;  // reflection law at bounce 1
    const Vec2 refl2 = u12 - 2.0 * dot(u12, n2) * n2;
    if (norm(refl2 - wf) > 1e-6) return false;
    // chord must not cross either disc interior
    for (const Vec2& c : cfg.centers) {
      const Vec2 rel = r1 - c;
      const double b = dot(rel, u12);
      const double t_len = norm(r2 - r1);
      const double closest = std::clamp(-b, 0.0, t_len);
      const Vec2 p = r1 + closest * u12;
      if (closest > 1e-9 && closest < t_len - 1e-9 &&
          dot(p - c, p - c) < 1.0 - 1e-9)
        return false;
    }
    return true;
  }
  // 2D Newton from (t1, t2) on the residual pair; returns false on divergence
  bool refine(double& t1, double& t2) const {
    for (int it = 0; it < 80; ++it) {
      auto [f1, f2] = residual(t1, t2);
      if (std::abs(f1) < 1e-13 && std::abs(f2) < 1e-13) return true;
      const double h = 1e-7;
      auto [a1, a2] = residual(t1 + h, t2);
      auto [b1, b2] = residual(t1, t2 + h);
      const double j11 = (a1 - f1) / h, j12 = (b1 - f1) / h;
      const double j21 = (a2 - f2) / h, j22 = (b2 - f2) / h;
      const double det = j11 * j22 - j12 * j21;
      if (std::abs(det) < 1e-14) return false;
      t1 -= (j22 * f1 - j12 * f2) / det;
      t2 -= (-j21 * f1 + j11 * f2) / det;
    }
    auto [f1, f2] = residual(t1, t2);
    return std::abs(f1) < 1e-10 && std::abs(f2) < 1e-10;
  }
  // grid scan + Newton polish; returns every distinct feasible root
  std::vector<std::pair<double, double>> all_feasible_roots() const {
    std::vector<std::pair<double, double>> roots;
    const int n = 160;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double t1 = 2.0 * kPi * double(i) / n;
        double t2 = 2.0 * kPi * double(j) / n;
        auto [f1, f2] = residual(t1, t2);
        if (f1 * f1 + f2 * f2 > 0.05) continue;
        if (!refine(t1, t2)) continue;
        if (!feasible(t1, t2)) continue;
        bool dup = false;
        for (auto& [u1, u2] : roots) {
          const double d1 = std::remainder(t1 - u1, 2.0 * kPi);
          const double d2 = std::remainder(t2 - u2, 2.0 * kPi);
          if (std::abs(d1) < 1e-6 && std::abs(d2) < 1e-6) dup = true;
        }
        if (!dup) roots.emplace_back(t1, t2);
      }
    return roots;
  }
};

// total path relative to far wavefronts: stationary at a true trajectory
double action(const DiscConfiguration& cfg, const Code& code,
              const std::vector<double>& theta, Vec2 wi, Vec2 wf) {
  std::vector<Vec2> R;
  for (std::size_t m = 0; m < code.size(); ++m)
    R.push_back(cfg.centers[code[m]] + from_angle(theta[m]));
  double a = dot(wi, R.front()) - dot(wf, R.back());
  for (std::size_t m = 1; m < R.size(); ++m) a += norm(R[m] - R[m - 1]);
  return a;
}

}  // namespace

TEST_SUITE("billiard") {

TEST_CASE("validate_configuration: enclosing circle and overlap rejection") {
  DiscConfiguration one = validate_configuration({{2.0, -1.0}});
  CHECK(one.c_radius == doctest::Approx(1.0));
  CHECK(one.c_center.x == doctest::Approx(2.0));
  CHECK(one.c_center.y == doctest::Approx(-1.0));

  DiscConfiguration two = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});
  CHECK(two.c_radius == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(two.c_center.x == doctest::Approx(3.0));
  CHECK(std::abs(two.c_center.y) < 1e-12);

  // equilateral side 6: circumradius 6/sqrt(3), grown by the disc radius
  DiscConfiguration tri = validate_configuration(
      {{0.0, 0.0}, {6.0, 0.0}, {3.0, 5.196152422706632}});
  CHECK(tri.c_radius ==
        doctest::Approx(6.0 / std::sqrt(3.0) + 1.0).epsilon(1e-9));
  CHECK(tri.c_center.x == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(tri.c_center.y == doctest::Approx(std::sqrt(3.0)).epsilon(1e-9));

  CHECK_THROWS_AS(validate_configuration({}), InvalidGeometryError);
  CHECK_THROWS_AS(validate_configuration({{0.0, 0.0}, {2.0, 0.0}}),
                  InvalidGeometryError);
  try {
    validate_configuration({{0.0, 0.0}, {1.5, 0.0}});
    FAIL("overlap not detected");
  } catch (const InvalidGeometryError& e) {
    const std::string what = e.what();
    CHECK(what.find("1 and 2") != std::string::npos);
    CHECK(what.find("overlap") != std::string::npos);
  }
}

TEST_CASE("enumerate_codes: counts and prefix order") {
  CHECK(enumerate_codes(3, 2).size() == 9);
  CHECK(enumerate_codes(3, 5).size() == 93);
  CHECK(enumerate_codes(1, 4).size() == 1);
  CHECK(enumerate_codes(2, 6).size() == 12);

  const std::vector<Code> codes = enumerate_codes(3, 3);
  const std::vector<Code> head = {{0},       {0, 1}, {0, 1, 0}, {0, 1, 2},
                                  {0, 2},    {0, 2, 0}, {0, 2, 1}, {1},
                                  {1, 0}};
  REQUIRE(codes.size() >= head.size());
  for (std::size_t i = 0; i < head.size(); ++i) CHECK(codes[i] == head[i]);

  CHECK_THROWS_AS(enumerate_codes(0, 3), InvalidParameterError);
  CHECK_THROWS_AS(enumerate_codes(3, 0), InvalidParameterError);
}

TEST_CASE("single disc: backscatter and deflected single bounce") {
  DiscConfiguration cfg = validate_configuration({{0.0, 0.0}});

  auto back = find_trajectory(cfg, {0}, {1.0, 0.0}, {-1.0, 0.0});
  REQUIRE(back.has_value());
  CHECK(back->residual < 1e-12);
  CHECK(back->length == 0.0);
  CHECK(back->amplitude == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(std::remainder(back->theta[0] - kPi, 2.0 * kPi)) < 1e-9);

  auto turn = find_trajectory(cfg, {0}, {1.0, 0.0}, {0.0, 1.0});
  REQUIRE(turn.has_value());
  CHECK(turn->residual < 1e-12);
  // normal bisects: |r x wf| = sin(pi/4), A = -2^(-3/4)
  CHECK(turn->amplitude ==
        doctest::Approx(-std::pow(2.0, -0.75)).epsilon(1e-12));

  // specular forward scattering off one disc is impossible
  CHECK(!find_trajectory(cfg, {0}, {1.0, 0.0}, {1.0, 0.0}).has_value());

  CHECK_THROWS_AS(find_trajectory(cfg, {0, 0}, {1.0, 0.0}, {-1.0, 0.0}),
                  InvalidParameterError);
  CHECK_THROWS_AS(find_trajectory(cfg, {1}, {1.0, 0.0}, {-1.0, 0.0}),
                  InvalidParameterError);
}

TEST_CASE("two discs: V-shaped chain matches an independent solver") {
  DiscConfiguration cfg = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});
  const Vec2 wi{0.0, -1.0}, wf{0.0, 1.0};

  auto t = find_trajectory(cfg, {0, 1}, wi, wf);
  REQUIRE(t.has_value());
  CHECK(t->residual < 1e-12);
  CHECK(!t->grazing);

  TwoBounceOracle oracle{cfg, {0, 1}, wi, wf};
  auto roots = oracle.all_feasible_roots();
  REQUIRE(roots.size() == 1);
  auto [o1, o2] = roots[0];
  CHECK(std::abs(std::remainder(t->theta[0] - o1, 2.0 * kPi)) < 1e-6);
  CHECK(std::abs(std::remainder(t->theta[1] - o2, 2.0 * kPi)) < 1e-6);
  const double oracle_len =
      norm(oracle.point(1, o2) - oracle.point(0, o1));
  CHECK(t->length == doctest::Approx(oracle_len).epsilon(1e-6));
  // symmetric V: both reflections at 45 degrees, so L = 6 - sqrt(2) and the
  // two curvature factors of 1/2 give A = + 1 / (2 sqrt(2))
  CHECK(t->length == doctest::Approx(6.0 - std::sqrt(2.0)).epsilon(1e-9));
  CHECK(t->amplitude == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-9));

  // one distinct solution across every perturbed Newton start
  auto all = find_trajectory_all_starts(cfg, {0, 1}, wi, wf);
  CHECK(all.size() == 1);

  // the total path is stationary in every reflection angle
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<double> up = t->theta, dn = t->theta;
    up[m] += 1e-5;
    dn[m] -= 1e-5;
    const double da = (action(cfg, t->code, up, wi, wf) -
                       action(cfg, t->code, dn, wi, wf)) /
                      2e-5;
    CHECK(std::abs(da) < 1e-6);
  }
}

TEST_CASE("two discs: geometry with no feasible chain returns nothing") {
  DiscConfiguration cfg = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});
  const Vec2 wi{1.0, 0.0}, wf{0.0, 1.0};
  CHECK(!find_trajectory(cfg, {0, 1}, wi, wf).has_value());
  TwoBounceOracle oracle{cfg, {0, 1}, wi, wf};
  CHECK(oracle.all_feasible_roots().empty());
}

TEST_CASE("hand-built axial chains: lengths 4(M-1) and binary amplitudes") {
  DiscConfiguration cfg = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});

  Trajectory v2;
  v2.code = {0, 1};
  v2.theta = {0.0, kPi};
  v2.omega_f = {-1.0, 0.0};
  CHECK(trajectory_length(cfg, v2) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(amplitude(cfg, v2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(!v2.grazing);

  Trajectory v3;
  v3.code = {0, 1, 0};
  v3.theta = {0.0, kPi, 0.0};
  v3.omega_f = {1.0, 0.0};
  CHECK(trajectory_length(cfg, v3) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(amplitude(cfg, v3) ==
        doctest::Approx(-1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));

  Trajectory v4;
  v4.code = {0, 1, 0, 1};
  v4.theta = {0.0, kPi, 0.0, kPi};
  v4.omega_f = {-1.0, 0.0};
  CHECK(trajectory_length(cfg, v4) == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(amplitude(cfg, v4) == doctest::Approx(0.25).epsilon(1e-12));
  // |A|^2 halves per extra reflection off the flat-equivalent pair
  CHECK(v2.amplitude * v2.amplitude == doctest::Approx(0.25));
  CHECK(v3.amplitude * v3.amplitude == doctest::Approx(0.125));
  CHECK(v4.amplitude * v4.amplitude == doctest::Approx(0.0625));
}

TEST_CASE("amplitude: grazing reflection yields zero and sets the flag") {
  DiscConfiguration cfg = validate_configuration({{0.0, 0.0}});
  Trajectory g;
  g.code = {0};
  g.theta = {0.0};
  g.omega_f = {0.0, 1.0};  // outgoing tangent to the disc at (1, 0)
  CHECK(amplitude(cfg, g) == 0.0);
  CHECK(g.grazing);
}

TEST_CASE("semiclassical_s: single-disc limits and truncation bound") {
  DiscConfiguration one = validate_configuration({{0.0, 0.0}});
  SemiclassicalSum fwd = semiclassical_s(one, {1.0, 0.0}, {1.0, 0.0}, 2.7, 3);
  CHECK(fwd.feasible_count == 0);
  CHECK(std::abs(fwd.value) == 0.0);

  SemiclassicalSum back = semiclassical_s(one, {1.0, 0.0}, {-1.0, 0.0}, 2.7, 1);
  CHECK(back.feasible_count == 1);
  CHECK(std::abs(back.value - cplx(-1.0 / std::sqrt(2.0), 0.0)) < 1e-12);
  CHECK(back.truncation_estimate ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(semiclassical_s(one, {1.0, 0.0}, {-1.0, 0.0}, -1.0, 3),
                  InvalidParameterError);
  CHECK_THROWS_AS(semiclassical_s(one, {1.0, 0.0}, {-1.0, 0.0}, 2.7, 0),
                  InvalidParameterError);
}

TEST_CASE("semiclassical_s: deepening the order moves the sum within bound") {
  DiscConfiguration tri = validate_configuration(
      {{0.0, 0.0}, {6.0, 0.0}, {3.0, 5.196152422706632}});
  const Vec2 wi = from_angle(0.35), wf = from_angle(2.1);
  SemiclassicalSum s8 = semiclassical_s(tri, wi, wf, 10.0, 8);
  SemiclassicalSum s10 = semiclassical_s(tri, wi, wf, 10.0, 10);
  CHECK(std::abs(s8.value - s10.value) < s8.truncation_estimate);
  CHECK(s10.feasible_count > s8.feasible_count);
}

TEST_CASE("feasible chain count grows geometrically for three open discs") {
  DiscConfiguration tri = validate_configuration(
      {{0.0, 0.0}, {6.0, 0.0}, {3.0, 5.196152422706632}});
  const Vec2 wi = from_angle(0.35), wf = from_angle(2.1);
  std::vector<int> cum;
  for (int mmax = 1; mmax <= 6; ++mmax)
    cum.push_back(semiclassical_s(tri, wi, wf, 10.0, mmax).feasible_count);
  CHECK(cum == std::vector<int>{2, 5, 11, 23, 47, 95});
  for (std::size_t i = 2; i < cum.size(); ++i) {
    const double shell_prev = cum[i - 1] - cum[i - 2];
    const double shell = cum[i] - cum[i - 1];
    CHECK(shell / shell_prev >= 1.2);
    CHECK(shell / shell_prev <= 2.0);
  }
}

TEST_CASE("classical_delay_histogram: no chains for one disc, V mass for two") {
  DiscConfiguration one = validate_configuration({{0.0, 0.0}});
  Histogram empty = classical_delay_histogram(one, {1.0, 0.0}, {-1.0, 0.0}, 4, 1.0);
  double total = 0.0;
  for (double m : empty.mass) total += m;
  CHECK(total == 0.0);

  DiscConfiguration two = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});
  Histogram h =
      classical_delay_histogram(two, {0.0, -1.0}, {0.0, 1.0}, 4, 1.0);
  REQUIRE(h.mass.size() >= 5);
  // mirror pairs {0,1..}/{1,0..} double each |A|^2: the V chains (L = 4.586)
  // land in bin 4, the 3- and 4-bounce chains in bins 8 and 12
  std::size_t nonzero = 0;
  for (double m : h.mass) nonzero += m > 0.0 ? 1 : 0;
  CHECK(nonzero == 3);
  CHECK(h.mass[4] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(h.mass[8] == doctest::Approx(0.109375).epsilon(1e-9));
  CHECK(h.mass[12] == doctest::Approx(0.0536748965124).epsilon(1e-9));
  CHECK(h.center(4) == doctest::Approx(4.5));

  CHECK_THROWS_AS(classical_delay_histogram(two, {0.0, -1.0}, {0.0, 1.0}, 4, 0.0),
                  InvalidParameterError);
}

TEST_CASE("classical_delay_histogram_avg: mean of the per-pair histograms") {
  DiscConfiguration two = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});
  const std::vector<Vec2> dins = {{0.0, -1.0}, {0.0, 1.0}};
  const std::vector<Vec2> douts = {{0.0, 1.0}};
  Histogram avg = classical_delay_histogram_avg(two, dins, douts, 3, 1.0);
  Histogram a = classical_delay_histogram(two, dins[0], douts[0], 3, 1.0);
  Histogram b = classical_delay_histogram(two, dins[1], douts[0], 3, 1.0);
  const std::size_t n = std::max(a.mass.size(), b.mass.size());
  REQUIRE(avg.mass.size() == n);
  for (std::size_t j = 0; j < n; ++j) {
    const double ma = j < a.mass.size() ? a.mass[j] : 0.0;
    const double mb = j < b.mass.size() ? b.mass[j] : 0.0;
    CHECK(avg.mass[j] == doctest::Approx(0.5 * (ma + mb)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(classical_delay_histogram_avg(two, {}, douts, 3, 1.0),
                  InvalidParameterError);
}

TEST_CASE("monte_carlo_escape: single-disc chords never exceed the diameter") {
  DiscConfiguration one = validate_configuration({{0.0, 0.0}});
  SurvivalCurve c = monte_carlo_escape(one, 4000, 3.0, 11, {0.1, 1.5}, 300);
  CHECK(c.seed == 11);
  for (std::size_t j = 0; j < c.s.size(); ++j) {
    if (c.s[j] > 2.01) CHECK(c.survival[j] == 0.0);
    if (c.s[j] < 0.05) CHECK(c.survival[j] > 0.9);
  }
  // P(chord > 1) = 2/3 for a uniform inward angle
  std::size_t j1 = 100;  // s = 1.0 on [0, 3] with 300 points
  CHECK(c.survival[j1] == doctest::Approx(2.0 / 3.0).epsilon(0.05));
}

TEST_CASE("monte_carlo_escape: determinism and starvation") {
  DiscConfiguration two = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});
  SurvivalCurve a = monte_carlo_escape(two, 3000, 20.0, 5, {1.0, 8.0}, 200);
  SurvivalCurve b = monte_carlo_escape(two, 3000, 20.0, 5, {1.0, 8.0}, 200);
  CHECK(a.survival == b.survival);
  SurvivalCurve c = monte_carlo_escape(two, 3000, 20.0, 6, {1.0, 8.0}, 200);
  CHECK(a.survival != c.survival);

  CHECK_THROWS_AS(monte_carlo_escape(two, 2000, 40.0, 3, {30.0, 35.0}, 200),
                  InsufficientStatisticsError);
  CHECK_THROWS_AS(monte_carlo_escape(two, 0, 40.0, 3, {30.0, 35.0}, 200),
                  InvalidParameterError);
  CHECK_THROWS_AS(monte_carlo_escape(two, 2000, -1.0, 3, {0.1, 0.5}, 200),
                  InvalidParameterError);
  CHECK_THROWS_AS(monte_carlo_escape(two, 2000, 40.0, 3, {1.0, 8.0}, 1),
                  InvalidParameterError);
}

TEST_CASE("monte_carlo_escape: three-disc decay is exponential in the window") {
  DiscConfiguration tri = validate_configuration(
      {{0.0, 0.0}, {6.0, 0.0}, {3.0, 5.196152422706632}});
  SurvivalCurve c = monte_carlo_escape(tri, 30000, 30.0, 7, {5.0, 25.0}, 600);
  CHECK(c.fit.gamma == doctest::Approx(0.406850708534).epsilon(1e-9));
  CHECK(c.fit.corr == doctest::Approx(-0.996876072178).epsilon(1e-9));
  CHECK(c.fit.corr < -0.99);
  CHECK(!c.non_exponential);
  CHECK(c.fit.gamma > 0.3);
  CHECK(c.fit.gamma < 0.5);
  CHECK(c.fit.stderr_slope < 0.05);
}

TEST_CASE("fit_escape_rate: synthetic curves and window validation") {
  SurvivalCurve syn;
  for (int j = 0; j <= 200; ++j) {
    const double s = 0.1 * double(j);
    syn.s.push_back(s);
    syn.survival.push_back(std::exp(-0.3 * s));
  }
  EscapeFit exact = fit_escape_rate(syn, {2.0, 18.0});
  CHECK(exact.gamma == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(exact.corr == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(exact.stderr_slope < 1e-9);
  CHECK(!exact.degenerate);

  SurvivalCurve noisy = syn;
  for (std::size_t j = 0; j < noisy.survival.size(); ++j)
    noisy.survival[j] *= std::exp(0.02 * std::sin(3.7 * double(j)));
  EscapeFit rough = fit_escape_rate(noisy, {2.0, 18.0});
  CHECK(rough.gamma == doctest::Approx(0.3).epsilon(0.01 / 0.3));
  CHECK(std::abs(rough.corr) > 0.99);

  SurvivalCurve flat;
  for (int j = 0; j <= 100; ++j) {
    flat.s.push_back(0.1 * double(j));
    flat.survival.push_back(0.5);
  }
  EscapeFit deg = fit_escape_rate(flat, {1.0, 9.0});
  CHECK(deg.degenerate);
  CHECK(deg.gamma == 0.0);

  CHECK_THROWS_AS(fit_escape_rate(syn, {18.0, 25.0}), FitWindowError);
  CHECK_THROWS_AS(fit_escape_rate(syn, {5.0, 2.0}), FitWindowError);
  CHECK_THROWS_AS(fit_escape_rate(syn, {2.0, 2.05}), FitWindowError);
  SurvivalCurve hole = syn;
  hole.survival[100] = 0.0;  // s = 10 inside the window
  CHECK_THROWS_AS(fit_escape_rate(hole, {2.0, 18.0}), FitWindowError);
}

TEST_CASE("semiclassical model drives a delay distribution peaked at the chain length") {
  DiscConfiguration two = validate_configuration({{0.0, 0.0}, {6.0, 0.0}});
  const Vec2 wi{0.0, -1.0}, wf{0.0, 1.0};
  auto v = find_trajectory(two, {0, 1}, wi, wf);
  REQUIRE(v.has_value());

  SMatrixModel model = make_semiclassical_model(two, wi, wf, 6);
  Envelope env = Envelope::gaussian(20.0, 1.0);
  DelayDistribution d =
      delay_distribution_em(model, env, 0, 0, DelayGrid{-2.0, 12.0, 1401});

  // Direct single-bounce reflections (interior length 0) dominate and pin the
  // global peak to s = 0; the V chain appears as the peak of the s in [2, 7]
  // window, clear of both the direct term and the next chain at L ~ 8.58.
  std::size_t jmax = 0, jwin = 0;
  double win_best = -1.0;
  for (std::size_t j = 0; j < d.density.size(); ++j) {
    if (d.density[j] > d.density[jmax]) jmax = j;
    const double s = d.grid.at(j);
    if (s >= 2.0 && s <= 7.0 && d.density[j] > win_best) {
      win_best = d.density[j];
      jwin = j;
    }
  }
  CHECK(std::abs(d.grid.at(jmax)) < 0.2);
  CHECK(d.grid.at(jwin) == doctest::Approx(v->length).epsilon(0.2 / v->length));
}

}  // TEST_SUITE
