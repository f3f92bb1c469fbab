#include "delaykit/billiard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "delaykit/errors.hpp"
#include "delaykit/numerics.hpp"

namespace delaykit {

namespace {
constexpr double pi = 3.14159265358979323846264338327950288;
}

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Vec2 unit(Vec2 a) {
  const double n = norm(a);
  return {a.x / n, a.y / n};
}

Vec2 from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

namespace {

struct Circle {
  Vec2 c;
  double r = 0.0;
};

bool contains_all(const Circle& circ, const std::vector<Vec2>& pts) {
  const double r2 = circ.r * circ.r * (1.0 + 1e-12) + 1e-12;
  for (const Vec2& p : pts) {
    const Vec2 d = p - circ.c;
    if (dot(d, d) > r2) return false;
  }
  return true;
}

// Smallest enclosing circle of the centers by exhaustion over the pair and
// triple candidates (n is small for disc billiards).
Circle smallest_enclosing(const std::vector<Vec2>& pts) {
  if (pts.size() == 1) return {pts[0], 0.0};
  Circle best{{0, 0}, std::numeric_limits<double>::infinity()};
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      Circle cand{0.5 * (pts[a] + pts[b]), 0.5 * norm(pts[a] - pts[b])};
      if (cand.r < best.r && contains_all(cand, pts)) best = cand;
    }
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      for (std::size_t c = b + 1; c < pts.size(); ++c) {
        const Vec2 A = pts[a], B = pts[b], C = pts[c];
        const double d =
            2.0 * (A.x * (B.y - C.y) + B.x * (C.y - A.y) + C.x * (A.y - B.y));
        if (std::abs(d) < 1e-14) continue;  // collinear
        const double a2 = dot(A, A), b2 = dot(B, B), c2 = dot(C, C);
        Circle cand;
        cand.c.x = (a2 * (B.y - C.y) + b2 * (C.y - A.y) + c2 * (A.y - B.y)) / d;
        cand.c.y = (a2 * (C.x - B.x) + b2 * (A.x - C.x) + c2 * (B.x - A.x)) / d;
        cand.r = norm(A - cand.c);
        if (cand.r < best.r && contains_all(cand, pts)) best = cand;
      }
  return best;
}

Vec2 reflect(Vec2 v, Vec2 n) { return v - (2.0 * dot(v, n)) * n; }

double angle_diff(double a, double b) { return std::remainder(a - b, 2.0 * pi); }

std::vector<Vec2> reflection_points(const DiscConfiguration& cfg,
                                    const Code& code,
                                    const std::vector<double>& theta) {
  std::vector<Vec2> pts(code.size());
  for (std::size_t m = 0; m < code.size(); ++m)
    pts[m] = cfg.centers[std::size_t(code[m])] + from_angle(theta[m]);
  return pts;
}

// Specular system: endpoint conditions at the first/last bounce, stationarity
// of the polygon length at interior bounces.
Eigen::VectorXd residuals(const DiscConfiguration& cfg, const Code& code,
                          Vec2 wi, Vec2 wf, const Eigen::VectorXd& theta) {
  const std::size_t M = code.size();
  std::vector<double> th(theta.data(), theta.data() + M);
  const std::vector<Vec2> R = reflection_points(cfg, code, th);
  Eigen::VectorXd F(static_cast<Eigen::Index>(M));
  for (std::size_t m = 0; m < M; ++m) {
    const Vec2 r = from_angle(th[m]);
    if (m == 0) {
      const Vec2 u_next = unit(R[1] - R[0]);
      F[0] = dot(wi, r) + dot(r, u_next);
    } else if (m + 1 == M) {
      const Vec2 u_in = unit(R[M - 1] - R[M - 2]);
      F[Eigen::Index(m)] = dot(wf, r) + dot(r, u_in);
    } else {
      const Vec2 t{-r.y, r.x};
      const Vec2 u_in = unit(R[m] - R[m - 1]);
      const Vec2 u_out = unit(R[m + 1] - R[m]);
      F[Eigen::Index(m)] = dot(t, u_in - u_out);
    }
  }
  return F;
}

bool newton_solve(const DiscConfiguration& cfg, const Code& code, Vec2 wi,
                  Vec2 wf, Eigen::VectorXd& theta, double& out_residual) {
  const Eigen::Index M = theta.size();
  const double target = 1e-12;
  auto fnorm = [](const Eigen::VectorXd& v) {
    return v.cwiseAbs().maxCoeff();
  };
  Eigen::VectorXd F = residuals(cfg, code, wi, wf, theta);
  double fn = fnorm(F);
  for (int iter = 0; iter < 100; ++iter) {
    if (fn < target) {
      out_residual = fn;
      return true;
    }
    Eigen::MatrixXd J(M, M);
    const double h = 1e-7;
    for (Eigen::Index j = 0; j < M; ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      J.col(j) = (residuals(cfg, code, wi, wf, tp) -
                  residuals(cfg, code, wi, wf, tm)) /
                 (2.0 * h);
    }
    const Eigen::VectorXd delta = J.fullPivLu().solve(-F);
    if (!delta.allFinite()) return false;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1.0 / 1048576.0) {
      const Eigen::VectorXd cand = theta + lambda * delta;
      const Eigen::VectorXd Fc = residuals(cfg, code, wi, wf, cand);
      const double fc = fnorm(Fc);
      if (fc < fn * (1.0 - 1e-4 * lambda) || fc < target) {
        theta = cand;
        F = Fc;
        fn = fc;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) return false;
  }
  if (fn < target) {
    out_residual = fn;
    return true;
  }
  return false;
}

double seg_dist2(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ab = b - a;
  const double den = dot(ab, ab);
  double t = den > 0.0 ? dot(c - a, ab) / den : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 p = a + t * ab;
  const Vec2 d = p - c;
  return dot(d, d);
}

double ray_dist2(Vec2 origin, Vec2 dir, Vec2 c) {
  const double t = std::max(0.0, dot(c - origin, dir));
  const Vec2 p = origin + t * dir;
  const Vec2 d = p - c;
  return dot(d, d);
}

// Open-interior test against every disc; tangency passes.
bool shadowed(const DiscConfiguration& cfg, const std::vector<Vec2>& R, Vec2 wi,
              Vec2 wf) {
  const double limit = 1.0 - 1e-12;
  for (const Vec2& c : cfg.centers) {
    if (ray_dist2(R.front(), -1.0 * wi, c) < limit) return true;
    if (ray_dist2(R.back(), wf, c) < limit) return true;
    for (std::size_t m = 0; m + 1 < R.size(); ++m)
      if (seg_dist2(R[m], R[m + 1], c) < limit) return true;
  }
  return false;
}

bool feasible(const DiscConfiguration& cfg, const Code& code,
              const std::vector<double>& theta, Vec2 wi, Vec2 wf) {
  const std::size_t M = code.size();
  const std::vector<Vec2> R = reflection_points(cfg, code, theta);
  for (std::size_t m = 0; m < M; ++m) {
    const Vec2 r = from_angle(theta[m]);
    const Vec2 u_in = m == 0 ? wi : unit(R[m] - R[m - 1]);
    if (!(dot(u_in, r) < 0.0)) return false;  // must hit the lit side
    const Vec2 v = reflect(u_in, r);
    const Vec2 u_out = m + 1 == M ? wf : unit(R[m + 1] - R[m]);
    if (norm(v - u_out) >= 1e-7) return false;
  }
  return !shadowed(cfg, R, wi, wf);
}

std::optional<Trajectory> make_trajectory(const DiscConfiguration& cfg,
                                          const Code& code,
                                          const std::vector<double>& theta,
                                          Vec2 wi, Vec2 wf, double residual) {
  if (!feasible(cfg, code, theta, wi, wf)) return std::nullopt;
  Trajectory t;
  t.code = code;
  t.theta = theta;
  for (double& th : t.theta) th = std::atan2(std::sin(th), std::cos(th));
  t.omega_i = wi;
  t.omega_f = wf;
  t.residual = residual;
  t.length = trajectory_length(cfg, t);
  amplitude(cfg, t);
  return t;
}

std::optional<Trajectory> solve_single_bounce(const DiscConfiguration& cfg,
                                              const Code& code, Vec2 wi,
                                              Vec2 wf) {
  // Specularity fixes the normal directly: wi - wf = 2 (wi.r) r with wi.r < 0.
  const Vec2 dvec = wi - wf;
  const double dn = norm(dvec);
  if (dn < 1e-12) return std::nullopt;  // undeflected: no reflection point
  const Vec2 r = (-1.0 / dn) * dvec;
  const double res = std::max(std::abs(dot(wi + wf, r)), norm(reflect(wi, r) - wf));
  return make_trajectory(cfg, code, {std::atan2(r.y, r.x)}, wi, wf, res);
}

Eigen::VectorXd initial_guess(const DiscConfiguration& cfg, const Code& code,
                              Vec2 wi, Vec2 wf) {
  const std::size_t M = code.size();
  Eigen::VectorXd theta(static_cast<Eigen::Index>(M));
  for (std::size_t m = 0; m < M; ++m) {
    const Vec2 c = cfg.centers[std::size_t(code[m])];
    Vec2 prev, next;
    if (m == 0) {
      const double scale = norm(cfg.centers[std::size_t(code[1])] - c);
      prev = c - scale * wi;
    } else {
      prev = cfg.centers[std::size_t(code[m - 1])];
    }
    if (m + 1 == M) {
      const double scale = norm(cfg.centers[std::size_t(code[M - 2])] - c);
      next = c + scale * wf;
    } else {
      next = cfg.centers[std::size_t(code[m + 1])];
    }
    const Vec2 mid = 0.5 * (prev + next) - c;
    theta[Eigen::Index(m)] = std::atan2(mid.y, mid.x);
  }
  return theta;
}

std::vector<Trajectory> solve_all(const DiscConfiguration& cfg, Vec2 wi,
                                  Vec2 wf, int M_max, unsigned threads) {
  const std::vector<Code> codes = enumerate_codes(cfg.n(), M_max);
  std::vector<std::optional<Trajectory>> found(codes.size());
  parallel_for(codes.size(), threads, [&](std::size_t j) {
    found[j] = find_trajectory(cfg, codes[j], wi, wf);
  });
  std::vector<Trajectory> out;
  for (auto& f : found)
    if (f) out.push_back(std::move(*f));
  return out;
}

}  // namespace

DiscConfiguration validate_configuration(const std::vector<Vec2>& centers) {
  if (centers.empty())
    throw InvalidGeometryError("need at least one disc center");
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b)
      if (norm(centers[a] - centers[b]) <= 2.0)
        throw InvalidGeometryError(
            "unit discs " + std::to_string(a + 1) + " and " +
            std::to_string(b + 1) + " overlap (center distance " +
            std::to_string(norm(centers[a] - centers[b])) + " <= 2)");
  DiscConfiguration cfg;
  cfg.centers = centers;
  const Circle sec = smallest_enclosing(centers);
  cfg.c_center = sec.c;
  cfg.c_radius = sec.r + 1.0;  // equal-radius discs: grow the point SEC
  return cfg;
}

std::vector<Code> enumerate_codes(int n_discs, int M_max) {
  if (n_discs < 1 || M_max < 1)
    throw InvalidParameterError("enumerate_codes needs n_discs, M_max >= 1");
  std::vector<Code> out;
  Code cur;
  auto rec = [&](auto&& self) -> void {
    out.push_back(cur);
    if (int(cur.size()) == M_max) return;
    for (int d = 0; d < n_discs; ++d) {
      if (d == cur.back()) continue;
      cur.push_back(d);
      self(self);
      cur.pop_back();
    }
  };
  for (int d = 0; d < n_discs; ++d) {
    cur.assign(1, d);
    rec(rec);
  }
  return out;
}

std::vector<Vec2> Trajectory::points(const DiscConfiguration& cfg) const {
  return reflection_points(cfg, code, theta);
}

std::optional<Trajectory> find_trajectory(const DiscConfiguration& cfg,
                                          const Code& code, Vec2 omega_i,
                                          Vec2 omega_f) {
  for (std::size_t m = 0; m < code.size(); ++m) {
    if (code[m] < 0 || code[m] >= cfg.n())
      throw InvalidParameterError("code refers to a disc outside the configuration");
    if (m + 1 < code.size() && code[m] == code[m + 1])
      throw InvalidParameterError("code repeats a disc consecutively");
  }
  const Vec2 wi = unit(omega_i), wf = unit(omega_f);
  if (code.size() == 1) return solve_single_bounce(cfg, code, wi, wf);

  const Eigen::VectorXd base = initial_guess(cfg, code, wi, wf);
  for (int s = 0; s < 9; ++s) {
    Eigen::VectorXd theta =
        base.array() + 2.0 * pi * double(s) / 9.0;
    double res = 0.0;
    if (!newton_solve(cfg, code, wi, wf, theta, res)) continue;
    std::vector<double> th(theta.data(), theta.data() + theta.size());
    if (auto t = make_trajectory(cfg, code, th, wi, wf, res)) return t;
  }
  return std::nullopt;
}

std::vector<Trajectory> find_trajectory_all_starts(const DiscConfiguration& cfg,
                                                   const Code& code,
                                                   Vec2 omega_i, Vec2 omega_f) {
  const Vec2 wi = unit(omega_i), wf = unit(omega_f);
  std::vector<Trajectory> out;
  auto push_unique = [&](const Trajectory& t) {
    for (const Trajectory& u : out) {
      bool same = true;
      for (std::size_t m = 0; m < t.theta.size(); ++m)
        if (std::abs(angle_diff(t.theta[m], u.theta[m])) >= 1e-8) {
          same = false;
          break;
        }
      if (same) return;
    }
    out.push_back(t);
  };
  if (code.size() == 1) {
    if (auto t = solve_single_bounce(cfg, code, wi, wf)) push_unique(*t);
    return out;
  }
  const Eigen::VectorXd base = initial_guess(cfg, code, wi, wf);
  for (int s = 0; s < 9; ++s) {
    Eigen::VectorXd theta = base.array() + 2.0 * pi * double(s) / 9.0;
    double res = 0.0;
    if (!newton_solve(cfg, code, wi, wf, theta, res)) continue;
    std::vector<double> th(theta.data(), theta.data() + theta.size());
    if (auto t = make_trajectory(cfg, code, th, wi, wf, res)) push_unique(*t);
  }
  return out;
}

double trajectory_length(const DiscConfiguration& cfg, const Trajectory& traj) {
  const std::vector<Vec2> R = traj.points(cfg);
  double L = 0.0;
  for (std::size_t m = 1; m < R.size(); ++m) L += norm(R[m] - R[m - 1]);
  return L;
}

double amplitude(const DiscConfiguration& cfg, Trajectory& traj) {
  const std::size_t M = traj.code.size();
  const std::vector<Vec2> R = traj.points(cfg);
  double prod = 1.0;
  bool grazing = false;
  for (std::size_t m = 0; m < M; ++m) {
    const Vec2 r = from_angle(traj.theta[m]);
    const Vec2 out = m + 1 == M ? traj.omega_f : unit(R[m + 1] - R[m]);
    const double cr = cross(r, out);
    double f = 1.0 - cr * cr;
    if (f < 1e-12) {
      grazing = true;
      f = std::max(f, 0.0);
    }
    prod *= std::sqrt(f);
  }
  const double sign = M % 2 == 0 ? 1.0 : -1.0;
  const double A = sign * std::sqrt(prod) / std::pow(2.0, double(M) / 2.0);
  traj.amplitude = A;
  traj.grazing = grazing;
  return A;
}

SemiclassicalSum semiclassical_s(const DiscConfiguration& cfg, Vec2 omega_i,
                                 Vec2 omega_f, double k, int M_max,
                                 unsigned threads) {
  if (!(k > 0.0)) throw InvalidParameterError("wavenumber must be > 0");
  if (M_max < 1) throw InvalidParameterError("M_max must be >= 1");
  SemiclassicalSum sum;
  for (const Trajectory& t :
       solve_all(cfg, unit(omega_i), unit(omega_f), M_max, threads)) {
    sum.value += t.amplitude * std::polar(1.0, k * t.length);
    if (int(t.code.size()) == M_max)
      sum.truncation_estimate += std::abs(t.amplitude);
    ++sum.feasible_count;
  }
  return sum;
}

SMatrixModel make_semiclassical_model(const DiscConfiguration& cfg,
                                      Vec2 omega_i, Vec2 omega_f, int M_max) {
  if (M_max < 1) throw InvalidParameterError("M_max must be >= 1");
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  auto trajs = std::make_shared<std::vector<std::pair<double, double>>>();
  for (const Trajectory& t :
       solve_all(cfg, unit(omega_i), unit(omega_f), M_max, threads))
    trajs->emplace_back(t.amplitude, t.length);
  auto fn = [trajs](double k) {
    cplx acc(0.0, 0.0);
    for (const auto& [a, l] : *trajs) acc += a * std::polar(1.0, k * l);
    return acc;
  };
  return SMatrixModel::scalar_function(
      fn, SVariable::wavenumber,
      "semiclassical " + std::to_string(cfg.n()) + "-disc sum, M <= " +
          std::to_string(M_max),
      false);
}

Histogram classical_delay_histogram(const DiscConfiguration& cfg, Vec2 omega_i,
                                    Vec2 omega_f, int M_max, double bin_width,
                                    unsigned threads) {
  if (!(bin_width > 0.0)) throw InvalidParameterError("bin_width must be > 0");
  Histogram h;
  h.bin_width = bin_width;
  for (const Trajectory& t :
       solve_all(cfg, unit(omega_i), unit(omega_f), M_max, threads)) {
    if (t.code.size() < 2) continue;  // single reflections carry no delay
    const std::size_t j = std::size_t(t.length / bin_width);
    if (j >= h.mass.size()) h.mass.resize(j + 1, 0.0);
    h.mass[j] += t.amplitude * t.amplitude;
  }
  return h;
}

Histogram classical_delay_histogram_avg(const DiscConfiguration& cfg,
                                        const std::vector<Vec2>& dirs_in,
                                        const std::vector<Vec2>& dirs_out,
                                        int M_max, double bin_width,
                                        unsigned threads) {
  if (dirs_in.empty() || dirs_out.empty())
    throw InvalidParameterError("direction averaging needs nonempty direction sets");
  Histogram avg;
  avg.bin_width = bin_width;
  for (const Vec2& wi : dirs_in)
    for (const Vec2& wf : dirs_out) {
      const Histogram h =
          classical_delay_histogram(cfg, wi, wf, M_max, bin_width, threads);
      if (h.mass.size() > avg.mass.size()) avg.mass.resize(h.mass.size(), 0.0);
      for (std::size_t j = 0; j < h.mass.size(); ++j) avg.mass[j] += h.mass[j];
    }
  const double n_pairs = double(dirs_in.size()) * double(dirs_out.size());
  for (double& m : avg.mass) m /= n_pairs;
  return avg;
}

SurvivalCurve monte_carlo_escape(const DiscConfiguration& cfg,
                                 std::size_t n_samples, double s_max,
                                 std::uint64_t rng_seed,
                                 std::pair<double, double> fit_window,
                                 std::size_t n_grid) {
  if (n_samples < 1) throw InvalidParameterError("need at least one sample");
  if (!(s_max > 0.0)) throw InvalidParameterError("s_max must be > 0");
  if (n_grid < 2) throw InvalidParameterError("survival grid needs >= 2 points");
  const Vec2 cc = cfg.c_center;
  const double R = cfg.c_radius;

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> lengths;
  lengths.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double alpha = 2.0 * pi * u01(rng);
    const double psi = pi * (u01(rng) - 0.5);
    const Vec2 nrm = from_angle(alpha);  // outward at the entry point
    Vec2 pos = cc + R * nrm;
    const Vec2 inw = -1.0 * nrm;
    Vec2 dir{inw.x * std::cos(psi) - inw.y * std::sin(psi),
             inw.x * std::sin(psi) + inw.y * std::cos(psi)};
    double len = 0.0;
    for (long bounce = 0; bounce < 1000000; ++bounce) {
      double t_hit = std::numeric_limits<double>::infinity();
      std::size_t hit = 0;
      for (std::size_t d = 0; d < cfg.centers.size(); ++d) {
        const Vec2 rel = pos - cfg.centers[d];
        const double b = dot(rel, dir);
        const double q = b * b - (dot(rel, rel) - 1.0);
        if (q < 0.0) continue;
        const double t = -b - std::sqrt(q);
        if (t > 1e-12 && t < t_hit) {
          t_hit = t;
          hit = d;
        }
      }
      if (!std::isfinite(t_hit)) {
        const Vec2 rel = pos - cc;
        const double b = dot(rel, dir);
        const double q = b * b - (dot(rel, rel) - R * R);
        len += -b + std::sqrt(std::max(0.0, q));
        break;
      }
      len += t_hit;
      pos = pos + t_hit * dir;
      dir = unit(reflect(dir, unit(pos - cfg.centers[hit])));
      if (len > s_max) break;  // already past every survival bin
    }
    lengths.push_back(len);
  }
  std::sort(lengths.begin(), lengths.end());

  SurvivalCurve curve;
  curve.seed = rng_seed;
  curve.window = fit_window;
  curve.s.resize(n_grid);
  curve.survival.resize(n_grid);
  for (std::size_t j = 0; j < n_grid; ++j) {
    const double s = s_max * double(j) / double(n_grid - 1);
    curve.s[j] = s;
    const auto it = std::upper_bound(lengths.begin(), lengths.end(), s);
    curve.survival[j] =
        double(lengths.end() - it) / double(n_samples);
  }

  const auto past = std::upper_bound(lengths.begin(), lengths.end(),
                                     fit_window.first);
  const std::size_t n_past = std::size_t(lengths.end() - past);
  if (n_past < 100)
    throw InsufficientStatisticsError(
        "only " + std::to_string(n_past) +
        " rays survive past the fit-window start (need >= 100)");

  curve.fit = fit_escape_rate(curve, fit_window);
  curve.non_exponential =
      curve.fit.degenerate || !(std::abs(curve.fit.corr) >= 0.99);
  return curve;
}

EscapeFit fit_escape_rate(const SurvivalCurve& curve,
                          std::pair<double, double> window) {
  if (!(window.first < window.second) || window.first < curve.s.front() - 1e-12 ||
      window.second > curve.s.back() + 1e-12)
    throw FitWindowError("fit window outside the sampled survival range");
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < curve.s.size(); ++j) {
    if (curve.s[j] < window.first || curve.s[j] > window.second) continue;
    if (!(curve.survival[j] > 0.0))
      throw FitWindowError("survival vanishes inside the fit window at s = " +
                           std::to_string(curve.s[j]));
    xs.push_back(curve.s[j]);
    ys.push_back(std::log(curve.survival[j]));
  }
  if (xs.size() < 3)
    throw FitWindowError("fit window covers fewer than 3 survival samples");
  const LinearFit lf = fit_line(xs, ys);
  EscapeFit fit;
  fit.gamma = -lf.slope;
  fit.corr = lf.corr;
  fit.stderr_slope = lf.slope_stderr;
  fit.degenerate = lf.degenerate;
  return fit;
}

}  // namespace delaykit
