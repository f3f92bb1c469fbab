#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "delaykit/smatrix.hpp"

namespace delaykit {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a);
Vec2 unit(Vec2 a);
Vec2 from_angle(double theta);

// Unit discs at the given centers plus the smallest circle C enclosing them.
struct DiscConfiguration {
  std::vector<Vec2> centers;
  Vec2 c_center;
  double c_radius = 0.0;
  int n() const { return int(centers.size()); }
};

// Rejects overlapping discs (center distance <= 2), naming the pair.
DiscConfiguration validate_configuration(const std::vector<Vec2>& centers);

using Code = std::vector<int>;  // disc indices, no immediate repeats

// All codes of lengths 1..M_max in lexicographic order;
// count = sum_M n (n-1)^{M-1}.
std::vector<Code> enumerate_codes(int n_discs, int M_max);

struct Trajectory {
  Code code;
  std::vector<double> theta;  // reflection angles; R_m = center + (cos,sin)
  Vec2 omega_i, omega_f;
  double length = 0.0;     // interior polygon only (M=1 -> 0)
  double amplitude = 0.0;  // signed, possibly 0 at grazing degeneracy
  double residual = 0.0;   // max |specular/endpoint equation|
  bool grazing = false;
  std::vector<Vec2> points(const DiscConfiguration& cfg) const;
};

// Solves the specular system for the code's reflection angles (endpoint
// conditions for the first/last bounce, stationarity of the polygon length at
// interior bounces) by damped Newton with a numerical Jacobian, then checks
// orientation and shadowing.  Returns nullopt when Newton fails within 100
// iterations (after 8 perturbed restarts), converges to an infeasible point,
// or a segment crosses a disc interior.
std::optional<Trajectory> find_trajectory(const DiscConfiguration& cfg,
                                          const Code& code, Vec2 omega_i,
                                          Vec2 omega_f);

// Runs the initial guess plus all 8 perturbed starts and collapses duplicates
// (angles agreeing within 1e-8); exposed for the uniqueness property test.
std::vector<Trajectory> find_trajectory_all_starts(const DiscConfiguration& cfg,
                                                   const Code& code,
                                                   Vec2 omega_i, Vec2 omega_f);

double trajectory_length(const DiscConfiguration& cfg, const Trajectory& traj);

// A = ((-1)^M / 2^{M/2}) [ prod_m sqrt(1 - (r_m x Rhat_m,out)^2) ]^{1/2} with
// the outgoing direction of bounce M being omega_f.  Grazing bounces
// (|r x Rhat| = 1) give 0 and set the grazing flag.
double amplitude(const DiscConfiguration& cfg, Trajectory& traj);

struct SemiclassicalSum {
  cplx value{0.0, 0.0};
  double truncation_estimate = 0.0;  // sum of |A| over the M = M_max shell
  int feasible_count = 0;
};

// S(k) ~ sum over feasible trajectories with M <= M_max of A e^{ikL}.
SemiclassicalSum semiclassical_s(const DiscConfiguration& cfg, Vec2 omega_i,
                                 Vec2 omega_f, double k, int M_max,
                                 unsigned threads = 1);

// 1x1 S-matrix model in k wrapping the truncated semiclassical sum.
SMatrixModel make_semiclassical_model(const DiscConfiguration& cfg,
                                      Vec2 omega_i, Vec2 omega_f, int M_max);

struct Histogram {
  double bin_width = 0.0;
  std::vector<double> mass;  // bin j covers [j*bin_width, (j+1)*bin_width)
  double center(std::size_t j) const { return (double(j) + 0.5) * bin_width; }
};

// Sum of |A|^2 per length bin over feasible trajectories with 2 <= M <= M_max
// (single-bounce trajectories excluded).
Histogram classical_delay_histogram(const DiscConfiguration& cfg, Vec2 omega_i,
                                    Vec2 omega_f, int M_max, double bin_width,
                                    unsigned threads = 1);

// Mean of the fixed-direction histograms over all (in, out) direction pairs.
Histogram classical_delay_histogram_avg(const DiscConfiguration& cfg,
                                        const std::vector<Vec2>& dirs_in,
                                        const std::vector<Vec2>& dirs_out,
                                        int M_max, double bin_width,
                                        unsigned threads = 1);

struct EscapeFit {
  double gamma = 0.0;
  double corr = 0.0;
  double stderr_slope = 0.0;
  bool degenerate = false;  // constant survival: correlation undefined
};

struct SurvivalCurve {
  std::vector<double> s;
  std::vector<double> survival;
  std::pair<double, double> window{0.0, 0.0};
  EscapeFit fit;
  bool non_exponential = false;  // |corr| below 0.99 on the fit window
  std::uint64_t seed = 0;
};

// Rays enter uniformly over the enclosing circle's boundary (uniform position
// and inward angle), reflect specularly off the discs, and the interior path
// length until leaving C is recorded; survival(s) = fraction with length > s.
// Fewer than 100 rays past the window start -> InsufficientStatisticsError.
SurvivalCurve monte_carlo_escape(const DiscConfiguration& cfg,
                                 std::size_t n_samples, double s_max,
                                 std::uint64_t rng_seed,
                                 std::pair<double, double> fit_window,
                                 std::size_t n_grid = 600);

// Least squares on log survival over the window: gamma = -slope, with the
// Pearson correlation and the slope's standard error.
EscapeFit fit_escape_rate(const SurvivalCurve& curve,
                          std::pair<double, double> window);

}  // namespace delaykit
