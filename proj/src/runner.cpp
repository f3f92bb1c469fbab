#include "delaykit/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include "delaykit/errors.hpp"
#include "delaykit/moments.hpp"
#include "delaykit/numerics.hpp"

namespace delaykit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fnv1a_hex8(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08llx",
                static_cast<unsigned long long>((h ^ (h >> 32)) & 0xffffffffull));
  return buf;
}

std::string utc_stamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

unsigned resolve_threads(unsigned override_value) {
  if (override_value > 0) return override_value;
  if (const char* env = std::getenv("DELAYKIT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return unsigned(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

std::string dispersion_name(Dispersion d) {
  return d == Dispersion::em_linear ? "em" : "qm";
}

std::string kind_name(SMatrixKind k) {
  switch (k) {
    case SMatrixKind::identity: return "identity";
    case SMatrixKind::blaschke_product: return "blaschke";
    case SMatrixKind::feshbach_pole: return "feshbach";
    case SMatrixKind::kmatrix_cayley: return "kmatrix_cayley";
    case SMatrixKind::tabulated: return "tabulated";
    case SMatrixKind::pure_delay: return "pure_delay";
    case SMatrixKind::semiclassical_disc: return "semiclassical_disc";
  }
  return "unknown";
}

// Unitarity defect over the envelope's support, in the model's own variable.
json defect_over_support(const SMatrixModel& model, const Envelope& env,
                         Dispersion disp, const DistributionOptions& opt) {
  std::vector<double> xs;
  for (int j = 0; j <= 40; ++j) {
    const double k =
        env.support_lo() +
        (env.support_hi() - env.support_lo()) * double(j) / 40.0;
    xs.push_back(model.variable() == SVariable::wavenumber
                     ? k
                     : energy_of_k(k, opt.units, disp, opt.eps_i));
  }
  try {
    return unitarity_defect(model, xs);
  } catch (const Error&) {
    return nullptr;  // model not evaluable over the whole support
  }
}

void write_distribution_csv(const fs::path& dir, const DelayDistribution& d,
                            const std::string& stem) {
  std::ofstream out(dir / (stem + ".csv"));
  out << "delay,density\n";
  for (std::size_t m = 0; m < d.density.size(); ++m)
    out << fmt(d.grid.at(m)) << ',' << fmt(d.density[m]) << '\n';

  json meta;
  meta["k0"] = d.k0;
  meta["sigma"] = d.sigma;
  meta["dispersion"] = dispersion_name(d.dispersion);
  meta["channel_i"] = d.channel_i;
  meta["channel_f"] = d.channel_f;
  meta["quadrature_step"] = d.k_step;
  meta["grid"] = {{"lo", d.grid.lo}, {"hi", d.grid.hi}, {"n", d.grid.n}};
  meta["mass"] = d.mass();
  meta["tail_estimate"] = d.tail_estimate;
  if (!d.warnings.empty()) meta["warnings"] = d.warnings;
  std::ofstream(dir / (stem + ".meta.json")) << meta.dump(2) << '\n';
}

std::vector<DelayDistribution> compute_distributions(const RunConfig& cfg) {
  const SMatrixModel& model = *cfg.model;
  const Envelope& env = *cfg.envelope;
  std::vector<DelayDistribution> dists;
  if (cfg.grid) {
    std::vector<int> fs;
    if (cfg.channel_out)
      fs.push_back(*cfg.channel_out);
    else
      for (int f = 0; f < model.n_channels(); ++f) fs.push_back(f);
    for (int f : fs)
      dists.push_back(cfg.dispersion == Dispersion::em_linear
                          ? delay_distribution_em(model, env, cfg.channel_in, f,
                                                  *cfg.grid, cfg.options)
                          : delay_distribution_qm(model, env, cfg.channel_in, f,
                                                  *cfg.grid, cfg.options));
  } else {
    dists = delay_distributions_auto(model, env, cfg.channel_in, cfg.dispersion,
                                     cfg.options);
    if (cfg.channel_out) {
      DelayDistribution keep = std::move(dists[std::size_t(*cfg.channel_out)]);
      dists.clear();
      dists.push_back(std::move(keep));
    }
  }
  return dists;
}

std::string pair_stem(const DelayDistribution& d) {
  return "distribution_i" + std::to_string(d.channel_i) + "_f" +
         std::to_string(d.channel_f);
}

json run_distribution(const RunConfig& cfg, const fs::path& dir,
                      std::vector<std::string>& lines) {
  const auto dists = compute_distributions(cfg);
  double mass = 0.0, tail = 0.0;
  json files = json::array();
  for (const auto& d : dists) {
    write_distribution_csv(dir, d, pair_stem(d));
    files.push_back(pair_stem(d) + ".csv");
    mass += d.mass();
    tail += d.tail_estimate;
    lines.push_back("pair " + std::to_string(d.channel_i) + " -> " +
                    std::to_string(d.channel_f) + ": mass " + fmt(d.mass()) +
                    ", grid [" + fmt(d.grid.lo) + ", " + fmt(d.grid.hi) + "]");
  }
  lines.push_back("total mass: " + fmt(mass));
  json res;
  res["files"] = files;
  res["total_mass"] = mass;
  res["tail_estimate"] = tail;
  return res;
}

json run_moments(const RunConfig& cfg, const fs::path& dir,
                 std::vector<std::string>& lines) {
  const SMatrixModel& model = *cfg.model;
  const Envelope& env = *cfg.envelope;
  const Units& u = cfg.options.units;
  const auto dists = compute_distributions(cfg);

  std::ofstream out(dir / "moments.csv");
  out << "channel_i,channel_f,sigma,pair_mass,mean,second_moment,variance,"
         "mean_raw,second_moment_raw,ws_reference\n";
  double total = 0.0;
  for (const auto& d : dists) {
    double ws;
    if (cfg.dispersion == Dispersion::em_linear) {
      ws = wigner_smith_element_k(model, d.channel_i, d.channel_f, env.k0(),
                                  env.sigma() / 1000.0, u);
    } else {
      const double E0 = energy_of_k(env.k0(), u, cfg.dispersion, cfg.options.eps_i);
      const double sig_e = u.hbar * u.hbar * env.k0() * env.sigma() / u.mass;
      ws = wigner_smith_element(model, d.channel_i, d.channel_f, E0,
                                sig_e / 1000.0, u);
    }
    const MomentReport r = moment_report(d, ws);
    out << r.channel_i << ',' << r.channel_f << ',' << fmt(r.sigma) << ','
        << fmt(r.pair_mass) << ',' << fmt(r.mean) << ',' << fmt(r.second_moment)
        << ',' << fmt(r.variance) << ',' << fmt(r.mean_raw) << ','
        << fmt(r.second_moment_raw) << ',' << fmt(r.ws_reference) << '\n';
    total += r.pair_mass;
    lines.push_back("pair " + std::to_string(r.channel_i) + " -> " +
                    std::to_string(r.channel_f) + ": mean " + fmt(r.mean) +
                    ", ws reference " + fmt(r.ws_reference));
  }
  json res;
  res["files"] = {"moments.csv"};
  res["total_mass"] = total;
  return res;
}

json run_ws_limit(const RunConfig& cfg, const fs::path& dir,
                  std::vector<std::string>& lines) {
  const int f = cfg.channel_out.value_or(cfg.channel_in);
  const ConvergenceTable table =
      monochromatic_limit_check(*cfg.model, cfg.channel_in, f, cfg.carrier,
                                cfg.sigmas, cfg.dispersion, cfg.options);
  std::ofstream out(dir / "convergence.csv");
  out << "sigma,mean,ws_reference,abs_error\n";
  for (const auto& row : table.rows) {
    out << fmt(row.sigma) << ',' << fmt(row.mean) << ',' << fmt(row.ws_reference)
        << ',' << fmt(row.abs_error) << '\n';
    lines.push_back("sigma " + fmt(row.sigma) + ": mean " + fmt(row.mean) +
                    ", abs error " + fmt(row.abs_error));
  }
  lines.push_back(table.monotone ? "errors non-increasing"
                                 : "errors NOT monotone");
  json res;
  res["files"] = {"convergence.csv"};
  res["monotone"] = table.monotone;
  res["final_abs_error"] = table.rows.back().abs_error;
  res["ws_reference"] = table.rows.back().ws_reference;
  return res;
}

json run_autocorrelation(const RunConfig& cfg, const fs::path& dir,
                         std::vector<std::string>& lines) {
  const SMatrixModel& model = *cfg.model;
  const Envelope& env = *cfg.envelope;
  const int i = cfg.channel_in;
  const int f = cfg.channel_out.value_or(i);

  DelayDistribution direct;
  if (cfg.grid) {
    direct = cfg.dispersion == Dispersion::em_linear
                 ? delay_distribution_em(model, env, i, f, *cfg.grid, cfg.options)
                 : delay_distribution_qm(model, env, i, f, *cfg.grid, cfg.options);
  } else {
    auto all = delay_distributions_auto(model, env, i, cfg.dispersion, cfg.options);
    direct = std::move(all[std::size_t(f)]);
  }
  const DelayDistribution ac =
      cfg.dispersion == Dispersion::em_linear
          ? delay_distribution_em_autocorr(model, env, i, f, direct.grid,
                                           cfg.options)
          : delay_distribution_qm_autocorr(model, env, i, f, direct.grid,
                                           cfg.options);

  write_distribution_csv(dir, direct, "distribution_direct");
  write_distribution_csv(dir, ac, "distribution_autocorr");

  const double peak = direct.peak();
  double dev = 0.0;
  for (std::size_t m = 0; m < direct.density.size(); ++m)
    dev = std::max(dev, std::abs(direct.density[m] - ac.density[m]));
  const double rel = dev / peak;
  lines.push_back("max relative route deviation: " + fmt(rel));
  json res;
  res["files"] = {"distribution_direct.csv", "distribution_autocorr.csv"};
  res["max_relative_deviation"] = rel;
  res["direct_mass"] = direct.mass();
  res["autocorr_mass"] = ac.mass();
  return res;
}

std::string code_string(const Code& code) {
  std::string s;
  for (std::size_t m = 0; m < code.size(); ++m) {
    if (m) s += '-';
    s += std::to_string(code[m] + 1);  // 1-based disc labels in outputs
  }
  return s;
}

std::vector<Trajectory> solve_codes(const DiscConfiguration& geo, Vec2 wi,
                                    Vec2 wf, int m_max, unsigned threads) {
  const auto codes = enumerate_codes(geo.n(), m_max);
  std::vector<std::optional<Trajectory>> found(codes.size());
  parallel_for(codes.size(), threads, [&](std::size_t j) {
    found[j] = find_trajectory(geo, codes[j], wi, wf);
  });
  std::vector<Trajectory> out;
  for (auto& t : found)
    if (t) out.push_back(std::move(*t));
  return out;
}

void write_trajectories_csv(const fs::path& dir,
                            const std::vector<Trajectory>& trajs) {
  std::ofstream out(dir / "trajectories.csv");
  out << "code,theta_1..theta_M,length,amplitude,residual\n";
  for (const Trajectory& t : trajs) {
    out << code_string(t.code);
    for (double th : t.theta) out << ',' << fmt(th);
    out << ',' << fmt(t.length) << ',' << fmt(t.amplitude) << ','
        << fmt(t.residual) << '\n';
  }
}

json run_billiard_s(const RunConfig& cfg, const fs::path& dir,
                    std::vector<std::string>& lines, unsigned threads) {
  const DiscConfiguration& geo = *cfg.geometry;
  const Vec2 wi = unit(cfg.dirs_in.front()), wf = unit(cfg.dirs_out.front());
  const auto trajs = solve_codes(geo, wi, wf, cfg.m_max, threads);
  write_trajectories_csv(dir, trajs);

  double shell = 0.0;
  for (const Trajectory& t : trajs)
    if (int(t.code.size()) == cfg.m_max) shell += std::abs(t.amplitude);

  std::ofstream out(dir / "semiclassical_s.csv");
  out << "k,re,im,abs\n";
  for (double k : cfg.k_values) {
    cplx s(0.0, 0.0);
    for (const Trajectory& t : trajs)
      s += t.amplitude * std::polar(1.0, k * t.length);
    out << fmt(k) << ',' << fmt(s.real()) << ',' << fmt(s.imag()) << ','
        << fmt(std::abs(s)) << '\n';
  }
  lines.push_back(std::to_string(trajs.size()) + " feasible trajectories, M <= " +
                  std::to_string(cfg.m_max));
  lines.push_back("truncation estimate (|A| over the M = " +
                  std::to_string(cfg.m_max) + " shell): " + fmt(shell));
  json res;
  res["files"] = {"trajectories.csv", "semiclassical_s.csv"};
  res["feasible_count"] = trajs.size();
  res["truncation_estimate"] = shell;
  return res;
}

json run_billiard_classical(const RunConfig& cfg, const fs::path& dir,
                            std::vector<std::string>& lines, unsigned threads) {
  const Histogram h =
      classical_delay_histogram_avg(*cfg.geometry, cfg.dirs_in, cfg.dirs_out,
                                    cfg.m_max, cfg.bin_width, threads);
  std::ofstream out(dir / "classical_histogram.csv");
  out << "s,mass\n";
  double total = 0.0;
  for (std::size_t ju = 0; ju < h.mass.size(); ++ju) {
    out << fmt(h.center(ju)) << ',' << fmt(h.mass[ju]) << '\n';
    total += h.mass[ju];
  }
  lines.push_back(std::to_string(h.mass.size()) + " bins of width " +
                  fmt(h.bin_width) + ", total weight " + fmt(total));
  json res;
  res["files"] = {"classical_histogram.csv"};
  res["bins"] = h.mass.size();
  res["total_weight"] = total;
  return res;
}

json run_escape(const RunConfig& cfg, const fs::path& dir,
                std::vector<std::string>& lines) {
  const SurvivalCurve curve =
      monte_carlo_escape(*cfg.geometry, cfg.n_samples, cfg.s_max, cfg.seed,
                         cfg.fit_window, cfg.survival_grid);
  std::ofstream out(dir / "survival.csv");
  out << "s,survival\n";
  for (std::size_t m = 0; m < curve.s.size(); ++m)
    out << fmt(curve.s[m]) << ',' << fmt(curve.survival[m]) << '\n';
  lines.push_back("gamma " + fmt(curve.fit.gamma) + ", correlation " +
                  fmt(curve.fit.corr) +
                  (curve.non_exponential ? " (non-exponential)" : ""));
  json res;
  res["files"] = {"survival.csv"};
  res["gamma"] = curve.fit.gamma;
  res["correlation"] = curve.fit.corr;
  res["stderr_slope"] = curve.fit.stderr_slope;
  res["degenerate_fit"] = curve.fit.degenerate;
  res["non_exponential"] = curve.non_exponential;
  res["seed"] = curve.seed;
  res["window"] = {curve.window.first, curve.window.second};
  return res;
}

}  // namespace

RunResult run_task(RunConfig cfg, const std::string& config_bytes,
                   const std::string& out_override, unsigned threads_override) {
  const unsigned threads = resolve_threads(threads_override);
  cfg.options.threads = threads;

  fs::path dir;
  if (!out_override.empty())
    dir = out_override;
  else if (!cfg.out_dir.empty())
    dir = cfg.out_dir;
  else
    dir = cfg.task + "-" + utc_stamp() + "-" + fnv1a_hex8(config_bytes);
  fs::create_directories(dir);

  std::vector<std::string> lines;
  json results;
  if (cfg.task == "distribution")
    results = run_distribution(cfg, dir, lines);
  else if (cfg.task == "moments")
    results = run_moments(cfg, dir, lines);
  else if (cfg.task == "ws_limit")
    results = run_ws_limit(cfg, dir, lines);
  else if (cfg.task == "autocorrelation")
    results = run_autocorrelation(cfg, dir, lines);
  else if (cfg.task == "billiard_s")
    results = run_billiard_s(cfg, dir, lines, threads);
  else if (cfg.task == "billiard_classical")
    results = run_billiard_classical(cfg, dir, lines, threads);
  else if (cfg.task == "escape")
    results = run_escape(cfg, dir, lines);
  else
    throw SchemaError("task: unknown task '" + cfg.task + "'");

  json meta;
  meta["tool"] = "delaykit";
  meta["versions"] = {{"delaykit", kVersion},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)}};
  meta["config"] = cfg.resolved;
  meta["seed"] = cfg.seed;
  if (cfg.model && cfg.envelope)
    meta["unitarity_defect"] =
        defect_over_support(*cfg.model, *cfg.envelope, cfg.dispersion, cfg.options);
  if (!cfg.warnings.empty()) meta["config_warnings"] = cfg.warnings;
  meta["results"] = results;
  std::ofstream(dir / "metadata.json") << meta.dump(2) << '\n';

  std::ofstream summary(dir / "summary.txt");
  summary << "delaykit " << kVersion << " — task: " << cfg.task << '\n';
  if (cfg.model)
    summary << "model: " << kind_name(cfg.model->kind())
            << ", channels: " << cfg.model->n_channels() << '\n';
  if (cfg.envelope)
    summary << "envelope: k0 " << fmt(cfg.envelope->k0()) << ", sigma "
            << fmt(cfg.envelope->sigma()) << '\n';
  if (cfg.model || cfg.envelope)
    summary << "dispersion: " << dispersion_name(cfg.dispersion) << '\n';
  for (const std::string& l : lines) summary << l << '\n';

  RunResult r;
  r.out_dir = dir.string();
  r.metadata = std::move(meta);
  return r;
}

}  // namespace delaykit
