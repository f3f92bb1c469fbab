#include "delaykit/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "delaykit/errors.hpp"

namespace delaykit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw SchemaError(field + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed, bool strict,
                std::vector<std::string>& warnings) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (known) continue;
    const std::string field = where.empty() ? it.key() : where + "." + it.key();
    if (strict) fail(field, "unknown key");
    warnings.push_back(field + ": unknown key (ignored)");
  }
}

const json& need(const json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    fail(where.empty() ? key : where + "." + key, "required key missing");
  return *it;
}

std::string path_of(const std::string& where, const char* key) {
  return where.empty() ? key : where + "." + key;
}

double as_num(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "must be a number");
  return j.get<double>();
}

long long as_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "must be an integer");
  return j.get<long long>();
}

std::string as_str(const json& j, const std::string& field) {
  if (!j.is_string()) fail(field, "must be a string");
  return j.get<std::string>();
}

double opt_num(const json& obj, const std::string& where, const char* key,
               double def) {
  auto it = obj.find(key);
  return it == obj.end() ? def : as_num(*it, path_of(where, key));
}

Eigen::VectorXd as_real_vector(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) fail(field, "must be a nonempty array");
  Eigen::VectorXd v(Eigen::Index(j.size()));
  for (std::size_t m = 0; m < j.size(); ++m)
    v[Eigen::Index(m)] = as_num(j[m], field + "[" + std::to_string(m) + "]");
  return v;
}

cplx as_complex(const json& j, const std::string& field) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  fail(field, "must be a number or an [re, im] pair");
}

std::vector<Resonance> parse_resonances(const json& arr,
                                        const std::string& field, bool strict,
                                        std::vector<std::string>& warnings) {
  if (!arr.is_array() || arr.empty()) fail(field, "must be a nonempty array");
  std::vector<Resonance> out;
  for (std::size_t m = 0; m < arr.size(); ++m) {
    const std::string where = field + "[" + std::to_string(m) + "]";
    const json& r = arr[m];
    if (!r.is_object()) fail(where, "must be an object {E, Gamma, g}");
    check_keys(r, where, {"E", "Gamma", "g"}, strict, warnings);
    Resonance res;
    res.E = as_num(need(r, where, "E"), where + ".E");
    res.Gamma = as_num(need(r, where, "Gamma"), where + ".Gamma");
    if (!(res.Gamma > 0.0)) fail(where + ".Gamma", "must be > 0");
    res.g = as_real_vector(need(r, where, "g"), where + ".g");
    out.push_back(std::move(res));
  }
  return out;
}

SMatrixModel parse_tabulated_csv(const std::string& file,
                                 const std::string& field, SVariable var,
                                 const std::filesystem::path& base) {
  std::filesystem::path p(file);
  if (p.is_relative()) p = base / p;
  std::ifstream in(p);
  if (!in) fail(field, "cannot open " + p.string());
  std::vector<double> xs;
  std::vector<Eigen::MatrixXcd> values;
  std::string line;
  int n = -1;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::vector<double> cols;
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        cols.push_back(std::stod(tok));
      } catch (...) {
        if (lineno == 1) {
          cols.clear();
          break;  // header row
        }
        fail(field, p.string() + ":" + std::to_string(lineno) +
                        ": non-numeric value '" + tok + "'");
      }
    }
    if (cols.empty()) continue;
    const std::size_t pairs = (cols.size() - 1) / 2;
    const int nn = int(std::lround(std::sqrt(double(pairs))));
    if (cols.size() < 3 || std::size_t(nn) * std::size_t(nn) * 2 + 1 != cols.size())
      fail(field, p.string() + ":" + std::to_string(lineno) +
                      ": need columns x followed by re,im per channel pair");
    if (n < 0) n = nn;
    if (nn != n)
      fail(field, p.string() + ":" + std::to_string(lineno) +
                      ": inconsistent channel count");
    xs.push_back(cols[0]);
    Eigen::MatrixXcd s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::size_t c = 1 + 2 * (std::size_t(i) * std::size_t(n) + std::size_t(j));
        s(i, j) = cplx(cols[c], cols[c + 1]);
      }
    values.push_back(std::move(s));
  }
  if (xs.size() < 2) fail(field, p.string() + ": need at least two sample rows");
  return SMatrixModel::tabulated(std::move(xs), std::move(values), var);
}

SVariable parse_variable(const json& obj, const std::string& where, bool /*strict*/) {
  auto it = obj.find("variable");
  if (it == obj.end()) return SVariable::energy;
  const std::string v = as_str(*it, where + ".variable");
  if (v == "energy") return SVariable::energy;
  if (v == "wavenumber") return SVariable::wavenumber;
  fail(where + ".variable", "must be \"energy\" or \"wavenumber\"");
}

SMatrixModel parse_model(const json& m, bool strict,
                         std::vector<std::string>& warnings,
                         const std::filesystem::path& base) {
  const std::string where = "model";
  if (!m.is_object()) fail(where, "must be an object");
  const std::string kind = as_str(need(m, where, "kind"), where + ".kind");

  if (kind == "identity") {
    check_keys(m, where, {"kind", "channels"}, strict, warnings);
    long long n = 1;
    if (m.contains("channels")) n = as_int(m["channels"], where + ".channels");
    if (n < 1) fail(where + ".channels", "must be >= 1");
    return SMatrixModel::identity(int(n));
  }
  if (kind == "blaschke") {
    check_keys(m, where, {"kind", "poles"}, strict, warnings);
    const json& arr = need(m, where, "poles");
    if (!arr.is_array()) fail(where + ".poles", "must be an array");
    std::vector<std::pair<double, double>> poles;
    for (std::size_t j = 0; j < arr.size(); ++j) {
      const std::string pw = where + ".poles[" + std::to_string(j) + "]";
      if (!arr[j].is_object()) fail(pw, "must be an object {E, Gamma}");
      check_keys(arr[j], pw, {"E", "Gamma"}, strict, warnings);
      const double E = as_num(need(arr[j], pw, "E"), pw + ".E");
      const double G = as_num(need(arr[j], pw, "Gamma"), pw + ".Gamma");
      if (!(G > 0.0)) fail(pw + ".Gamma", "must be > 0");
      poles.emplace_back(E, G);
    }
    return SMatrixModel::blaschke(poles);
  }
  if (kind == "feshbach") {
    check_keys(m, where, {"kind", "resonances", "prompt"}, strict, warnings);
    auto res = parse_resonances(need(m, where, "resonances"),
                                where + ".resonances", strict, warnings);
    const int n = int(res.front().g.size());
    Eigen::MatrixXcd prompt = Eigen::MatrixXcd::Identity(n, n);
    if (m.contains("prompt")) {
      const json& pr = m["prompt"];
      const std::string pw = where + ".prompt";
      if (!pr.is_array() || int(pr.size()) != n)
        fail(pw, "must be an " + std::to_string(n) + "x" + std::to_string(n) +
                     " matrix");
      for (int i = 0; i < n; ++i) {
        const json& row = pr[std::size_t(i)];
        if (!row.is_array() || int(row.size()) != n)
          fail(pw + "[" + std::to_string(i) + "]", "row length mismatch");
        for (int j = 0; j < n; ++j)
          prompt(i, j) = as_complex(row[std::size_t(j)],
                                    pw + "[" + std::to_string(i) + "][" +
                                        std::to_string(j) + "]");
      }
    }
    return SMatrixModel::feshbach(res, prompt);
  }
  if (kind == "kmatrix_cayley") {
    check_keys(m, where, {"kind", "resonances", "background"}, strict, warnings);
    auto res = parse_resonances(need(m, where, "resonances"),
                                where + ".resonances", strict, warnings);
    const int n = int(res.front().g.size());
    Eigen::MatrixXd bg = Eigen::MatrixXd::Zero(n, n);
    if (m.contains("background")) {
      const json& b = m["background"];
      const std::string bw = where + ".background";
      if (!b.is_array() || int(b.size()) != n) fail(bw, "matrix size mismatch");
      for (int i = 0; i < n; ++i) {
        const json& row = b[std::size_t(i)];
        if (!row.is_array() || int(row.size()) != n)
          fail(bw + "[" + std::to_string(i) + "]", "row length mismatch");
        for (int j = 0; j < n; ++j)
          bg(i, j) = as_num(row[std::size_t(j)],
                            bw + "[" + std::to_string(i) + "][" +
                                std::to_string(j) + "]");
      }
    }
    return SMatrixModel::kmatrix_cayley(res, bg);
  }
  if (kind == "tabulated") {
    check_keys(m, where, {"kind", "variable", "file", "x", "values"}, strict,
               warnings);
    const SVariable var = parse_variable(m, where, strict);
    if (m.contains("file"))
      return parse_tabulated_csv(as_str(m["file"], where + ".file"),
                                 where + ".file", var, base);
    const json& xj = need(m, where, "x");
    const json& vj = need(m, where, "values");
    if (!xj.is_array() || !vj.is_array() || xj.size() != vj.size())
      fail(where + ".values", "must parallel model.x");
    std::vector<double> xs;
    std::vector<Eigen::MatrixXcd> vals;
    for (std::size_t s = 0; s < xj.size(); ++s)
      xs.push_back(as_num(xj[s], where + ".x[" + std::to_string(s) + "]"));
    for (std::size_t s = 0; s < vj.size(); ++s) {
      const std::string vw = where + ".values[" + std::to_string(s) + "]";
      const json& mat = vj[s];
      if (!mat.is_array() || mat.empty()) fail(vw, "must be a square matrix");
      const int n = int(mat.size());
      Eigen::MatrixXcd sm(n, n);
      for (int i = 0; i < n; ++i) {
        const json& row = mat[std::size_t(i)];
        if (!row.is_array() || int(row.size()) != n)
          fail(vw + "[" + std::to_string(i) + "]", "row length mismatch");
        for (int j = 0; j < n; ++j)
          sm(i, j) = as_complex(row[std::size_t(j)],
                                vw + "[" + std::to_string(i) + "][" +
                                    std::to_string(j) + "]");
      }
      vals.push_back(std::move(sm));
    }
    return SMatrixModel::tabulated(std::move(xs), std::move(vals), var);
  }
  if (kind == "pure_delay") {
    check_keys(m, where, {"kind", "length"}, strict, warnings);
    return SMatrixModel::pure_delay(
        as_num(need(m, where, "length"), where + ".length"));
  }
  fail(where + ".kind",
       "unknown model kind '" + kind +
           "' (expected identity | blaschke | feshbach | kmatrix_cayley | "
           "tabulated | pure_delay)");
}

Envelope parse_envelope(const json& e, bool strict,
                        std::vector<std::string>& warnings) {
  const std::string where = "envelope";
  if (!e.is_object()) fail(where, "must be an object");
  const std::string kind = as_str(need(e, where, "kind"), where + ".kind");
  if (kind == "gaussian") {
    check_keys(e, where, {"kind", "k0", "sigma"}, strict, warnings);
    const double k0 = as_num(need(e, where, "k0"), where + ".k0");
    const double sigma = as_num(need(e, where, "sigma"), where + ".sigma");
    if (!(k0 > 0.0)) fail(where + ".k0", "must be > 0");
    if (!(sigma > 0.0)) fail(where + ".sigma", "must be > 0");
    return Envelope::gaussian(k0, sigma);
  }
  if (kind == "tabulated") {
    check_keys(e, where, {"kind", "samples"}, strict, warnings);
    const json& arr = need(e, where, "samples");
    if (!arr.is_array() || arr.size() < 2)
      fail(where + ".samples", "must be an array of at least two [k, w] pairs");
    std::vector<std::pair<double, double>> samples;
    for (std::size_t j = 0; j < arr.size(); ++j) {
      const std::string sw = where + ".samples[" + std::to_string(j) + "]";
      if (!arr[j].is_array() || arr[j].size() != 2)
        fail(sw, "must be a [k, w] pair");
      samples.emplace_back(as_num(arr[j][0], sw + "[0]"),
                           as_num(arr[j][1], sw + "[1]"));
    }
    return Envelope::tabulated(std::move(samples));
  }
  fail(where + ".kind", "unknown envelope kind '" + kind +
                            "' (expected gaussian | tabulated)");
}

std::vector<Vec2> parse_directions(const json& j, const std::string& field) {
  auto one = [&](const json& v, const std::string& f) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(f, "must be an [x, y] pair");
    Vec2 d{v[0].get<double>(), v[1].get<double>()};
    if (!(norm(d) > 0.0)) fail(f, "must be a nonzero direction");
    return d;
  };
  if (!j.is_array() || j.empty())
    fail(field, "must be [x, y] or a list of [x, y]");
  if (j[0].is_number()) return {one(j, field)};
  std::vector<Vec2> out;
  for (std::size_t m = 0; m < j.size(); ++m)
    out.push_back(one(j[m], field + "[" + std::to_string(m) + "]"));
  return out;
}

DiscConfiguration parse_geometry(const json& g, bool strict,
                                 std::vector<std::string>& warnings) {
  const std::string where = "geometry";
  if (!g.is_object()) fail(where, "must be an object");
  check_keys(g, where, {"discs"}, strict, warnings);
  const json& arr = need(g, where, "discs");
  if (!arr.is_array() || arr.empty())
    fail(where + ".discs", "must be a nonempty array of [x, y] centers");
  std::vector<Vec2> centers;
  for (std::size_t m = 0; m < arr.size(); ++m) {
    const std::string cw = where + ".discs[" + std::to_string(m) + "]";
    if (!arr[m].is_array() || arr[m].size() != 2)
      fail(cw, "must be an [x, y] pair");
    centers.push_back(
        {as_num(arr[m][0], cw + "[0]"), as_num(arr[m][1], cw + "[1]")});
  }
  return validate_configuration(centers);
}

json dirs_json(const std::vector<Vec2>& dirs) {
  json out = json::array();
  for (const Vec2& d : dirs) out.push_back({d.x, d.y});
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);  // comments are not accepted
  } catch (const json::parse_error& e) {
    throw SchemaError("config is not valid JSON: " + std::string(e.what()));
  }
  RunConfig cfg = parse_config_json(j, strict);
  return cfg;
}

RunConfig parse_config_json(const json& j, bool strict) {
  if (!j.is_object()) fail("config", "top level must be a JSON object");
  RunConfig cfg;
  check_keys(j, "",
             {"task", "dispersion", "units", "eps_i", "channel_in",
              "channel_out", "model", "envelope", "grid", "tolerances",
              "geometry", "directions", "m_max", "bin_width", "k_values",
              "ws_limit", "escape", "seed", "out_dir"},
             strict, cfg.warnings);

  cfg.task = as_str(need(j, "", "task"), "task");
  const bool billiard_task = cfg.task == "billiard_s" ||
                             cfg.task == "billiard_classical" ||
                             cfg.task == "escape";
  if (cfg.task != "distribution" && cfg.task != "moments" &&
      cfg.task != "ws_limit" && cfg.task != "autocorrelation" && !billiard_task)
    fail("task",
         "unknown task '" + cfg.task +
             "' (expected distribution | moments | ws_limit | autocorrelation "
             "| billiard_s | billiard_classical | escape)");

  if (j.contains("dispersion")) {
    const std::string d = as_str(j["dispersion"], "dispersion");
    if (d == "em")
      cfg.dispersion = Dispersion::em_linear;
    else if (d == "qm")
      cfg.dispersion = Dispersion::qm_quadratic;
    else
      fail("dispersion", "must be \"em\" or \"qm\"");
  }

  if (j.contains("units")) {
    const json& u = j["units"];
    if (!u.is_object()) fail("units", "must be an object");
    check_keys(u, "units", {"hbar", "c", "mass"}, strict, cfg.warnings);
    cfg.options.units.hbar = opt_num(u, "units", "hbar", 1.0);
    cfg.options.units.c = opt_num(u, "units", "c", 1.0);
    cfg.options.units.mass = opt_num(u, "units", "mass", 0.5);
    if (!(cfg.options.units.hbar > 0.0)) fail("units.hbar", "must be > 0");
    if (!(cfg.options.units.c > 0.0)) fail("units.c", "must be > 0");
    if (!(cfg.options.units.mass > 0.0)) fail("units.mass", "must be > 0");
  }
  cfg.options.eps_i = opt_num(j, "", "eps_i", 0.0);

  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    if (!t.is_object()) fail("tolerances", "must be an object");
    check_keys(t, "tolerances", {"tail_threshold", "max_extensions"}, strict,
               cfg.warnings);
    cfg.options.tail_threshold =
        opt_num(t, "tolerances", "tail_threshold", cfg.options.tail_threshold);
    if (!(cfg.options.tail_threshold > 0.0))
      fail("tolerances.tail_threshold", "must be > 0");
    if (t.contains("max_extensions")) {
      const long long me = as_int(t["max_extensions"], "tolerances.max_extensions");
      if (me < 0) fail("tolerances.max_extensions", "must be >= 0");
      cfg.options.max_extensions = std::size_t(me);
    }
  }

  if (j.contains("seed")) {
    const json& s = j["seed"];
    if (!s.is_number_integer() ||
        (!s.is_number_unsigned() && s.get<long long>() < 0))
      fail("seed", "must be a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (j.contains("out_dir")) cfg.out_dir = as_str(j["out_dir"], "out_dir");

  const std::filesystem::path base = std::filesystem::current_path();
  if (j.contains("model"))
    cfg.model = parse_model(j["model"], strict, cfg.warnings, base);
  if (j.contains("envelope"))
    cfg.envelope = parse_envelope(j["envelope"], strict, cfg.warnings);
  if (j.contains("geometry"))
    cfg.geometry = parse_geometry(j["geometry"], strict, cfg.warnings);

  if (j.contains("channel_in")) {
    const long long c = as_int(j["channel_in"], "channel_in");
    if (c < 0) fail("channel_in", "must be >= 0");
    cfg.channel_in = int(c);
  }
  if (j.contains("channel_out")) {
    const long long c = as_int(j["channel_out"], "channel_out");
    if (c < 0) fail("channel_out", "must be >= 0");
    cfg.channel_out = int(c);
  }
  if (cfg.model) {
    if (cfg.channel_in >= cfg.model->n_channels())
      fail("channel_in", "outside the model's channel range");
    if (cfg.channel_out && *cfg.channel_out >= cfg.model->n_channels())
      fail("channel_out", "outside the model's channel range");
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_object()) fail("grid", "must be an object {lo, hi, n}");
    check_keys(g, "grid", {"lo", "hi", "n"}, strict, cfg.warnings);
    DelayGrid grid;
    grid.lo = as_num(need(g, "grid", "lo"), "grid.lo");
    grid.hi = as_num(need(g, "grid", "hi"), "grid.hi");
    const long long n = as_int(need(g, "grid", "n"), "grid.n");
    if (!(grid.lo < grid.hi)) fail("grid.hi", "must exceed grid.lo");
    if (n < 2) fail("grid.n", "must be >= 2");
    grid.n = std::size_t(n);
    cfg.grid = grid;
  }

  if (j.contains("ws_limit")) {
    const json& w = j["ws_limit"];
    if (!w.is_object()) fail("ws_limit", "must be an object {x0, sigmas}");
    check_keys(w, "ws_limit", {"x0", "sigmas"}, strict, cfg.warnings);
    cfg.carrier = as_num(need(w, "ws_limit", "x0"), "ws_limit.x0");
    const json& s = need(w, "ws_limit", "sigmas");
    if (!s.is_array() || s.size() < 2)
      fail("ws_limit.sigmas", "must be an array of at least two bandwidths");
    for (std::size_t m = 0; m < s.size(); ++m) {
      const double v = as_num(s[m], "ws_limit.sigmas[" + std::to_string(m) + "]");
      if (!(v > 0.0))
        fail("ws_limit.sigmas[" + std::to_string(m) + "]", "must be > 0");
      cfg.sigmas.push_back(v);
    }
  }

  if (j.contains("directions")) {
    const json& d = j["directions"];
    if (!d.is_object()) fail("directions", "must be an object {in, out}");
    check_keys(d, "directions", {"in", "out"}, strict, cfg.warnings);
    cfg.dirs_in = parse_directions(need(d, "directions", "in"), "directions.in");
    cfg.dirs_out =
        parse_directions(need(d, "directions", "out"), "directions.out");
  }
  if (j.contains("m_max")) {
    const long long m = as_int(j["m_max"], "m_max");
    if (m < 1) fail("m_max", "must be >= 1");
    cfg.m_max = int(m);
  }
  if (j.contains("bin_width")) {
    cfg.bin_width = as_num(j["bin_width"], "bin_width");
    if (!(cfg.bin_width > 0.0)) fail("bin_width", "must be > 0");
  }
  if (j.contains("k_values")) {
    const json& kv = j["k_values"];
    if (!kv.is_array() || kv.empty())
      fail("k_values", "must be a nonempty array of wavenumbers");
    for (std::size_t m = 0; m < kv.size(); ++m) {
      const double k = as_num(kv[m], "k_values[" + std::to_string(m) + "]");
      if (!(k > 0.0)) fail("k_values[" + std::to_string(m) + "]", "must be > 0");
      cfg.k_values.push_back(k);
    }
  }

  if (j.contains("escape")) {
    const json& e = j["escape"];
    if (!e.is_object())
      fail("escape", "must be an object {n_samples, s_max, window, n_grid}");
    check_keys(e, "escape", {"n_samples", "s_max", "window", "n_grid"}, strict,
               cfg.warnings);
    const long long ns = as_int(need(e, "escape", "n_samples"), "escape.n_samples");
    if (ns < 1) fail("escape.n_samples", "must be >= 1");
    cfg.n_samples = std::size_t(ns);
    cfg.s_max = as_num(need(e, "escape", "s_max"), "escape.s_max");
    if (!(cfg.s_max > 0.0)) fail("escape.s_max", "must be > 0");
    const json& w = need(e, "escape", "window");
    if (!w.is_array() || w.size() != 2)
      fail("escape.window", "must be a [start, end] pair");
    cfg.fit_window = {as_num(w[0], "escape.window[0]"),
                      as_num(w[1], "escape.window[1]")};
    if (!(cfg.fit_window.first >= 0.0 &&
          cfg.fit_window.first < cfg.fit_window.second &&
          cfg.fit_window.second <= cfg.s_max))
      fail("escape.window", "must satisfy 0 <= start < end <= s_max");
    if (e.contains("n_grid")) {
      const long long ng = as_int(e["n_grid"], "escape.n_grid");
      if (ng < 2) fail("escape.n_grid", "must be >= 2");
      cfg.survival_grid = std::size_t(ng);
    }
  }

  // Per-task block requirements.
  auto require_block = [&](bool present, const char* key) {
    if (!present)
      fail(key, "required for task '" + cfg.task + "'");
  };
  if (cfg.task == "distribution" || cfg.task == "moments" ||
      cfg.task == "autocorrelation") {
    require_block(cfg.model.has_value(), "model");
    require_block(cfg.envelope.has_value(), "envelope");
  }
  if (cfg.task == "ws_limit") {
    require_block(cfg.model.has_value(), "model");
    require_block(!cfg.sigmas.empty(), "ws_limit");
  }
  if (billiard_task) require_block(cfg.geometry.has_value(), "geometry");
  if (cfg.task == "billiard_s") require_block(!cfg.k_values.empty(), "k_values");
  if (cfg.task == "billiard_s" || cfg.task == "billiard_classical") {
    if (cfg.dirs_in.empty() || cfg.dirs_out.empty())
      fail("directions", "required for task '" + cfg.task + "'");
  }
  if (cfg.task == "escape") require_block(j.contains("escape"), "escape");
  if (cfg.task == "autocorrelation" && !cfg.channel_out)
    cfg.channel_out = cfg.channel_in;

  // Echo of the effective configuration, defaults included.
  json r;
  r["task"] = cfg.task;
  r["dispersion"] = cfg.dispersion == Dispersion::em_linear ? "em" : "qm";
  r["units"] = {{"hbar", cfg.options.units.hbar},
                {"c", cfg.options.units.c},
                {"mass", cfg.options.units.mass}};
  r["eps_i"] = cfg.options.eps_i;
  r["channel_in"] = cfg.channel_in;
  if (cfg.channel_out) r["channel_out"] = *cfg.channel_out;
  r["tolerances"] = {{"tail_threshold", cfg.options.tail_threshold},
                     {"max_extensions", cfg.options.max_extensions}};
  r["seed"] = cfg.seed;
  if (!cfg.out_dir.empty()) r["out_dir"] = cfg.out_dir;
  if (j.contains("model")) r["model"] = j["model"];
  if (j.contains("envelope")) r["envelope"] = j["envelope"];
  if (j.contains("grid"))
    r["grid"] = {{"lo", cfg.grid->lo}, {"hi", cfg.grid->hi}, {"n", cfg.grid->n}};
  if (j.contains("ws_limit"))
    r["ws_limit"] = {{"x0", cfg.carrier}, {"sigmas", cfg.sigmas}};
  if (cfg.geometry) {
    json discs = json::array();
    for (const Vec2& c : cfg.geometry->centers) discs.push_back({c.x, c.y});
    r["geometry"] = {{"discs", discs}};
  }
  if (cfg.task == "billiard_s" || cfg.task == "billiard_classical") {
    r["directions"] = {{"in", dirs_json(cfg.dirs_in)},
                       {"out", dirs_json(cfg.dirs_out)}};
    r["m_max"] = cfg.m_max;
  }
  if (cfg.task == "billiard_classical") r["bin_width"] = cfg.bin_width;
  if (cfg.task == "billiard_s") r["k_values"] = cfg.k_values;
  if (cfg.task == "escape")
    r["escape"] = {{"n_samples", cfg.n_samples},
                   {"s_max", cfg.s_max},
                   {"window", {cfg.fit_window.first, cfg.fit_window.second}},
                   {"n_grid", cfg.survival_grid}};
  cfg.resolved = std::move(r);
  return cfg;
}

}  // namespace delaykit
