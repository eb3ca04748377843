#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fraclab/barrier.hpp"
#include "fraclab/common.hpp"
#include "fraclab/io.hpp"
#include "fraclab/lattice.hpp"
#include "fraclab/minimize.hpp"
#include "fraclab/nonlocal.hpp"
#include "fraclab/potential.hpp"
#include "fraclab/setgeom.hpp"

namespace fraclab {

// ---------------------------------------------------------------------------
// Configuration.

struct ExperimentConfig {
  std::string experiment = "energy-growth";
  double s = 0.25;
  int dim = 1;
  double h = 1.0;
  long pad = 2;          // cells kept beyond the minimization ball
  long half_extent = 0;  // 0: size the box from the radii
  int near_radius = 4;
  double quad_tol = 1e-6;
  std::string potential = "quartic";  // or table:<csv path>
  double quartic_a = 0.25;
  std::string exterior = "halfspace";  // halfspace[:axis:threshold:sign] | constant:<v>
  std::vector<double> radii{16, 32, 64, 128};
  std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  double theta1 = 0.0, theta2 = 0.0, theta_star = 0.0;
  MinimizeConfig minimize{};
  std::uint64_t seed = 20240611;
  std::string out_dir = "out";
  bool dump_fields = false;

  // energy growth
  double slope_tol = 0.15;
  double ratio_cap = 1.3;      // s > 1/2: normalized energy ratio last / second radius
  double log_tol = 0.25;       // s = 1/2: relative variation of E / (R^{n-1} log R)
  double residual_tol = 0.2;

  // density
  double density_fraction = 0.25;  // floor = fraction * half the unit-ball volume
  double r_floor = 0.0;

  // level sets
  double level_theta = 0.9;
  double macro_h = 1.0 / 32;  // fixed macroscopic cell size
  double delta_cells = 4.0;
  double noise_cells = 1.0;

  // set geometry
  int corpus = 50;
  long box = 32;
  long margin = 2;
  std::vector<double> c_probe{0.01, 0.05, 0.1};
  int refine_cases = 10;
  double refine_tol = 0.05;
  int sobolev_sets = 100;
  double sobolev_radius = 6.0;
  double sobolev_h = 1.0 / 64;
  double ball_tol = 0.05;
  double analytic_tol = 0.01;

  // barrier
  double tau = 0.1;
  double barrier_r = 400.0;
  int c5_samples = 400;
  long barrier_cells = 4000;  // cells across B_R
  double al1_slack = 0.05;
  double al1_fraction = 0.99;
  double al2_ratio_max = 50.0;

  // iteration lemma on synthetic input
  std::string lemma_model = "power";  // power | constant
  double lemma_mu = 1.0;
  double lemma_nu = 2.0;
  double lemma_sigma = 0.5;
  double lemma_gamma = 2.0;
  double lemma_C = 2.0;
  double lemma_R_o = 2.0;
  int lemma_samples = 24;

  void validate() const {
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("s must lie in (0,1)");
    if (dim != 1 && dim != 2) throw ParameterError("dim must be 1 or 2");
    if (!(h > 0.0)) throw ParameterError("h must be > 0");
    if (pad < 0 || half_extent < 0) throw ParameterError("pad and half_extent must be >= 0");
    for (double t : {theta1, theta2})
      if (!(t > -1.0 && t < 1.0)) throw ParameterError("theta1, theta2 must lie in (-1,1)");
    if (!(theta_star <= std::min(theta1, theta2)))
      throw ParameterError("theta_star must not exceed min(theta1, theta2)");
    for (std::size_t k = 0; k < radii.size(); ++k) {
      if (!(radii[k] > 0.0)) throw ParameterError("radii must be > 0");
      if (k > 0 && !(radii[k] > radii[k - 1])) throw ParameterError("radii must be strictly increasing");
    }
    for (std::size_t k = 0; k < eps.size(); ++k) {
      if (!(eps[k] > 0.0)) throw ParameterError("eps values must be > 0");
      if (k > 0 && !(eps[k] < eps[k - 1])) throw ParameterError("eps sweep must be strictly decreasing");
    }
    if (!(level_theta > 0.0 && level_theta < 1.0)) throw ParameterError("level_theta must lie in (0,1)");
    if (!(macro_h > 0.0)) throw ParameterError("macro_h must be > 0");
    if (corpus < 1 || box < 4 || margin < 0) throw ParameterError("bad corpus parameters");
    for (double c : c_probe)
      if (!(c > 0.0)) throw ParameterError("c_probe values must be > 0");
    if (c_probe.empty()) throw ParameterError("c_probe needs at least one value");
    if (refine_cases < 0 || refine_cases > corpus) throw ParameterError("refine_cases must lie in [0, corpus]");
    if (sobolev_sets < 1) throw ParameterError("sobolev_sets must be >= 1");
    if (!(tau > 0.0)) throw ParameterError("tau must be > 0");
    if (c5_samples < 1 || barrier_cells < 2) throw ParameterError("bad barrier sampling parameters");
    minimize.validate();
  }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  const auto slash = v.find('/');
  if (slash != std::string::npos) {
    // allow fractions such as 1/64
    return parse_double(key, v.substr(0, slash)) / parse_double(key, v.substr(slash + 1));
  }
  const auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) throw ParameterError("config key '" + key + "': not a number: " + v);
  return out;
}

inline long parse_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ParameterError("config key '" + key + "': not an integer: " + v);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParameterError("config key '" + key + "': not a boolean: " + v);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (!tok.empty()) out.push_back(parse_double(key, tok));
  }
  return out;
}

inline std::string trim(std::string t) {
  t.erase(0, t.find_first_not_of(" \t\r"));
  const auto last = t.find_last_not_of(" \t\r");
  t.erase(last == std::string::npos ? 0 : last + 1);
  return t;
}

}  // namespace detail

/// Applies one key = value pair.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string& k = key;
  const std::string& v = value;
  auto D = [&] { return parse_double(k, v); };
  auto I = [&] { return static_cast<int>(parse_long(k, v)); };
  if (k == "experiment") c.experiment = v;
  else if (k == "s") c.s = D();
  else if (k == "dim") c.dim = I();
  else if (k == "h") c.h = D();
  else if (k == "pad") c.pad = parse_long(k, v);
  else if (k == "half_extent") c.half_extent = parse_long(k, v);
  else if (k == "near_radius") c.near_radius = I();
  else if (k == "quad_tol") c.quad_tol = D();
  else if (k == "potential") c.potential = v;
  else if (k == "quartic_a") c.quartic_a = D();
  else if (k == "exterior") c.exterior = v;
  else if (k == "radii") c.radii = parse_list(k, v);
  else if (k == "eps") c.eps = parse_list(k, v);
  else if (k == "theta1") c.theta1 = D();
  else if (k == "theta2") c.theta2 = D();
  else if (k == "theta_star") c.theta_star = D();
  else if (k == "max_iters") c.minimize.max_iters = I();
  else if (k == "grad_tol") c.minimize.grad_tol = D();
  else if (k == "energy_tol") c.minimize.energy_tol = D();
  else if (k == "armijo") c.minimize.armijo = D();
  else if (k == "max_backtracks") c.minimize.max_backtracks = I();
  else if (k == "seed") c.seed = static_cast<std::uint64_t>(parse_long(k, v));
  else if (k == "out") c.out_dir = v;
  else if (k == "dump_fields") c.dump_fields = parse_bool(k, v);
  else if (k == "slope_tol") c.slope_tol = D();
  else if (k == "ratio_cap") c.ratio_cap = D();
  else if (k == "log_tol") c.log_tol = D();
  else if (k == "residual_tol") c.residual_tol = D();
  else if (k == "density_fraction") c.density_fraction = D();
  else if (k == "r_floor") c.r_floor = D();
  else if (k == "level_theta") c.level_theta = D();
  else if (k == "macro_h") c.macro_h = D();
  else if (k == "delta_cells") c.delta_cells = D();
  else if (k == "noise_cells") c.noise_cells = D();
  else if (k == "corpus") c.corpus = I();
  else if (k == "box") c.box = parse_long(k, v);
  else if (k == "margin") c.margin = parse_long(k, v);
  else if (k == "c_probe") c.c_probe = parse_list(k, v);
  else if (k == "refine_cases") c.refine_cases = I();
  else if (k == "refine_tol") c.refine_tol = D();
  else if (k == "sobolev_sets") c.sobolev_sets = I();
  else if (k == "sobolev_radius") c.sobolev_radius = D();
  else if (k == "sobolev_h") c.sobolev_h = D();
  else if (k == "ball_tol") c.ball_tol = D();
  else if (k == "analytic_tol") c.analytic_tol = D();
  else if (k == "tau") c.tau = D();
  else if (k == "barrier_r") c.barrier_r = D();
  else if (k == "c5_samples") c.c5_samples = I();
  else if (k == "barrier_cells") c.barrier_cells = parse_long(k, v);
  else if (k == "al1_slack") c.al1_slack = D();
  else if (k == "al1_fraction") c.al1_fraction = D();
  else if (k == "al2_ratio_max") c.al2_ratio_max = D();
  else if (k == "lemma_model") c.lemma_model = v;
  else if (k == "lemma_mu") c.lemma_mu = D();
  else if (k == "lemma_nu") c.lemma_nu = D();
  else if (k == "lemma_sigma") c.lemma_sigma = D();
  else if (k == "lemma_gamma") c.lemma_gamma = D();
  else if (k == "lemma_C") c.lemma_C = D();
  else if (k == "lemma_R_o") c.lemma_R_o = D();
  else if (k == "lemma_samples") c.lemma_samples = I();
  else throw ParameterError("unknown config key '" + k + "'");
}

/// "key=value" from the command line.
inline void apply_override(ExperimentConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ParameterError("override must look like key=value: " + kv);
  set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
}

/// Flat key = value lines; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig c = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos)
      throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_override(c, line);
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& p, ExperimentConfig c = {}) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot open config " + p.string());
  return parse_config(f, std::move(c));
}

inline ExteriorData make_exterior(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(detail::trim(tok));
  if (parts.empty()) throw ParameterError("empty exterior spec");
  if (parts[0] == "halfspace") {
    if (parts.size() == 1) return ExteriorData::halfspace();
    if (parts.size() != 4) throw ParameterError("halfspace exterior is halfspace:axis:threshold:sign");
    return ExteriorData::halfspace(static_cast<int>(detail::parse_long("exterior", parts[1])),
                                   detail::parse_double("exterior", parts[2]),
                                   detail::parse_double("exterior", parts[3]));
  }
  if (parts[0] == "constant" && parts.size() == 2)
    return ExteriorData::constant(detail::parse_double("exterior", parts[1]));
  throw ParameterError("unknown exterior spec '" + spec + "'");
}

inline DoubleWell make_potential(const ExperimentConfig& c) {
  if (c.potential == "quartic") return DoubleWell::quartic(c.quartic_a);
  if (c.potential.rfind("table:", 0) == 0) {
    std::ifstream f(c.potential.substr(6));
    if (!f) throw IoError("cannot open potential table " + c.potential.substr(6));
    return read_tabulated_well(f);
  }
  throw ParameterError("unknown potential '" + c.potential + "'");
}

inline json config_to_json(const ExperimentConfig& c) {
  return {{"experiment", c.experiment},
          {"s", c.s},
          {"dim", c.dim},
          {"h", c.h},
          {"pad", c.pad},
          {"half_extent", c.half_extent},
          {"near_radius", c.near_radius},
          {"quad_tol", c.quad_tol},
          {"potential", c.potential},
          {"quartic_a", c.quartic_a},
          {"exterior", c.exterior},
          {"radii", c.radii},
          {"eps", c.eps},
          {"theta1", c.theta1},
          {"theta2", c.theta2},
          {"theta_star", c.theta_star},
          {"minimize",
           {{"max_iters", c.minimize.max_iters},
            {"grad_tol", c.minimize.grad_tol},
            {"energy_tol", c.minimize.energy_tol},
            {"armijo", c.minimize.armijo},
            {"max_backtracks", c.minimize.max_backtracks}}},
          {"seed", c.seed},
          {"slope_tol", c.slope_tol},
          {"ratio_cap", c.ratio_cap},
          {"log_tol", c.log_tol},
          {"residual_tol", c.residual_tol},
          {"density_fraction", c.density_fraction},
          {"r_floor", c.r_floor},
          {"level_theta", c.level_theta},
          {"macro_h", c.macro_h},
          {"delta_cells", c.delta_cells},
          {"noise_cells", c.noise_cells},
          {"corpus", c.corpus},
          {"box", c.box},
          {"margin", c.margin},
          {"c_probe", c.c_probe},
          {"refine_cases", c.refine_cases},
          {"refine_tol", c.refine_tol},
          {"sobolev_sets", c.sobolev_sets},
          {"sobolev_radius", c.sobolev_radius},
          {"sobolev_h", c.sobolev_h},
          {"ball_tol", c.ball_tol},
          {"analytic_tol", c.analytic_tol},
          {"tau", c.tau},
          {"barrier_r", c.barrier_r},
          {"c5_samples", c.c5_samples},
          {"barrier_cells", c.barrier_cells},
          {"al1_slack", c.al1_slack},
          {"al1_fraction", c.al1_fraction},
          {"al2_ratio_max", c.al2_ratio_max},
          {"lemma_model", c.lemma_model},
          {"lemma_mu", c.lemma_mu},
          {"lemma_nu", c.lemma_nu},
          {"lemma_sigma", c.lemma_sigma},
          {"lemma_gamma", c.lemma_gamma},
          {"lemma_C", c.lemma_C},
          {"lemma_R_o", c.lemma_R_o},
          {"lemma_samples", c.lemma_samples}};
}

// ---------------------------------------------------------------------------
// Reports.

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw ParameterError("table row width mismatch in " + name);
    rows.push_back(std::move(row));
  }
};

struct Criterion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct PowerFit {
  std::string name;
  std::size_t points = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double ci_lo = 0.0;  // 95% t interval
  double ci_hi = 0.0;
  double max_residual = 0.0;
};

struct ExperimentReport {
  std::string experiment;
  std::string status = "fail";  // pass | fail | inapplicable
  ExperimentConfig config;
  std::vector<Table> tables;  // tables[0] is the main series
  std::vector<PowerFit> fits;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<Criterion> criteria;
  std::string resolution;
  double wall_seconds = 0.0;
  int threads = 1;

  bool passed() const { return status == "pass"; }

  void check(std::string name, bool ok, std::string detail = {}) {
    criteria.push_back({std::move(name), ok, std::move(detail)});
  }
  void metric(std::string name, double v) { metrics.emplace_back(std::move(name), v); }

  const Table& table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw ParameterError("report has no table '" + name + "'");
  }
  double metric_value(const std::string& name) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return v;
    throw ParameterError("report has no metric '" + name + "'");
  }
  const Criterion& criterion(const std::string& name) const {
    for (const auto& c : criteria)
      if (c.name == name) return c;
    throw ParameterError("report has no criterion '" + name + "'");
  }

  void finish() {
    if (status == "inapplicable") return;
    status = !criteria.empty() && std::all_of(criteria.begin(), criteria.end(),
                                              [](const Criterion& c) { return c.passed; })
                 ? "pass"
                 : "fail";
  }
};

/// Least squares of log y on log x with a 95% t interval on the slope.
inline PowerFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, std::string name = {}) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("log-log fit needs >= 2 matching points");
  PowerFit f;
  f.name = std::move(name);
  f.points = x.size();
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(x.size()), ly(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0)) throw DomainError("log-log fit needs positive data");
    lx[k] = std::log(x[k]);
    ly[k] = std::log(y[k]);
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = ly[k] - (f.intercept + f.slope * lx[k]);
    sse += r * r;
    f.max_residual = std::max(f.max_residual, std::abs(r));
  }
  if (x.size() > 2) {
    f.stderr_slope = std::sqrt(sse / (n - 2.0) / sxx);
    const boost::math::students_t dist(n - 2.0);
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_lo = f.slope - t * f.stderr_slope;
    f.ci_hi = f.slope + t * f.stderr_slope;
  } else {
    f.stderr_slope = std::numeric_limits<double>::infinity();
    f.ci_lo = -std::numeric_limits<double>::infinity();
    f.ci_hi = std::numeric_limits<double>::infinity();
  }
  return f;
}

inline json report_to_json(const ExperimentReport& r, bool include_timing = true) {
  json j;
  j["experiment"] = r.experiment;
  j["status"] = r.status;
  j["config"] = config_to_json(r.config);
  j["resolution"] = r.resolution;
  json crit = json::array();
  for (const auto& c : r.criteria) crit.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["criteria"] = crit;
  json met = json::object();
  for (const auto& [k, v] : r.metrics) met[k] = v;
  j["metrics"] = met;
  json fits = json::array();
  for (const auto& f : r.fits)
    fits.push_back({{"name", f.name},
                    {"points", f.points},
                    {"slope", f.slope},
                    {"intercept", f.intercept},
                    {"stderr_slope", f.stderr_slope},
                    {"ci95", {f.ci_lo, f.ci_hi}},
                    {"max_residual", f.max_residual}});
  j["fits"] = fits;
  json series = json::array();
  for (std::size_t k = 0; k < r.tables.size(); ++k)
    series.push_back({{"name", r.tables[k].name},
                      {"file", k == 0 ? std::string("series.csv") : "series_" + r.tables[k].name + ".csv"},
                      {"columns", r.tables[k].columns},
                      {"rows", r.tables[k].rows.size()}});
  j["series"] = series;
  if (include_timing) j["timing"] = {{"wall_seconds", r.wall_seconds}, {"threads", r.threads}};
  return j;
}

inline void write_table_csv(std::ostream& os, const Table& t) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << fmt_double(row[c]);
    os << '\n';
  }
}

/// report.json, series.csv and one series_<name>.csv per extra table.
inline void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  {
    auto f = open_out(dir / "report.json");
    f << report_to_json(r).dump(2) << '\n';
  }
  for (std::size_t k = 0; k < r.tables.size(); ++k) {
    auto f = open_out(dir / (k == 0 ? std::string("series.csv") : "series_" + r.tables[k].name + ".csv"));
    write_table_csv(f, r.tables[k]);
  }
}

// ---------------------------------------------------------------------------
// Iteration lemma.

struct IterationLemmaReport {
  bool ind1 = false;
  bool ind2 = false;
  std::string violation;  // which hypothesis failed first, if any
  std::optional<double> first_violation_r;
  std::size_t ind2_checked = 0;
  double c = 0.0;
  long j1 = 0;
  long j2 = 0;
  double R_star = 0.0;
  std::string conclusion = "not reached";  // holds | violated | untested | not reached
  std::optional<double> conclusion_violation_r;
  std::size_t conclusion_checked = 0;
  double worst_conclusion_ratio = std::numeric_limits<double>::infinity();

  bool hypotheses_hold() const { return ind1 && ind2; }
  bool passed() const { return hypotheses_hold() && conclusion != "violated"; }
};

/// Checks the hypotheses of the growth lemma on sampled (r, V(r)) and, when
/// they hold, the conclusion beyond R_star. Between samples V is bounded
/// below by the value at the nearest smaller sample (V is nondecreasing);
/// beyond R_star the check is V(r) >= c gamma^{nu j} with gamma^j <= r.
inline IterationLemmaReport check_iteration_lemma(const std::vector<std::array<double, 2>>& samples,
                                                  double sigma, double nu, double gamma, double C,
                                                  double R_o, double mu) {
  if (!(sigma > 0.0 && nu > sigma)) throw ParameterError("need nu > sigma > 0");
  if (!(gamma > 1.0)) throw ParameterError("need gamma > 1");
  if (!(C > 1.0)) throw ParameterError("need C > 1");
  if (!(R_o > 1.0)) throw ParameterError("need R_o > 1");
  if (!(mu > 0.0)) throw ParameterError("need mu > 0");
  if (samples.empty()) throw PreconditionError("no samples");
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!(samples[k][0] > 0.0 && samples[k][1] > 0.0)) throw PreconditionError("samples must be positive");
    if (k > 0 && !(samples[k][0] > samples[k - 1][0])) throw PreconditionError("sample radii must increase");
    if (k > 0 && samples[k][1] < samples[k - 1][1]) throw PreconditionError("V samples must be nondecreasing");
  }
  // V at the largest sample radius <= r, with a relative slack so that exact
  // multiples like gamma * r land on their sample.
  auto lower = [&](double r) -> std::optional<double> {
    std::optional<double> v;
    for (const auto& p : samples)
      if (p[0] <= r * (1.0 + 1e-12)) v = p[1];
    return v;
  };

  IterationLemmaReport rep;
  const auto v_o = lower(R_o);
  if (!v_o) throw PreconditionError("no sample at or below R_o");
  rep.ind1 = *v_o >= mu;
  if (!rep.ind1) {
    rep.violation = "V(R_o) >= mu";
    rep.first_violation_r = R_o;
    return rep;
  }
  rep.ind2 = true;
  const double r_max = samples.back()[0];
  for (const auto& [r, V] : samples) {
    if (r < R_o || gamma * r > r_max * (1.0 + 1e-12)) continue;
    ++rep.ind2_checked;
    const double alpha = std::min(1.0, std::log(V) / std::log(r));
    const double lhs = std::pow(r, sigma) * alpha * std::pow(V, (nu - sigma) / nu);
    const double rhs = C * *lower(gamma * r);
    if (!(lhs <= rhs)) {
      rep.ind2 = false;
      rep.violation = "r^sigma alpha(r) V(r)^((nu-sigma)/nu) <= C V(gamma r)";
      rep.first_violation_r = r;
      return rep;
    }
  }

  long j1 = 0;
  while (std::pow(gamma, static_cast<double>(j1)) < R_o) ++j1;
  const double gn = std::pow(gamma, nu);
  rep.j1 = j1;
  rep.c = std::min({mu / std::pow(gamma, nu * static_cast<double>(j1)), std::pow(1.0 / (C * gn), nu / sigma),
                    std::pow(nu / (2.0 * C * gn), nu / sigma)});
  long j2 = 1;
  while (std::abs(std::log(rep.c)) / (static_cast<double>(j2) * std::log(gamma)) > nu / 2.0) ++j2;
  rep.j2 = j2;
  rep.R_star = std::pow(gamma, static_cast<double>(j1 + j2));

  for (const auto& [r, V] : samples) {
    if (r < rep.R_star * (1.0 - 1e-12)) continue;
    ++rep.conclusion_checked;
    long j = j1 + j2;
    while (std::pow(gamma, static_cast<double>(j + 1)) <= r * (1.0 + 1e-12)) ++j;
    const double bound = rep.c * std::pow(gamma, nu * static_cast<double>(j));
    const double ratio = V / bound;
    rep.worst_conclusion_ratio = std::min(rep.worst_conclusion_ratio, ratio);
    if (ratio < 1.0 && !rep.conclusion_violation_r) rep.conclusion_violation_r = r;
  }
  rep.conclusion = rep.conclusion_checked == 0 ? "untested" : rep.conclusion_violation_r ? "violated" : "holds";
  return rep;
}

inline void add_lemma(ExperimentReport& rep, const IterationLemmaReport& L, const std::string& prefix) {
  rep.metric(prefix + "c", L.c);
  rep.metric(prefix + "j1", static_cast<double>(L.j1));
  rep.metric(prefix + "j2", static_cast<double>(L.j2));
  rep.metric(prefix + "R_star", L.R_star);
  rep.metric(prefix + "ind2_checked", static_cast<double>(L.ind2_checked));
  rep.metric(prefix + "conclusion_checked", static_cast<double>(L.conclusion_checked));
  if (L.first_violation_r) rep.metric(prefix + "first_violation_r", *L.first_violation_r);
  if (L.conclusion_violation_r) rep.metric(prefix + "conclusion_violation_r", *L.conclusion_violation_r);
}

// ---------------------------------------------------------------------------
// Experiments.

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Box with `half` cells on each side of the origin (a dim-1 line or a square).
inline Lattice centered_box(int dim, double h, double radius, long pad, long fixed_half) {
  const long half = fixed_half > 0 ? fixed_half : static_cast<long>(std::ceil(radius / h)) + pad;
  return Lattice::centered(dim, h, half);
}

inline ExperimentReport start(const ExperimentConfig& cfg, const char* name) {
  cfg.validate();
  ExperimentReport rep;
  rep.experiment = name;
  rep.config = cfg;
  rep.threads = thread_count();
  return rep;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline void dump_field(const ExperimentConfig& cfg, const std::string& name, const ScalarField& u) {
  if (!cfg.dump_fields) return;
  auto f = open_out(std::filesystem::path(cfg.out_dir) / (name + ".csv"));
  write_field_csv(f, u);
}

}  // namespace detail

/// Regime exponent of the energy in B_R: n - 2s, n - 1 (times log R at s = 1/2).
inline double energy_exponent(int n, double s) { return s < 0.5 ? n - 2.0 * s : n - 1.0; }

inline ExperimentReport run_energy_growth(const ExperimentConfig& cfg) {
  const auto t0 = detail::Clock::now();
  auto rep = detail::start(cfg, "energy-growth");
  if (cfg.radii.size() < 4) throw ParameterError("energy growth needs >= 4 radii");
  const DoubleWell pot = make_potential(cfg);
  const ExteriorData ext = make_exterior(cfg.exterior);
  const int n = cfg.dim;
  const double s = cfg.s;

  Table t{"energy", {"R", "E_u", "E_psi", "converged", "iterations", "grad_norm", "cells"}, {}};
  std::vector<double> R_ok, Eu_ok, Ep_ok;
  for (double R : cfg.radii) {
    const Lattice lat = detail::centered_box(n, cfg.h, R + 2.0, cfg.pad, cfg.half_extent);
    const KernelTable kern = build_kernel(lat, s, cfg.near_radius, cfg.quad_tol);
    const CellSet omega = ball_mask(lat, R + 2.0);
    const auto res = minimize_energy(kern, pot, ScalarField(lat, ext), omega, cfg.minimize);
    const double Eu = energy_E(kern, pot, res.field, ball_mask(lat, R));
    const double Ep = energy_E(kern, pot, psi_field(lat, R), omega);
    t.add({R, Eu, Ep, res.converged ? 1.0 : 0.0, static_cast<double>(res.iterations), res.grad_norm,
           static_cast<double>(lat.size())});
    detail::dump_field(cfg, "field_R" + detail::fmt(R), res.field);
    if (!res.converged) continue;
    R_ok.push_back(R);
    Eu_ok.push_back(Eu);
    Ep_ok.push_back(Ep);
  }
  rep.tables.push_back(t);
  rep.resolution = std::to_string(n) + "D, h=" + detail::fmt(cfg.h) + ", largest box " +
                   std::to_string(static_cast<long>(t.rows.back().back())) + " cells";
  rep.check("usable radii >= 4", R_ok.size() >= 4, std::to_string(R_ok.size()) + " converged");
  if (R_ok.size() < 4) {
    rep.wall_seconds = detail::seconds_since(t0);
    rep.finish();
    return rep;
  }

  bool below = true;
  for (std::size_t k = 0; k < R_ok.size(); ++k) below = below && Eu_ok[k] <= Ep_ok[k];
  rep.check("minimizer energy below psi at every R", below);

  // smallest radius dropped from every fit
  const std::vector<double> R_fit(R_ok.begin() + 1, R_ok.end());
  const std::vector<double> Eu_fit(Eu_ok.begin() + 1, Eu_ok.end());
  const std::vector<double> Ep_fit(Ep_ok.begin() + 1, Ep_ok.end());
  const double expo = energy_exponent(n, s);
  rep.metric("theory_exponent", expo);
  if (is_half(s)) {
    // E / (R^{n-1} log R) should flatten out
    auto q = [&](const std::vector<double>& E, std::size_t k) {
      return E[k] / (std::pow(R_fit[k], n - 1.0) * std::log(R_fit[k]));
    };
    Table qt{"log_normalized", {"R", "q_u", "q_psi"}, {}};
    std::vector<double> qu, qp;
    for (std::size_t k = 0; k < R_fit.size(); ++k) {
      qu.push_back(q(Eu_fit, k));
      qp.push_back(q(Ep_fit, k));
      qt.add({R_fit[k], qu.back(), qp.back()});
    }
    rep.tables.push_back(qt);
    rep.fits.push_back(fit_loglog(R_fit, qu, "q_u"));
    rep.fits.push_back(fit_loglog(R_fit, qp, "q_psi"));
    const std::size_t m = qu.size();
    auto variation = [](double a, double b) { return std::abs(a - b) / std::max(a, b); };
    const double vu = variation(qu[m - 1], qu[m - 2]);
    const double vp = variation(qp[m - 1], qp[m - 2]);
    rep.metric("q_u_variation", vu);
    rep.metric("q_psi_variation", vp);
    rep.check("E/(R^(n-1) log R) stable over the two largest radii", vu < cfg.log_tol, detail::fmt(vu));
    rep.check("psi: E/(R^(n-1) log R) stable over the two largest radii", vp < cfg.log_tol, detail::fmt(vp));
  } else {
    const auto fu = fit_loglog(R_fit, Eu_fit, "E_u");
    const auto fp = fit_loglog(R_fit, Ep_fit, "E_psi");
    rep.fits.push_back(fu);
    rep.fits.push_back(fp);
    rep.metric("slope_u", fu.slope);
    rep.metric("slope_psi", fp.slope);
    rep.check("fit residuals", fu.max_residual < cfg.residual_tol && fp.max_residual < cfg.residual_tol,
              detail::fmt(std::max(fu.max_residual, fp.max_residual)));
    if (s < 0.5) {
      rep.check("energy exponent", std::abs(fu.slope - expo) <= cfg.slope_tol, detail::fmt(fu.slope));
    } else {
      rep.check("energy exponent", fu.slope <= expo + cfg.slope_tol, detail::fmt(fu.slope));
      const std::size_t m = R_fit.size();
      const double ratio = (Eu_fit[m - 1] / std::pow(R_fit[m - 1], n - 1.0)) /
                           (Eu_fit[0] / std::pow(R_fit[0], n - 1.0));
      rep.metric("normalized_ratio", ratio);
      rep.check("normalized energy ratio", ratio <= cfg.ratio_cap, detail::fmt(ratio));
    }
    rep.check("psi exponent", std::abs(fp.slope - expo) <= cfg.slope_tol, detail::fmt(fp.slope));
  }
  rep.wall_seconds = detail::seconds_since(t0);
  rep.finish();
  return rep;
}

inline double unit_ball_volume(int n) { return n == 1 ? 2.0 : std::numbers::pi; }

/// V(R) = |{u > theta} n B_R|.
inline double level_volume(const ScalarField& u, const CellSet& ball, double theta) {
  CompensatedSum acc;
  const double vol = u.lattice().cell_volume();
  for (std::size_t i : ball.indices())
    if (u[i] > theta) acc.add(vol);
  return acc.value();
}

struct DensityTrace {
  double theta = 0.0;
  std::vector<double> R;
  std::vector<double> V;
  std::vector<double> ratio;  // V / R^n

  bool monotone() const {
    for (std::size_t k = 1; k < V.size(); ++k)
      if (V[k] < V[k - 1]) return false;
    return true;
  }
};

inline DensityTrace density_trace(const ScalarField& u, const std::vector<double>& radii, double theta) {
  DensityTrace tr;
  tr.theta = theta;
  const int n = u.lattice().dim();
  for (double R : radii) {
    tr.R.push_back(R);
    tr.V.push_back(level_volume(u, ball_mask(u.lattice(), R), theta));
    tr.ratio.push_back(tr.V.back() / std::pow(R, n));
  }
  return tr;
}

inline ExperimentReport run_density(const ExperimentConfig& cfg) {
  const auto t0 = detail::Clock::now();
  auto rep = detail::start(cfg, "density");
  if (cfg.radii.empty()) throw ParameterError("density needs radii");
  const DoubleWell pot = make_potential(cfg);
  const ExteriorData ext = make_exterior(cfg.exterior);
  const int n = cfg.dim;
  const double s = cfg.s;
  const double R_dom = cfg.radii.back() + 2.0;
  const Lattice lat = detail::centered_box(n, cfg.h, R_dom, cfg.pad, cfg.half_extent);
  const KernelTable kern = build_kernel(lat, s, cfg.near_radius, cfg.quad_tol);
  const auto res = minimize_energy(kern, pot, ScalarField(lat, ext), ball_mask(lat, R_dom), cfg.minimize);
  detail::dump_field(cfg, "field", res.field);
  rep.resolution = std::to_string(n) + "D, " + std::to_string(lat.size()) + " cells, h=" + detail::fmt(cfg.h);
  rep.metric("iterations", res.iterations);
  rep.metric("grad_norm", res.grad_norm);
  rep.check("minimizer converged", res.converged, res.status);

  // u(0) is read in the cell holding the origin (its lower-left corner).
  const auto origin = lat.cell_of({0.0, 0.0});
  const double u0 = res.field[*origin];
  rep.metric("u0", u0);

  const auto tr2 = density_trace(res.field, cfg.radii, cfg.theta2);
  const auto trs = density_trace(res.field, cfg.radii, cfg.theta_star);
  Table t{"density", {"R", "V_theta2", "ratio_theta2", "V_theta_star", "ratio_theta_star"}, {}};
  for (std::size_t k = 0; k < cfg.radii.size(); ++k)
    t.add({cfg.radii[k], tr2.V[k], tr2.ratio[k], trs.V[k], trs.ratio[k]});
  rep.tables.push_back(t);

  if (!(u0 > cfg.theta1)) {
    rep.status = "inapplicable";
    rep.check("u(0) > theta1", false, "u(0) = " + detail::fmt(u0));
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
  }
  rep.check("u(0) > theta1", true, "u(0) = " + detail::fmt(u0));
  rep.check("V nondecreasing", tr2.monotone() && trs.monotone());

  const double floor = cfg.density_fraction * unit_ball_volume(n) / 2.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cfg.radii.size(); ++k)
    if (cfg.radii[k] >= cfg.r_floor) min_ratio = std::min(min_ratio, tr2.ratio[k]);
  rep.metric("density_floor", floor);
  rep.metric("min_ratio", min_ratio);
  rep.check("V(R)/R^n above floor", min_ratio >= floor, detail::fmt(min_ratio) + " vs " + detail::fmt(floor));

  // r^sigma V(r)^{(n-sigma)/n} <= C V(2r) wherever 2r is in the sweep
  const double sigma = s < 0.5 ? 2.0 * s : 1.0;
  Table d{"doubling", {"r", "V_r", "V_2r", "lhs", "ratio"}, {}};
  double C_emp = 0.0;
  bool finite = true;
  for (std::size_t a = 0; a < cfg.radii.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.radii.size(); ++b) {
      if (cfg.radii[b] != 2.0 * cfg.radii[a]) continue;
      const double lhs = std::pow(cfg.radii[a], sigma) * std::pow(trs.V[a], (n - sigma) / n);
      const double ratio = lhs / trs.V[b];
      finite = finite && std::isfinite(ratio);
      C_emp = std::max(C_emp, ratio);
      d.add({cfg.radii[a], trs.V[a], trs.V[b], lhs, ratio});
    }
  rep.tables.push_back(d);
  rep.metric("doubling_C", C_emp);
  rep.check("doubling inequality with one finite C", finite && !d.rows.empty(), "C = " + detail::fmt(C_emp));

  // feed the measured V into the growth lemma
  if (finite && trs.V.front() > 0.0 && cfg.radii.front() > 1.0) {
    std::vector<std::array<double, 2>> samples;
    for (std::size_t k = 0; k < cfg.radii.size(); ++k) samples.push_back({cfg.radii[k], trs.V[k]});
    const double C = std::max(C_emp, 1.0) * (1.0 + 1e-9);
    const auto L = check_iteration_lemma(samples, sigma, n, 2.0, C, cfg.radii.front(), trs.V.front());
    add_lemma(rep, L, "lemma_");
    rep.check("growth lemma on measured V", L.passed(),
              L.hypotheses_hold() ? "conclusion " + L.conclusion : L.violation);
  }
  rep.wall_seconds = detail::seconds_since(t0);
  rep.finish();
  return rep;
}

inline ExperimentReport run_levelset_convergence(const ExperimentConfig& cfg) {
  const auto t0 = detail::Clock::now();
  auto rep = detail::start(cfg, "levelset");
  if (cfg.eps.size() < 2) throw ParameterError("level-set sweep needs >= 2 eps values");
  const DoubleWell pot = make_potential(cfg);
  const ExteriorData ext = make_exterior(cfg.exterior);
  const auto* hs = std::get_if<HalfspaceSign>(&ext.variant());
  const int n = cfg.dim;

  Table t{"levelset", {"eps", "h_micro", "cells", "converged", "iterations", "level_cells", "distance",
                       "distance_cells"}, {}};
  std::vector<double> dist;
  for (double eps : cfg.eps) {
    // u_eps(x) = u(x / eps): B_1 at scale eps is B_{1/eps} at unit scale
    const double R = 1.0 / eps;
    const double hu = cfg.macro_h / eps;
    const Lattice lat = detail::centered_box(n, hu, R + 2.0, cfg.pad, 0);
    const KernelTable kern = build_kernel(lat, cfg.s, cfg.near_radius, cfg.quad_tol);
    const auto res = minimize_energy(kern, pot, ScalarField(lat, ext), ball_mask(lat, R + 2.0), cfg.minimize);
    double d = 0.0;
    std::size_t count = 0;
    for (std::size_t i : ball_mask(lat, R).indices()) {
      if (std::abs(res.field[i]) > cfg.level_theta) continue;
      ++count;
      const double gap = hs ? std::abs(lat.center(i)[hs->axis] - hs->threshold)
                            : std::numeric_limits<double>::infinity();  // no interface to approach
      d = std::max(d, gap * eps);
    }
    t.add({eps, hu, static_cast<double>(lat.size()), res.converged ? 1.0 : 0.0,
           static_cast<double>(res.iterations), static_cast<double>(count), d, d / cfg.macro_h});
    detail::dump_field(cfg, "field_eps" + detail::fmt(eps), res.field);
    if (res.converged) dist.push_back(d);
  }
  rep.tables.push_back(t);
  rep.resolution = std::to_string(n) + "D, macro cell " + detail::fmt(cfg.macro_h);
  rep.check("usable eps >= 2", dist.size() >= 2, std::to_string(dist.size()) + " converged");
  if (dist.size() >= 2) {
    bool mono = true;
    for (std::size_t k = 1; k < dist.size(); ++k)
      mono = mono && dist[k] <= dist[k - 1] + cfg.noise_cells * cfg.macro_h;
    rep.check("distance nonincreasing", mono);
    const double last = dist.back() / cfg.macro_h;
    rep.metric("final_distance_cells", last);
    rep.check("final distance within target", last <= cfg.delta_cells,
              detail::fmt(last) + " cells vs " + detail::fmt(cfg.delta_cells));
  }
  rep.wall_seconds = detail::seconds_since(t0);
  rep.finish();
  return rep;
}

inline ExperimentReport run_gmt_suite(const ExperimentConfig& cfg) {
  const auto t0 = detail::Clock::now();
  auto rep = detail::start(cfg, "gmt");
  // always 2D; cfg.dim is not consulted
  const Lattice lat = Lattice::square(cfg.h, 0, cfg.box);
  const auto corpus = gmt_corpus(lat, cfg.corpus, cfg.seed, cfg.margin);
  const KernelTable kern = build_kernel(lat, cfg.s, cfg.near_radius, cfg.quad_tol);

  std::vector<std::array<GmtReport, 8>> per(corpus.size());
  if (cfg.c_probe.size() > 8) throw ParameterError("at most 8 c_probe values");
  parallel_for(corpus.size(), [&](std::size_t k) {
    for (std::size_t c = 0; c < cfg.c_probe.size(); ++c)
      per[k][c] = check_gmt(kern, corpus[k].A, corpus[k].B, cfg.c_probe[c]);
  });
  Table t{"gmt", {"case", "c_probe", "measure_A", "measure_B", "regime", "L", "bound", "ratio", "b_floored"}, {}};
  bool positive = true;
  for (std::size_t c = 0; c < cfg.c_probe.size(); ++c) {
    double mins[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < corpus.size(); ++k) {
      const auto& g = per[k][c];
      t.add({static_cast<double>(k), cfg.c_probe[c], g.measure_A, g.measure_B, static_cast<double>(g.regime),
             g.L, g.bound, g.ratio, g.b_floored ? 1.0 : 0.0});
      positive = positive && g.ratio > 0.0 && std::isfinite(g.ratio);
      mins[g.regime - 1] = std::min(mins[g.regime - 1], g.ratio);
    }
    for (int r = 0; r < 2; ++r)
      if (std::isfinite(mins[r]))
        rep.metric("min_ratio_regime" + std::to_string(r + 1) + "_c" + detail::fmt(cfg.c_probe[c]), mins[r]);
  }
  rep.tables.push_back(t);
  rep.resolution = "2D, " + std::to_string(lat.size()) + " cells, h=" + detail::fmt(cfg.h);
  rep.check("all ratios strictly positive", positive);

  if (cfg.s < 0.5 && cfg.refine_cases > 0) {
    const Lattice fine = refine(lat);
    const KernelTable fk = build_kernel(fine, cfg.s, cfg.near_radius, cfg.quad_tol);
    const auto m = static_cast<std::size_t>(cfg.refine_cases);
    std::vector<double> fr(m);
    parallel_for(m, [&](std::size_t k) {
      fr[k] = check_gmt(fk, refine(corpus[k].A, fine), refine(corpus[k].B, fine), cfg.c_probe.front()).ratio;
    });
    Table rt{"refinement", {"case", "ratio_coarse", "ratio_fine", "relative_change"}, {}};
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double rc = per[k][0].ratio;
      const double rel = std::abs(fr[k] - rc) / rc;
      worst = std::max(worst, rel);
      rt.add({static_cast<double>(k), rc, fr[k], rel});
    }
    rep.tables.push_back(rt);
    rep.metric("refinement_worst_change", worst);
    rep.check("ratios stable under refinement", worst <= cfg.refine_tol, detail::fmt(worst));
  }
  rep.wall_seconds = detail::seconds_since(t0);
  rep.finish();
  return rep;
}

inline ExperimentReport run_sobolev_suite(const ExperimentConfig& cfg) {
  const auto t0 = detail::Clock::now();
  auto rep = detail::start(cfg, "sobolev");
  const double s = cfg.s;

  // 1D: E = [-1, 1], x the cell right of the center; the complement mass is 1/s.
  {
    const long half = static_cast<long>(std::llround(2.0 / cfg.sobolev_h));
    const Lattice lat = Lattice::centered(1, cfg.sobolev_h, half);
    const KernelTable kern = build_kernel(lat, s, cfg.near_radius, cfg.quad_tol);
    CellSet E(lat);
    for (std::size_t i = 0; i < lat.size(); ++i)
      if (std::abs(lat.center(i)[0]) < 1.0) E.set(i);
    const auto x = *lat.cell_of({0.0, 0.0});
    const auto r = sobolev_set_bound(kern, E, x);
    const double ref = 1.0 / s;
    const double rel = std::abs(r.lhs - ref) / ref;
    rep.tables.push_back({"interval", {"h", "measure", "lhs", "reference", "relative_error"}, {}});
    rep.tables.back().add({cfg.sobolev_h, r.measure, r.lhs, ref, rel});
    rep.metric("interval_lhs", r.lhs);
    rep.check("interval lhs matches 1/s", rel <= cfg.analytic_tol, detail::fmt(rel));
  }

  // 2D: ball around x against random sets of the same measure through x
  const long half = cfg.box / 2;
  const Lattice lat = Lattice::centered(2, cfg.h, half);
  const KernelTable kern = build_kernel(lat, s, cfg.near_radius, cfg.quad_tol);
  const auto x = *lat.cell_of({0.0, 0.0});
  const CellSet ball = ball_mask(lat, lat.center(x), cfg.sobolev_radius);
  const auto b = sobolev_set_bound(kern, ball, x);
  std::mt19937_64 rng(cfg.seed);
  std::vector<CellSet> sets;
  for (int k = 0; k < cfg.sobolev_sets; ++k)
    sets.push_back(random_set_with_measure(lat, rng, x, ball.count(), cfg.margin));
  std::vector<SobolevReport> rs(sets.size());
  parallel_for(sets.size(), [&](std::size_t k) { rs[k] = sobolev_set_bound(kern, sets[k], x); });
  Table t{"sets", {"case", "is_ball", "measure", "lhs", "constant"}, {}};
  t.add({-1.0, 1.0, b.measure, b.lhs, b.constant});
  double min_c = std::numeric_limits<double>::infinity();
  bool positive = b.constant > 0.0;
  for (std::size_t k = 0; k < rs.size(); ++k) {
    t.add({static_cast<double>(k), 0.0, rs[k].measure, rs[k].lhs, rs[k].constant});
    min_c = std::min(min_c, rs[k].constant);
    positive = positive && rs[k].constant > 0.0;
  }
  rep.tables.insert(rep.tables.begin(), t);
  rep.resolution = "1D h=" + detail::fmt(cfg.sobolev_h) + "; 2D " + std::to_string(lat.size()) + " cells";
  rep.metric("ball_constant", b.constant);
  rep.metric("corpus_min_constant", min_c);
  rep.check("all constants positive", positive);
  rep.check("ball attains the corpus minimum", b.constant <= min_c * (1.0 + cfg.ball_tol),
            detail::fmt(b.constant) + " vs " + detail::fmt(min_c));
  rep.wall_seconds = detail::seconds_since(t0);
  rep.finish();
  return rep;
}

inline ExperimentReport run_barrier(const ExperimentConfig& cfg) {
  const auto t0 = detail::Clock::now();
  auto rep = detail::start(cfg, "barrier");
  const double C5 = estimate_C5(cfg.s, cfg.barrier_r, cfg.c5_samples);
  const auto b = BarrierSpec::from_r(cfg.s, cfg.tau, cfg.barrier_r, C5);
  const double h = 2.0 * b.R / static_cast<double>(cfg.barrier_cells);
  const long half = static_cast<long>(std::ceil(b.R / h)) + 2;
  const Lattice lat = Lattice::centered(1, h, half);
  const auto a1 = verify_al1(b, lat, cfg.al1_slack, cfg.al1_fraction);
  const auto a2 = verify_al2(b, lat);
  const auto prof = radial_profile(b, 501);
  bool outside_one = true;
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (std::abs(lat.center(i)[0]) >= b.R) outside_one = outside_one && eval_w(b, lat.center(i)[0]) == 1.0;
  for (const auto& p : prof)
    if (p[0] >= b.R) outside_one = outside_one && p[1] == 1.0;

  Table t{"profile", {"r", "w"}, {}};
  for (const auto& p : prof) t.add({p[0], p[1]});
  rep.tables.push_back(t);
  Table hist{"al1_histogram", {"bin", "count"}, {}};
  for (std::size_t k = 0; k < a1.histogram.size(); ++k)
    hist.add({static_cast<double>(k), static_cast<double>(a1.histogram[k])});
  rep.tables.push_back(hist);
  rep.resolution = "1D, " + std::to_string(lat.size()) + " cells, h=" + detail::fmt(h);
  for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{
           {"C5", b.C5}, {"C_o", b.C_o}, {"R", b.R}, {"beta", b.beta}, {"al1_fraction", a1.fraction},
           {"al1_worst_ratio", a1.worst_ratio}, {"al2_sup_q", a2.sup_q}, {"al2_inf_q", a2.inf_q},
           {"al2_C", a2.C}, {"al2_ratio", a2.ratio}})
    rep.metric(k, v);
  rep.check("al1 holds at the required fraction", a1.passed, detail::fmt(a1.fraction));
  rep.check("al2 constant finite", a2.finite, "C = " + detail::fmt(a2.C));
  rep.check("al2 upper/lower ratio", a2.finite && a2.ratio < cfg.al2_ratio_max, detail::fmt(a2.ratio));
  rep.check("w = 1 outside B_R", outside_one);
  rep.wall_seconds = detail::seconds_since(t0);
  rep.finish();
  return rep;
}

/// Synthetic V on radii R_o gamma^k: mu r^nu ("power") or mu ("constant").
inline ExperimentReport run_iterate(const ExperimentConfig& cfg) {
  const auto t0 = detail::Clock::now();
  auto rep = detail::start(cfg, "iterate");
  if (cfg.lemma_samples < 1) throw ParameterError("lemma_samples must be >= 1");
  std::vector<std::array<double, 2>> samples;
  Table t{"samples", {"r", "V"}, {}};
  for (int k = 0; k < cfg.lemma_samples; ++k) {
    const double r = cfg.lemma_R_o * std::pow(cfg.lemma_gamma, k);
    double V = 0.0;
    if (cfg.lemma_model == "power") V = cfg.lemma_mu * std::pow(r, cfg.lemma_nu);
    else if (cfg.lemma_model == "constant") V = cfg.lemma_mu;
    else throw ParameterError("lemma_model must be power or constant");
    samples.push_back({r, V});
    t.add({r, V});
  }
  rep.tables.push_back(t);
  const auto L = check_iteration_lemma(samples, cfg.lemma_sigma, cfg.lemma_nu, cfg.lemma_gamma, cfg.lemma_C,
                                       cfg.lemma_R_o, cfg.lemma_mu * (cfg.lemma_model == "power"
                                                                          ? std::pow(cfg.lemma_R_o, cfg.lemma_nu)
                                                                          : 1.0));
  add_lemma(rep, L, "");
  rep.resolution = std::to_string(samples.size()) + " samples";
  rep.check("hypotheses hold", L.hypotheses_hold(),
            L.first_violation_r ? L.violation + " fails at r = " + detail::fmt(*L.first_violation_r) : "");
  rep.check("conclusion", L.hypotheses_hold() && L.conclusion != "violated", L.conclusion);
  rep.wall_seconds = detail::seconds_since(t0);
  rep.finish();
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const std::string& e = cfg.experiment;
  if (e == "energy-growth") return run_energy_growth(cfg);
  if (e == "density") return run_density(cfg);
  if (e == "levelset") return run_levelset_convergence(cfg);
  if (e == "gmt") return run_gmt_suite(cfg);
  if (e == "sobolev") return run_sobolev_suite(cfg);
  if (e == "barrier") return run_barrier(cfg);
  if (e == "iterate") return run_iterate(cfg);
  throw ParameterError("unknown experiment '" + e + "'");
}

}  // namespace fraclab
