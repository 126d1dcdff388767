#pragma once

// Config-driven runs behind the command line tool: effective model export,
// epsilon sweeps with rate fits, the property suite and raw metric dumps.
// Every run writes CSV files plus two-column plot data into an output
// directory; nothing in the output depends on timing or thread count.

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hjhom/alexander.hpp"
#include "hjhom/config.hpp"
#include "hjhom/solver.hpp"

namespace hjhom {

/// Raised by the property suite when a check misses its threshold.
class PropertyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitResolution = 3, kExitProperty = 4 };

// ---------------------------------------------------------------------------
// configuration

inline const std::set<std::string>& harness_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k(hamiltonian_config_keys().begin(), hamiltonian_config_keys().end());
    for (const char* s :
         {"grid.dt", "grid.dx", "grid.vmax", "grid.quadrature", "effective.n_max", "effective.velocity_box",
          "effective.velocity_points", "effective.momentum_box", "effective.momentum_points", "effective.work_budget",
          "sweep.eps", "sweep.t", "targets.count", "targets.radius", "initial", "initial.p", "seed",
          "rate.check_probe", "properties.horizon", "properties.sample_size", "properties.refine_horizon",
          "properties.geodesic_scales", "properties.geodesic_speeds", "properties.lemma_times",
          "properties.oracle_p", "properties.oracle_time", "properties.envelope_speeds", "metric.horizon",
          "metric.retention"})
      k.insert(s);
    return k;
  }();
  return keys;
}

struct RunContext {
  std::filesystem::path out_dir = ".";
  int threads = 1;
  bool verbose = false;
  std::ostream* log = nullptr;  // progress lines when verbose

  void note(const std::string& s) const {
    if (verbose && log) *log << s << std::endl;
  }
};

struct Problem {
  HamiltonianSpec original;
  HamiltonianSpec working;
  double shift = 0.0;
  LagrangianField lagrangian;
  LatticeSpec lattice;
};

namespace detail {

inline int reciprocal_of(const Config& cfg, const std::string& key, int fallback) {
  if (!cfg.has(key)) return fallback;
  const double v = cfg.get_double(key, 1.0 / fallback);
  if (!(v > 0.0)) throw ConfigParseError(cfg.line_of(key), key + " must be positive");
  const double inv = 1.0 / v;
  const auto n = static_cast<int>(std::llround(inv));
  if (n < 1 || std::abs(inv - n) > 1e-9 * inv)
    throw ConfigParseError(cfg.line_of(key), key + " must be 1/n for a whole n");
  return n;
}

}  // namespace detail

/// Hamiltonian, normalization, Lagrangian and lattice from a config.
/// grid.vmax defaults to 4 max sqrt(V) of the working potential.
inline Problem problem_from_config(const Config& cfg) {
  cfg.require_known(harness_config_keys());
  Problem pr;
  pr.original = spec_from_config(cfg);
  std::tie(pr.working, pr.shift) = normalize(pr.original);
  pr.lagrangian = build_lagrangian(pr.working);
  pr.lattice.steps_per_unit = detail::reciprocal_of(cfg, "grid.dt", 8);
  pr.lattice.cells_per_unit = detail::reciprocal_of(cfg, "grid.dx", 16);
  const double vdefault = 4.0 * std::sqrt(std::max(pr.working.potential_upper_bound(), 1.0));
  pr.lattice.vmax = cfg.get_double("grid.vmax", vdefault);
  try {
    pr.lattice.quadrature = quadrature_from_string(cfg.get_string("grid.quadrature", "auto"));
  } catch (const ConfigError& e) {
    throw ConfigParseError(cfg.line_of("grid.quadrature"), e.what());
  }
  try {
    pr.lattice.validate();
  } catch (const ConfigError& e) {
    throw ConfigParseError(cfg.line_of("grid.vmax"), e.what());
  }
  return pr;
}

inline EffectiveOptions effective_options_from_config(const Config& cfg, const Problem& pr, int threads) {
  EffectiveOptions o;
  o.n_max = static_cast<int>(cfg.get_int("effective.n_max", 64));
  o.velocity_box = cfg.get_double("effective.velocity_box", std::min(4.0, pr.lattice.vmax));
  o.velocity_points = static_cast<int>(cfg.get_int("effective.velocity_points", 65));
  o.momentum_box = cfg.get_double("effective.momentum_box", 3.0);
  o.momentum_points = static_cast<int>(cfg.get_int("effective.momentum_points", 61));
  o.work_budget = cfg.get_double("effective.work_budget", kInf);
  o.threads = threads;
  if (o.n_max < 2 || (o.n_max & (o.n_max - 1)) != 0)
    throw ConfigParseError(cfg.line_of("effective.n_max"), "effective.n_max must be a power of two >= 2");
  if (o.velocity_points < 3 || o.momentum_points < 3)
    throw ConfigParseError(cfg.line_of("effective.velocity_points"), "grids need at least 3 points");
  return o;
}

inline InitialData initial_from_config(const Config& cfg, int dim) {
  const std::string kind = cfg.get_string("initial", "cone");
  if (kind == "cone") return cone_data(dim);
  if (kind == "affine") {
    auto p = cfg.get_list("initial.p", Vec(static_cast<std::size_t>(dim), 0.0));
    if (static_cast<int>(p.size()) != dim) throw ConfigParseError(cfg.line_of("initial.p"), "initial.p has the wrong length");
    return affine_data(p);
  }
  throw ConfigParseError(cfg.line_of("initial"), "unknown initial data '" + kind + "' (cone | affine)");
}

/// Fixed target set: evenly spaced on [-R, R] in 1-d, otherwise a
/// golden-angle spiral filling the ball of radius R.
inline std::vector<Vec> target_points(int dim, int count, double radius) {
  std::vector<Vec> out;
  if (count < 1) throw ConfigError("targets.count must be positive");
  for (int i = 0; i < count; ++i) {
    const double u = count == 1 ? 0.0 : -1.0 + 2.0 * i / (count - 1);
    Vec y(static_cast<std::size_t>(dim), 0.0);
    if (dim == 1) {
      y[0] = radius * u;
    } else {
      const double rr = radius * std::sqrt(static_cast<double>(i) / std::max(1, count - 1));
      const double ang = 2.39996322972865332 * i;
      y[0] = rr * std::cos(ang);
      y[1] = rr * std::sin(ang);
    }
    out.push_back(std::move(y));
  }
  return out;
}

// ---------------------------------------------------------------------------
// output helpers

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

inline std::ofstream open_out(const RunContext& ctx, const std::string& name) {
  std::filesystem::create_directories(ctx.out_dir);
  std::ofstream os(ctx.out_dir / name, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (ctx.out_dir / name).string());
  return os;
}

inline void write_plot_data(const RunContext& ctx, const std::string& name, const std::string& title,
                            const std::vector<std::pair<double, double>>& xy) {
  auto os = open_out(ctx, name);
  os << "# " << title << "\n";
  for (const auto& [a, b] : xy) os << fmt(a) << " " << fmt(b) << "\n";
}

// ---------------------------------------------------------------------------
// rate fitting

struct PowerFit {
  double beta = std::numeric_limits<double>::quiet_NaN();
  double prefactor = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();  // rms of log residuals
};

/// Least squares of log error against log eps.
inline PowerFit fit_power_law(const std::vector<double>& eps, const std::vector<double>& err) {
  PowerFit f;
  const std::size_t n = eps.size();
  if (n < 2 || err.size() != n) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eps[i] > 0.0) || !(err[i] > 0.0)) return f;
    const double x = std::log(eps[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return f;
  f.beta = (n * sxy - sx * sy) / den;
  const double a = (sy - f.beta * sx) / n;
  f.prefactor = std::exp(a);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::log(err[i]) - (a + f.beta * std::log(eps[i]));
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

struct LogFit {
  double constant = std::numeric_limits<double>::quiet_NaN();  // C in C eps log(C + t / eps)
  double residual = std::numeric_limits<double>::quiet_NaN();
};

/// One-parameter fit err ~ C eps log(C + t / eps) in log space, golden-section
/// search over log C.
inline LogFit fit_log_corrected(const std::vector<double>& eps, const std::vector<double>& err, double t) {
  LogFit f;
  if (eps.empty() || eps.size() != err.size()) return f;
  for (double e : err)
    if (!(e > 0.0)) return f;
  auto loss = [&](double lc) {
    const double C = std::exp(lc);
    double ss = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double model = C * eps[i] * std::log(C + t / eps[i]);
      if (!(model > 0.0)) return kInf;
      const double r = std::log(err[i]) - std::log(model);
      ss += r * r;
    }
    return ss / static_cast<double>(eps.size());
  };
  double arg = 0.0;
  const double best = detail::golden_min(loss, std::log(1e-8), std::log(1e8), 200, arg);
  f.constant = std::exp(arg);
  f.residual = std::sqrt(best);
  return f;
}

struct RateReport {
  std::vector<double> eps;
  std::vector<double> error;   // sup over targets of |u^eps - ubar|
  std::vector<Vec> worst_target;
  PowerFit fit;
  LogFit log_fit;
  double beta_without_largest = std::numeric_limits<double>::quiet_NaN();
  double beta_delta = std::numeric_limits<double>::quiet_NaN();
  double probe = 0.0;          // sup |ubar(n_max) - ubar(2 n_max)|
  bool degenerate = false;     // every error at round-off level
  int n_max = 0;
};

inline RateReport fit_rate(std::vector<double> eps, std::vector<double> err, double t) {
  RateReport r;
  r.eps = std::move(eps);
  r.error = std::move(err);
  r.fit = fit_power_law(r.eps, r.error);
  r.log_fit = fit_log_corrected(r.eps, r.error, t);
  if (r.eps.size() >= 3) {
    std::size_t big = 0;
    for (std::size_t i = 1; i < r.eps.size(); ++i)
      if (r.eps[i] > r.eps[big]) big = i;
    std::vector<double> e2, r2;
    for (std::size_t i = 0; i < r.eps.size(); ++i)
      if (i != big) {
        e2.push_back(r.eps[i]);
        r2.push_back(r.error[i]);
      }
    r.beta_without_largest = fit_power_law(e2, r2).beta;
    r.beta_delta = r.beta_without_largest - r.fit.beta;
  }
  return r;
}

// ---------------------------------------------------------------------------
// runs

struct EffectiveRun {
  Problem problem;
  EffectiveModel model;
};

inline void export_effective(const RunContext& ctx, const Problem& pr, const EffectiveModel& model) {
  // tables in the units of the input Hamiltonian
  ConvexFunctionTable lbar = model.lbar, hbar = model.hbar;
  for (double& v : lbar.values) v += pr.shift;
  for (double& v : hbar.values) v -= pr.shift;
  {
    auto os = open_out(ctx, "lbar.csv");
    os << "# hjhom-lbar v1 spec=" << spec_hash(pr.original) << " " << model.lattice.describe()
       << " n_max=" << model.n_max << "\n";
    write_csv(os, lbar, "lbar");
  }
  {
    auto os = open_out(ctx, "hbar.csv");
    os << "# hjhom-hbar v1 spec=" << spec_hash(pr.original) << " " << model.lattice.describe()
       << " n_max=" << model.n_max << "\n";
    write_csv(os, hbar, "hbar");
  }
  {
    auto os = open_out(ctx, "diagnostics.csv");
    write_diagnostics_csv(os, model);
  }
  auto axis_slice = [](const ConvexFunctionTable& t) {
    std::vector<std::pair<double, double>> xy;
    const auto& ax = t.axes[0];
    Vec x(t.axes.size(), 0.0);
    for (int i = 0; i < ax.n; ++i) {
      x[0] = ax.at(i);
      const double v = t.evaluate(x).value;
      if (std::isfinite(v)) xy.push_back({x[0], v});
    }
    return xy;
  };
  write_plot_data(ctx, "hbar.dat", "p1 hbar (other momenta zero)", axis_slice(hbar));
  write_plot_data(ctx, "lbar.dat", "v1 lbar (other velocities zero)", axis_slice(lbar));
  auto os = open_out(ctx, "effective_summary.csv");
  os << "# hjhom-effective v1\nkey,value\n";
  os << "spec," << spec_hash(pr.original) << "\n";
  os << "normalization_shift," << fmt(pr.shift) << "\n";
  os << "n_max," << model.n_max << "\n";
  os << "partial," << (model.partial ? 1 : 0) << "\n";
  os << "hbar_boundary_nodes," << (hbar.any_boundary() ? 1 : 0) << "\n";
  if (model.dimension() == 1) {
    const auto fp = flat_piece(model.lbar);
    os << "flat_left," << fmt(fp.left) << "\nflat_right," << fmt(fp.right) << "\nflat_width," << fmt(fp.width())
       << "\n";
  }
}

inline EffectiveRun run_effective(const Config& cfg, const RunContext& ctx) {
  EffectiveRun run{problem_from_config(cfg), {}};
  ctx.note("building effective model: " + run.problem.lattice.describe());
  run.model = build_effective_model(run.problem.lagrangian, run.problem.lattice,
                                    effective_options_from_config(cfg, run.problem, ctx.threads));
  export_effective(ctx, run.problem, run.model);
  return run;
}

/// Epsilon sweep of sup |u^eps - ubar| over the fixed target set. The
/// reference ubar comes from an effective model with twice the doubling
/// depth; its distance to the nominal model is the mesh probe, which must
/// stay below half the smallest measured error.
inline RateReport run_rate_sweep(const Config& cfg, const RunContext& ctx) {
  const Problem pr = problem_from_config(cfg);
  const int d = pr.working.dimension;
  const auto eps = cfg.get_list("sweep.eps", {0.25, 0.125, 0.0625});
  const double t = cfg.get_double("sweep.t", 1.0);
  if (eps.empty()) throw ConfigParseError(cfg.line_of("sweep.eps"), "sweep.eps is empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw ConfigParseError(cfg.line_of("sweep.eps"), "sweep.eps entries must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1]))
      throw ConfigParseError(cfg.line_of("sweep.eps"), "sweep.eps must be strictly decreasing");
  }
  if (!(t > 0.0)) throw ConfigParseError(cfg.line_of("sweep.t"), "sweep.t must be positive");
  const int count = static_cast<int>(cfg.get_int("targets.count", 33));
  const double radius = cfg.get_double("targets.radius", 2.0 * t);
  const auto targets = target_points(d, count, radius);
  const InitialData u0 = initial_from_config(cfg, d);

  EffectiveOptions eo = effective_options_from_config(cfg, pr, ctx.threads);
  ctx.note("effective model n_max=" + std::to_string(eo.n_max));
  const EffectiveModel nominal = build_effective_model(pr.lagrangian, pr.lattice, eo);
  EffectiveOptions ro = eo;
  ro.n_max = 2 * eo.n_max;
  ctx.note("reference model n_max=" + std::to_string(ro.n_max));
  const EffectiveModel reference = build_effective_model(pr.lagrangian, pr.lattice, ro);
  const auto ubar = solve_effective(u0, reference, t, targets);
  const auto ubar_nominal = solve_effective(u0, nominal, t, targets);

  std::vector<double> err(eps.size());
  std::vector<Vec> worst(eps.size());
  std::vector<SolutionField> fields(eps.size());
  const int outer = std::min<int>(ctx.threads, static_cast<int>(eps.size()));
  const int inner = std::max(1, ctx.threads / std::max(1, outer));
  parallel_for(eps.size(), outer, [&](std::size_t i) {
    OscillatoryOptions oo;
    oo.threads = inner;
    fields[i] = solve_oscillatory(u0, pr.lagrangian, pr.lattice, eps[i], t, targets, oo);
    double m = -1.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double e = std::abs(fields[i].values[k] - ubar.values[k]);
      if (e > m) {
        m = e;
        worst[i] = targets[k];
      }
    }
    err[i] = m;
  });
  for (std::size_t i = 0; i < eps.size(); ++i) ctx.note("eps=" + fmt(eps[i]) + " error=" + fmt(err[i]));

  RateReport rep = fit_rate(eps, err, t);
  rep.worst_target = worst;
  rep.n_max = eo.n_max;
  for (std::size_t k = 0; k < targets.size(); ++k)
    rep.probe = std::max(rep.probe, std::abs(ubar.values[k] - ubar_nominal.values[k]));
  const double smallest = *std::min_element(err.begin(), err.end());
  rep.degenerate = *std::max_element(err.begin(), err.end()) < 1e-9;

  const std::string header = "spec=" + spec_hash(pr.original) + " " + pr.lattice.describe() +
                             " n_max=" + std::to_string(eo.n_max) + " t=" + fmt(t) + " initial=" + u0.tag;
  {
    auto os = open_out(ctx, "rate.csv");
    os << "# hjhom-rate v1 " << header << "\n";
    os << "eps,sup_error";
    for (int j = 0; j < d; ++j) os << ",worst_y" << (j + 1);
    os << "\n";
    for (std::size_t i = 0; i < eps.size(); ++i) {
      os << fmt(eps[i]) << "," << fmt(err[i]);
      for (double c : worst[i]) os << "," << fmt(c);
      os << "\n";
    }
  }
  {
    auto os = open_out(ctx, "rate_fit.csv");
    os << "# hjhom-rate-fit v1 " << header << "\n";
    os << "key,value\n";
    os << "beta," << fmt(rep.fit.beta) << "\n";
    os << "prefactor," << fmt(rep.fit.prefactor) << "\n";
    os << "residual," << fmt(rep.fit.residual) << "\n";
    os << "log_constant," << fmt(rep.log_fit.constant) << "\n";
    os << "log_residual," << fmt(rep.log_fit.residual) << "\n";
    os << "beta_without_largest," << fmt(rep.beta_without_largest) << "\n";
    os << "beta_delta," << fmt(rep.beta_delta) << "\n";
    os << "mesh_probe," << fmt(rep.probe) << "\n";
    os << "smallest_error," << fmt(smallest) << "\n";
    os << "degenerate," << (rep.degenerate ? 1 : 0) << "\n";
  }
  {
    auto os = open_out(ctx, "rate_solutions.csv");
    os << "# hjhom-rate-solutions v1 " << header << "\n";
    for (int j = 0; j < d; ++j) os << "y" << (j + 1) << ",";
    os << "ubar";
    for (double e : eps) os << ",u_eps_" << fmt(e);
    os << "\n";
    for (std::size_t k = 0; k < targets.size(); ++k) {
      for (double c : targets[k]) os << fmt(c) << ",";
      os << fmt(ubar.values[k]);
      for (const auto& f : fields) os << "," << fmt(f.values[k]);
      os << "\n";
    }
  }
  std::vector<std::pair<double, double>> xy;
  for (std::size_t i = 0; i < eps.size(); ++i) xy.push_back({eps[i], err[i]});
  write_plot_data(ctx, "rate.dat", "eps sup_error", xy);

  if (cfg.get_string("rate.check_probe", "true") == "true" && !rep.degenerate && rep.probe >= 0.5 * smallest)
    throw ResolutionError("rate: mesh probe " + fmt(rep.probe) + " is not below half the smallest error " +
                          fmt(smallest) + "; raise effective.n_max or refine grid.dt / grid.dx");
  return rep;
}

// ---------------------------------------------------------------------------
// property suite

struct PropertyCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

struct PropertyReport {
  std::vector<PropertyCheck> checks;
  std::vector<std::pair<double, double>> geodesic_defects;  // (|x|, K_measured)
  std::vector<LemmaSample> lemma;
  EnvelopeReport envelope;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.passed; });
  }
  const PropertyCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline std::vector<std::int64_t> int_list(const Config& cfg, const std::string& key, std::vector<double> fallback) {
  std::vector<std::int64_t> out;
  for (double v : cfg.get_list(key, std::move(fallback))) {
    if (v != std::round(v) || v < 1) throw ConfigParseError(cfg.line_of(key), key + " needs positive whole numbers");
    out.push_back(static_cast<std::int64_t>(v));
  }
  return out;
}

/// Doubling-gap sample points x = t v for v on the half-integer grid in [-1, 1]^2
/// without the origin (24 points).
inline std::vector<std::array<std::int64_t, 2>> lemma_points(std::int64_t t) {
  std::vector<std::array<std::int64_t, 2>> out;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) {
      if (a == 0 && b == 0) continue;
      out.push_back({a * t / 2, b * t / 2});
    }
  return out;
}

}  // namespace detail

/// Subadditivity, periodicity, linear growth and its mesh stability,
/// geodesic defects across scales, the envelope of f - fbar, oracle
/// agreement for Hbar and, in two dimensions, the lemma gap with surgery.
inline PropertyReport run_property_suite(const Config& cfg, const RunContext& ctx) {
  const Problem pr = problem_from_config(cfg);
  const int d = pr.working.dimension;
  PropertyReport rep;
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));

  const auto scales = detail::int_list(cfg, "properties.geodesic_scales", {4, 8, 16, 32});
  const auto speeds = cfg.get_list("properties.geodesic_speeds", {0.5, 1.0, 2.0, 4.0});
  const auto lemma_times = d == 2 ? detail::int_list(cfg, "properties.lemma_times", {4, 8, 16}) : std::vector<std::int64_t>{};
  std::int64_t need = 2;
  for (auto s : scales)
    for (double v : speeds) need = std::max<std::int64_t>(need, std::llround(std::ceil(s / v)));
  for (auto t : lemma_times) need = std::max<std::int64_t>(need, 2 * t);
  const auto horizon = static_cast<std::int64_t>(cfg.get_int("properties.horizon", need));
  if (horizon < need)
    throw ConfigParseError(cfg.line_of("properties.horizon"),
                           "properties.horizon must be at least " + std::to_string(need));

  ctx.note("metric table to horizon " + std::to_string(horizon));
  MetricTableOptions mo;
  mo.horizon = static_cast<double>(horizon);
  mo.threads = ctx.threads;
  const MetricTable tab = compute_metric_table(pr.lagrangian, pr.lattice, mo);

  // subadditivity
  const auto sa = check_subadditivity(tab, static_cast<std::size_t>(cfg.get_int("properties.sample_size", 200000)), seed);
  rep.checks.push_back({"subadditivity", sa.max_violation, sa.threshold, sa.passed(),
                        std::to_string(sa.pairs) + (sa.exhaustive ? " pairs, exhaustive" : " sampled pairs")});
  const double tol = sa.threshold;

  // periodicity: a table rooted one unit away must agree exactly after translation
  {
    MetricTableOptions po;
    po.horizon = std::min<double>(4.0, static_cast<double>(horizon));
    po.origin[0] = pr.lattice.cells_per_unit;
    if (d > 1) po.origin[1] = -pr.lattice.cells_per_unit;
    const MetricTable shifted = compute_metric_table(pr.lagrangian, pr.lattice, po);
    double worst = 0.0;
    for (const auto& [k, layer] : shifted.layers) {
      for (std::size_t i = 0; i < layer.count(); ++i) {
        LatticePoint z = layer.point(i);
        for (int j = 0; j < d; ++j) z[static_cast<std::size_t>(j)] -= po.origin[static_cast<std::size_t>(j)];
        const double a = layer.values[i], b = tab.value(k, z);
        if (std::isfinite(a) != std::isfinite(b)) worst = kInf;
        else if (std::isfinite(a)) worst = std::max(worst, std::abs(a - b));
      }
    }
    rep.checks.push_back({"periodicity", worst, 0.0, worst == 0.0, "integer translation of the base point"});
  }

  // linear growth and its stability under halving dt and dx
  {
    const auto rh = static_cast<double>(cfg.get_int("properties.refine_horizon", std::min<long>(8, horizon)));
    MetricTableOptions lo;
    lo.horizon = rh;
    lo.threads = ctx.threads;
    const double K = check_linear_growth(compute_metric_table(pr.lagrangian, pr.lattice, lo));
    LatticeSpec fine = pr.lattice;
    fine.steps_per_unit *= 2;
    fine.cells_per_unit *= 2;
    const double Kf = check_linear_growth(compute_metric_table(pr.lagrangian, fine, lo));
    const double change = std::abs(Kf - K) / K;
    rep.checks.push_back({"linear_growth_finite", K, kInf, std::isfinite(K), "K over integer points to t=" + fmt(rh)});
    rep.checks.push_back({"linear_growth_mesh_stability", change, 0.10, change < 0.10, "refined K=" + fmt(Kf)});
  }

  // approximate geodesics: K_measured per scale, max over the speed set
  {
    for (auto s : scales) {
      double K = 0.0;
      for (double v : speeds) {
        const auto t = static_cast<std::int64_t>(std::llround(std::ceil(s / v)));
        std::array<std::int64_t, kMaxDim> x{};
        x[0] = s;
        K = std::max(K, extract_approximate_geodesic(tab, t, std::span<const std::int64_t>(x.data(), static_cast<std::size_t>(d))).defect);
      }
      rep.geodesic_defects.push_back({static_cast<double>(s), K});
    }
    const std::size_t half = rep.geodesic_defects.size() / 2;
    double small = 0.0, large = 0.0;
    for (std::size_t i = 0; i < rep.geodesic_defects.size(); ++i) {
      double& slot = i < half ? small : large;
      slot = std::max(slot, rep.geodesic_defects[i].second);
    }
    const double bound = 1.25 * small + 1e-9;
    rep.checks.push_back({"geodesic_defect_growth", large, bound, large <= bound, "max K over larger vs smaller scales"});
    auto os = open_out(ctx, "geodesic.csv");
    os << "# hjhom-geodesic v1\nscale,k_measured\n";
    for (const auto& [s, K] : rep.geodesic_defects) os << fmt(s) << "," << fmt(K) << "\n";
    write_plot_data(ctx, "geodesic.dat", "scale k_measured", rep.geodesic_defects);
  }

  // effective model: envelope of f - fbar and oracle agreement
  {
    const EffectiveModel model = build_effective_model(pr.lagrangian, pr.lattice,
                                                       effective_options_from_config(cfg, pr, ctx.threads));
    std::vector<Vec> dirs;
    for (double v : cfg.get_list("properties.envelope_speeds", {0.0, 0.5, 1.0})) {
      Vec dv(static_cast<std::size_t>(d), 0.0);
      dv[0] = v;
      dirs.push_back(dv);
    }
    rep.envelope = gap_vs_log_envelope(tab, model, dirs);
    rep.checks.push_back({"envelope_gap_nonnegative", rep.envelope.min_gap, -tol, rep.envelope.min_gap >= -tol,
                          "envelope constant " + fmt(rep.envelope.constant)});
    {
      auto os = open_out(ctx, "envelope.csv");
      os << "# hjhom-envelope v1 constant=" << fmt(rep.envelope.constant) << "\nt";
      for (int j = 0; j < d; ++j) os << ",x" << (j + 1);
      os << ",gap\n";
      for (const auto& s : rep.envelope.samples) {
        os << fmt(s.t);
        for (double c : s.x) os << "," << fmt(c);
        os << "," << fmt(s.gap) << "\n";
      }
    }
    double worst = 0.0;
    const double T = cfg.get_double("properties.oracle_time", 64.0);
    for (double p1 : cfg.get_list("properties.oracle_p", {0.0, 0.5, 1.0, 1.5, 2.0})) {
      Vec p(static_cast<std::size_t>(d), 0.0);
      p[0] = p1;
      const auto est = cell_problem_oracle(pr.lagrangian, pr.lattice, p, T);
      worst = std::max(worst, std::abs(est.hbar - model.hbar_at(p)));
    }
    rep.checks.push_back({"oracle_agreement", worst, 0.05, worst <= 0.05, "torus estimate vs Legendre transform"});
  }

  // lemma gap and surgery
  if (d == 2) {
    std::vector<double> G;
    std::size_t ok = 0;
    double min_gap = kInf;
    for (auto t : lemma_times) {
      double g = -kInf;
      for (const auto& x : detail::lemma_points(t)) {
        auto s = lemma_sample(tab, t, x);
        g = std::max(g, s.gap);
        min_gap = std::min(min_gap, s.gap);
        ok += s.surgery_ok ? 1 : 0;
        rep.lemma.push_back(s);
      }
      G.push_back(g);
      ctx.note("lemma t=" + std::to_string(t) + " G=" + fmt(g));
    }
    bool growth_ok = true;
    for (std::size_t i = 1; i < G.size(); ++i) growth_ok = growth_ok && G[i] <= 1.25 * G[i - 1] + tol;
    const double rate = rep.lemma.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(rep.lemma.size());
    rep.checks.push_back({"lemma_gap_lower", min_gap, -tol, min_gap >= -tol, "2m(t,0,x) - m(2t,0,2x) >= -tol"});
    rep.checks.push_back({"lemma_gap_growth", G.empty() ? 0.0 : G.back(), G.empty() ? 0.0 : 1.25 * G.front() + tol,
                          growth_ok, "G(2t) <= 1.25 G(t) + tol"});
    rep.checks.push_back({"surgery_success", rate, 0.95, rate >= 0.95, std::to_string(ok) + " crossings found"});
    auto os = open_out(ctx, "surgery.csv");
    write_surgery_csv(os, rep.lemma);
    std::vector<std::pair<double, double>> xy;
    for (std::size_t i = 0; i < G.size(); ++i) xy.push_back({static_cast<double>(lemma_times[i]), G[i]});
    write_plot_data(ctx, "lemma_gap.dat", "t G", xy);
  }

  auto os = open_out(ctx, "properties.csv");
  os << "# hjhom-properties v1 spec=" << spec_hash(pr.original) << " " << pr.lattice.describe() << "\n";
  os << "check,value,threshold,passed,detail\n";
  for (const auto& c : rep.checks)
    os << c.name << "," << fmt(c.value) << "," << fmt(c.threshold) << "," << (c.passed ? 1 : 0) << "," << c.detail
       << "\n";
  return rep;
}

/// Raw metric table dump: m(t, 0, x) at integer times (or every step).
inline MetricTable run_metric(const Config& cfg, const RunContext& ctx) {
  const Problem pr = problem_from_config(cfg);
  MetricTableOptions mo;
  mo.horizon = cfg.get_double("metric.horizon", 4.0);
  const std::string ret = cfg.get_string("metric.retention", "integer");
  if (ret == "integer") mo.retention = LayerRetention::kIntegerTimes;
  else if (ret == "all") mo.retention = LayerRetention::kAllSteps;
  else throw ConfigParseError(cfg.line_of("metric.retention"), "metric.retention must be integer or all");
  mo.threads = ctx.threads;
  MetricTable tab = compute_metric_table(pr.lagrangian, pr.lattice, mo);
  auto os = open_out(ctx, "metric.csv");
  write_csv(os, tab);
  if (pr.working.dimension == 1) {
    std::vector<std::pair<double, double>> xy;
    const int k = tab.horizon_steps;
    const auto& layer = tab.layers.at(k);
    for (std::size_t i = 0; i < layer.count(); ++i)
      if (std::isfinite(layer.values[i]))
        xy.push_back({static_cast<double>(layer.point(i)[0]) * tab.dx(), layer.values[i]});
    write_plot_data(ctx, "metric.dat", "x m(horizon,0,x)", xy);
  }
  return tab;
}

}  // namespace hjhom
