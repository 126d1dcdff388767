#pragma once

// Homogenized quantities from the metric:
//   mbar(t, 0, x) = lim n^{-1} m(n t, 0, n x)     (doubling sequence)
//   Lbar(v)       = mbar(1, 0, v)                  (1-homogeneity of mbar)
//   Hbar          = Legendre transform of Lbar
// and an independent estimate of Hbar(p) from the long-time torus problem
// with shifted momentum.

#include <ostream>

#include "hjhom/metric.hpp"

namespace hjhom {

struct MetricLimit {
  double limit = kInf;
  std::vector<int> n;      // doubling sequence actually used
  std::vector<double> g;   // g_n = m(n t, 0, n x) / n
  std::vector<double> gaps;  // g_n - limit
  bool partial = false;    // budget forced a shorter sequence
};

/// Rough count of min-plus updates for a cone table of the given horizon.
inline double metric_table_work(const LatticeSpec& lat, int dim, double horizon) {
  const double reach = lat.reach();
  const double offsets = dim == 1 ? 2 * reach + 1 : std::pow(2 * reach + 1, dim) * (dim == 2 ? 0.785 : 0.524);
  const int steps = static_cast<int>(std::llround(horizon * lat.steps_per_unit));
  double total = 0.0;
  for (int k = 1; k <= steps; ++k) total += std::pow(2.0 * reach * k + 1.0, dim);
  return total * offsets;
}

inline std::vector<int> doubling_sequence(int n_max) {
  std::vector<int> ns;
  for (int n = 1; n <= n_max; n *= 2) ns.push_back(n);
  return ns;
}

/// Richardson-style extrapolant from the last two doubling levels.
inline double extrapolate_last_two(const std::vector<double>& g) {
  if (g.empty()) return kInf;
  if (g.size() == 1) return g.back();
  const double a = g[g.size() - 2], b = g.back();
  if (!std::isfinite(a) || !std::isfinite(b)) return kInf;
  return 2.0 * b - a;
}

/// Reads the doubling sequence for (t, x) off a table whose stored layers
/// include n t for every n in `ns`.
inline MetricLimit limit_from_table(const MetricTable& tab, const std::vector<int>& ns, double t,
                                    std::span<const double> x) {
  MetricLimit out;
  Vec nx(x.size());
  for (int n : ns) {
    for (std::size_t j = 0; j < x.size(); ++j) nx[j] = n * x[j];
    const double m = tab.cone().contains(n * t, nx) ? tab.value_at(n * t, nx) : kInf;
    out.n.push_back(n);
    out.g.push_back(m / n);
  }
  out.limit = extrapolate_last_two(out.g);
  for (double gi : out.g) out.gaps.push_back(gi - out.limit);
  return out;
}

inline std::vector<double> scaled_times(const std::vector<int>& ns, double t) {
  std::vector<double> out;
  for (int n : ns) out.push_back(n * t);
  return out;
}

/// mbar(t, 0, x) along the doubling sequence n = 1, 2, 4, ..., n_max. If
/// `work_budget` (min-plus updates) is too small, n_max is halved until the
/// table fits and the result is flagged partial.
inline MetricLimit effective_metric(const LagrangianField& L, const LatticeSpec& lat, double t,
                                    std::span<const double> x, int n_max, double work_budget = kInf,
                                    int threads = 1) {
  if (n_max < 1) throw ConfigError("effective_metric: n_max must be >= 1");
  if (!Cone{lat.vmax}.contains(t, x)) throw DomainError("effective_metric: (t, x) outside the cone");
  bool partial = false;
  while (n_max > 1 && metric_table_work(lat, L.spec.dimension, n_max * t) > work_budget) {
    n_max /= 2;
    partial = true;
  }
  const auto ns = doubling_sequence(n_max);
  MetricTableOptions opt;
  opt.horizon = ns.back() * t;
  opt.retention = LayerRetention::kListed;
  opt.keep_times = scaled_times(ns, t);
  opt.threads = threads;
  auto tab = compute_metric_table(L, lat, opt);
  auto out = limit_from_table(tab, ns, t, x);
  out.partial = partial;
  return out;
}

struct DirectionDiagnostics {
  Vec velocity;
  MetricLimit sequence;
};

struct EffectiveOptions {
  double velocity_box = 4.0;  // Lbar on [-velocity_box, velocity_box]^d
  int velocity_points = 65;
  double momentum_box = 3.0;  // Hbar on [-momentum_box, momentum_box]^d
  int momentum_points = 61;
  int n_max = 64;
  std::vector<Vec> diagnostic_velocities;  // defaults: 0 and a few axis points
  double work_budget = kInf;
  int threads = 1;
};

struct EffectiveModel {
  ConvexFunctionTable lbar;  // velocity-domain
  ConvexFunctionTable hbar;  // momentum-domain
  std::vector<DirectionDiagnostics> diagnostics;
  LatticeSpec lattice;
  int n_max = 0;
  bool partial = false;
  double normalization_shift = 0.0;
  std::string spec_hash;

  int dimension() const { return lbar.dimension(); }

  double hbar_at(std::span<const double> p) const { return hbar.evaluate(p).value; }
  double lbar_at(std::span<const double> v) const { return lbar.evaluate(v).value; }
};

/// Hbar directly from an Lbar table by exact maximisation over its nodes (no
/// momentum grid involved).
inline double hbar_from_lbar(const ConvexFunctionTable& lbar, std::span<const double> p) {
  double best = -kInf;
  for (std::size_t i = 0; i < lbar.size(); ++i) {
    if (!std::isfinite(lbar.values[i])) continue;
    best = std::max(best, dot(p, lbar.node(i)) - lbar.values[i]);
  }
  return best;
}

/// Half-widths of the flat piece of Hbar along axis 0 in 1-d: the one-sided
/// slopes of Lbar at v = 0, i.e. min over v > 0 of (Lbar(v) - Lbar(0)) / v and
/// the mirror image. Hbar equals -Lbar(0) exactly on [-left, right].
struct FlatPiece {
  double left = 0.0;
  double right = 0.0;
  double width() const { return left + right; }
};

inline FlatPiece flat_piece(const ConvexFunctionTable& lbar) {
  if (lbar.dimension() != 1) throw DomainError("flat_piece: one-dimensional tables only");
  const double l0 = lbar.evaluate(Vec{0.0}).value;
  FlatPiece fp{kInf, kInf};
  for (std::size_t i = 0; i < lbar.size(); ++i) {
    const double v = lbar.node(i)[0];
    const double val = lbar.values[i];
    if (!std::isfinite(val) || std::abs(v) < 1e-12) continue;
    const double slope = (val - l0) / std::abs(v);
    if (v > 0) fp.right = std::min(fp.right, slope);
    else fp.left = std::min(fp.left, slope);
  }
  return fp;
}

/// Lbar(v) := mbar(1, 0, v) on the velocity grid from one table of horizon
/// n_max, then Hbar := legendre_transform(Lbar).
inline EffectiveModel build_effective_model(const LagrangianField& L, const LatticeSpec& lat,
                                            const EffectiveOptions& opt) {
  const int d = L.spec.dimension;
  if (opt.n_max < 2) throw ConfigError("build_effective_model: n_max must be >= 2");
  EffectiveModel model;
  model.lattice = lat;
  model.normalization_shift = L.spec.normalization_shift;
  model.spec_hash = spec_hash(L.spec);
  int n_max = opt.n_max;
  while (n_max > 2 && metric_table_work(lat, d, n_max) > opt.work_budget) {
    n_max /= 2;
    model.partial = true;
  }
  model.n_max = n_max;
  const auto ns = doubling_sequence(n_max);
  MetricTableOptions mopt;
  mopt.horizon = n_max;
  mopt.retention = LayerRetention::kListed;
  mopt.keep_times = scaled_times(ns, 1.0);
  mopt.threads = opt.threads;
  const MetricTable tab = compute_metric_table(L, lat, mopt);
  model.lattice = tab.lattice;

  model.lbar = make_table(std::vector<GridAxis>(static_cast<std::size_t>(d),
                                                GridAxis{-opt.velocity_box, opt.velocity_box, opt.velocity_points}),
                          Units::kVelocity);
  const std::vector<int> last_two(ns.end() - 2, ns.end());
  for (std::size_t i = 0; i < model.lbar.size(); ++i) {
    const Vec v = model.lbar.node(i);
    model.lbar.values[i] = limit_from_table(tab, last_two, 1.0, v).limit;
  }

  std::vector<Vec> diag = opt.diagnostic_velocities;
  if (diag.empty()) {
    for (double s : {0.0, 0.5, 1.0, 2.0}) {
      Vec v(static_cast<std::size_t>(d), 0.0);
      v[0] = s;
      if (s <= opt.velocity_box) diag.push_back(v);
    }
  }
  for (const auto& v : diag) model.diagnostics.push_back({v, limit_from_table(tab, ns, 1.0, v)});

  model.hbar = legendre_transform(
      model.lbar,
      std::vector<GridAxis>(static_cast<std::size_t>(d), GridAxis{-opt.momentum_box, opt.momentum_box, opt.momentum_points}),
      TransformAlgorithm::kLinearTime);
  return model;
}

// ---------------------------------------------------------------------------
// torus oracle

struct CellProblemEstimate {
  double hbar = 0.0;        // -(min W(T) - min W(T/2)) / (T/2)
  double hbar_plain = 0.0;  // -min W(T) / T
  bool converged = false;   // the two estimates agree within `tolerance`
};

/// Independent estimate of Hbar(p): W solves the lattice control problem on
/// the torus with running cost L(x, v) - p.v and W(0, .) = 0; then
/// W(T, .) / T -> -Hbar(p).
inline CellProblemEstimate cell_problem_oracle(const LagrangianField& L, const LatticeSpec& lat,
                                               std::span<const double> p, double T_long,
                                               double tolerance = 0.01) {
  const int d = L.spec.dimension;
  if (static_cast<int>(p.size()) != d) throw DomainError("cell_problem_oracle: dimension mismatch");
  auto sc = build_step_costs(L, lat);
  const int r = lat.cells_per_unit;
  const auto K = static_cast<int>(std::llround(T_long * lat.steps_per_unit));
  if (K < 2) throw ConfigError("cell_problem_oracle: T_long too small");
  std::size_t sites = 1;
  for (int j = 0; j < d; ++j) sites *= static_cast<std::size_t>(r);

  // per-offset momentum tilt and source index tables
  std::vector<double> tilt(sc->offsets.size());
  std::vector<std::size_t> src(sc->offsets.size() * sites);
  for (std::size_t k = 0; k < sc->offsets.size(); ++k) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += p[static_cast<std::size_t>(j)] * sc->offsets[k][static_cast<std::size_t>(j)] * lat.dx();
    tilt[k] = s;
    for (std::size_t z = 0; z < sites; ++z) {
      std::size_t rem = z, idx = 0, mul = 1;
      std::array<std::int64_t, kMaxDim> zc{};
      for (int j = d - 1; j >= 0; --j) {
        zc[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(rem % static_cast<std::size_t>(r));
        rem /= static_cast<std::size_t>(r);
      }
      for (int j = d - 1; j >= 0; --j) {
        const auto uj = static_cast<std::size_t>(j);
        idx += static_cast<std::size_t>(floor_mod(zc[uj] - sc->offsets[k][uj], r)) * mul;
        mul *= static_cast<std::size_t>(r);
      }
      src[k * sites + z] = idx;
    }
  }
  std::vector<double> W(sites, 0.0), next(sites);
  double min_half = 0.0;
  const int half = K / 2;
  for (int step = 1; step <= K; ++step) {
    for (std::size_t z = 0; z < sites; ++z) {
      double best = kInf;
      for (std::size_t k = 0; k < sc->offsets.size(); ++k) {
        const double c = W[src[k * sites + z]] + sc->cost[k * sc->phases + z] - tilt[k];
        if (c < best) best = c;
      }
      next[z] = best;
    }
    std::swap(W, next);
    if (step == half) min_half = *std::min_element(W.begin(), W.end());
  }
  const double min_full = *std::min_element(W.begin(), W.end());
  const double T = K * lat.dt();
  const double Th = half * lat.dt();
  CellProblemEstimate est;
  est.hbar = -(min_full - min_half) / (T - Th);
  est.hbar_plain = -min_full / T;
  est.converged = std::abs(est.hbar - est.hbar_plain) <= tolerance;
  return est;
}

// ---------------------------------------------------------------------------
// export

inline void write_diagnostics_csv(std::ostream& os, const EffectiveModel& m) {
  os << "# hjhom-diagnostics v1 n_max=" << m.n_max << " partial=" << (m.partial ? 1 : 0) << "\n";
  os << "direction";
  for (int j = 0; j < m.dimension(); ++j) os << ",v" << (j + 1);
  os << ",n,g_n,limit\n";
  char buf[96];
  for (std::size_t i = 0; i < m.diagnostics.size(); ++i) {
    const auto& dd = m.diagnostics[i];
    for (std::size_t k = 0; k < dd.sequence.n.size(); ++k) {
      os << i;
      for (double c : dd.velocity) {
        std::snprintf(buf, sizeof buf, ",%.12e", c);
        os << buf;
      }
      std::snprintf(buf, sizeof buf, ",%d,%.12e,%.12e\n", dd.sequence.n[k], dd.sequence.g[k], dd.sequence.limit);
      os << buf;
    }
  }
}

}  // namespace hjhom
