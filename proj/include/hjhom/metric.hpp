#pragma once

// The metric m(t, x, y): least cost of a path from x to y in time t, running
// cost L. Computed by value iteration on the space-time lattice; the table
// holds f(t, z) = m(t, origin, z) on the cone |z - origin| <= vmax t.

#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "hjhom/lattice.hpp"

namespace hjhom {

/// Omega = {(t, x) : |x| <= speed * t}.
struct Cone {
  double speed = 1.0;

  bool contains(double t, std::span<const double> x, double tol = 1e-9) const {
    return t >= 0.0 && norm(x) <= speed * t + tol;
  }
};

/// Uniformly time-stepped lattice polyline.
struct DiscretePath {
  int dim = 1;
  int steps_per_unit = 1;
  int cells_per_unit = 1;
  std::vector<LatticePoint> nodes;  // absolute lattice coordinates
  double cost = 0.0;
  Quadrature quadrature = Quadrature::kMidpoint;

  double dt() const { return 1.0 / steps_per_unit; }
  std::size_t steps() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  double duration() const { return static_cast<double>(steps()) * dt(); }
  Vec node(std::size_t i) const { return from_lattice(nodes[i], dim, cells_per_unit); }

  /// Largest increment speed |gamma_{i+1} - gamma_i| / dt.
  double max_speed() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      double s2 = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double dz = static_cast<double>(nodes[i + 1][static_cast<std::size_t>(j)] - nodes[i][static_cast<std::size_t>(j)]);
        s2 += dz * dz;
      }
      worst = std::max(worst, std::sqrt(s2) * steps_per_unit / cells_per_unit);
    }
    return worst;
  }
};

/// Path cost summed from the step-cost table, in path order.
inline double path_cost(const StepCosts& sc, const DiscretePath& path) {
  double c = 0.0;
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) c += sc.step(path.nodes[i], path.nodes[i + 1]);
  return c;
}

/// Path cost from direct evaluation of L along the polyline (no tables).
inline double path_cost_direct(const LagrangianField& L, const DiscretePath& path) {
  double c = 0.0;
  const double dt = path.dt();
  Vec a, b, v(static_cast<std::size_t>(path.dim));
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
    a = path.node(i);
    b = path.node(i + 1);
    for (std::size_t j = 0; j < a.size(); ++j) v[j] = (b[j] - a[j]) / dt;
    c += detail::segment_cost(L, path.quadrature, a, b, v, dt);
  }
  return c;
}

enum class LayerRetention {
  kIntegerTimes,  // every unit of time (needed by the property checks)
  kAllSteps,
  kListed,        // only `MetricTableOptions::keep_times`
};

struct MetricTableOptions {
  double horizon = 1.0;
  LayerRetention retention = LayerRetention::kIntegerTimes;
  std::vector<double> keep_times;  // for kListed
  LatticePoint origin{};           // lattice coordinates of the start point
  int threads = 1;
};

struct MetricTable {
  int dim = 1;
  LatticeSpec lattice;
  std::shared_ptr<const StepCosts> costs;
  LatticePoint origin{};
  int horizon_steps = 0;
  std::map<int, Layer> layers;  // step index -> layer
  std::string spec_hash;

  Cone cone() const { return Cone{lattice.vmax}; }
  double dt() const { return lattice.dt(); }
  double dx() const { return lattice.dx(); }
  double horizon() const { return horizon_steps * dt(); }

  bool has_step(int k) const { return layers.count(k) > 0; }

  /// Step index for time t, if t is a stored layer time.
  std::optional<int> step_of(double t) const {
    const double k = t * lattice.steps_per_unit;
    const auto ki = static_cast<int>(std::llround(k));
    if (std::abs(k - ki) > 1e-9 || !has_step(ki)) return std::nullopt;
    return ki;
  }

  /// m(k dt, origin, z) with absolute lattice z; +inf outside the cone.
  double value(int step, const LatticePoint& z) const {
    auto it = layers.find(step);
    if (it == layers.end()) throw DomainError("metric table: time step " + std::to_string(step) + " not stored");
    return it->second.at(z);
  }

  /// m(t, origin, origin + x) for a displacement x in real units, with
  /// multilinear interpolation between lattice nodes.
  double value_at(double t, std::span<const double> x) const {
    auto k = step_of(t);
    if (!k) throw DomainError("metric table: time " + std::to_string(t) + " is not a stored layer");
    const int r = lattice.cells_per_unit;
    std::array<std::int64_t, kMaxDim> base{};
    std::array<double, kMaxDim> frac{};
    for (int j = 0; j < dim; ++j) {
      const double u = x[static_cast<std::size_t>(j)] * r;
      double fl = std::floor(u);
      if (u - fl > 1.0 - 1e-9) fl += 1.0;
      base[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(fl) + origin[static_cast<std::size_t>(j)];
      frac[static_cast<std::size_t>(j)] = std::max(0.0, u - fl);
      if (frac[static_cast<std::size_t>(j)] < 1e-9) frac[static_cast<std::size_t>(j)] = 0.0;
    }
    double v = 0.0;
    for (int corner = 0; corner < (1 << dim); ++corner) {
      double w = 1.0;
      LatticePoint z = base;
      for (int j = 0; j < dim; ++j) {
        const bool hi = (corner >> j) & 1;
        w *= hi ? frac[static_cast<std::size_t>(j)] : 1.0 - frac[static_cast<std::size_t>(j)];
        if (hi) ++z[static_cast<std::size_t>(j)];
      }
      if (w == 0.0) continue;
      const double nv = value(*k, z);
      if (!std::isfinite(nv)) return kInf;
      v += w * nv;
    }
    return v;
  }

  std::vector<int> stored_steps() const {
    std::vector<int> out;
    for (const auto& [k, _] : layers) out.push_back(k);
    return out;
  }
};

/// Builds the metric table from `opt.origin` up to `opt.horizon`.
inline MetricTable compute_metric_table(const LagrangianField& L, const LatticeSpec& lattice,
                                        const MetricTableOptions& opt) {
  lattice.validate();
  if (!(opt.horizon > 0.0)) throw ConfigError("metric table horizon must be positive (empty reachable set)");
  MetricTable tab;
  tab.dim = L.spec.dimension;
  tab.costs = build_step_costs(L, lattice);
  tab.lattice = tab.costs->lattice;
  tab.origin = opt.origin;
  tab.spec_hash = spec_hash(L.spec);
  const double hsteps = opt.horizon * lattice.steps_per_unit;
  tab.horizon_steps = static_cast<int>(std::llround(hsteps));
  if (std::abs(hsteps - tab.horizon_steps) > 1e-9)
    throw ConfigError("metric table horizon must be a multiple of dt");

  std::set<int> keep;
  keep.insert(0);
  switch (opt.retention) {
    case LayerRetention::kAllSteps:
      for (int k = 0; k <= tab.horizon_steps; ++k) keep.insert(k);
      break;
    case LayerRetention::kIntegerTimes:
      for (int k = 0; k <= tab.horizon_steps; k += lattice.steps_per_unit) keep.insert(k);
      break;
    case LayerRetention::kListed:
      for (double t : opt.keep_times) {
        const double k = t * lattice.steps_per_unit;
        const auto ki = static_cast<int>(std::llround(k));
        if (std::abs(k - ki) > 1e-9 || ki < 0 || ki > tab.horizon_steps)
          throw ConfigError("kept time " + std::to_string(t) + " is not a lattice time within the horizon");
        keep.insert(ki);
      }
      break;
  }

  const double reach = lattice.reach();
  Layer cur = Layer::centered(tab.dim, opt.origin, 0, 0.0);
  tab.layers.emplace(0, cur);
  for (int k = 1; k <= tab.horizon_steps; ++k) {
    const auto R = static_cast<std::int64_t>(std::floor(reach * k + 1e-9));
    Layer next = Layer::centered(tab.dim, opt.origin, R, kInf);
    dp_step(cur, next, *tab.costs, opt.threads);
    cur = std::move(next);
    if (keep.count(k)) tab.layers.emplace(k, cur);
  }
  return tab;
}

/// Backtracks a minimizer ending at absolute lattice point `z` at stored step
/// `k`. Layers between stored checkpoints are recomputed on a local window.
inline DiscretePath extract_minimizing_path_lattice(const MetricTable& tab, int k, const LatticePoint& z) {
  if (!tab.has_step(k)) throw DomainError("extract_minimizing_path: time is not a stored layer");
  if (!std::isfinite(tab.value(k, z))) throw UnreachableError("extract_minimizing_path: target is unreachable");
  const StepCosts& sc = *tab.costs;
  const int d = tab.dim;
  DiscretePath path;
  path.dim = d;
  path.steps_per_unit = tab.lattice.steps_per_unit;
  path.cells_per_unit = tab.lattice.cells_per_unit;
  path.quadrature = sc.quadrature;
  std::vector<LatticePoint> rev{z};
  LatticePoint cur_z = z;
  int cur_k = k;
  const double reach = tab.lattice.reach();
  while (cur_k > 0) {
    auto it = tab.layers.lower_bound(cur_k);
    --it;  // previous stored layer
    const int base_k = it->first;
    const int span_steps = cur_k - base_k;
    const auto W = static_cast<std::int64_t>(std::ceil(reach * span_steps)) + 1;
    // forward recomputation on the window around cur_z
    std::vector<Layer> sub;
    sub.reserve(static_cast<std::size_t>(span_steps) + 1);
    {
      Layer l0 = Layer::centered(d, cur_z, W, kInf);
      const Layer& stored = it->second;
      for (std::size_t i = 0; i < l0.count(); ++i) l0.values[i] = stored.at(l0.point(i));
      sub.push_back(std::move(l0));
    }
    for (int s = 1; s <= span_steps; ++s) {
      Layer nx = Layer::centered(d, cur_z, W, kInf);
      dp_step(sub.back(), nx, sc, 1);
      sub.push_back(std::move(nx));
    }
    for (int s = span_steps; s >= 1; --s) {
      const Layer& prev = sub[static_cast<std::size_t>(s - 1)];
      const double target = sub[static_cast<std::size_t>(s)].at(cur_z);
      const std::size_t ph = sc.phase_of(cur_z);
      bool found = false;
      for (std::size_t oi = 0; oi < sc.offsets.size(); ++oi) {
        LatticePoint w = cur_z;
        for (int j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] -= sc.offsets[oi][static_cast<std::size_t>(j)];
        const double cand = prev.at(w) + sc.cost[oi * sc.phases + ph];
        if (cand == target) {
          cur_z = w;
          found = true;
          break;
        }
      }
      if (!found) throw ResolutionError("extract_minimizing_path: backtracking lost the minimizer");
      rev.push_back(cur_z);
    }
    cur_k = base_k;
  }
  path.nodes.assign(rev.rbegin(), rev.rend());
  path.cost = path_cost(sc, path);
  return path;
}

/// Minimizer for m(t, origin, origin + x), x in real units on the lattice.
inline DiscretePath extract_minimizing_path(const MetricTable& tab, double t, std::span<const double> x) {
  auto k = tab.step_of(t);
  if (!k) throw DomainError("extract_minimizing_path: time is not a stored layer");
  bool exact = false;
  LatticePoint z = to_lattice(x, tab.lattice.cells_per_unit, &exact);
  if (!exact) throw DomainError("extract_minimizing_path: target is not a lattice point");
  for (int j = 0; j < tab.dim; ++j) z[static_cast<std::size_t>(j)] += tab.origin[static_cast<std::size_t>(j)];
  return extract_minimizing_path_lattice(tab, *k, z);
}

struct RoundedPoint {
  int time = 0;
  std::vector<std::int64_t> point;
};

namespace detail {

/// Nearest integer, ties toward zero.
inline std::int64_t round_half_toward_zero(double x) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  if (frac > 0.5) return static_cast<std::int64_t>(fl) + 1;
  if (frac < 0.5) return static_cast<std::int64_t>(fl);
  return x > 0 ? static_cast<std::int64_t>(fl) : static_cast<std::int64_t>(fl) + 1;
}

}  // namespace detail

/// (ceil t, [x]) with coordinates rounded to nearest (ties toward zero); when
/// that leaves the cone, coordinates rounded away from zero are pulled one
/// unit back, largest rounding first. Truncation always lands inside since
/// |trunc x| <= |x| <= C t <= C ceil(t).
inline RoundedPoint round_into_cone(const Cone& cone, double t, std::span<const double> x) {
  if (!std::isfinite(t) || !all_finite(x)) throw DomainError("round_into_cone: non-finite input");
  if (t < 1.0) throw DomainError("round_into_cone: t < 1");
  if (!cone.contains(t, x)) throw DomainError("round_into_cone: point outside the cone");
  RoundedPoint out;
  out.time = static_cast<int>(std::ceil(t - 1e-12));
  const std::size_t d = x.size();
  out.point.resize(d);
  for (std::size_t j = 0; j < d; ++j) out.point[j] = detail::round_half_toward_zero(x[j]);
  auto inside = [&] {
    double n2 = 0.0;
    for (auto v : out.point) n2 += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(n2) <= cone.speed * out.time + 1e-9;
  };
  if (inside()) return out;
  std::vector<std::size_t> order(d);
  for (std::size_t j = 0; j < d; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ea = std::abs(static_cast<double>(out.point[a])) - std::abs(x[a]);
    const double eb = std::abs(static_cast<double>(out.point[b])) - std::abs(x[b]);
    return ea > eb || (ea == eb && a < b);
  });
  for (std::size_t j : order) {
    if (std::abs(static_cast<double>(out.point[j])) > std::abs(x[j])) {
      out.point[j] += out.point[j] > 0 ? -1 : 1;
      if (inside()) return out;
    }
  }
  for (std::size_t j = 0; j < d; ++j) out.point[j] = static_cast<std::int64_t>(std::trunc(x[j]));
  return out;
}

/// m(t, x, y) from a table rooted at the origin. When x is integral and
/// (t, y - x) is a stored lattice point this is exact by periodicity;
/// otherwise the arguments are rounded as in `round_into_cone`, which moves
/// the value by at most a constant.
inline double metric_point(const MetricTable& tab, double t, std::span<const double> x, std::span<const double> y) {
  if (static_cast<int>(x.size()) != tab.dim || static_cast<int>(y.size()) != tab.dim)
    throw DomainError("metric_point: dimension mismatch");
  if (!all_finite(x) || !all_finite(y) || !std::isfinite(t)) throw DomainError("metric_point: non-finite argument");
  for (auto o : tab.origin)
    if (o != 0) throw DomainError("metric_point: table must be rooted at the origin");
  Vec disp(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) disp[j] = y[j] - x[j];
  if (!tab.cone().contains(t, disp)) throw DomainError("metric_point: (t, y - x) outside the cone");

  bool integral_x = true;
  for (double xj : x) integral_x = integral_x && xj == std::round(xj);
  bool on_lattice = false;
  to_lattice(disp, tab.lattice.cells_per_unit, &on_lattice);
  if (integral_x && on_lattice && tab.step_of(t)) return tab.value_at(t, disp);

  Vec base(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) base[j] = static_cast<double>(detail::round_half_toward_zero(x[j]));
  for (std::size_t j = 0; j < x.size(); ++j) disp[j] = y[j] - base[j];
  if (!tab.cone().contains(t, disp))
    for (std::size_t j = 0; j < x.size(); ++j) disp[j] = y[j] - x[j];
  RoundedPoint rp = round_into_cone(tab.cone(), std::max(t, 1.0), disp);
  Vec z(rp.point.begin(), rp.point.end());
  return tab.value_at(rp.time, z);
}

/// CSV export: k, z_1..z_d (lattice units relative to the origin), value.
inline void write_csv(std::ostream& os, const MetricTable& tab) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "# hjhom-metric v1 dt=%.17g dx=%.17g vmax=%.17g quadrature=%s spec=%s\n", tab.dt(),
                tab.dx(), tab.lattice.vmax, to_string(tab.costs->quadrature).c_str(), tab.spec_hash.c_str());
  os << buf << "k";
  for (int j = 0; j < tab.dim; ++j) os << ",z" << (j + 1);
  os << ",value\n";
  for (const auto& [k, layer] : tab.layers) {
    for (std::size_t i = 0; i < layer.count(); ++i) {
      const double v = layer.values[i];
      if (!std::isfinite(v)) continue;
      LatticePoint z = layer.point(i);
      os << k;
      for (int j = 0; j < tab.dim; ++j) os << "," << (z[static_cast<std::size_t>(j)] - tab.origin[static_cast<std::size_t>(j)]);
      std::snprintf(buf, sizeof buf, ",%.12e\n", v);
      os << buf;
    }
  }
}

}  // namespace hjhom
