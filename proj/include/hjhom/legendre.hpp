#pragma once

// Discrete Legendre-Fenchel transforms on product grids and the Lagrangian
// L(x, v) = sup_p p.v - H(x, p).

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "hjhom/common.hpp"
#include "hjhom/hamiltonian.hpp"

namespace hjhom {

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int n = 1;

  double step() const { return n > 1 ? (hi - lo) / (n - 1) : 0.0; }
  double at(int i) const { return n > 1 ? lo + (hi - lo) * i / (n - 1) : lo; }
};

enum class Units { kMomentum, kVelocity };

inline Units dual(Units u) { return u == Units::kMomentum ? Units::kVelocity : Units::kMomentum; }

inline std::string to_string(Units u) { return u == Units::kMomentum ? "momentum-domain" : "velocity-domain"; }

struct Interpolated {
  double value = kInf;
  bool clamped = false;
};

/// Values of a convex function on a uniform product grid. `boundary` marks
/// nodes whose value, when produced by a transform, was attained on the edge
/// of the source box (the source box should then be enlarged).
struct ConvexFunctionTable {
  std::vector<GridAxis> axes;
  std::vector<double> values;  // row-major, last axis fastest; +inf outside the effective domain
  std::vector<unsigned char> boundary;
  Units units = Units::kMomentum;

  int dimension() const { return static_cast<int>(axes.size()); }

  std::size_t size() const {
    std::size_t s = 1;
    for (const auto& a : axes) s *= static_cast<std::size_t>(a.n);
    return s;
  }

  std::array<int, kMaxDim> index_of(std::size_t flat) const {
    std::array<int, kMaxDim> idx{};
    for (int j = dimension() - 1; j >= 0; --j) {
      const auto n = static_cast<std::size_t>(axes[static_cast<std::size_t>(j)].n);
      idx[static_cast<std::size_t>(j)] = static_cast<int>(flat % n);
      flat /= n;
    }
    return idx;
  }

  std::size_t flat_of(const std::array<int, kMaxDim>& idx) const {
    std::size_t flat = 0;
    for (int j = 0; j < dimension(); ++j)
      flat = flat * static_cast<std::size_t>(axes[static_cast<std::size_t>(j)].n) +
             static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
    return flat;
  }

  Vec node(std::size_t flat) const {
    auto idx = index_of(flat);
    Vec x(axes.size());
    for (std::size_t j = 0; j < axes.size(); ++j) x[j] = axes[j].at(idx[j]);
    return x;
  }

  /// Multilinear interpolation; queries outside the box are clamped to it.
  Interpolated evaluate(std::span<const double> x) const {
    const int d = dimension();
    if (static_cast<int>(x.size()) != d) throw DomainError("ConvexFunctionTable::evaluate: dimension mismatch");
    Interpolated out;
    std::array<int, kMaxDim> i0{};
    std::array<double, kMaxDim> frac{};
    for (int j = 0; j < d; ++j) {
      const auto& ax = axes[static_cast<std::size_t>(j)];
      double xj = x[static_cast<std::size_t>(j)];
      if (xj < ax.lo || xj > ax.hi) {
        out.clamped = true;
        xj = std::clamp(xj, ax.lo, ax.hi);
      }
      if (ax.n == 1) {
        i0[static_cast<std::size_t>(j)] = 0;
        frac[static_cast<std::size_t>(j)] = 0.0;
        continue;
      }
      double u = (xj - ax.lo) / ax.step();
      int k = std::min(static_cast<int>(std::floor(u)), ax.n - 2);
      k = std::max(k, 0);
      i0[static_cast<std::size_t>(j)] = k;
      frac[static_cast<std::size_t>(j)] = std::clamp(u - k, 0.0, 1.0);
    }
    double v = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = 1.0;
      std::array<int, kMaxDim> idx{};
      for (int j = 0; j < d; ++j) {
        const bool hi = (corner >> j) & 1;
        const auto uj = static_cast<std::size_t>(j);
        w *= hi ? frac[uj] : 1.0 - frac[uj];
        idx[uj] = std::min(i0[uj] + (hi ? 1 : 0), axes[uj].n - 1);
      }
      if (w == 0.0) continue;
      const double node_value = values[flat_of(idx)];
      if (!std::isfinite(node_value)) {
        out.value = kInf;
        return out;
      }
      v += w * node_value;
    }
    out.value = v;
    return out;
  }

  bool any_boundary() const {
    return std::any_of(boundary.begin(), boundary.end(), [](unsigned char b) { return b != 0; });
  }
};

inline ConvexFunctionTable make_table(std::vector<GridAxis> axes, Units units) {
  ConvexFunctionTable t;
  t.axes = std::move(axes);
  t.units = units;
  t.values.assign(t.size(), 0.0);
  t.boundary.assign(t.size(), 0);
  return t;
}

/// Tabulates `f` on the cube [-half_width, half_width]^d with `points` per axis.
template <class F>
ConvexFunctionTable tabulate(int dim, double half_width, int points, Units units, F&& f) {
  auto t = make_table(std::vector<GridAxis>(static_cast<std::size_t>(dim), GridAxis{-half_width, half_width, points}),
                      units);
  for (std::size_t i = 0; i < t.size(); ++i) t.values[i] = f(t.node(i));
  return t;
}

/// Worst discrete midpoint-convexity defect along grid lines (finite nodes only).
inline double convexity_defect(const ConvexFunctionTable& t) {
  double worst = 0.0;
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    auto idx = t.index_of(flat);
    for (int j = 0; j < t.dimension(); ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (idx[uj] == 0 || idx[uj] == t.axes[uj].n - 1) continue;
      auto lo = idx, hi = idx;
      --lo[uj];
      ++hi[uj];
      const double a = t.values[t.flat_of(lo)], b = t.values[flat], c = t.values[t.flat_of(hi)];
      if (std::isfinite(a) && std::isfinite(b) && std::isfinite(c)) worst = std::max(worst, b - 0.5 * (a + c));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// one-dimensional transforms

struct Transform1D {
  std::vector<double> values;
  std::vector<unsigned char> boundary;
  std::vector<int> argmax;  // source index per output node (-1 if none)
};

/// g(v_j) = max_i (p_i v_j + h_i); h = -f for a plain conjugate. Ties favour
/// interior nodes so that a flat supremum is not reported as boundary-attained.
inline Transform1D sup_affine_direct(std::span<const double> p, std::span<const double> h,
                                     std::span<const double> v) {
  Transform1D out;
  out.values.assign(v.size(), -kInf);
  out.boundary.assign(v.size(), 0);
  out.argmax.assign(v.size(), -1);
  const int n = static_cast<int>(p.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    double best = -kInf, best_interior = -kInf;
    int arg = -1;
    for (int i = 0; i < n; ++i) {
      if (!(h[static_cast<std::size_t>(i)] > -kInf)) continue;
      const double val = p[static_cast<std::size_t>(i)] * v[j] + h[static_cast<std::size_t>(i)];
      if (val > best) {
        best = val;
        arg = i;
      }
      if (i > 0 && i < n - 1) best_interior = std::max(best_interior, val);
    }
    out.values[j] = best;
    out.argmax[j] = arg;
    if (arg == 0 || arg == n - 1) {
      const double scale = 1e-12 * std::max(1.0, std::abs(best));
      out.boundary[j] = (n <= 2 || best > best_interior + scale) ? 1 : 0;
    }
  }
  return out;
}

/// Same contract as `sup_affine_direct` for increasing `p` and `v`, in
/// O(n + m): upper hull of the points (p_i, h_i) swept against sorted slopes.
inline Transform1D sup_affine_linear(std::span<const double> p, std::span<const double> h,
                                     std::span<const double> v) {
  Transform1D out;
  out.values.assign(v.size(), -kInf);
  out.boundary.assign(v.size(), 0);
  out.argmax.assign(v.size(), -1);
  const int n = static_cast<int>(p.size());
  // We maximise p*v + h, i.e. work with the lower hull of (p, -h).
  std::vector<int> hull;
  for (int i = 0; i < n; ++i) {
    if (!(h[static_cast<std::size_t>(i)] > -kInf)) continue;
    auto fy = [&](int k) { return -h[static_cast<std::size_t>(k)]; };
    auto px = [&](int k) { return p[static_cast<std::size_t>(k)]; };
    while (hull.size() >= 2) {
      const int a = hull[hull.size() - 2], b = hull.back();
      // keep b only if it lies strictly below segment a-i
      const double cross = (px(b) - px(a)) * (fy(i) - fy(a)) - (fy(b) - fy(a)) * (px(i) - px(a));
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }
  if (hull.empty()) return out;
  std::size_t k = 0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    // advance while the next hull vertex is at least as good
    while (k + 1 < hull.size()) {
      const int a = hull[k], b = hull[k + 1];
      const double va = p[static_cast<std::size_t>(a)] * v[j] + h[static_cast<std::size_t>(a)];
      const double vb = p[static_cast<std::size_t>(b)] * v[j] + h[static_cast<std::size_t>(b)];
      if (vb > va) {
        ++k;
      } else {
        break;
      }
    }
    const int arg = hull[k];
    out.values[j] = p[static_cast<std::size_t>(arg)] * v[j] + h[static_cast<std::size_t>(arg)];
    out.argmax[j] = arg;
    if (arg == 0 || arg == n - 1) {
      // a neighbouring hull vertex tying with the edge one means a flat supremum
      bool tie = false;
      const double scale = 1e-12 * std::max(1.0, std::abs(out.values[j]));
      for (std::size_t q : {k == 0 ? k : k - 1, k + 1 < hull.size() ? k + 1 : k}) {
        const int c = hull[q];
        if (c != arg && c > 0 && c < n - 1 &&
            p[static_cast<std::size_t>(c)] * v[j] + h[static_cast<std::size_t>(c)] >= out.values[j] - scale)
          tie = true;
      }
      out.boundary[j] = (n <= 2 || !tie) ? 1 : 0;
    }
  }
  return out;
}

enum class TransformAlgorithm { kDirect, kLinearTime };

/// Legendre-Fenchel transform g(v) = max over grid nodes p of (p.v - f(p)),
/// evaluated on the product grid `out_axes`. Exact for the piecewise-linear
/// interpolant of f. Computed by axis sweeps, which factorise the maximum.
inline ConvexFunctionTable legendre_transform(const ConvexFunctionTable& f, std::vector<GridAxis> out_axes,
                                              TransformAlgorithm algo = TransformAlgorithm::kDirect) {
  const int d = f.dimension();
  if (d == 0 || f.size() == 0 || f.values.size() != f.size())
    throw DomainError("legendre_transform: empty grid");
  if (static_cast<int>(out_axes.size()) != d) throw DomainError("legendre_transform: dimension mismatch");
  for (const auto& a : out_axes)
    if (a.n < 1) throw DomainError("legendre_transform: empty output grid");
  if (algo == TransformAlgorithm::kLinearTime)
    for (const auto& a : out_axes)
      if (a.hi < a.lo) throw DomainError("legendre_transform: decreasing output axis");

  // current array: shape is out_axes[0..k) x f.axes[k..d)
  std::vector<int> shape(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) shape[static_cast<std::size_t>(j)] = f.axes[static_cast<std::size_t>(j)].n;
  std::vector<double> cur(f.size());
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = std::isfinite(f.values[i]) ? -f.values[i] : -kInf;
  std::vector<unsigned char> flag(f.size(), 0);

  for (int axis = 0; axis < d; ++axis) {
    const auto ua = static_cast<std::size_t>(axis);
    const int n_in = shape[ua];
    const int n_out = out_axes[ua].n;
    std::vector<double> p(static_cast<std::size_t>(n_in)), v(static_cast<std::size_t>(n_out));
    for (int i = 0; i < n_in; ++i) p[static_cast<std::size_t>(i)] = f.axes[ua].at(i);
    for (int i = 0; i < n_out; ++i) v[static_cast<std::size_t>(i)] = out_axes[ua].at(i);

    std::size_t outer = 1, inner = 1;
    for (int j = 0; j < axis; ++j) outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(j)]);
    for (int j = axis + 1; j < d; ++j) inner *= static_cast<std::size_t>(shape[static_cast<std::size_t>(j)]);

    std::vector<double> next(outer * static_cast<std::size_t>(n_out) * inner, -kInf);
    std::vector<unsigned char> next_flag(next.size(), 0);
    std::vector<double> h(static_cast<std::size_t>(n_in));
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        for (int i = 0; i < n_in; ++i)
          h[static_cast<std::size_t>(i)] = cur[(o * static_cast<std::size_t>(n_in) + static_cast<std::size_t>(i)) * inner + in];
        Transform1D r = algo == TransformAlgorithm::kLinearTime ? sup_affine_linear(p, h, v)
                                                                 : sup_affine_direct(p, h, v);
        for (int j = 0; j < n_out; ++j) {
          const std::size_t dst = (o * static_cast<std::size_t>(n_out) + static_cast<std::size_t>(j)) * inner + in;
          next[dst] = r.values[static_cast<std::size_t>(j)];
          const int arg = r.argmax[static_cast<std::size_t>(j)];
          unsigned char fl = r.boundary[static_cast<std::size_t>(j)];
          if (arg >= 0) fl |= flag[(o * static_cast<std::size_t>(n_in) + static_cast<std::size_t>(arg)) * inner + in];
          next_flag[dst] = fl;
        }
      }
    }
    cur = std::move(next);
    flag = std::move(next_flag);
    shape[ua] = n_out;
  }

  ConvexFunctionTable g;
  g.axes = std::move(out_axes);
  g.units = dual(f.units);
  g.values.resize(cur.size());
  for (std::size_t i = 0; i < cur.size(); ++i) g.values[i] = cur[i] > -kInf ? cur[i] : kInf;
  g.boundary = std::move(flag);
  return g;
}

/// CSV: one row per node, coordinates then value.
inline void write_csv(std::ostream& os, const ConvexFunctionTable& t, const std::string& value_name) {
  os << "# hjhom-table v1 units=" << to_string(t.units) << "\n";
  for (int j = 0; j < t.dimension(); ++j) os << (t.units == Units::kMomentum ? "p" : "v") << (j + 1) << ",";
  os << value_name << ",boundary\n";
  char buf[64];
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (double c : t.node(i)) {
      std::snprintf(buf, sizeof buf, "%.12e,", c);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.12e", t.values[i]);
    os << buf << "," << static_cast<int>(t.boundary.empty() ? 0 : t.boundary[i]) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Lagrangian

/// L(x, v) for a Hamiltonian spec. Closed form |v|^2/4 + V(x) when the
/// momentum cap is inactive; otherwise one velocity table per torus grid
/// point, interpolated multilinearly in x and v.
struct LagrangianField {
  HamiltonianSpec spec;
  bool closed_form = true;

  int torus_points = 0;
  std::vector<ConvexFunctionTable> tables;  // one per torus node, velocity-domain

  double operator()(std::span<const double> x, std::span<const double> v) const {
    if (closed_form) {
      const double vn = norm(v);
      return 0.25 * vn * vn + spec.potential(x);
    }
    return tabulated(x, v);
  }

  /// True when L is closed form with a cosine-series V, so that averages of V
  /// along straight segments are available exactly.
  bool has_exact_segment_average() const {
    return closed_form && spec.family == Family::kQuadraticMinusPotential;
  }

  double potential_segment_average(std::span<const double> a, std::span<const double> b) const {
    // mean of cos(2 pi k.(a + s (b - a))) over s in [0, 1]
    //   = cos(2 pi k.mid) * sinc(pi k.(b - a))
    double v = spec.a0;
    for (const auto& t : spec.terms) {
      double mid = 0.0, span_ = 0.0;
      for (int j = 0; j < spec.dimension; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        mid += t.wave[uj] * 0.5 * (a[uj] + b[uj]);
        span_ += t.wave[uj] * (b[uj] - a[uj]);
      }
      const double u = std::numbers::pi * span_;
      const double sinc = std::abs(u) < 1e-8 ? 1.0 - u * u / 6.0 : std::sin(u) / u;
      v += t.amplitude * std::cos(kTwoPi * mid) * sinc;
    }
    return v;
  }

  double min_at_zero_velocity(int grid = 64) const {
    if (closed_form) return spec.potential_lower_bound(grid);
    double m = kInf;
    Vec zero(static_cast<std::size_t>(spec.dimension), 0.0);
    detail::for_each_torus_point(spec.dimension, grid, [&](std::span<const double> x) { m = std::min(m, (*this)(x, zero)); });
    return m;
  }

  double max_at_zero_velocity(int grid = 64) const {
    if (closed_form) return spec.potential_upper_bound(grid);
    double m = -kInf;
    Vec zero(static_cast<std::size_t>(spec.dimension), 0.0);
    detail::for_each_torus_point(spec.dimension, grid, [&](std::span<const double> x) { m = std::max(m, (*this)(x, zero)); });
    return m;
  }

 private:
  double tabulated(std::span<const double> x, std::span<const double> v) const {
    const int d = spec.dimension;
    const int n = torus_points;
    std::array<int, kMaxDim> i0{};
    std::array<double, kMaxDim> frac{};
    for (int j = 0; j < d; ++j) {
      double u = wrap_unit(x[static_cast<std::size_t>(j)]) * n;
      int k = static_cast<int>(std::floor(u));
      frac[static_cast<std::size_t>(j)] = u - k;
      i0[static_cast<std::size_t>(j)] = k % n;
    }
    double out = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = 1.0;
      std::size_t idx = 0;
      for (int j = 0; j < d; ++j) {
        const bool hi = (corner >> j) & 1;
        const auto uj = static_cast<std::size_t>(j);
        w *= hi ? frac[uj] : 1.0 - frac[uj];
        idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>((i0[uj] + (hi ? 1 : 0)) % n);
      }
      if (w == 0.0) continue;
      out += w * tables[idx].evaluate(v).value;
    }
    return out;
  }
};

struct LagrangianOptions {
  double velocity_box = 8.0;  // tables cover [-velocity_box, velocity_box]^d
  int velocity_points = 65;
  int torus_points = 32;
  int momentum_points = 257;
};

/// Closed form when the family permits; otherwise a numerical transform of
/// H(x, .) at every torus grid node. Expects a normalized spec.
inline LagrangianField build_lagrangian(const HamiltonianSpec& spec, const LagrangianOptions& opt = {}) {
  spec.validate();
  LagrangianField field;
  field.spec = spec;
  field.closed_form = !std::isfinite(spec.momentum_cap);
  if (field.closed_form) return field;

  const int d = spec.dimension;
  field.torus_points = opt.torus_points;
  // Maximisers satisfy |p| <= max(cap, |v| / 2) once H = |p|^2.
  const double pbox = 1.25 * std::max(spec.momentum_cap, 0.5 * opt.velocity_box) + 1.0;
  std::vector<GridAxis> out_axes(static_cast<std::size_t>(d), GridAxis{-opt.velocity_box, opt.velocity_box, opt.velocity_points});
  detail::for_each_torus_point(d, opt.torus_points, [&](std::span<const double> x) {
    Vec xv(x.begin(), x.end());
    auto h = tabulate(d, pbox, opt.momentum_points, Units::kMomentum,
                      [&](const Vec& p) { return evaluate_hamiltonian(spec, xv, p); });
    field.tables.push_back(legendre_transform(h, out_axes, TransformAlgorithm::kLinearTime));
  });
  return field;
}

}  // namespace hjhom
