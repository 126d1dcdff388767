#pragma once

// Space-time lattice shared by every dynamic program in the library.
//
// Time advances in steps of dt = 1 / steps_per_unit, space is the lattice
// dx * Z^d with dx = 1 / cells_per_unit, so integer translations are lattice
// symmetries. One step moves from w to z with |z - w| * dx <= vmax * dt and
// costs dt * (average of L along the straight segment, velocity (z - w)/dt).
// Step costs depend on z only through z mod cells_per_unit and are
// precomputed once.

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "hjhom/common.hpp"
#include "hjhom/legendre.hpp"

namespace hjhom {

enum class Quadrature {
  kAuto,          // exact segment average when available, else Gauss-4
  kMidpoint,      // L at the segment midpoint
  kGauss4,        // 4-point Gauss-Legendre along the segment
  kSegmentExact,  // closed-form average of a cosine-series potential
};

inline std::string to_string(Quadrature q) {
  switch (q) {
    case Quadrature::kAuto: return "auto";
    case Quadrature::kMidpoint: return "midpoint";
    case Quadrature::kGauss4: return "gauss4";
    case Quadrature::kSegmentExact: return "segment_exact";
  }
  return "?";
}

inline Quadrature quadrature_from_string(const std::string& s) {
  if (s == "auto") return Quadrature::kAuto;
  if (s == "midpoint") return Quadrature::kMidpoint;
  if (s == "gauss4") return Quadrature::kGauss4;
  if (s == "segment_exact") return Quadrature::kSegmentExact;
  throw ConfigError("unknown quadrature '" + s + "'");
}

using LatticePoint = std::array<std::int64_t, kMaxDim>;

struct LatticeSpec {
  int steps_per_unit = 8;
  int cells_per_unit = 16;
  double vmax = 4.0;
  Quadrature quadrature = Quadrature::kAuto;

  double dt() const { return 1.0 / steps_per_unit; }
  double dx() const { return 1.0 / cells_per_unit; }
  /// Largest step length in lattice units.
  double reach() const { return vmax * cells_per_unit / steps_per_unit; }

  void validate() const {
    if (steps_per_unit < 1 || cells_per_unit < 1) throw ConfigError("lattice resolutions must be positive");
    if (!(vmax > 0.0) || !std::isfinite(vmax)) throw ConfigError("speed cap vmax must be positive and finite");
    if (vmax * dt() < dx())
      throw ConfigError("speed cap too small for the lattice: vmax*dt = " + std::to_string(vmax * dt()) +
                        " < dx = " + std::to_string(dx()) + " leaves no moving step");
  }

  std::string describe() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "dt=1/%d dx=1/%d vmax=%.6g quadrature=%s", steps_per_unit, cells_per_unit, vmax,
                  to_string(quadrature).c_str());
    return buf;
  }
};

/// Converts real coordinates to the nearest lattice point; `exact` reports
/// whether x was already on the lattice (to 1e-9 lattice units).
inline LatticePoint to_lattice(std::span<const double> x, int cells_per_unit, bool* exact = nullptr) {
  LatticePoint z{};
  bool ok = true;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double u = x[j] * cells_per_unit;
    z[j] = static_cast<std::int64_t>(std::llround(u));
    if (std::abs(u - static_cast<double>(z[j])) > 1e-9) ok = false;
  }
  if (exact) *exact = ok;
  return z;
}

inline Vec from_lattice(const LatticePoint& z, int dim, int cells_per_unit) {
  Vec x(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) x[static_cast<std::size_t>(j)] = static_cast<double>(z[static_cast<std::size_t>(j)]) / cells_per_unit;
  return x;
}

/// Per-step costs for every admissible offset and destination phase.
struct StepCosts {
  int dim = 1;
  LatticeSpec lattice;
  Quadrature quadrature = Quadrature::kMidpoint;  // resolved rule
  std::vector<std::array<int, kMaxDim>> offsets;  // lexicographic order
  std::vector<double> cost;                       // offsets.size() x phases
  std::size_t phases = 1;                         // cells_per_unit^dim

  std::size_t phase_of(const LatticePoint& z) const {
    std::size_t idx = 0;
    const auto r = static_cast<std::int64_t>(lattice.cells_per_unit);
    for (int j = 0; j < dim; ++j) idx = idx * static_cast<std::size_t>(r) + static_cast<std::size_t>(floor_mod(z[static_cast<std::size_t>(j)], r));
    return idx;
  }

  /// Index of offset `o` or -1 if it exceeds the speed cap.
  int offset_index(const std::array<int, kMaxDim>& o) const {
    auto it = std::lower_bound(offsets.begin(), offsets.end(), o);
    if (it == offsets.end() || *it != o) return -1;
    return static_cast<int>(it - offsets.begin());
  }

  /// Cost of the step w -> z, +inf when the step exceeds the speed cap.
  double step(const LatticePoint& w, const LatticePoint& z) const {
    std::array<int, kMaxDim> o{};
    for (int j = 0; j < dim; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const std::int64_t diff = z[uj] - w[uj];
      if (std::abs(diff) > 1'000'000) return kInf;
      o[uj] = static_cast<int>(diff);
    }
    const int k = offset_index(o);
    if (k < 0) return kInf;
    return cost[static_cast<std::size_t>(k) * phases + phase_of(z)];
  }
};

namespace detail {

inline Quadrature resolve_quadrature(const LagrangianField& L, Quadrature q) {
  if (q == Quadrature::kAuto) return L.has_exact_segment_average() ? Quadrature::kSegmentExact : Quadrature::kGauss4;
  if (q == Quadrature::kSegmentExact && !L.has_exact_segment_average())
    throw ConfigError("segment_exact quadrature needs a closed-form cosine-series Lagrangian");
  return q;
}

/// dt * (average of L along the segment a -> b at constant velocity v).
inline double segment_cost(const LagrangianField& L, Quadrature q, std::span<const double> a,
                           std::span<const double> b, std::span<const double> v, double dt) {
  const std::size_t d = a.size();
  Vec x(d);
  switch (q) {
    case Quadrature::kSegmentExact: {
      const double vn = norm(v);
      return dt * (0.25 * vn * vn + L.potential_segment_average(a, b));
    }
    case Quadrature::kMidpoint:
      for (std::size_t j = 0; j < d; ++j) x[j] = 0.5 * (a[j] + b[j]);
      return dt * L(x, v);
    case Quadrature::kGauss4:
    case Quadrature::kAuto: {
      static constexpr double nodes[4] = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281,
                                          0.9305681557970263};
      static constexpr double weights[4] = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731,
                                            0.1739274225687269};
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        for (std::size_t j = 0; j < d; ++j) x[j] = a[j] + nodes[k] * (b[j] - a[j]);
        acc += weights[k] * L(x, v);
      }
      return dt * acc;
    }
  }
  return kInf;
}

}  // namespace detail

inline std::shared_ptr<const StepCosts> build_step_costs(const LagrangianField& L, const LatticeSpec& lat) {
  lat.validate();
  auto sc = std::make_shared<StepCosts>();
  const int d = L.spec.dimension;
  sc->dim = d;
  sc->lattice = lat;
  sc->quadrature = detail::resolve_quadrature(L, lat.quadrature);
  sc->lattice.quadrature = sc->quadrature;
  const int r = lat.cells_per_unit;
  sc->phases = 1;
  for (int j = 0; j < d; ++j) sc->phases *= static_cast<std::size_t>(r);

  const double reach = lat.reach();
  const int R = static_cast<int>(std::floor(reach + 1e-9));
  // lexicographic enumeration of offsets in the disc |o| <= reach
  std::array<int, kMaxDim> o{};
  for (int j = 0; j < d; ++j) o[static_cast<std::size_t>(j)] = -R;
  while (true) {
    double n2 = 0.0;
    for (int j = 0; j < d; ++j) n2 += static_cast<double>(o[static_cast<std::size_t>(j)]) * o[static_cast<std::size_t>(j)];
    if (n2 <= reach * reach + 1e-9) sc->offsets.push_back(o);
    int j = d - 1;
    while (j >= 0 && o[static_cast<std::size_t>(j)] == R) {
      o[static_cast<std::size_t>(j)] = -R;
      --j;
    }
    if (j < 0) break;
    ++o[static_cast<std::size_t>(j)];
  }

  sc->cost.assign(sc->offsets.size() * sc->phases, kInf);
  const double dt = lat.dt();
  Vec a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d)), v(static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < sc->offsets.size(); ++k) {
    for (std::size_t ph = 0; ph < sc->phases; ++ph) {
      std::size_t rem = ph;
      for (int j = d - 1; j >= 0; --j) {
        const auto uj = static_cast<std::size_t>(j);
        const double zj = static_cast<double>(rem % static_cast<std::size_t>(r));
        rem /= static_cast<std::size_t>(r);
        b[uj] = zj / r;
        a[uj] = (zj - sc->offsets[k][uj]) / r;
        v[uj] = sc->offsets[k][uj] * lat.dx() / dt;
      }
      sc->cost[k * sc->phases + ph] = detail::segment_cost(L, sc->quadrature, a, b, v, dt);
    }
  }
  return sc;
}

/// Dense box of lattice values; +inf outside the box.
struct Layer {
  int dim = 1;
  LatticePoint lo{}, hi{};  // inclusive corners
  std::vector<double> values;

  std::int64_t extent(int j) const { return hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)] + 1; }

  std::size_t count() const {
    std::size_t n = 1;
    for (int j = 0; j < dim; ++j) n *= static_cast<std::size_t>(extent(j));
    return n;
  }

  bool contains(const LatticePoint& z) const {
    for (int j = 0; j < dim; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (z[uj] < lo[uj] || z[uj] > hi[uj]) return false;
    }
    return true;
  }

  std::size_t index(const LatticePoint& z) const {
    std::size_t idx = 0;
    for (int j = 0; j < dim; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      idx = idx * static_cast<std::size_t>(extent(j)) + static_cast<std::size_t>(z[uj] - lo[uj]);
    }
    return idx;
  }

  LatticePoint point(std::size_t idx) const {
    LatticePoint z{};
    for (int j = dim - 1; j >= 0; --j) {
      const auto e = static_cast<std::size_t>(extent(j));
      z[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)] + static_cast<std::int64_t>(idx % e);
      idx /= e;
    }
    return z;
  }

  double at(const LatticePoint& z) const { return contains(z) ? values[index(z)] : kInf; }

  static Layer box(int dim, const LatticePoint& lo, const LatticePoint& hi, double fill) {
    Layer l;
    l.dim = dim;
    l.lo = lo;
    l.hi = hi;
    l.values.assign(l.count(), fill);
    return l;
  }

  static Layer centered(int dim, const LatticePoint& center, std::int64_t radius, double fill) {
    LatticePoint lo{}, hi{};
    for (int j = 0; j < dim; ++j) {
      lo[static_cast<std::size_t>(j)] = center[static_cast<std::size_t>(j)] - radius;
      hi[static_cast<std::size_t>(j)] = center[static_cast<std::size_t>(j)] + radius;
    }
    return box(dim, lo, hi, fill);
  }
};

/// One min-plus step: next[z] = min_o prev[z - o] + cost(o, z) over the box
/// of `next` (whose contents are overwritten). Offsets are scanned in
/// lexicographic order with strict improvement, so ties keep the
/// lexicographically smallest increment.
inline void dp_step(const Layer& prev, Layer& next, const StepCosts& sc, int threads = 1) {
  const int d = sc.dim;
  const auto r = static_cast<std::int64_t>(sc.lattice.cells_per_unit);
  std::fill(next.values.begin(), next.values.end(), kInf);
  const std::int64_t row_len = next.extent(d - 1);
  const std::size_t rows = next.count() / static_cast<std::size_t>(row_len);
  const std::size_t last = static_cast<std::size_t>(d - 1);

  parallel_for(rows, threads, [&](std::size_t row) {
    // leading coordinates of this row
    LatticePoint z{};
    std::size_t rem = row;
    for (int j = d - 2; j >= 0; --j) {
      const auto e = static_cast<std::size_t>(next.extent(j));
      z[static_cast<std::size_t>(j)] = next.lo[static_cast<std::size_t>(j)] + static_cast<std::int64_t>(rem % e);
      rem /= e;
    }
    z[last] = next.lo[last];
    double* out = next.values.data() + row * static_cast<std::size_t>(row_len);
    std::size_t lead_phase = 0;
    for (int j = 0; j < d - 1; ++j)
      lead_phase = lead_phase * static_cast<std::size_t>(r) + static_cast<std::size_t>(floor_mod(z[static_cast<std::size_t>(j)], r));

    for (std::size_t k = 0; k < sc.offsets.size(); ++k) {
      const auto& o = sc.offsets[k];
      LatticePoint src = z;
      bool inside = true;
      for (int j = 0; j < d - 1; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        src[uj] = z[uj] - o[uj];
        if (src[uj] < prev.lo[uj] || src[uj] > prev.hi[uj]) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      // range of last coordinate with source inside prev
      const std::int64_t z_lo = std::max(next.lo[last], prev.lo[last] + o[last]);
      const std::int64_t z_hi = std::min(next.hi[last], prev.hi[last] + o[last]);
      if (z_lo > z_hi) continue;
      src[last] = z_lo - o[last];
      const double* in = prev.values.data() + prev.index(src);
      const double* c = sc.cost.data() + k * sc.phases + lead_phase * static_cast<std::size_t>(r);
      std::int64_t ph = floor_mod(z_lo, r);
      double* dst = out + (z_lo - next.lo[last]);
      const std::int64_t n = z_hi - z_lo + 1;
      for (std::int64_t i = 0; i < n; ++i) {
        const double cand = in[i] + c[ph];
        if (cand < dst[i]) dst[i] = cand;
        if (++ph == r) ph = 0;
      }
    }
  });
}

}  // namespace hjhom
