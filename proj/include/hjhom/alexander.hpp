#pragma once

// Growth and subadditivity checks for
// f(t, x) = m(t, 0, x) on integer space-time points, and the two-dimensional
// cyclic-shift surgery showing 2 m(t, 0, x) <= m(2t, 0, 2x) + C.

#include <ostream>

#include "hjhom/effective.hpp"

namespace hjhom {

/// Integer space-time point (t, x) with x in whole units.
struct SpacePoint {
  std::int64_t t = 0;
  std::array<std::int64_t, kMaxDim> x{};
};

/// f(t, x) = m(t, origin, origin + x) for whole t and x; f(0, 0) = 0.
inline double f_integer(const MetricTable& tab, std::int64_t t, const std::array<std::int64_t, kMaxDim>& x) {
  if (t == 0) {
    for (int j = 0; j < tab.dim; ++j)
      if (x[static_cast<std::size_t>(j)] != 0) return kInf;
    return 0.0;
  }
  LatticePoint z = tab.origin;
  for (int j = 0; j < tab.dim; ++j) z[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(j)] * tab.lattice.cells_per_unit;
  return tab.value(static_cast<int>(t) * tab.lattice.steps_per_unit, z);
}

/// Whole time units covered by stored integer-time layers.
inline std::int64_t integer_horizon(const MetricTable& tab) {
  std::int64_t h = 0;
  for (std::int64_t t = 1; t * tab.lattice.steps_per_unit <= tab.horizon_steps; ++t) {
    if (!tab.has_step(static_cast<int>(t) * tab.lattice.steps_per_unit)) break;
    h = t;
  }
  return h;
}

/// All integer space-time points with 1 <= t <= t_max and |x| <= vmax t.
inline std::vector<SpacePoint> integer_cone_points(const MetricTable& tab, std::int64_t t_max) {
  std::vector<SpacePoint> out;
  const Cone cone = tab.cone();
  const int d = tab.dim;
  for (std::int64_t t = 1; t <= t_max; ++t) {
    const auto R = static_cast<std::int64_t>(std::floor(cone.speed * t + 1e-9));
    std::array<std::int64_t, kMaxDim> x{};
    for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(j)] = -R;
    while (true) {
      Vec xv(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) xv[static_cast<std::size_t>(j)] = static_cast<double>(x[static_cast<std::size_t>(j)]);
      if (cone.contains(static_cast<double>(t), xv)) out.push_back({t, x});
      int j = d - 1;
      while (j >= 0 && x[static_cast<std::size_t>(j)] == R) x[static_cast<std::size_t>(j--)] = -R;
      if (j < 0) break;
      ++x[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

/// Largest |m(z + e_j dx) - m(z)| / dx over neighbouring nodes of the stored
/// integer-time layers, inside the half-speed cone |x| <= vmax t / 2. Next to
/// the cone edge only a few offset combinations reach a node and the values
/// jump, which says nothing about the metric away from the cap.
inline double measured_spatial_lipschitz(const MetricTable& tab) {
  double lip = 0.0;
  const double dx = tab.dx();
  const double r = tab.lattice.cells_per_unit;
  for (const auto& [k, layer] : tab.layers) {
    if (k == 0 || k % tab.lattice.steps_per_unit != 0) continue;
    const double bound = 0.5 * tab.lattice.vmax * k * tab.dt() * r;  // lattice units
    auto inside = [&](const LatticePoint& z) {
      double s = 0.0;
      for (int j = 0; j < tab.dim; ++j) {
        const double c = static_cast<double>(z[static_cast<std::size_t>(j)] - tab.origin[static_cast<std::size_t>(j)]);
        s += c * c;
      }
      return std::sqrt(s) <= bound + 1e-9;
    };
    for (std::size_t i = 0; i < layer.count(); ++i) {
      const double a = layer.values[i];
      if (!std::isfinite(a)) continue;
      LatticePoint z = layer.point(i);
      if (!inside(z)) continue;
      for (int j = 0; j < tab.dim; ++j) {
        LatticePoint w = z;
        ++w[static_cast<std::size_t>(j)];
        const double b = layer.at(w);
        if (std::isfinite(b) && inside(w)) lip = std::max(lip, std::abs(b - a) / dx);
      }
    }
  }
  return lip;
}

struct SubadditivityReport {
  double max_violation = -kInf;  // max f(z + w) - f(z) - f(w)
  SpacePoint worst_z, worst_w;
  std::size_t pairs = 0;
  bool exhaustive = false;
  double lipschitz = 0.0;
  double threshold = 0.0;  // 2 dx Lip(m)
  bool passed() const { return max_violation <= threshold; }
};

/// f(z + w) <= f(z) + f(w) over integer cone pairs whose sum lies within the
/// table. Exhaustive when the number of pairs is at most `sample_size`,
/// otherwise a seeded sample of that size.
inline SubadditivityReport check_subadditivity(const MetricTable& tab, std::size_t sample_size,
                                               std::uint64_t seed = 1) {
  SubadditivityReport rep;
  const std::int64_t H = integer_horizon(tab);
  rep.lipschitz = measured_spatial_lipschitz(tab);
  rep.threshold = 2.0 * tab.dx() * rep.lipschitz;
  if (H < 2) return rep;
  const auto pts = integer_cone_points(tab, H - 1);
  auto visit = [&](const SpacePoint& z, const SpacePoint& w) {
    if (z.t + w.t > H) return;
    SpacePoint s{z.t + w.t, {}};
    for (int j = 0; j < tab.dim; ++j) s.x[static_cast<std::size_t>(j)] = z.x[static_cast<std::size_t>(j)] + w.x[static_cast<std::size_t>(j)];
    const double fz = f_integer(tab, z.t, z.x), fw = f_integer(tab, w.t, w.x), fs = f_integer(tab, s.t, s.x);
    if (!std::isfinite(fz) || !std::isfinite(fw) || !std::isfinite(fs)) return;
    ++rep.pairs;
    const double v = fs - fz - fw;
    if (v > rep.max_violation) {
      rep.max_violation = v;
      rep.worst_z = z;
      rep.worst_w = w;
    }
  };
  const double total = static_cast<double>(pts.size()) * static_cast<double>(pts.size());
  if (total <= static_cast<double>(sample_size)) {
    rep.exhaustive = true;
    for (const auto& z : pts)
      for (const auto& w : pts) visit(z, w);
  } else {
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < sample_size; ++i) {
      const auto& z = pts[rng.below(pts.size())];
      const auto& w = pts[rng.below(pts.size())];
      visit(z, w);
    }
  }
  return rep;
}

/// Smallest K >= 1 with K^{-1}|z| - K <= f(z) <= K|z| + K over all stored
/// integer cone points, |z| the space-time norm.
inline double check_linear_growth(const MetricTable& tab) {
  double K = 1.0;
  for (const auto& z : integer_cone_points(tab, integer_horizon(tab))) {
    const double f = f_integer(tab, z.t, z.x);
    if (!std::isfinite(f)) continue;
    double r2 = static_cast<double>(z.t * z.t);
    for (int j = 0; j < tab.dim; ++j) r2 += static_cast<double>(z.x[static_cast<std::size_t>(j)] * z.x[static_cast<std::size_t>(j)]);
    const double r = std::sqrt(r2);
    K = std::max(K, f / (r + 1.0));
    K = std::max(K, 0.5 * (-f + std::sqrt(f * f + 4.0 * r)));
  }
  return K;
}

struct ApproximateGeodesic {
  std::vector<SpacePoint> nodes;  // unit time steps, nodes.front() = (0, 0)
  double defect = 0.0;            // max |f(z_k - z_i) - f(z_k - z_j) - f(z_j - z_i)|
  double step_bound = 0.0;        // max |x_{i+1} - x_i|
  double max_rounding = 0.0;      // largest distance moved by rounding
};

namespace detail {

inline SpacePoint difference(const SpacePoint& a, const SpacePoint& b, int d) {
  SpacePoint out{a.t - b.t, {}};
  for (int j = 0; j < d; ++j) out.x[static_cast<std::size_t>(j)] = a.x[static_cast<std::size_t>(j)] - b.x[static_cast<std::size_t>(j)];
  return out;
}

inline double spatial_norm(const SpacePoint& z, int d) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) s += static_cast<double>(z.x[static_cast<std::size_t>(j)] * z.x[static_cast<std::size_t>(j)]);
  return std::sqrt(s);
}

}  // namespace detail

inline double geodesic_defect(const MetricTable& tab, const std::vector<SpacePoint>& nodes) {
  const int d = tab.dim;
  const std::size_t n = nodes.size();
  // f on every ordered pair, then the triple scan
  std::vector<double> F(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) {
      const auto z = detail::difference(nodes[k], nodes[i], d);
      F[i * n + k] = f_integer(tab, z.t, z.x);
    }
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        const double v = std::abs(F[i * n + k] - F[j * n + k] - F[i * n + j]);
        if (!std::isfinite(v)) return kInf;
        worst = std::max(worst, v);
      }
  return worst;
}

/// Chops a minimizer for m(t, 0, x) at unit times and rounds the pieces to
/// integer points, choosing among floor/ceil candidates by a shortest-path
/// pass that keeps every unit increment inside the cone.
inline ApproximateGeodesic extract_approximate_geodesic(const MetricTable& tab, std::int64_t t,
                                                        std::span<const std::int64_t> x) {
  const int d = tab.dim;
  if (t < 1 || static_cast<int>(x.size()) != d) throw DomainError("extract_approximate_geodesic: bad target");
  if (t > integer_horizon(tab)) throw DomainError("extract_approximate_geodesic: time beyond the table");
  Vec xv(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) xv[static_cast<std::size_t>(j)] = static_cast<double>(x[static_cast<std::size_t>(j)]);
  if (!tab.cone().contains(static_cast<double>(t), xv)) throw DomainError("extract_approximate_geodesic: target outside the cone");
  const DiscretePath path = extract_minimizing_path(tab, static_cast<double>(t), xv);
  const int q = tab.lattice.steps_per_unit;
  const double r = tab.lattice.cells_per_unit;
  const Cone cone = tab.cone();

  const auto n = static_cast<std::size_t>(t);
  const std::size_t ncand = std::size_t{1} << d;
  std::vector<Vec> real(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    real[i].resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      real[i][static_cast<std::size_t>(j)] =
          static_cast<double>(path.nodes[i * static_cast<std::size_t>(q)][static_cast<std::size_t>(j)] -
                              tab.origin[static_cast<std::size_t>(j)]) / r;
  }
  auto candidate = [&](std::size_t i, std::size_t c) {
    std::array<std::int64_t, kMaxDim> z{};
    for (int j = 0; j < d; ++j) {
      const double u = real[i][static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(j)] = static_cast<std::int64_t>((c >> j) & 1 ? std::ceil(u) : std::floor(u));
    }
    return z;
  };
  auto dist2 = [&](std::size_t i, const std::array<std::int64_t, kMaxDim>& z) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double e = static_cast<double>(z[static_cast<std::size_t>(j)]) - real[i][static_cast<std::size_t>(j)];
      s += e * e;
    }
    return s;
  };
  auto in_cone = [&](const std::array<std::int64_t, kMaxDim>& a, const std::array<std::int64_t, kMaxDim>& b) {
    Vec dv(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) dv[static_cast<std::size_t>(j)] = static_cast<double>(b[static_cast<std::size_t>(j)] - a[static_cast<std::size_t>(j)]);
    return cone.contains(1.0, dv);
  };

  // Shortest path over the candidates with weight f(z_i - z_{i-1}) on each
  // unit piece, ties broken by rounding distance. The endpoints are integral
  // already, so every candidate there coincides.
  using Score = std::pair<double, double>;
  const Score none{kInf, kInf};
  std::vector<Score> best(ncand, none), next(ncand);
  std::vector<std::vector<int>> from(n + 1, std::vector<int>(ncand, -1));
  best[0] = {0.0, 0.0};
  for (std::size_t i = 1; i <= n; ++i) {
    std::fill(next.begin(), next.end(), none);
    for (std::size_t c = 0; c < ncand; ++c) {
      const auto z = candidate(i, c);
      if (i == n && c != 0) continue;
      for (std::size_t b = 0; b < ncand; ++b) {
        if (!std::isfinite(best[b].first) || (i == 1 && b != 0)) continue;
        const auto zb = candidate(i - 1, b);
        if (!in_cone(zb, z)) continue;
        std::array<std::int64_t, kMaxDim> dz{};
        for (int j = 0; j < d; ++j) dz[static_cast<std::size_t>(j)] = z[static_cast<std::size_t>(j)] - zb[static_cast<std::size_t>(j)];
        const double piece = f_integer(tab, 1, dz);
        if (!std::isfinite(piece)) continue;
        const Score v{best[b].first + piece, best[b].second + dist2(i, z)};
        if (v < next[c]) {
          next[c] = v;
          from[i][c] = static_cast<int>(b);
        }
      }
    }
    best.swap(next);
  }
  if (!std::isfinite(best[0].first)) throw ResolutionError("extract_approximate_geodesic: no cone-preserving rounding");

  ApproximateGeodesic g;
  g.nodes.resize(n + 1);
  std::size_t c = 0;
  for (std::size_t i = n + 1; i-- > 0;) {
    const auto z = candidate(i, c);
    g.nodes[i] = SpacePoint{static_cast<std::int64_t>(i), z};
    g.max_rounding = std::max(g.max_rounding, std::sqrt(dist2(i, z)));
    if (i > 0) c = static_cast<std::size_t>(from[i][c]);
  }
  for (std::size_t i = 0; i + 1 <= n; ++i)
    g.step_bound = std::max(g.step_bound, detail::spatial_norm(detail::difference(g.nodes[i + 1], g.nodes[i], d), d));
  g.defect = geodesic_defect(tab, g.nodes);
  return g;
}

struct EnvelopeSample {
  double t = 0.0;
  Vec x;
  double gap = 0.0;  // f(t, x) - mbar(t, 0, x)
};

struct EnvelopeReport {
  std::vector<EnvelopeSample> samples;
  double constant = 0.0;  // smallest C with gap <= C log(C + |z|)
  double min_gap = kInf;
  double max_gap = -kInf;
};

/// f(t, x) - t Lbar(x / t) along the rays t -> (t, t v) at whole times t
/// where t v is a lattice point, and the envelope constant.
inline EnvelopeReport gap_vs_log_envelope(const MetricTable& tab, const EffectiveModel& model,
                                          const std::vector<Vec>& directions) {
  EnvelopeReport rep;
  const std::int64_t H = integer_horizon(tab);
  const double r = tab.lattice.cells_per_unit;
  for (const auto& v : directions) {
    for (std::int64_t t = 1; t <= H; ++t) {
      Vec x(v.size());
      bool on_lattice = true;
      for (std::size_t j = 0; j < v.size(); ++j) {
        x[j] = static_cast<double>(t) * v[j];
        on_lattice = on_lattice && std::abs(x[j] * r - std::round(x[j] * r)) < 1e-9;
      }
      if (!on_lattice || !tab.cone().contains(static_cast<double>(t), x)) continue;
      const double f = tab.value_at(static_cast<double>(t), x);
      const double fbar = static_cast<double>(t) * model.lbar_at(v);
      if (!std::isfinite(f) || !std::isfinite(fbar)) continue;
      rep.samples.push_back({static_cast<double>(t), x, f - fbar});
      rep.min_gap = std::min(rep.min_gap, f - fbar);
      rep.max_gap = std::max(rep.max_gap, f - fbar);
    }
  }
  auto ok = [&](double C) {
    for (const auto& s : rep.samples) {
      const double z = std::sqrt(s.t * s.t + norm(s.x) * norm(s.x));
      if (s.gap > C * std::log(C + z)) return false;
    }
    return true;
  };
  if (rep.samples.empty() || ok(1e-12)) return rep;
  double lo = 1e-12, hi = 1.0;
  while (!ok(hi)) hi *= 2.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  rep.constant = hi;
  return rep;
}

/// max over k of |m(t, 0, x) - 2^{-k} m(2^k t, 0, 2^k x)| within the table.
inline double doubling_deviation(const MetricTable& tab, std::int64_t t, std::span<const std::int64_t> x) {
  std::array<std::int64_t, kMaxDim> z{};
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = x[j];
  const double base = f_integer(tab, t, z);
  double worst = 0.0;
  const std::int64_t H = integer_horizon(tab);
  for (std::int64_t s = 2; s * t <= H; s *= 2) {
    std::array<std::int64_t, kMaxDim> zs{};
    for (std::size_t j = 0; j < x.size(); ++j) zs[j] = s * x[j];
    worst = std::max(worst, std::abs(base - f_integer(tab, s * t, zs) / static_cast<double>(s)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// two-dimensional surgery

/// Polyline in R x R^2 with uniform time step; node i = (i dt, y1, y2).
struct SpaceTimePath2D {
  double dt = 1.0;
  std::vector<std::array<double, 3>> nodes;

  std::size_t steps() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  double duration() const { return static_cast<double>(steps()) * dt; }
};

/// Start-preserving cyclic shift by c steps: the increments are rotated so
/// the path runs through those after step c first, then the rest.
///   eta^c(s) = eta(0) + eta(c + s) - eta(c)               if c + s <= n
///            = eta(s - (n - c)) + eta(n) - eta(c)         otherwise
inline SpaceTimePath2D cyclic_shift(const SpaceTimePath2D& path, std::size_t c) {
  const std::size_t n = path.steps();
  if (c > n) throw DomainError("cyclic_shift: shift beyond the path");
  SpaceTimePath2D out;
  out.dt = path.dt;
  out.nodes.resize(n + 1);
  for (std::size_t s = 0; s <= n; ++s) {
    std::array<double, 3> p{};
    for (std::size_t j = 1; j < 3; ++j) {
      if (c + s <= n)
        p[j] = path.nodes[0][j] + path.nodes[c + s][j] - path.nodes[c][j];
      else
        p[j] = path.nodes[s - (n - c)][j] + path.nodes[n][j] - path.nodes[c][j];
    }
    p[0] = path.nodes[0][0] + static_cast<double>(s) * path.dt;
    out.nodes[s] = p;
  }
  return out;
}

/// Same as cyclic_shift with a real shift, snapped to the nearest step.
inline SpaceTimePath2D cyclic_shift_time(const SpaceTimePath2D& path, double c, bool* snapped = nullptr) {
  const double k = c / path.dt;
  const double kr = std::round(k);
  if (snapped) *snapped = std::abs(k - kr) > 1e-9;
  return cyclic_shift(path, static_cast<std::size_t>(std::clamp(kr, 0.0, static_cast<double>(path.steps()))));
}

struct Crossing {
  std::size_t c1 = 0, c2 = 0, s = 0;  // shifts and meeting step
  std::array<double, 3> witness{};     // point on the shifted eta^1
  double separation = kInf;            // |eta^{1,c1}(s) - eta^{2,c2}(s)|
  double winding_first = 0.0;          // half-turns at the two extremal shift pairs
  double winding_second = 0.0;
};

namespace detail {

/// Net turning of s -> eta1(s) - eta2(s) projected to the spatial plane, in
/// turns. NaN if the difference vanishes somewhere.
inline double winding(const SpaceTimePath2D& a, const SpaceTimePath2D& b) {
  double total = 0.0, prev = 0.0;
  for (std::size_t s = 0; s < a.nodes.size(); ++s) {
    const double u = a.nodes[s][1] - b.nodes[s][1], w = a.nodes[s][2] - b.nodes[s][2];
    if (u == 0.0 && w == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double ang = std::atan2(w, u);
    if (s > 0) total += std::remainder(ang - prev, kTwoPi);
    prev = ang;
  }
  return total / kTwoPi;
}

inline std::size_t extremal_index(const SpaceTimePath2D& p, bool want_max) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.nodes.size(); ++i)
    if (want_max ? p.nodes[i][2] > p.nodes[best][2] : p.nodes[i][2] < p.nodes[best][2]) best = i;
  return best;
}

}  // namespace detail

/// Scans every shift pair (c1, c2) and meeting step s for the smallest
/// spatial separation of the shifted paths; the first pair in scan order
/// (s, c1, c2 ascending) wins ties. ResolutionError if nothing comes within
/// `tolerance`.
inline Crossing find_crossing(const SpaceTimePath2D& eta1, const SpaceTimePath2D& eta2, double tolerance) {
  const std::size_t n = eta1.steps();
  if (eta2.steps() != n || n == 0) throw DomainError("find_crossing: paths must have equal positive length");
  Crossing best;
  best.winding_first = detail::winding(cyclic_shift(eta1, detail::extremal_index(eta1, true)),
                                       cyclic_shift(eta2, detail::extremal_index(eta2, false)));
  best.winding_second = detail::winding(cyclic_shift(eta1, detail::extremal_index(eta1, false)),
                                        cyclic_shift(eta2, detail::extremal_index(eta2, true)));
  // shifted position = start + P(c + s) - P(c) with wrap
  auto at = [n](const SpaceTimePath2D& p, std::size_t c, std::size_t s, std::size_t j) {
    return c + s <= n ? p.nodes[0][j] + p.nodes[c + s][j] - p.nodes[c][j]
                      : p.nodes[s - (n - c)][j] + p.nodes[n][j] - p.nodes[c][j];
  };
  for (std::size_t s = 0; s <= n; ++s)
    for (std::size_t c1 = 0; c1 < n; ++c1) {
      const double a1 = at(eta1, c1, s, 1), a2 = at(eta1, c1, s, 2);
      for (std::size_t c2 = 0; c2 < n; ++c2) {
        const double u = a1 - at(eta2, c2, s, 1), w = a2 - at(eta2, c2, s, 2);
        const double sep = std::sqrt(u * u + w * w);
        if (sep < best.separation) {
          best.separation = sep;
          best.c1 = c1;
          best.c2 = c2;
          best.s = s;
          best.witness = {eta1.nodes[0][0] + static_cast<double>(s) * eta1.dt, a1, a2};
        }
      }
    }
  if (best.separation > tolerance)
    throw ResolutionError("find_crossing: closest approach " + std::to_string(best.separation) +
                          " exceeds tolerance " + std::to_string(tolerance) + "; refine the time lattice");
  return best;
}

struct SurgeryResult {
  DiscretePath path;             // duration 2t, visits x at time t
  Crossing crossing;
  std::array<std::int64_t, 2> mismatch{};  // x minus the spliced first-half displacement, lattice units
  double cost_before = 0.0;      // cost(gamma)
  double cost_after = 0.0;       // cost of the spliced path
  double first_half_cost = 0.0;
  double second_half_cost = 0.0;
  double gap() const { return cost_after - cost_before; }
  std::vector<std::size_t> cut_points;  // gamma steps where the first-half pieces start
};

namespace detail {

using Increment = std::array<int, kMaxDim>;

/// Adds `delta` (lattice units) to the increments in `incs` one unit at a
/// time, keeping every increment admissible.
inline bool absorb(std::vector<Increment>& incs, std::array<std::int64_t, 2> delta, const StepCosts& sc) {
  for (std::size_t j = 0; j < 2; ++j) {
    while (delta[j] != 0) {
      const int unit = delta[j] > 0 ? 1 : -1;
      // prefer the increment whose adjusted norm is smallest
      std::size_t pick = incs.size();
      double pick_norm = kInf;
      for (std::size_t i = 0; i < incs.size(); ++i) {
        Increment o = incs[i];
        o[j] += unit;
        if (sc.offset_index(o) < 0) continue;
        const double nn = std::hypot(static_cast<double>(o[0]), static_cast<double>(o[1]));
        if (nn < pick_norm) {
          pick_norm = nn;
          pick = i;
        }
      }
      if (pick == incs.size()) return false;
      incs[pick][j] += unit;
      delta[j] -= unit;
    }
  }
  return true;
}

}  // namespace detail

/// Splits a minimizer for m(2t, 0, 2x) into halves, maps them to the paths
/// eta^1 (from (0, A, 0) to (t, 0, 0)) and eta^2 (from 0 to (t, A, 0)) by a
/// shear and rotation, finds crossing cyclic shifts and splices a path that
/// visits x at time t. The returned path has the same endpoints and duration
/// as gamma.
inline SurgeryResult path_surgery(const DiscretePath& gamma, const MetricTable& tab, double tolerance = -1.0) {
  if (gamma.dim != 2) throw DomainError("path_surgery: two-dimensional paths only");
  const std::size_t N = gamma.steps();
  if (N == 0 || N % 2 != 0) throw DomainError("path_surgery: gamma needs an even number of steps");
  const StepCosts& sc = *tab.costs;
  const std::size_t K = N / 2;
  const double r = gamma.cells_per_unit;
  if (tolerance < 0.0) tolerance = tab.lattice.vmax * tab.dt();

  std::vector<detail::Increment> a(K), b(K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      a[i][j] = static_cast<int>(gamma.nodes[i + 1][j] - gamma.nodes[i][j]);
      b[i][j] = static_cast<int>(gamma.nodes[K + i + 1][j] - gamma.nodes[K + i][j]);
    }
  // midpoint target x and defect y, lattice units
  std::array<std::int64_t, 2> x2{}, y2{};
  for (std::size_t j = 0; j < 2; ++j) {
    x2[j] = gamma.nodes[N][j] - gamma.nodes[0][j];
    if (x2[j] % 2 != 0) throw DomainError("path_surgery: endpoint is not twice a lattice point");
    y2[j] = x2[j] / 2 - (gamma.nodes[K][j] - gamma.nodes[0][j]);
  }
  // shear s x / t away and rotate y onto the first axis
  const double A = std::hypot(static_cast<double>(y2[0]), static_cast<double>(y2[1])) / r;
  const double ca = A > 0 ? static_cast<double>(y2[0]) / r / A : 1.0;
  const double sa = A > 0 ? static_cast<double>(y2[1]) / r / A : 0.0;
  auto build = [&](const std::vector<detail::Increment>& incs, bool first) {
    SpaceTimePath2D p;
    p.dt = gamma.dt();
    p.nodes.resize(K + 1);
    double u = 0.0, w = 0.0;
    for (std::size_t i = 0; i <= K; ++i) {
      if (i > 0) {
        u += incs[i - 1][0] / r;
        w += incs[i - 1][1] / r;
      }
      const double frac = static_cast<double>(i) / static_cast<double>(K);
      double e1 = u - frac * x2[0] / (2.0 * r), e2 = w - frac * x2[1] / (2.0 * r);
      if (first) {
        e1 += y2[0] / r;
        e2 += y2[1] / r;
      }
      p.nodes[i] = {static_cast<double>(i) * p.dt, ca * e1 + sa * e2, -sa * e1 + ca * e2};
    }
    return p;
  };
  const SpaceTimePath2D eta1 = build(a, true), eta2 = build(b, false);

  SurgeryResult res;
  res.crossing = find_crossing(eta1, eta2, tolerance);
  const std::size_t c1 = res.crossing.c1, c2 = res.crossing.c2, s = res.crossing.s;

  // runs of gamma (start step, length) making up each half, in path order
  using Run = std::pair<std::size_t, std::size_t>;
  auto runs_of = [K](std::size_t base, std::size_t c, std::size_t from, std::size_t to, std::vector<Run>& out) {
    // rotated indices from..to-1 of the half starting at gamma step `base`
    std::size_t i = from;
    while (i < to) {
      const std::size_t g = (c + i) % K;
      const std::size_t len = std::min(to - i, K - g);
      out.push_back({base + g, len});
      i += len;
    }
  };
  std::vector<Run> first_runs, second_runs;
  runs_of(K, c2, 0, s, first_runs);
  runs_of(0, c1, s, K, first_runs);
  runs_of(0, c1, 0, s, second_runs);
  runs_of(K, c2, s, K, second_runs);

  // crossing mismatch before any repair
  for (std::size_t j = 0; j < 2; ++j) {
    std::int64_t disp = 0;
    for (const auto& [g, len] : first_runs) disp += gamma.nodes[g + len][j] - gamma.nodes[g][j];
    res.mismatch[j] = x2[j] / 2 - disp;
  }

  // Each run is laid down as the integer translate of its piece of gamma
  // nearest to the current end point, which leaves its cost unchanged; the
  // jumps at the junctions and at the far end are spread over a few steps
  // around each junction.
  const auto rr = static_cast<std::int64_t>(gamma.cells_per_unit);
  auto place = [&](const std::vector<Run>& runs, LatticePoint start, const LatticePoint& target) {
    std::vector<detail::Increment> incs;
    std::vector<std::pair<std::size_t, std::array<std::int64_t, 2>>> jumps;
    LatticePoint p = start;
    for (const auto& [g, len] : runs) {
      if (len == 0) continue;
      std::array<std::int64_t, 2> jump{};
      for (std::size_t j = 0; j < 2; ++j) {
        const double rel = static_cast<double>(p[j] - gamma.nodes[g][j]) / static_cast<double>(rr);
        const std::int64_t k = static_cast<std::int64_t>(std::round(rel)) * rr;
        jump[j] = gamma.nodes[g][j] + k - p[j];
        p[j] = gamma.nodes[g + len][j] + k;
      }
      jumps.push_back({incs.size(), jump});
      for (std::size_t i = g; i < g + len; ++i)
        incs.push_back({static_cast<int>(gamma.nodes[i + 1][0] - gamma.nodes[i][0]),
                        static_cast<int>(gamma.nodes[i + 1][1] - gamma.nodes[i][1]), 0});
    }
    jumps.push_back({incs.size(), {target[0] - p[0], target[1] - p[1]}});
    const auto n = static_cast<std::ptrdiff_t>(incs.size());
    for (const auto& [pos, jump] : jumps) {
      if (jump[0] == 0 && jump[1] == 0) continue;
      bool done = false;
      for (std::ptrdiff_t W = gamma.steps_per_unit; !done; W *= 2) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(pos) - W);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, static_cast<std::ptrdiff_t>(pos) + W);
        std::vector<detail::Increment> window(incs.begin() + lo, incs.begin() + hi);
        if (detail::absorb(window, jump, sc)) {
          std::copy(window.begin(), window.end(), incs.begin() + lo);
          done = true;
        } else if (lo == 0 && hi == n) {
          throw ResolutionError("path_surgery: junction jump cannot be absorbed within the speed cap");
        }
      }
    }
    return incs;
  };
  LatticePoint mid = gamma.nodes[0], end = gamma.nodes[N];
  for (std::size_t j = 0; j < 2; ++j) mid[j] += x2[j] / 2;
  const auto first = place(first_runs, gamma.nodes[0], mid);
  const auto second = place(second_runs, mid, end);

  res.path = gamma;
  res.path.nodes.assign(1, gamma.nodes[0]);
  for (const auto* part : {&first, &second})
    for (const auto& o : *part) {
      LatticePoint z = res.path.nodes.back();
      z[0] += o[0];
      z[1] += o[1];
      res.path.nodes.push_back(z);
    }
  res.cost_before = path_cost(sc, gamma);
  res.path.cost = path_cost(sc, res.path);
  res.cost_after = res.path.cost;
  for (std::size_t i = 0; i < K; ++i) res.first_half_cost += sc.step(res.path.nodes[i], res.path.nodes[i + 1]);
  res.second_half_cost = res.cost_after - res.first_half_cost;
  for (const auto& [g, len] : first_runs)
    if (len > 0) res.cut_points.push_back(g);
  return res;
}

struct LemmaSample {
  std::int64_t t = 0;
  std::array<std::int64_t, 2> x{};
  double gap = 0.0;  // 2 m(t, 0, x) - m(2t, 0, 2x)
  bool surgery_ok = false;
  double surgery_gap = kInf;
  Crossing crossing;
  double cost_before = kInf, cost_after = kInf;
};

/// Doubling gap and surgery at (t, x) from a table that stores times t and 2t.
inline LemmaSample lemma_sample(const MetricTable& tab, std::int64_t t, std::array<std::int64_t, 2> x) {
  LemmaSample out;
  out.t = t;
  out.x = x;
  const std::array<std::int64_t, kMaxDim> z{x[0], x[1], 0}, z2{2 * x[0], 2 * x[1], 0};
  const double m1 = f_integer(tab, t, z), m2 = f_integer(tab, 2 * t, z2);
  out.gap = 2.0 * m1 - m2;
  const Vec target{2.0 * static_cast<double>(x[0]), 2.0 * static_cast<double>(x[1])};
  const DiscretePath gamma = extract_minimizing_path(tab, 2.0 * static_cast<double>(t), target);
  out.cost_before = gamma.cost;
  try {
    const auto s = path_surgery(gamma, tab);
    out.surgery_ok = true;
    out.surgery_gap = s.gap();
    out.crossing = s.crossing;
    out.cost_after = s.cost_after;
  } catch (const ResolutionError&) {
    out.surgery_ok = false;
  }
  return out;
}

inline void write_surgery_csv(std::ostream& os, const std::vector<LemmaSample>& samples) {
  os << "# hjhom-surgery v1\n";
  os << "t,x1,x2,gap,c1,c2,s,separation,cost_before,cost_after,ok\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%.12e,%zu,%zu,%zu,%.12e,%.12e,%.12e,%d\n",
                  static_cast<long long>(s.t), static_cast<long long>(s.x[0]), static_cast<long long>(s.x[1]), s.gap,
                  s.crossing.c1, s.crossing.c2, s.crossing.s, s.crossing.separation, s.cost_before, s.cost_after,
                  s.surgery_ok ? 1 : 0);
    os << buf;
  }
}

}  // namespace hjhom
