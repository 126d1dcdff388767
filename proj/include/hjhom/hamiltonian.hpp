#pragma once

// Periodic convex Hamiltonians H(x, p) = |p|^2 - V(x) on the unit torus.
//
// The potential V is either a finite cosine series
//     V(x) = a0 + sum_i a_i cos(2 pi k_i . x),   k_i in Z^d,
// or a table on a uniform torus grid with periodic multilinear interpolation.
//
// The stored potential is always the *working* potential. `normalize` lowers
// it so that H(x, 0) = -V(x) <= -1 and records the applied shift: the working
// Hamiltonian equals the original one plus `normalization_shift`, and original
// solution values are recovered as u_work(t, .) + t * normalization_shift.

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hjhom/common.hpp"
#include "hjhom/config.hpp"

namespace hjhom {

enum class Family {
  kQuadraticMinusPotential,  // cosine-series V
  kTabulatedPotential,       // gridded V
};

inline std::string to_string(Family f) {
  return f == Family::kQuadraticMinusPotential ? "quadratic_minus_potential" : "tabulated_potential";
}

struct CosineTerm {
  double amplitude = 0.0;
  std::vector<int> wave;  // integer wave vector, one entry per dimension
};

struct HamiltonianSpec {
  int dimension = 1;
  Family family = Family::kQuadraticMinusPotential;

  // cosine series
  double a0 = 1.0;
  std::vector<CosineTerm> terms;

  // tabulated: table_size^d values, row-major (last axis fastest)
  int table_size = 0;
  std::vector<double> table;

  double normalization_shift = 0.0;
  double momentum_cap = kInf;

  double potential(std::span<const double> x) const;
  double potential_lipschitz() const;
  double potential_lower_bound(int grid = 64) const;
  double potential_upper_bound(int grid = 64) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// potential evaluation

namespace detail {

inline double cosine_series(const HamiltonianSpec& s, std::span<const double> x) {
  double v = s.a0;
  for (const auto& t : s.terms) {
    double phase = 0.0;
    for (int j = 0; j < s.dimension; ++j) phase += t.wave[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
    v += t.amplitude * std::cos(kTwoPi * phase);
  }
  return v;
}

inline double tabulated(const HamiltonianSpec& s, std::span<const double> x) {
  const int n = s.table_size;
  const int d = s.dimension;
  std::array<int, kMaxDim> i0{};
  std::array<double, kMaxDim> frac{};
  for (int j = 0; j < d; ++j) {
    double u = wrap_unit(x[static_cast<std::size_t>(j)]) * n;
    int k = static_cast<int>(std::floor(u));
    frac[static_cast<std::size_t>(j)] = u - k;
    i0[static_cast<std::size_t>(j)] = k % n;
  }
  double v = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    std::size_t idx = 0;
    for (int j = 0; j < d; ++j) {
      const bool hi = (corner >> j) & 1;
      const auto uj = static_cast<std::size_t>(j);
      w *= hi ? frac[uj] : 1.0 - frac[uj];
      idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>((i0[uj] + (hi ? 1 : 0)) % n);
    }
    if (w != 0.0) v += w * s.table[idx];
  }
  return v;
}

/// Visits every point of the uniform torus grid with `n` points per axis.
template <class F>
void for_each_torus_point(int dim, int n, F&& f) {
  Vec x(static_cast<std::size_t>(dim), 0.0);
  std::size_t total = 1;
  for (int j = 0; j < dim; ++j) total *= static_cast<std::size_t>(n);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t r = flat;
    for (int j = dim - 1; j >= 0; --j) {
      x[static_cast<std::size_t>(j)] = static_cast<double>(r % static_cast<std::size_t>(n)) / n;
      r /= static_cast<std::size_t>(n);
    }
    f(std::span<const double>(x));
  }
}

}  // namespace detail

inline double HamiltonianSpec::potential(std::span<const double> x) const {
  return family == Family::kTabulatedPotential ? detail::tabulated(*this, x)
                                               : detail::cosine_series(*this, x);
}

inline double HamiltonianSpec::potential_lipschitz() const {
  if (family == Family::kTabulatedPotential) {
    // max slope of the multilinear interpolant along any axis, times sqrt(d)
    const int n = table_size;
    double worst = 0.0;
    const std::size_t total = table.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t stride = 1;
      for (int j = dimension - 1; j >= 0; --j) {
        const std::size_t coord = (flat / stride) % static_cast<std::size_t>(n);
        const std::size_t next = coord + 1 == static_cast<std::size_t>(n) ? flat - coord * stride : flat + stride;
        worst = std::max(worst, std::abs(table[next] - table[flat]) * n);
        stride *= static_cast<std::size_t>(n);
      }
    }
    return worst * std::sqrt(static_cast<double>(dimension));
  }
  double lip = 0.0;
  for (const auto& t : terms) {
    double k2 = 0.0;
    for (int w : t.wave) k2 += static_cast<double>(w) * w;
    lip += std::abs(t.amplitude) * kTwoPi * std::sqrt(k2);
  }
  return lip;
}

/// Certified lower bound on min V (exact for tables).
inline double HamiltonianSpec::potential_lower_bound(int grid) const {
  if (family == Family::kTabulatedPotential) return *std::min_element(table.begin(), table.end());
  double coef = a0;
  for (const auto& t : terms) coef -= std::abs(t.amplitude);
  double grid_min = kInf;
  detail::for_each_torus_point(dimension, grid, [&](std::span<const double> x) {
    grid_min = std::min(grid_min, potential(x));
  });
  const double slack = potential_lipschitz() * std::sqrt(static_cast<double>(dimension)) / (2.0 * grid);
  return std::max(coef, grid_min - slack);
}

/// Certified upper bound on max V (exact for tables).
inline double HamiltonianSpec::potential_upper_bound(int grid) const {
  if (family == Family::kTabulatedPotential) return *std::max_element(table.begin(), table.end());
  double coef = a0;
  for (const auto& t : terms) coef += std::abs(t.amplitude);
  double grid_max = -kInf;
  detail::for_each_torus_point(dimension, grid, [&](std::span<const double> x) {
    grid_max = std::max(grid_max, potential(x));
  });
  const double slack = potential_lipschitz() * std::sqrt(static_cast<double>(dimension)) / (2.0 * grid);
  return std::min(coef, grid_max + slack);
}

inline void HamiltonianSpec::validate() const {
  if (dimension < 1 || dimension > kMaxDim)
    throw ConfigError("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  if (!(momentum_cap > 0.0)) throw ConfigError("momentum_cap must be positive");
  if (family == Family::kQuadraticMinusPotential) {
    if (!std::isfinite(a0)) throw ConfigError("potential.a0 must be finite");
    for (const auto& t : terms) {
      if (static_cast<int>(t.wave.size()) != dimension)
        throw ConfigError("potential term wave vector has wrong length");
      if (!std::isfinite(t.amplitude)) throw ConfigError("potential term amplitude must be finite");
    }
  } else {
    if (table_size < 2) throw ConfigError("potential.grid_size must be >= 2");
    std::size_t expect = 1;
    for (int j = 0; j < dimension; ++j) expect *= static_cast<std::size_t>(table_size);
    if (table.size() != expect)
      throw ConfigError("potential.values has " + std::to_string(table.size()) + " entries, expected " +
                        std::to_string(expect));
    if (!all_finite(table)) throw ConfigError("potential.values must be finite");
  }
}

// ---------------------------------------------------------------------------
// constructors for the built-in families

inline HamiltonianSpec constant_potential(int dim, double value) {
  HamiltonianSpec s;
  s.dimension = dim;
  s.a0 = value;
  return s;
}

/// V(x) = a0 + sum_j amplitude * cos(2 pi x_j).
inline HamiltonianSpec separable_cosine(int dim, double a0, double amplitude) {
  HamiltonianSpec s = constant_potential(dim, a0);
  for (int j = 0; j < dim; ++j) {
    CosineTerm t;
    t.amplitude = amplitude;
    t.wave.assign(static_cast<std::size_t>(dim), 0);
    t.wave[static_cast<std::size_t>(j)] = 1;
    s.terms.push_back(t);
  }
  return s;
}

// ---------------------------------------------------------------------------
// operations

namespace detail {

/// Width of the blending annulus below the momentum cap. The blend
/// |p|^2 - V(x) phi(|p|) stays convex when |V| |phi''| <= 2; the cubic
/// smoothstep has |phi''| <= 6 / w^2.
inline double cap_blend_width(const HamiltonianSpec& s) {
  const double vmax = std::max(std::abs(s.potential_lower_bound()), std::abs(s.potential_upper_bound()));
  return std::sqrt(3.0 * std::max(vmax, 1e-12));
}

inline double cap_weight(const HamiltonianSpec& s, double pnorm) {
  if (!std::isfinite(s.momentum_cap)) return 1.0;
  const double w = cap_blend_width(s);
  const double lo = s.momentum_cap - w;
  if (pnorm <= lo) return 1.0;
  if (pnorm >= s.momentum_cap) return 0.0;
  const double u = (pnorm - lo) / w;
  return 1.0 - u * u * (3.0 - 2.0 * u);
}

}  // namespace detail

inline double evaluate_hamiltonian(const HamiltonianSpec& spec, std::span<const double> x,
                                   std::span<const double> p) {
  if (static_cast<int>(x.size()) != spec.dimension || static_cast<int>(p.size()) != spec.dimension)
    throw DomainError("evaluate_hamiltonian: dimension mismatch");
  if (!all_finite(x) || !all_finite(p)) throw DomainError("evaluate_hamiltonian: non-finite argument");
  const double pn = norm(p);
  const double p2 = pn * pn;
  const double weight = detail::cap_weight(spec, pn);
  if (weight == 0.0) return p2;
  return p2 - weight * spec.potential(x);
}

/// Lowers the potential so that max_x H(x, 0) <= -1. Returns the new spec
/// and the shift applied in this call (working H = input H + shift).
inline std::pair<HamiltonianSpec, double> normalize(const HamiltonianSpec& spec) {
  spec.validate();
  const double lower = spec.potential_lower_bound();
  const double shift = std::min(0.0, lower - 1.0);
  HamiltonianSpec out = spec;
  if (shift != 0.0) {
    if (out.family == Family::kTabulatedPotential) {
      for (double& v : out.table) v -= shift;
    } else {
      out.a0 -= shift;
    }
  }
  out.normalization_shift = spec.normalization_shift + shift;
  return {out, shift};
}

struct InvariantReport {
  double min_potential = 0.0;       // grid minimum of V
  double max_h_at_zero = 0.0;       // max_x H(x, 0) on the grid
  double convexity_violation = 0.0; // worst midpoint-convexity defect along momentum axes
  double coercivity_radius = kInf;  // smallest grid radius beyond which min_x H >= |p|^2 / 2
  double periodicity_defect = 0.0;  // max |H(x + e_j, p) - H(x, p)| on samples
  bool normalized = false;
  bool convex = false;
  bool coercive = false;
  bool ok() const { return normalized && convex && coercive && periodicity_defect <= 1e-12; }
};

/// Grid verification of the Hamiltonian invariants. Momentum scans use a
/// coarser torus subsample (`momentum_torus_points` per axis).
inline InvariantReport check_invariants(const HamiltonianSpec& spec, int torus_points = 64,
                                        double momentum_box = 8.0, int momentum_points = 65,
                                        int momentum_torus_points = 8, double tolerance = 1e-9) {
  spec.validate();
  const int d = spec.dimension;
  InvariantReport rep;
  rep.min_potential = kInf;
  rep.max_h_at_zero = -kInf;
  Vec zero(static_cast<std::size_t>(d), 0.0);
  detail::for_each_torus_point(d, torus_points, [&](std::span<const double> x) {
    const double h0 = evaluate_hamiltonian(spec, x, zero);
    rep.max_h_at_zero = std::max(rep.max_h_at_zero, h0);
    rep.min_potential = std::min(rep.min_potential, spec.potential(x));
    for (int j = 0; j < d; ++j) {
      Vec shifted(x.begin(), x.end());
      shifted[static_cast<std::size_t>(j)] += 1.0;
      for (double pj : {0.0, 1.5, -3.0}) {
        Vec p(static_cast<std::size_t>(d), pj);
        rep.periodicity_defect = std::max(
            rep.periodicity_defect,
            std::abs(evaluate_hamiltonian(spec, shifted, p) - evaluate_hamiltonian(spec, x, p)));
      }
    }
  });
  rep.normalized = rep.max_h_at_zero <= -1.0 + tolerance && spec.potential_lower_bound() >= 1.0 - tolerance;

  // Momentum grid scans.
  const double h = 2.0 * momentum_box / (momentum_points - 1);
  std::size_t total = 1;
  for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(momentum_points);
  std::vector<double> radius_fail;  // radii where coercivity fails
  double worst = 0.0;
  Vec p(static_cast<std::size_t>(d)), pm(static_cast<std::size_t>(d)), pp(static_cast<std::size_t>(d));
  std::vector<double> min_h(total, kInf);
  detail::for_each_torus_point(d, momentum_torus_points, [&](std::span<const double> x) {
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t r = flat;
      std::array<int, kMaxDim> idx{};
      for (int j = d - 1; j >= 0; --j) {
        idx[static_cast<std::size_t>(j)] = static_cast<int>(r % static_cast<std::size_t>(momentum_points));
        r /= static_cast<std::size_t>(momentum_points);
      }
      for (int j = 0; j < d; ++j) p[static_cast<std::size_t>(j)] = -momentum_box + h * idx[static_cast<std::size_t>(j)];
      const double hc = evaluate_hamiltonian(spec, x, p);
      min_h[flat] = std::min(min_h[flat], hc);
      for (int j = 0; j < d; ++j) {
        const int i = idx[static_cast<std::size_t>(j)];
        if (i == 0 || i == momentum_points - 1) continue;
        pm = p;
        pp = p;
        pm[static_cast<std::size_t>(j)] -= h;
        pp[static_cast<std::size_t>(j)] += h;
        const double defect = hc - 0.5 * (evaluate_hamiltonian(spec, x, pm) + evaluate_hamiltonian(spec, x, pp));
        worst = std::max(worst, defect);
      }
    }
  });
  rep.convexity_violation = worst;
  rep.convex = worst <= tolerance;

  double fail_radius = 0.0;
  bool any_hold = false;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t r = flat;
    double p2 = 0.0;
    for (int j = d - 1; j >= 0; --j) {
      const double pj = -momentum_box + h * static_cast<double>(r % static_cast<std::size_t>(momentum_points));
      p2 += pj * pj;
      r /= static_cast<std::size_t>(momentum_points);
    }
    if (min_h[flat] < 0.5 * p2) {
      fail_radius = std::max(fail_radius, std::sqrt(p2));
    } else {
      any_hold = true;
    }
  }
  rep.coercive = any_hold && fail_radius < momentum_box;
  rep.coercivity_radius = rep.coercive ? fail_radius : kInf;
  return rep;
}

// ---------------------------------------------------------------------------
// configuration

/// Keys consumed by `spec_from_config`.
inline const std::vector<std::string>& hamiltonian_config_keys() {
  static const std::vector<std::string> keys = {"dimension",           "family",
                                                "potential.a0",        "potential.terms",
                                                "potential.grid_size", "potential.values",
                                                "momentum_cap"};
  return keys;
}

/// Reads the Hamiltonian keys:
///   dimension        = 1 | 2 | 3
///   family           = quadratic_minus_potential | tabulated_potential
///   potential.a0     = real
///   potential.terms  = amplitude,k1,...,kd ; amplitude,k1,...,kd ; ...
///   potential.grid_size = n            (tabulated)
///   potential.values = v0, v1, ...     (tabulated, n^d values, last axis fastest)
///   momentum_cap     = real > 0 | inf
inline HamiltonianSpec spec_from_config(const Config& cfg) {
  HamiltonianSpec s;
  const long dim = cfg.get_int("dimension", 1);
  if (dim < 1 || dim > kMaxDim)
    throw ConfigParseError(cfg.line_of("dimension"), "dimension must be 1, 2 or 3");
  s.dimension = static_cast<int>(dim);
  const std::string fam = cfg.get_string("family", "quadratic_minus_potential");
  if (fam == "quadratic_minus_potential") {
    s.family = Family::kQuadraticMinusPotential;
  } else if (fam == "tabulated_potential") {
    s.family = Family::kTabulatedPotential;
  } else {
    throw ConfigParseError(cfg.line_of("family"), "unknown family '" + fam + "'");
  }
  s.a0 = cfg.get_double("potential.a0", 1.0);
  if (cfg.has("potential.terms")) {
    const int line = cfg.line_of("potential.terms");
    for (const auto& item : detail::split(cfg.get_string("potential.terms", ""), ';')) {
      if (item.empty()) continue;
      auto parts = detail::split(item, ',');
      if (static_cast<int>(parts.size()) != s.dimension + 1)
        throw ConfigParseError(line, "potential term '" + item + "' needs amplitude and " +
                                         std::to_string(s.dimension) + " wave numbers");
      CosineTerm t;
      t.amplitude = Config::to_double(parts[0], line, "potential.terms");
      for (std::size_t j = 1; j < parts.size(); ++j) {
        const double k = Config::to_double(parts[j], line, "potential.terms");
        if (k != std::round(k)) throw ConfigParseError(line, "wave numbers must be integers");
        t.wave.push_back(static_cast<int>(k));
      }
      s.terms.push_back(std::move(t));
    }
  }
  if (s.family == Family::kTabulatedPotential) {
    s.table_size = static_cast<int>(cfg.get_int("potential.grid_size", 0));
    s.table = cfg.get_list("potential.values", {});
  }
  const std::string cap = cfg.get_string("momentum_cap", "inf");
  s.momentum_cap = (cap == "inf" || cap == "none") ? kInf : cfg.get_double("momentum_cap", kInf);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigParseError(cfg.line_of(s.family == Family::kTabulatedPotential ? "potential.values" : "dimension"),
                           e.what());
  }
  return s;
}

/// Canonical text form; also the input of `spec_hash`.
inline std::string to_config_text(const HamiltonianSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << "dimension = " << s.dimension << "\n";
  os << "family = " << to_string(s.family) << "\n";
  if (s.family == Family::kQuadraticMinusPotential) {
    os << "potential.a0 = " << s.a0 << "\n";
    if (!s.terms.empty()) {
      os << "potential.terms = ";
      for (std::size_t i = 0; i < s.terms.size(); ++i) {
        if (i) os << "; ";
        os << s.terms[i].amplitude;
        for (int k : s.terms[i].wave) os << "," << k;
      }
      os << "\n";
    }
  } else {
    os << "potential.grid_size = " << s.table_size << "\n";
    os << "potential.values = ";
    for (std::size_t i = 0; i < s.table.size(); ++i) os << (i ? "," : "") << s.table[i];
    os << "\n";
  }
  if (std::isfinite(s.momentum_cap)) os << "momentum_cap = " << s.momentum_cap << "\n";
  os << "# normalization_shift = " << s.normalization_shift << "\n";
  return os.str();
}

inline std::string spec_hash(const HamiltonianSpec& s) { return hex64(fnv1a(to_config_text(s))); }

}  // namespace hjhom
