#pragma once

// Solvers for the oscillatory problem u_t + H(x/eps, Du) = 0, u(0) = u0, and
// its homogenized limit u_t + Hbar(Du) = 0.
//
//   solve_oscillatory : u^eps(t, y) = inf_x u0(x) + eps m(t/eps, x/eps, y/eps),
//                       run as one backward-free lattice DP in fast variables
//   solve_effective   : Hopf-Lax with Lbar, ubar(t, y) = inf_v u0(y - t v) + t Lbar(v)
//   solve_fd_oracle   : monotone finite differences, used only for cross-checks

#include <functional>
#include <ostream>

#include "hjhom/effective.hpp"

namespace hjhom {

struct InitialData {
  int dim = 1;
  std::function<double(std::span<const double>)> eval;
  double lipschitz = 0.0;
  std::string tag;

  double operator()(std::span<const double> x) const { return eval(x); }
};

/// u0(x) = |x|
inline InitialData cone_data(int dim) {
  return {dim, [](std::span<const double> x) { return norm(x); }, 1.0, "cone"};
}

/// u0(x) = p . x
inline InitialData affine_data(Vec p) {
  const int d = static_cast<int>(p.size());
  const double lip = norm(p);
  return {d, [p](std::span<const double> x) { return dot(p, x); }, lip, "affine"};
}

struct Bump {
  Vec center;
  double amplitude = 1.0;
  double width = 1.0;
};

/// u0(x) = sum a_i exp(-|x - c_i|^2 / w_i^2)
inline InitialData bump_data(std::vector<Bump> bumps) {
  if (bumps.empty()) throw ConfigError("bump_data: at least one bump required");
  const int d = static_cast<int>(bumps.front().center.size());
  double lip = 0.0;
  for (const auto& b : bumps) {
    if (static_cast<int>(b.center.size()) != d || b.width <= 0.0) throw ConfigError("bump_data: bad bump");
    lip += std::abs(b.amplitude) * std::sqrt(2.0) * std::exp(-0.5) / b.width;
  }
  auto f = [bumps](std::span<const double> x) {
    double s = 0.0;
    for (const auto& b : bumps) {
      double r2 = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) r2 += (x[j] - b.center[j]) * (x[j] - b.center[j]);
      s += b.amplitude * std::exp(-r2 / (b.width * b.width));
    }
    return s;
  };
  return {d, f, lip, "bumps"};
}

struct SolutionField {
  int dim = 1;
  double t = 0.0;
  double eps = 0.0;  // 0 for the homogenized solution
  std::vector<Vec> points;
  std::vector<double> values;
  std::string provenance;
};

inline void check_targets(int dim, const std::vector<Vec>& targets) {
  if (targets.empty()) throw ConfigError("solver: no target points");
  for (const auto& y : targets)
    if (static_cast<int>(y.size()) != dim || !all_finite(y)) throw DomainError("solver: bad target point");
}

struct OscillatoryOptions {
  double max_fast_horizon = 1e5;  // largest t / eps the lattice run may take
  int threads = 1;
};

/// u^eps at the targets. The fast time T = t / eps must be a whole number of
/// lattice steps. The values are in the original (unshifted) units.
inline SolutionField solve_oscillatory(const InitialData& u0, const LagrangianField& L, const LatticeSpec& lat,
                                       double eps, double t, const std::vector<Vec>& targets,
                                       const OscillatoryOptions& opt = {}) {
  const int d = L.spec.dimension;
  if (u0.dim != d) throw DomainError("solve_oscillatory: initial data dimension mismatch");
  if (!(eps > 0.0) || !(t > 0.0)) throw DomainError("solve_oscillatory: need eps > 0 and t > 0");
  check_targets(d, targets);
  lat.validate();
  const double T = t / eps;
  if (T > opt.max_fast_horizon)
    throw ConfigError("solve_oscillatory: fast horizon t/eps = " + std::to_string(T) + " exceeds the allowed " +
                      std::to_string(opt.max_fast_horizon));
  const double kf = T * lat.steps_per_unit;
  const auto K = static_cast<int>(std::llround(kf));
  if (std::abs(kf - K) > 1e-6 || K < 1)
    throw ConfigError("solve_oscillatory: t/eps = " + std::to_string(T) + " is not a multiple of the lattice time step");

  auto sc = build_step_costs(L, lat);
  const int r = lat.cells_per_unit;
  const auto reach = static_cast<std::int64_t>(std::floor(lat.reach() + 1e-9));

  // lattice box covering every target cell
  LatticePoint lo{}, hi{};
  for (int j = 0; j < d; ++j) {
    lo[static_cast<std::size_t>(j)] = std::numeric_limits<std::int64_t>::max();
    hi[static_cast<std::size_t>(j)] = std::numeric_limits<std::int64_t>::min();
  }
  for (const auto& y : targets)
    for (int j = 0; j < d; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const double u = y[uj] / eps * r;
      lo[uj] = std::min(lo[uj], static_cast<std::int64_t>(std::floor(u)));
      hi[uj] = std::max(hi[uj], static_cast<std::int64_t>(std::ceil(u)));
    }
  auto grown = [&](std::int64_t by) {
    LatticePoint a = lo, b = hi;
    for (int j = 0; j < d; ++j) {
      a[static_cast<std::size_t>(j)] -= by;
      b[static_cast<std::size_t>(j)] += by;
    }
    return std::pair{a, b};
  };

  // U(0, z) = u0(eps z dx) / eps on the dependence box of the targets
  auto [a0, b0] = grown(reach * K);
  Layer cur = Layer::box(d, a0, b0, 0.0);
  {
    const double dx = lat.dx();
    parallel_for(cur.count(), opt.threads, [&](std::size_t i) {
      const LatticePoint z = cur.point(i);
      std::array<double, kMaxDim> x{};
      for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(j)] = eps * z[static_cast<std::size_t>(j)] * dx;
      cur.values[i] = u0(std::span<const double>(x.data(), static_cast<std::size_t>(d))) / eps;
    });
  }
  for (int k = 1; k <= K; ++k) {
    auto [a, b] = grown(reach * (K - k));
    Layer next = Layer::box(d, a, b, kInf);
    dp_step(cur, next, *sc, opt.threads);
    cur = std::move(next);
  }

  SolutionField out;
  out.dim = d;
  out.t = t;
  out.eps = eps;
  out.points = targets;
  out.provenance = "oscillatory lattice q=" + std::to_string(lat.steps_per_unit) + " r=" + std::to_string(r) +
                   " spec=" + spec_hash(L.spec);
  for (const auto& y : targets) {
    std::array<std::int64_t, kMaxDim> base{};
    std::array<double, kMaxDim> frac{};
    for (int j = 0; j < d; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const double u = y[uj] / eps * r;
      const double fl = std::floor(u);
      base[uj] = static_cast<std::int64_t>(fl);
      frac[uj] = u - fl;
    }
    double v = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = 1.0;
      LatticePoint z = base;
      for (int j = 0; j < d; ++j) {
        const bool up = (corner >> j) & 1;
        w *= up ? frac[static_cast<std::size_t>(j)] : 1.0 - frac[static_cast<std::size_t>(j)];
        if (up) ++z[static_cast<std::size_t>(j)];
      }
      if (w == 0.0) continue;
      v += w * cur.at(z);
    }
    out.values.push_back(eps * v + t * L.spec.normalization_shift);
  }
  return out;
}

struct EffectiveSolveOptions {
  int refine_iterations = 40;  // golden-section steps per coordinate
  int refine_passes = 2;
};

namespace detail {

inline double golden_min(const std::function<double(double)>& f, double a, double b, int iters, double& arg) {
  constexpr double g = 0.6180339887498949;
  double c = b - g * (b - a), e = a + g * (b - a);
  double fc = f(c), fe = f(e);
  for (int i = 0; i < iters; ++i) {
    if (fc <= fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + g * (b - a);
      fe = f(e);
    }
  }
  if (fc <= fe) {
    arg = c;
    return fc;
  }
  arg = e;
  return fe;
}

}  // namespace detail

/// ubar at the targets by Hopf-Lax over the Lbar velocity grid, refined by
/// golden-section search around the best node. Original units.
inline SolutionField solve_effective(const InitialData& u0, const EffectiveModel& model, double t,
                                     const std::vector<Vec>& targets, const EffectiveSolveOptions& opt = {}) {
  const int d = model.dimension();
  if (u0.dim != d) throw DomainError("solve_effective: initial data dimension mismatch");
  if (!(t > 0.0)) throw DomainError("solve_effective: need t > 0");
  check_targets(d, targets);
  const auto& lb = model.lbar;

  SolutionField out;
  out.dim = d;
  out.t = t;
  out.points = targets;
  out.provenance = "effective hopf-lax n_max=" + std::to_string(model.n_max) + " spec=" + model.spec_hash;
  Vec x(static_cast<std::size_t>(d));
  for (const auto& y : targets) {
    auto objective = [&](std::span<const double> v) {
      const double l = lb.evaluate(v).value;
      if (!std::isfinite(l)) return kInf;
      for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(j)] = y[static_cast<std::size_t>(j)] - t * v[static_cast<std::size_t>(j)];
      return u0(x) + t * l;
    };
    double best = kInf;
    Vec vbest;
    for (std::size_t i = 0; i < lb.size(); ++i) {
      if (!std::isfinite(lb.values[i])) continue;
      const Vec v = lb.node(i);
      const double f = objective(v);
      if (f < best) {
        best = f;
        vbest = v;
      }
    }
    if (vbest.empty()) throw ResolutionError("solve_effective: Lbar table has no finite entries");
    Vec v = vbest;
    for (int pass = 0; pass < opt.refine_passes; ++pass) {
      for (int j = 0; j < d; ++j) {
        const auto& ax = lb.axes[static_cast<std::size_t>(j)];
        const double h = ax.step();
        const double a = std::max(ax.lo, v[static_cast<std::size_t>(j)] - h);
        const double b = std::min(ax.hi, v[static_cast<std::size_t>(j)] + h);
        Vec trial = v;
        double arg = v[static_cast<std::size_t>(j)];
        const double f = detail::golden_min(
            [&](double s) {
              trial[static_cast<std::size_t>(j)] = s;
              return objective(trial);
            },
            a, b, opt.refine_iterations, arg);
        if (f < best) {
          best = f;
          v[static_cast<std::size_t>(j)] = arg;
        }
      }
    }
    out.values.push_back(best + t * model.normalization_shift);
  }
  return out;
}

enum class FdScheme { kGodunov, kLaxFriedrichs };

struct FdOptions {
  double h = 1.0 / 256;   // grid spacing in slow variables
  double dt = 0.0;        // 0 picks the step adaptively from the CFL bound
  double cfl = 0.45;
  double margin = -1.0;   // extra half-width beyond the targets; <0 picks one from the speed bound
  FdScheme scheme = FdScheme::kGodunov;
  int threads = 1;
};

/// Explicit monotone scheme for u_t + H(x/eps, Du) = 0 on a box around the
/// targets with linear extrapolation at the edges. Dimensions 1 and 2.
/// Returns values in original units.
inline SolutionField solve_fd_oracle(const InitialData& u0, const HamiltonianSpec& spec, double eps, double t,
                                     const std::vector<Vec>& targets, const FdOptions& opt = {}) {
  const int d = spec.dimension;
  if (d > 2) throw DomainError("solve_fd_oracle: dimensions 1 and 2 only");
  if (u0.dim != d) throw DomainError("solve_fd_oracle: initial data dimension mismatch");
  if (!(eps > 0.0) || !(t > 0.0) || !(opt.h > 0.0)) throw DomainError("solve_fd_oracle: bad parameters");
  check_targets(d, targets);
  const bool godunov = opt.scheme == FdScheme::kGodunov && !std::isfinite(spec.momentum_cap);

  const double vmax = spec.potential_upper_bound();
  const double pbound = u0.lipschitz + std::sqrt(std::max(0.0, vmax - spec.potential_lower_bound())) + 1.0;
  double half = 0.0;
  for (const auto& y : targets)
    for (double c : y) half = std::max(half, std::abs(c));
  half += opt.margin >= 0.0 ? opt.margin : 2.0 * pbound * t + 0.5;
  const auto n = static_cast<std::int64_t>(std::ceil(half / opt.h));
  const std::int64_t side = 2 * n + 1;
  const std::size_t total = d == 1 ? static_cast<std::size_t>(side) : static_cast<std::size_t>(side * side);
  auto coord = [&](std::int64_t i) { return (i - n) * opt.h; };

  std::vector<double> u(total), un(total), pot(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const auto i = static_cast<std::int64_t>(d == 1 ? idx : idx / static_cast<std::size_t>(side));
    const auto k = static_cast<std::int64_t>(d == 1 ? 0 : idx % static_cast<std::size_t>(side));
    std::array<double, 2> x{coord(i), d == 2 ? coord(k) : 0.0};
    std::array<double, 2> xf{x[0] / eps, x[1] / eps};
    u[idx] = u0(std::span<const double>(x.data(), static_cast<std::size_t>(d)));
    pot[idx] = spec.potential(std::span<const double>(xf.data(), static_cast<std::size_t>(d)));
  }
  const std::size_t stride[2] = {d == 1 ? 1 : static_cast<std::size_t>(side), 1};

  auto value = [&](const std::vector<double>& w, std::int64_t i, std::int64_t k) {
    // linear extrapolation beyond the box
    auto clampi = [&](std::int64_t a, std::int64_t& off) {
      off = a < 0 ? a : (a >= side ? a - (side - 1) : 0);
      return std::clamp<std::int64_t>(a, 0, side - 1);
    };
    std::int64_t oi = 0, ok = 0;
    const std::int64_t ci = clampi(i, oi), ck = d == 2 ? clampi(k, ok) : 0;
    const auto at = [&](std::int64_t a, std::int64_t b) {
      return w[static_cast<std::size_t>(a) * stride[0] + static_cast<std::size_t>(b) * (d == 2 ? 1 : 0)];
    };
    double v = at(ci, ck);
    if (oi != 0) v += oi * (oi < 0 ? at(ci, ck) - at(ci + 1, ck) : at(ci, ck) - at(ci - 1, ck));
    if (ok != 0) v += ok * (ok < 0 ? at(ci, ck) - at(ci, ck + 1) : at(ci, ck) - at(ci, ck - 1));
    return v;
  };

  double time = 0.0;
  const double h = opt.h;
  while (time < t - 1e-14) {
    // gradient bound for the CFL step
    double amax = 0.0;
    for (std::size_t idx = 0; idx < total; ++idx) {
      const auto i = static_cast<std::int64_t>(d == 1 ? idx : idx / static_cast<std::size_t>(side));
      const auto k = static_cast<std::int64_t>(d == 1 ? 0 : idx % static_cast<std::size_t>(side));
      const double c = u[idx];
      double g = std::max(std::abs(value(u, i + 1, k) - c), std::abs(c - value(u, i - 1, k)));
      if (d == 2) g = std::max({g, std::abs(value(u, i, k + 1) - c), std::abs(c - value(u, i, k - 1))});
      amax = std::max(amax, g / h);
    }
    const double speed = 2.0 * std::max(amax, 1e-12) * d;
    const double limit = h / speed;
    double dt = opt.dt > 0.0 ? opt.dt : opt.cfl * limit;
    if (opt.dt > 0.0 && dt > limit)
      throw ConfigError("solve_fd_oracle: time step " + std::to_string(dt) + " violates the CFL bound " +
                        std::to_string(limit));
    dt = std::min(dt, t - time);
    const double alpha = 2.0 * amax;
    parallel_for(static_cast<std::size_t>(side), opt.threads, [&](std::size_t row) {
      const auto i = static_cast<std::int64_t>(row);
      const std::int64_t kmax = d == 2 ? side : 1;
      for (std::int64_t k = 0; k < kmax; ++k) {
        const std::size_t idx = static_cast<std::size_t>(i) * stride[0] + static_cast<std::size_t>(k) * (d == 2 ? 1 : 0);
        const double c = u[idx];
        std::array<double, 2> pm{}, pp{};
        pm[0] = (c - value(u, i - 1, k)) / h;
        pp[0] = (value(u, i + 1, k) - c) / h;
        if (d == 2) {
          pm[1] = (c - value(u, i, k - 1)) / h;
          pp[1] = (value(u, i, k + 1) - c) / h;
        }
        double Hnum = 0.0;
        if (godunov) {
          for (int j = 0; j < d; ++j) {
            const double a = std::max(pm[static_cast<std::size_t>(j)], 0.0);
            const double b = std::min(pp[static_cast<std::size_t>(j)], 0.0);
            Hnum += std::max(a * a, b * b);
          }
          Hnum -= pot[idx];
        } else {
          std::array<double, 2> pc{}, xf{};
          const double xs[2] = {coord(i), coord(k)};
          for (int j = 0; j < d; ++j) {
            pc[static_cast<std::size_t>(j)] = 0.5 * (pm[static_cast<std::size_t>(j)] + pp[static_cast<std::size_t>(j)]);
            xf[static_cast<std::size_t>(j)] = xs[j] / eps;
          }
          Hnum = evaluate_hamiltonian(spec, std::span<const double>(xf.data(), static_cast<std::size_t>(d)),
                                      std::span<const double>(pc.data(), static_cast<std::size_t>(d)));
          for (int j = 0; j < d; ++j)
            Hnum -= 0.5 * alpha * (pp[static_cast<std::size_t>(j)] - pm[static_cast<std::size_t>(j)]);
        }
        un[idx] = c - dt * Hnum;
      }
    });
    std::swap(u, un);
    time += dt;
  }

  SolutionField out;
  out.dim = d;
  out.t = t;
  out.eps = eps;
  out.points = targets;
  out.provenance = std::string("fd ") + (godunov ? "godunov" : "lax-friedrichs");
  for (const auto& y : targets) {
    const double fi = y[0] / h + n;
    const double fk = d == 2 ? y[1] / h + n : 0.0;
    const auto i0 = static_cast<std::int64_t>(std::floor(fi));
    const auto k0 = static_cast<std::int64_t>(std::floor(fk));
    const double a = fi - i0, b = fk - k0;
    double v = (1 - a) * value(u, i0, k0) + a * value(u, i0 + 1, k0);
    if (d == 2) v = (1 - b) * v + b * ((1 - a) * value(u, i0, k0 + 1) + a * value(u, i0 + 1, k0 + 1));
    // the PDE was solved with the working Hamiltonian
    out.values.push_back(v + t * spec.normalization_shift);
  }
  return out;
}

inline void write_csv(std::ostream& os, const SolutionField& s) {
  os << "# hjhom-solution v1 t=" << s.t << " eps=" << s.eps << " " << s.provenance << "\n";
  for (int j = 0; j < s.dim; ++j) os << "y" << (j + 1) << ",";
  os << "u\n";
  char buf[64];
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    for (double c : s.points[i]) {
      std::snprintf(buf, sizeof buf, "%.12e,", c);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.12e\n", s.values[i]);
    os << buf;
  }
}

}  // namespace hjhom
