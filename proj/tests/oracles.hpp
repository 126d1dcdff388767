#pragma once

// Independent reference values used by the tests. Nothing here shares code
// with the library beyond plain math.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

/// m(t, 0, x) for L = |v|^2 / 4 + c: straight lines are optimal.
inline double free_metric(double t, double x2, double c) { return x2 / (4.0 * t) + c * t; }

/// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-12, int depth = 40) {
  auto rule = [&](double l, double r, double fl, double fm, double fr) { return (r - l) / 6.0 * (fl + 4.0 * fm + fr); };
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double l, double r, double fl, double fm, double fr, double whole, double eps, int d) {
        const double m = 0.5 * (l + r);
        const double lm = 0.5 * (l + m), rm = 0.5 * (m + r);
        const double flm = f(lm), frm = f(rm);
        const double left = rule(l, m, fl, flm, fm), right = rule(m, r, fm, frm, fr);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
        return rec(l, m, fl, flm, fm, left, eps / 2, d - 1) + rec(m, r, fm, frm, fr, right, eps / 2, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, rule(a, b, fa, fm, fb), tol, depth);
}

/// Effective Hamiltonian of H = p^2 - V(x) on the unit circle:
///   Hbar(p) = -min V                 for |p| <= mean sqrt(V - min V)
///   mean sqrt(Hbar(p) + V) = |p|     otherwise (bisection).
struct OneDimHbar {
  std::function<double(double)> V;
  double vmin;

  double mean_root(double h) const {
    // split at the minimiser grid to keep the square-root cusp at a node
    double s = 0.0;
    const int pieces = 64;
    for (int i = 0; i < pieces; ++i)
      s += simpson([&](double x) { return std::sqrt(std::max(0.0, h + V(x))); }, double(i) / pieces,
                   double(i + 1) / pieces, 1e-13);
    return s;
  }

  double flat_edge() const { return mean_root(-vmin); }

  double operator()(double p) const {
    p = std::abs(p);
    if (p <= flat_edge()) return -vmin;
    double lo = -vmin, hi = -vmin + 1.0;
    while (mean_root(hi) < p) hi = -vmin + 2.0 * (hi + vmin);
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (mean_root(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

/// V(x) = a0 + amp cos(2 pi x).
inline OneDimHbar cosine_hbar(double a0, double amp) {
  return {[a0, amp](double x) { return a0 + amp * std::cos(2.0 * std::numbers::pi * x); }, a0 - std::abs(amp)};
}

}  // namespace oracle
