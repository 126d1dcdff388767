#include <gtest/gtest.h>

#include <sstream>

#include "hjhom/solver.hpp"

using namespace hjhom;

namespace {

LatticeSpec lattice(int q, int r, double vmax) {
  LatticeSpec l;
  l.steps_per_unit = q;
  l.cells_per_unit = r;
  l.vmax = vmax;
  return l;
}

// Hopf-Lax for u0 = |x| and L = v^2 / 4 + c
double free_cone(double t, double y, double c) {
  const double a = std::abs(y);
  return (a <= 2.0 * t ? y * y / (4.0 * t) + t : a) + (c - 1.0) * t;
}

std::vector<Vec> line(std::initializer_list<double> ys) {
  std::vector<Vec> out;
  for (double y : ys) out.push_back(Vec{y});
  return out;
}

EffectiveModel free_model(int dim, double c) {
  auto L = build_lagrangian(constant_potential(dim, c));
  EffectiveOptions opt;
  opt.velocity_box = 4.0;
  opt.velocity_points = dim == 1 ? 17 : 9;
  opt.momentum_box = 1.0;
  opt.momentum_points = 5;
  opt.n_max = 2;
  return build_effective_model(L, lattice(4, 8, 4.0), opt);
}

}  // namespace

TEST(Solver, InitialData) {
  auto c = cone_data(2);
  EXPECT_DOUBLE_EQ(c(Vec{3.0, 4.0}), 5.0);
  auto a = affine_data(Vec{1.0, -2.0});
  EXPECT_DOUBLE_EQ(a(Vec{1.0, 1.0}), -1.0);
  EXPECT_DOUBLE_EQ(a.lipschitz, std::sqrt(5.0));
  auto b = bump_data({Bump{Vec{0.0}, 2.0, 0.5}});
  EXPECT_DOUBLE_EQ(b(Vec{0.0}), 2.0);
  EXPECT_THROW(bump_data({}), ConfigError);
  EXPECT_THROW(bump_data({Bump{Vec{0.0}, 1.0, 0.0}}), ConfigError);
}

TEST(Solver, OscillatoryFreeCaseIsExact) {
  auto L = build_lagrangian(constant_potential(1, 1.0));
  auto ys = line({-3.0, -1.0, -0.5, 0.0, 0.5, 1.5, 3.0});
  auto s = solve_oscillatory(cone_data(1), L, lattice(4, 8, 4.0), 0.25, 1.0, ys);
  ASSERT_EQ(s.values.size(), ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(s.values[i], free_cone(1.0, ys[i][0], 1.0), 1e-10);
  EXPECT_DOUBLE_EQ(s.eps, 0.25);
}

TEST(Solver, OscillatoryReportsOriginalUnits) {
  auto [work, shift] = normalize(constant_potential(1, 0.0));
  ASSERT_DOUBLE_EQ(shift, -1.0);
  auto L = build_lagrangian(work);
  auto ys = line({-1.0, 0.5});
  auto s = solve_oscillatory(cone_data(1), L, lattice(4, 8, 4.0), 0.25, 1.0, ys);
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(s.values[i], free_cone(1.0, ys[i][0], 0.0), 1e-10);
}

TEST(Solver, OscillatoryRejectsBadTimes) {
  auto L = build_lagrangian(constant_potential(1, 1.0));
  auto ys = line({0.0});
  EXPECT_THROW(solve_oscillatory(cone_data(1), L, lattice(4, 8, 4.0), 0.3, 1.0, ys), ConfigError);
  OscillatoryOptions opt;
  opt.max_fast_horizon = 2.0;
  EXPECT_THROW(solve_oscillatory(cone_data(1), L, lattice(4, 8, 4.0), 0.25, 1.0, ys, opt), ConfigError);
  EXPECT_THROW(solve_oscillatory(cone_data(1), L, lattice(4, 8, 4.0), 0.25, 1.0, {}), ConfigError);
  EXPECT_THROW(solve_oscillatory(cone_data(2), L, lattice(4, 8, 4.0), 0.25, 1.0, ys), DomainError);
  EXPECT_THROW(solve_oscillatory(cone_data(1), L, lattice(4, 8, 4.0), -0.25, 1.0, ys), DomainError);
}

TEST(Solver, EffectiveFreeCase) {
  auto m = free_model(1, 1.0);
  // targets whose optimal velocity is a grid node
  auto ys = line({-5.0, -2.0, -1.0, 0.0, 0.5, 2.0, 4.5});
  for (double t : {0.5, 1.0}) {
    auto s = solve_effective(cone_data(1), m, t, ys);
    for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(s.values[i], free_cone(t, ys[i][0], 1.0), 1e-6);
  }
}

TEST(Solver, EffectiveAffineData) {
  auto m = free_model(1, 1.0);
  auto ys = line({-1.0, 0.0, 2.0});
  auto s = solve_effective(affine_data(Vec{0.5}), m, 1.0, ys);
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(s.values[i], 0.5 * ys[i][0] - (0.25 - 1.0), 1e-6);
}

TEST(Solver, EffectiveTwoDimensions) {
  auto m = free_model(2, 1.0);
  std::vector<Vec> ys{{0.0, 0.0}, {1.0, 0.0}, {3.0, 0.0}, {0.0, -4.0}};
  auto s = solve_effective(cone_data(2), m, 1.0, ys);
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(s.values[i], free_cone(1.0, norm(ys[i]), 1.0), 1e-6);
  // off the grid the interpolated Lbar only overestimates
  auto off = solve_effective(cone_data(2), m, 1.0, {Vec{3.0, 4.0}});
  EXPECT_GE(off.values[0], 5.0 - 1e-9);
  EXPECT_LE(off.values[0], 5.2);
}

TEST(Solver, FdFreeCase) {
  auto spec = constant_potential(1, 1.0);
  auto ys = line({-2.5, -1.0, 0.0, 0.5, 2.5});
  FdOptions opt;
  opt.h = 1.0 / 128;
  for (auto scheme : {FdScheme::kGodunov, FdScheme::kLaxFriedrichs}) {
    opt.scheme = scheme;
    auto s = solve_fd_oracle(cone_data(1), spec, 0.5, 1.0, ys, opt);
    for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(s.values[i], free_cone(1.0, ys[i][0], 1.0), 0.03);
  }
}

TEST(Solver, FdAgreesWithLatticeForOscillatingPotential) {
  auto spec = separable_cosine(1, 2.0, 1.0);
  auto L = build_lagrangian(spec);
  auto ys = line({-1.0, 0.0, 0.5});
  auto lat = solve_oscillatory(cone_data(1), L, lattice(8, 32, 7.0), 0.25, 1.0, ys);
  FdOptions opt;
  opt.h = 0.25 / 64;
  auto fd = solve_fd_oracle(cone_data(1), spec, 0.25, 1.0, ys, opt);
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(lat.values[i], fd.values[i], 0.05);
}

TEST(Solver, FdTwoDimensionsAndErrors) {
  auto spec = constant_potential(2, 1.0);
  std::vector<Vec> ys{{0.0, 0.0}, {0.5, 0.0}};
  FdOptions opt;
  opt.h = 1.0 / 32;
  auto s = solve_fd_oracle(affine_data(Vec{0.5, 0.0}), spec, 0.5, 0.5, ys, opt);
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(s.values[i], 0.5 * ys[i][0] + 0.75 * 0.5, 1e-9);
  opt.dt = 1.0;
  EXPECT_THROW(solve_fd_oracle(affine_data(Vec{0.5, 0.0}), spec, 0.5, 0.5, ys, opt), ConfigError);
  EXPECT_THROW(solve_fd_oracle(cone_data(3), constant_potential(3, 1.0), 0.5, 0.5, {Vec{0, 0, 0}}), DomainError);
}

TEST(Solver, CsvRoundsToTwelveDigits) {
  SolutionField s;
  s.dim = 1;
  s.t = 1.0;
  s.points = line({0.5});
  s.values = {1.0 / 3.0};
  std::ostringstream os;
  write_csv(os, s);
  EXPECT_NE(os.str().find("5.000000000000e-01,3.333333333333e-01"), std::string::npos);
}
