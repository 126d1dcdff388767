#include <gtest/gtest.h>

#include "hjhom/legendre.hpp"
#include "oracles.hpp"

using namespace hjhom;

TEST(Legendre, QuadraticConjugate) {
  auto f = tabulate(1, 4.0, 801, Units::kMomentum, [](const Vec& p) { return p[0] * p[0]; });
  auto g = legendre_transform(f, {GridAxis{-4.0, 4.0, 81}}, TransformAlgorithm::kLinearTime);
  EXPECT_EQ(g.units, Units::kVelocity);
  for (double v : {-4.0, -1.5, 0.0, 2.0, 3.3}) EXPECT_NEAR(g.evaluate(Vec{v}).value, v * v / 4.0, 1e-3);
  EXPECT_FALSE(g.any_boundary());
}

TEST(Legendre, DirectAndLinearAgree) {
  auto f = tabulate(2, 3.0, 41, Units::kMomentum, [](const Vec& p) {
    return std::abs(p[0]) + 0.5 * p[1] * p[1] + std::max(0.0, p[0] + p[1] - 1.0);
  });
  std::vector<GridAxis> out(2, GridAxis{-5.0, 5.0, 33});
  auto a = legendre_transform(f, out, TransformAlgorithm::kDirect);
  auto b = legendre_transform(f, out, TransformAlgorithm::kLinearTime);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
    EXPECT_EQ(a.boundary[i], b.boundary[i]);
  }
}

TEST(Legendre, Involution) {
  auto f = tabulate(1, 2.0, 201, Units::kMomentum, [](const Vec& p) { return std::cosh(p[0]); });
  auto g = legendre_transform(f, {GridAxis{-4.0, 4.0, 401}});  // covers sinh(2)
  auto h = legendre_transform(g, {GridAxis{-2.0, 2.0, 201}});
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h.values[i], f.values[i], 1e-3);
}

TEST(Legendre, BoundaryFlagWhenSlopeLeavesTheGrid) {
  auto f = tabulate(1, 1.0, 101, Units::kMomentum, [](const Vec& p) { return p[0] * p[0]; });
  auto g = legendre_transform(f, {GridAxis{-6.0, 6.0, 13}});
  EXPECT_TRUE(g.boundary.front());
  EXPECT_TRUE(g.boundary.back());
  EXPECT_FALSE(g.boundary[6]);  // v = 0 is attained at p = 0
}

TEST(Legendre, FlatSupremumIsInterior) {
  // f = 0 everywhere: at v = 0 every node ties
  auto f = tabulate(1, 1.0, 11, Units::kMomentum, [](const Vec&) { return 0.0; });
  auto g = legendre_transform(f, {GridAxis{0.0, 0.0, 1}}, TransformAlgorithm::kLinearTime);
  EXPECT_EQ(g.values[0], 0.0);
}

TEST(Legendre, InfinitePropagates) {
  auto f = tabulate(1, 2.0, 5, Units::kVelocity, [](const Vec& v) { return std::abs(v[0]) > 1.0 ? kInf : 0.0; });
  auto g = legendre_transform(f, {GridAxis{-1.0, 1.0, 3}});
  EXPECT_DOUBLE_EQ(g.values[0], 1.0);  // sup over |v| <= 1 of -v
  EXPECT_DOUBLE_EQ(g.values[2], 1.0);
  auto e = f.evaluate(Vec{1.5});
  EXPECT_TRUE(std::isinf(e.value));
  EXPECT_TRUE(f.evaluate(Vec{9.0}).clamped);
}

TEST(Legendre, ConvexityDefect) {
  auto convex = tabulate(1, 1.0, 11, Units::kMomentum, [](const Vec& p) { return p[0] * p[0]; });
  auto concave = tabulate(1, 1.0, 11, Units::kMomentum, [](const Vec& p) { return -p[0] * p[0]; });
  EXPECT_LE(convexity_defect(convex), 0.0);
  EXPECT_GT(convexity_defect(concave), 0.0);
}

TEST(Lagrangian, ClosedForm) {
  auto L = build_lagrangian(separable_cosine(1, 2.0, 1.0));
  EXPECT_TRUE(L.closed_form);
  EXPECT_NEAR(L(Vec{0.0}, Vec{2.0}), 1.0 + 3.0, 1e-14);
  EXPECT_NEAR(L.min_at_zero_velocity(), 1.0, 1e-9);
  EXPECT_NEAR(L.max_at_zero_velocity(), 3.0, 1e-9);
}

TEST(Lagrangian, NumericTransformMatchesClosedFormBelowTheCap) {
  auto s = separable_cosine(1, 2.0, 1.0);
  s.momentum_cap = 40.0;  // far beyond the maximisers for |v| <= 4
  LagrangianOptions opt;
  opt.velocity_box = 4.0;
  opt.velocity_points = 33;
  opt.torus_points = 8;
  opt.momentum_points = 2001;
  auto L = build_lagrangian(s, opt);
  EXPECT_FALSE(L.closed_form);
  for (double x : {0.0, 0.25, 0.5})
    for (double v : {-3.0, 0.0, 1.25}) EXPECT_NEAR(L(Vec{x}, Vec{v}), v * v / 4.0 + s.potential(Vec{x}), 2e-3);
}

TEST(Lagrangian, SegmentAverageMatchesQuadrature) {
  auto s = separable_cosine(2, 3.0, 1.0);
  s.terms.push_back({0.4, {2, -1}});
  auto L = build_lagrangian(s);
  Vec a{0.1, 0.7}, b{0.9, -0.35};
  auto f = [&](double u) {
    Vec x{a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])};
    return s.potential(x);
  };
  EXPECT_NEAR(L.potential_segment_average(a, b), oracle::simpson(f, 0.0, 1.0), 1e-10);
  EXPECT_NEAR(L.potential_segment_average(a, a), s.potential(a), 1e-12);
}
