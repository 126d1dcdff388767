#include <gtest/gtest.h>

#include <sstream>

#include "hjhom/metric.hpp"
#include "oracles.hpp"

using namespace hjhom;

namespace {

// minimum of sum o_i^2 over N integers summing to X
double min_square_sum(std::int64_t X, std::int64_t N) {
  const std::int64_t a = static_cast<std::int64_t>(std::floor(double(X) / double(N)));
  const std::int64_t rem = X - a * N;
  return double(N - rem) * double(a * a) + double(rem) * double((a + 1) * (a + 1));
}

LatticeSpec lattice(int q, int r, double vmax) {
  LatticeSpec l;
  l.steps_per_unit = q;
  l.cells_per_unit = r;
  l.vmax = vmax;
  return l;
}

}  // namespace

TEST(Metric, FreeCaseExactOnLattice) {
  const double c = 1.0;
  auto L = build_lagrangian(constant_potential(1, c));
  auto lat = lattice(4, 8, 4.0);
  MetricTableOptions opt;
  opt.horizon = 4.0;
  auto tab = compute_metric_table(L, lat, opt);
  for (int t = 1; t <= 4; ++t) {
    const std::int64_t N = t * 4;
    for (std::int64_t X = -2 * N; X <= 2 * N; ++X) {
      const double dx = 1.0 / 8, dt = 1.0 / 4;
      const double want = min_square_sum(X, N) * dx * dx / (4.0 * dt) + c * t;
      ASSERT_NEAR(tab.value(t * 4, LatticePoint{X, 0, 0}), want, 1e-10) << "t=" << t << " X=" << X;
    }
    // on rays where the speed is a multiple of dx/dt the closed form is attained
    for (double x : {-2.0 * t, -0.5 * t, 0.0, 1.0 * t, 1.5 * t}) {
      Vec xv{x};
      EXPECT_NEAR(tab.value_at(t, xv), oracle::free_metric(t, x * x, c), 1e-10);
    }
  }
}

TEST(Metric, FreeCaseTwoDimensions) {
  auto L = build_lagrangian(constant_potential(2, 1.0));
  auto lat = lattice(2, 2, 3.0);
  MetricTableOptions opt;
  opt.horizon = 2.0;
  auto tab = compute_metric_table(L, lat, opt);
  EXPECT_NEAR(tab.value_at(2.0, Vec{2.0, 4.0}), oracle::free_metric(2.0, 20.0, 1.0), 1e-12);
  EXPECT_NEAR(tab.value_at(2.0, Vec{0.0, 0.0}), 2.0, 1e-12);
  EXPECT_TRUE(std::isinf(tab.value_at(1.0, Vec{3.0, 3.0})));
}

TEST(Metric, OutsideConeIsInfinite) {
  auto L = build_lagrangian(constant_potential(1, 1.0));
  auto tab = compute_metric_table(L, lattice(4, 4, 2.0), {});
  EXPECT_TRUE(std::isinf(tab.value(4, LatticePoint{9, 0, 0})));
  EXPECT_TRUE(std::isfinite(tab.value(4, LatticePoint{8, 0, 0})));
}

TEST(Metric, RejectsBadHorizons) {
  auto L = build_lagrangian(constant_potential(1, 1.0));
  MetricTableOptions opt;
  opt.horizon = 0.0;
  EXPECT_THROW(compute_metric_table(L, lattice(4, 4, 2.0), opt), ConfigError);
  opt.horizon = 1.1;
  EXPECT_THROW(compute_metric_table(L, lattice(4, 4, 2.0), opt), ConfigError);
  opt.horizon = 1.0;
  opt.retention = LayerRetention::kListed;
  opt.keep_times = {0.3};
  EXPECT_THROW(compute_metric_table(L, lattice(4, 4, 2.0), opt), ConfigError);
}

TEST(Metric, RetentionPolicies) {
  auto L = build_lagrangian(constant_potential(1, 1.0));
  MetricTableOptions opt;
  opt.horizon = 2.0;
  EXPECT_EQ(compute_metric_table(L, lattice(4, 4, 2.0), opt).layers.size(), 3u);
  opt.retention = LayerRetention::kAllSteps;
  EXPECT_EQ(compute_metric_table(L, lattice(4, 4, 2.0), opt).layers.size(), 9u);
  opt.retention = LayerRetention::kListed;
  opt.keep_times = {0.5, 1.75};
  auto tab = compute_metric_table(L, lattice(4, 4, 2.0), opt);
  EXPECT_TRUE(tab.has_step(2));
  EXPECT_TRUE(tab.has_step(7));
  EXPECT_FALSE(tab.has_step(4));
  EXPECT_THROW(tab.value(4, LatticePoint{}), DomainError);
}

TEST(Metric, SegmentExactAgreesWithFineQuadrature) {
  auto s = separable_cosine(1, 2.0, 1.0);
  auto L = build_lagrangian(s);
  auto lat = lattice(4, 8, 4.0);
  auto sc = build_step_costs(L, lat);
  EXPECT_EQ(sc->quadrature, Quadrature::kSegmentExact);
  for (std::size_t k = 0; k < sc->offsets.size(); ++k) {
    const int o = sc->offsets[k][0];
    for (std::size_t ph = 0; ph < sc->phases; ++ph) {
      const double b = double(ph) / 8, a = double(int(ph) - o) / 8;
      const double v = o * (1.0 / 8) * 4;
      const double want =
          0.25 * (v * v / 4.0 + oracle::simpson([&](double u) { return s.potential(Vec{a + u * (b - a)}); }, 0.0, 1.0));
      ASSERT_NEAR(sc->cost[k * sc->phases + ph], want, 1e-11);
    }
  }
}

TEST(Metric, SegmentExactNeedsCosineSeries) {
  auto s = separable_cosine(1, 3.0, 1.0);
  s.momentum_cap = 30.0;
  LagrangianOptions lo;
  lo.velocity_box = 4.0;
  lo.velocity_points = 17;
  lo.torus_points = 4;
  lo.momentum_points = 65;
  auto L = build_lagrangian(s, lo);
  auto lat = lattice(2, 2, 2.0);
  lat.quadrature = Quadrature::kSegmentExact;
  EXPECT_THROW(build_step_costs(L, lat), ConfigError);
  lat.quadrature = Quadrature::kAuto;
  EXPECT_EQ(build_step_costs(L, lat)->quadrature, Quadrature::kGauss4);
}

TEST(Metric, MinimizingPathReproducesValue) {
  auto L = build_lagrangian(separable_cosine(1, 2.0, 1.0));
  auto lat = lattice(4, 8, 4.0);
  MetricTableOptions opt;
  opt.horizon = 3.0;
  auto tab = compute_metric_table(L, lat, opt);
  for (double x : {-5.0, -1.25, 0.0, 2.5, 7.0}) {
    auto path = extract_minimizing_path(tab, 3.0, Vec{x});
    ASSERT_EQ(path.steps(), 12u);
    EXPECT_EQ(path.nodes.front()[0], 0);
    EXPECT_EQ(path.nodes.back()[0], static_cast<std::int64_t>(x * 8));
    EXPECT_NEAR(path.cost, tab.value_at(3.0, Vec{x}), 1e-10);
    EXPECT_NEAR(path_cost(*tab.costs, path), path.cost, 1e-10);
    EXPECT_NEAR(path_cost_direct(L, path), path.cost, 1e-10);
    EXPECT_LE(path.max_speed(), 4.0 + 1e-12);
  }
  EXPECT_THROW(extract_minimizing_path(tab, 3.0, Vec{0.01}), DomainError);
  EXPECT_THROW(extract_minimizing_path(tab, 2.5, Vec{0.0}), DomainError);
}

TEST(Metric, TieBreakIsLexicographic) {
  // one cell in two steps: (0, 1) and (1, 0) cost the same
  auto L = build_lagrangian(constant_potential(1, 1.0));
  MetricTableOptions opt;
  opt.horizon = 1.0;
  opt.retention = LayerRetention::kAllSteps;
  auto tab = compute_metric_table(L, lattice(2, 2, 2.0), opt);
  auto a = extract_minimizing_path(tab, 1.0, Vec{0.5});
  auto b = extract_minimizing_path(tab, 1.0, Vec{0.5});
  ASSERT_EQ(a.nodes.size(), 3u);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.nodes[1][0], 1);  // last step offset 0 < 1
}

TEST(Metric, RoundIntoCone) {
  Cone c{2.0};
  auto r = round_into_cone(c, 1.5, Vec{2.5});
  EXPECT_EQ(r.time, 2);
  EXPECT_EQ(r.point[0], 2);
  r = round_into_cone(c, 1.0, Vec{-1.6});
  EXPECT_EQ(r.time, 1);
  EXPECT_EQ(r.point[0], -2);
  // nearest rounding leaves the cone: pulled back
  Cone unit{1.0};
  r = round_into_cone(unit, 1.0, Vec{0.7, 0.7});
  EXPECT_EQ(r.time, 1);
  EXPECT_LE(std::hypot(double(r.point[0]), double(r.point[1])), 1.0);
  EXPECT_THROW(round_into_cone(c, 0.5, Vec{0.0}), DomainError);
  EXPECT_THROW(round_into_cone(c, 1.0, Vec{3.0}), DomainError);
}

TEST(Metric, MetricPointPeriodicity) {
  auto L = build_lagrangian(separable_cosine(1, 2.0, 1.0));
  MetricTableOptions opt;
  opt.horizon = 2.0;
  auto tab = compute_metric_table(L, lattice(4, 8, 4.0), opt);
  const double base = metric_point(tab, 2.0, Vec{0.0}, Vec{1.5});
  EXPECT_DOUBLE_EQ(metric_point(tab, 2.0, Vec{3.0}, Vec{4.5}), base);
  EXPECT_DOUBLE_EQ(metric_point(tab, 2.0, Vec{-7.0}, Vec{-5.5}), base);
  EXPECT_THROW(metric_point(tab, 1.0, Vec{0.0}, Vec{9.0}), DomainError);
}

TEST(Metric, CsvHasHeaderAndOneRowPerFiniteNode) {
  auto L = build_lagrangian(constant_potential(1, 1.0));
  MetricTableOptions opt;
  opt.horizon = 1.0;
  auto tab = compute_metric_table(L, lattice(2, 2, 1.0), opt);
  std::ostringstream os;
  write_csv(os, tab);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("#", 0), 0u);
  // layers 0 and 2 (steps), each with 1 and 5 nodes
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2 + 1 + 5);
}
