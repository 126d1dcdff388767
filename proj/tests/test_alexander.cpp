#include <gtest/gtest.h>

#include <sstream>

#include "hjhom/alexander.hpp"
#include "oracles.hpp"

using namespace hjhom;

namespace {

LatticeSpec lattice(int q, int r, double vmax) {
  LatticeSpec l;
  l.steps_per_unit = q;
  l.cells_per_unit = r;
  l.vmax = vmax;
  return l;
}

MetricTable table(const HamiltonianSpec& s, const LatticeSpec& lat, double horizon) {
  MetricTableOptions opt;
  opt.horizon = horizon;
  return compute_metric_table(build_lagrangian(s), lat, opt);
}

SpaceTimePath2D straight(std::array<double, 2> from, std::array<double, 2> to, std::size_t n) {
  SpaceTimePath2D p;
  p.dt = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n);
    p.nodes.push_back({u, from[0] + u * (to[0] - from[0]), from[1] + u * (to[1] - from[1])});
  }
  return p;
}

}  // namespace

TEST(MetricProperties, IntegerValuesAndHorizon) {
  auto tab = table(constant_potential(1, 1.0), lattice(2, 4, 2.0), 3.0);
  EXPECT_EQ(integer_horizon(tab), 3);
  EXPECT_DOUBLE_EQ(f_integer(tab, 0, {0, 0, 0}), 0.0);
  EXPECT_TRUE(std::isinf(f_integer(tab, 0, {1, 0, 0})));
  EXPECT_NEAR(f_integer(tab, 2, {2, 0, 0}), oracle::free_metric(2.0, 4.0, 1.0), 1e-12);
  // t = 1, |x| <= 2
  EXPECT_EQ(integer_cone_points(tab, 1).size(), 5u);
}

TEST(MetricProperties, SubadditivityHoldsForExactTables) {
  auto tab = table(separable_cosine(1, 2.0, 1.0), lattice(4, 8, 4.0), 6.0);
  auto rep = check_subadditivity(tab, 1u << 20);
  EXPECT_TRUE(rep.exhaustive);
  EXPECT_GT(rep.pairs, 0u);
  EXPECT_LE(rep.max_violation, 1e-9);
  EXPECT_TRUE(rep.passed());
  auto sampled = check_subadditivity(tab, 200, 7);
  EXPECT_FALSE(sampled.exhaustive);
  EXPECT_LE(sampled.pairs, 200u);
  EXPECT_TRUE(sampled.passed());
  // same seed, same answer
  EXPECT_EQ(check_subadditivity(tab, 200, 7).max_violation, sampled.max_violation);
}

TEST(MetricProperties, SubadditivityCatchesCorruption) {
  auto tab = table(separable_cosine(1, 2.0, 1.0), lattice(4, 8, 4.0), 4.0);
  // raise the whole t = 4 layer so the spatial Lipschitz bound is unchanged
  for (double& v : tab.layers.at(4 * 4).values)
    if (std::isfinite(v)) v += 5.0;
  auto rep = check_subadditivity(tab, 1u << 20);
  EXPECT_FALSE(rep.passed());
  EXPECT_GT(rep.max_violation, 4.0);
  EXPECT_EQ(rep.worst_z.t + rep.worst_w.t, 4);
}

TEST(MetricProperties, LinearGrowthConstant) {
  auto tab = table(constant_potential(1, 1.0), lattice(2, 2, 2.0), 8.0);
  const double K = check_linear_growth(tab);
  EXPECT_GE(K, 1.0);
  for (const auto& z : integer_cone_points(tab, 8)) {
    const double f = f_integer(tab, z.t, z.x);
    const double r = std::hypot(double(z.t), double(z.x[0]));
    EXPECT_LE(f, K * r + K + 1e-12);
    EXPECT_GE(f, r / K - K - 1e-12);
  }
}

TEST(MetricProperties, FreeGeodesicIsStraight) {
  auto tab = table(constant_potential(1, 1.0), lattice(4, 8, 4.0), 8.0);
  const std::int64_t x[1] = {6};
  auto g = extract_approximate_geodesic(tab, 8, x);
  ASSERT_EQ(g.nodes.size(), 9u);
  EXPECT_EQ(g.nodes.front().x[0], 0);
  EXPECT_EQ(g.nodes.back().x[0], 6);
  EXPECT_LE(g.step_bound, 4.0);
  EXPECT_LE(g.max_rounding, 0.5 + 1e-12);
  EXPECT_LE(g.defect, 0.25);
  const std::int64_t far[1] = {40};
  EXPECT_THROW(extract_approximate_geodesic(tab, 8, far), DomainError);
  EXPECT_THROW(extract_approximate_geodesic(tab, 9, x), DomainError);
}

TEST(MetricProperties, GeodesicDefectOfStraightNodes) {
  auto tab = table(constant_potential(1, 1.0), lattice(2, 2, 2.0), 4.0);
  std::vector<SpacePoint> nodes;
  for (std::int64_t i = 0; i <= 4; ++i) nodes.push_back({i, {i, 0, 0}});
  EXPECT_NEAR(geodesic_defect(tab, nodes), 0.0, 1e-12);
}

TEST(MetricProperties, EnvelopeAndDoublingInTheFreeCase) {
  auto L = build_lagrangian(constant_potential(1, 1.0));
  EffectiveOptions opt;
  opt.velocity_box = 2.0;
  opt.velocity_points = 9;
  opt.momentum_box = 1.0;
  opt.momentum_points = 5;
  opt.n_max = 2;
  auto lat = lattice(2, 4, 2.0);
  auto model = build_effective_model(L, lat, opt);
  MetricTableOptions mo;
  mo.horizon = 8.0;
  auto tab = compute_metric_table(L, lat, mo);
  auto rep = gap_vs_log_envelope(tab, model, {Vec{0.0}, Vec{0.5}, Vec{-1.5}});
  EXPECT_EQ(rep.samples.size(), 3u * 8u);
  EXPECT_NEAR(rep.max_gap, 0.0, 1e-9);
  EXPECT_NEAR(rep.min_gap, 0.0, 1e-9);
  EXPECT_LT(rep.constant, 1e-6);
  const std::int64_t x[1] = {1};
  EXPECT_NEAR(doubling_deviation(tab, 1, x), 0.0, 1e-12);
}

TEST(MetricProperties, CyclicShift) {
  SpaceTimePath2D p;
  p.dt = 0.5;
  p.nodes = {{0, 0, 0}, {0.5, 1, 0}, {1.0, 1, 2}, {1.5, 4, 2}};
  auto same = cyclic_shift(p, 0);
  EXPECT_EQ(same.nodes, p.nodes);
  EXPECT_EQ(cyclic_shift(p, 3).nodes, p.nodes);
  auto s = cyclic_shift(p, 1);
  // increments (1,0), (0,2), (3,0) rotated to (0,2), (3,0), (1,0)
  std::vector<std::array<double, 3>> want{{0, 0, 0}, {0.5, 0, 2}, {1.0, 3, 2}, {1.5, 4, 2}};
  EXPECT_EQ(s.nodes, want);
  // start preserved for a path that does not begin at the origin
  SpaceTimePath2D q = p;
  for (auto& n : q.nodes) n[1] += 10.0;
  auto qs = cyclic_shift(q, 2);
  EXPECT_DOUBLE_EQ(qs.nodes.front()[1], 10.0);
  EXPECT_DOUBLE_EQ(qs.nodes.back()[1], 14.0);
  bool snapped = false;
  cyclic_shift_time(p, 0.6, &snapped);
  EXPECT_TRUE(snapped);
  cyclic_shift_time(p, 1.0, &snapped);
  EXPECT_FALSE(snapped);
  EXPECT_THROW(cyclic_shift(p, 4), DomainError);
}

TEST(MetricProperties, CrossingOfStraightLines) {
  auto e1 = straight({1.0, 0.0}, {0.0, 0.0}, 4);
  auto e2 = straight({0.0, 0.0}, {1.0, 0.0}, 4);
  auto c = find_crossing(e1, e2, 1e-9);
  EXPECT_EQ(c.s, 2u);
  EXPECT_EQ(c.c1, 0u);
  EXPECT_EQ(c.c2, 0u);
  EXPECT_NEAR(c.witness[1], 0.5, 1e-12);
  EXPECT_NEAR(c.separation, 0.0, 1e-12);
}

TEST(MetricProperties, CrossingNeedsProximity) {
  auto e1 = straight({0.0, 1.0}, {0.0, 1.0}, 4);
  auto e2 = straight({0.0, 0.0}, {0.0, 0.0}, 4);
  EXPECT_THROW(find_crossing(e1, e2, 0.1), ResolutionError);
  EXPECT_THROW(find_crossing(e1, straight({0, 0}, {1, 0}, 3), 0.1), DomainError);
}

TEST(MetricProperties, SurgeryInTheFreeCaseCostsNothing) {
  auto tab = table(constant_potential(2, 1.0), lattice(2, 2, 3.0), 4.0);
  auto gamma = extract_minimizing_path(tab, 4.0, Vec{4.0, 4.0});
  auto s = path_surgery(gamma, tab);
  EXPECT_NEAR(s.gap(), 0.0, 1e-12);
  EXPECT_EQ(s.path.nodes.size(), gamma.nodes.size());
  EXPECT_EQ(s.path.nodes[4][0], 4);  // x = (2, 2) at time 2
  EXPECT_EQ(s.path.nodes[4][1], 4);
}

TEST(MetricProperties, SurgeryWithPotential) {
  auto tab = table(separable_cosine(2, 3.0, 1.0), lattice(2, 2, 3.0), 6.0);
  for (std::array<std::int64_t, 2> x : {std::array<std::int64_t, 2>{1, 0}, {2, -1}, {0, 0}}) {
    auto sample = lemma_sample(tab, 3, x);
    ASSERT_TRUE(sample.surgery_ok);
    // the spliced path is admissible for m(2t, 0, 2x)
    EXPECT_GE(sample.surgery_gap, -1e-9);
    EXPECT_GE(sample.gap, -1e-9);
    EXPECT_LE(sample.gap, sample.surgery_gap + 1e-9);
  }
  auto gamma = extract_minimizing_path(tab, 6.0, Vec{4.0, -2.0});
  auto s = path_surgery(gamma, tab);
  const std::size_t K = gamma.steps() / 2;
  EXPECT_EQ(s.path.nodes[K][0], 4);  // 2 cells per unit
  EXPECT_EQ(s.path.nodes[K][1], -2);
  EXPECT_EQ(s.path.nodes.back(), gamma.nodes.back());
  EXPECT_NEAR(s.first_half_cost + s.second_half_cost, s.cost_after, 1e-12);
  EXPECT_NEAR(path_cost(*tab.costs, s.path), s.cost_after, 1e-12);
}

TEST(MetricProperties, SurgeryCsv) {
  LemmaSample a;
  a.t = 2;
  a.x = {1, -1};
  a.surgery_ok = true;
  std::ostringstream os;
  write_surgery_csv(os, {a});
  EXPECT_EQ(os.str().rfind("# hjhom-surgery v1\n", 0), 0u);
  EXPECT_NE(os.str().find("\n2,1,-1,"), std::string::npos);
}
