#include <gtest/gtest.h>

#include "hjhom/hamiltonian.hpp"

using namespace hjhom;

TEST(Hamiltonian, FreeCaseValue) {
  auto s = constant_potential(2, 1.0);
  Vec x{0.3, 0.7}, p{1.0, 2.0};
  EXPECT_DOUBLE_EQ(evaluate_hamiltonian(s, x, p), 5.0 - 1.0);
}

TEST(Hamiltonian, CosineValueAndPeriodicity) {
  auto s = separable_cosine(1, 2.0, 1.0);
  EXPECT_NEAR(evaluate_hamiltonian(s, Vec{0.0}, Vec{0.0}), -3.0, 1e-15);
  EXPECT_NEAR(evaluate_hamiltonian(s, Vec{0.5}, Vec{1.0}), 1.0 - 1.0, 1e-15);
  EXPECT_NEAR(s.potential(Vec{0.3}), s.potential(Vec{1.3}), 1e-14);
  EXPECT_NEAR(s.potential(Vec{0.3}), s.potential(Vec{-2.7}), 1e-13);
}

TEST(Hamiltonian, DomainErrors) {
  auto s = constant_potential(1, 1.0);
  EXPECT_THROW(evaluate_hamiltonian(s, Vec{std::nan("")}, Vec{0.0}), DomainError);
  EXPECT_THROW(evaluate_hamiltonian(s, Vec{0.0, 0.0}, Vec{0.0}), DomainError);
  EXPECT_THROW(evaluate_hamiltonian(s, Vec{0.0}, Vec{kInf}), DomainError);
}

TEST(Hamiltonian, NormalizeShifts) {
  {
    auto [w, shift] = normalize(constant_potential(1, 0.0));
    EXPECT_DOUBLE_EQ(shift, -1.0);
    EXPECT_LE(evaluate_hamiltonian(w, Vec{0.2}, Vec{0.0}), -1.0);
    EXPECT_DOUBLE_EQ(w.normalization_shift, -1.0);
  }
  {
    auto [w, shift] = normalize(separable_cosine(1, 0.0, 1.0));
    EXPECT_NEAR(shift, -2.0, 1e-12);
  }
  {
    auto [w, shift] = normalize(separable_cosine(1, 2.0, 1.0));
    EXPECT_DOUBLE_EQ(shift, 0.0);
    EXPECT_EQ(to_config_text(w), to_config_text(separable_cosine(1, 2.0, 1.0)));
  }
}

TEST(Hamiltonian, InvariantsHoldAfterNormalization) {
  auto [w, shift] = normalize(separable_cosine(2, 0.5, 1.0));
  auto rep = check_invariants(w, 32);
  EXPECT_TRUE(rep.normalized);
  EXPECT_TRUE(rep.convex);
  EXPECT_TRUE(rep.coercive);
  EXPECT_LE(rep.periodicity_defect, 1e-12);
  EXPECT_TRUE(rep.ok());
  auto raw = check_invariants(separable_cosine(2, 0.5, 1.0), 32);
  EXPECT_FALSE(raw.normalized);
}

TEST(Hamiltonian, MomentumCapMakesItPurelyQuadratic) {
  auto s = separable_cosine(1, 2.0, 1.0);
  s.momentum_cap = 5.0;
  for (double p : {5.0, 6.0, -7.5})
    for (double x : {0.0, 0.25, 0.5}) EXPECT_DOUBLE_EQ(evaluate_hamiltonian(s, Vec{x}, Vec{p}), p * p);
  EXPECT_NEAR(evaluate_hamiltonian(s, Vec{0.0}, Vec{0.5}), 0.25 - 3.0, 1e-12);
  EXPECT_TRUE(check_invariants(s, 16).convex);
}

TEST(Hamiltonian, ConfigRoundTrip) {
  auto cfg = Config::parse("dimension = 2\npotential.a0 = 3\npotential.terms = 1,1,0; 1,0,1\n");
  auto s = spec_from_config(cfg);
  EXPECT_EQ(s.dimension, 2);
  ASSERT_EQ(s.terms.size(), 2u);
  EXPECT_EQ(s.terms[1].wave[1], 1);
  EXPECT_EQ(spec_hash(s), spec_hash(separable_cosine(2, 3.0, 1.0)));
  EXPECT_NE(spec_hash(s), spec_hash(separable_cosine(2, 3.0, 0.5)));
  auto again = spec_from_config(Config::parse(to_config_text(s)));
  EXPECT_EQ(spec_hash(again), spec_hash(s));
}

TEST(Hamiltonian, ConfigErrorsCarryLines) {
  try {
    spec_from_config(Config::parse("dimension = 1\npotential.terms = 1,0.5\n"));
    FAIL();
  } catch (const ConfigParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(spec_from_config(Config::parse("family = cubic\n")), ConfigParseError);
  EXPECT_THROW(spec_from_config(Config::parse("dimension = 7\n")), ConfigParseError);
}

TEST(Hamiltonian, TabulatedPotential) {
  auto cfg = Config::parse("family = tabulated_potential\npotential.grid_size = 4\npotential.values = 1,2,3,2\n");
  auto s = spec_from_config(cfg);
  EXPECT_DOUBLE_EQ(s.potential(Vec{0.0}), 1.0);
  EXPECT_DOUBLE_EQ(s.potential(Vec{0.5}), 3.0);
  EXPECT_DOUBLE_EQ(s.potential(Vec{0.125}), 1.5);
  EXPECT_DOUBLE_EQ(s.potential(Vec{0.875}), 1.5);  // wraps back to the first node
  EXPECT_DOUBLE_EQ(s.potential_lower_bound(), 1.0);
  EXPECT_THROW(spec_from_config(Config::parse("family = tabulated_potential\npotential.grid_size = 4\npotential.values = 1,2\n")),
               ConfigError);
}

TEST(Hamiltonian, CertifiedBounds) {
  auto s = separable_cosine(2, 3.0, 1.0);
  EXPECT_LE(s.potential_lower_bound(), 1.0 + 1e-12);
  EXPECT_GE(s.potential_upper_bound(), 5.0 - 1e-12);
  EXPECT_NEAR(s.potential_lower_bound(), 1.0, 1e-9);
}
