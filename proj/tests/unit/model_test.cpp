#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "relarb/error.hpp"
#include "relarb/model.hpp"
#include "relarb/rng.hpp"

using namespace relarb;
using relarb::testing::constant_config;

namespace {

MarketState state_at(std::vector<double> x, std::vector<double> y) {
  MarketState s;
  s.x = Eigen::Map<Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
  s.y = Eigen::Map<Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
  return s;
}

}  // namespace

TEST(Preference, DeltaOneAlwaysFeasible) {
  auto cfg = constant_config(2, 3, 1.0, 5.0);
  EXPECT_DOUBLE_EQ(preference_sum(cfg), 0.0);
  EXPECT_TRUE(validate_scenario(cfg).feasible);
}

TEST(Preference, AveragedFormForTwoInvestors) {
  auto cfg = constant_config(2, 2, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(preference_sum(cfg), 0.5);
  EXPECT_TRUE(validate_scenario(cfg).feasible);
  cfg.flags.ccond_literal = true;
  EXPECT_DOUBLE_EQ(preference_sum(cfg), 1.0);
  EXPECT_FALSE(validate_scenario(cfg).feasible);
}

TEST(Preference, SingleInvestorInfeasible) {
  auto cfg = constant_config(1, 1, 0.5, std::log(3.0));
  EXPECT_NEAR(preference_sum(cfg), 1.5, 1e-15);
  const auto rep = validate_scenario(cfg);
  EXPECT_FALSE(rep.feasible);
  EXPECT_NE(rep.messages.front().find("preference condition"), std::string::npos);
}

TEST(Validation, IsPure) {
  auto cfg = constant_config(2, 4, 0.3, 0.1);
  cfg.c_law = PopulationLaw::uniform(-0.2, 0.2);
  EXPECT_TRUE(validate_scenario(cfg) == validate_scenario(cfg));
}

TEST(MarketWeights, KnownValues) {
  const std::vector<double> four = {1, 1, 1, 1};
  const auto eq = market_weights(four);
  for (double w : eq.values()) EXPECT_DOUBLE_EQ(w, 0.25);
  const std::vector<double> two = {3, 1};
  EXPECT_DOUBLE_EQ(market_weights(two)[0], 0.75);
  EXPECT_DOUBLE_EQ(market_weights(two)[1], 0.25);
  const std::vector<double> bad = {2, 0, 1};
  EXPECT_THROW(market_weights(bad), DomainError);
}

TEST(MarketWeights, ScaleInvariant) {
  PathRng r({3, 0, StreamPurpose::sampling, 0});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(5), y(5);
    const double lambda = 0.1 + 10.0 * r.uniform();
    for (std::size_t i = 0; i < 5; ++i) {
      x[i] = 0.01 + r.uniform();
      y[i] = lambda * x[i];
    }
    const auto a = market_weights(x);
    const auto b = market_weights(y);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  }
}

TEST(Simplex, StrictModeRejectsShortPositions) {
  EXPECT_THROW(SimplexWeights({1.2, -0.2}, 1e-9, true), AdmissibilityError);
  SimplexWeights lax({1.2, -0.2}, 1e-9, false);
  EXPECT_FALSE(lax.admissible());
  EXPECT_NEAR(lax.sum(), 1.0, 1e-15);
}

TEST(ConstantOracle, ZeroDriftGivesZeroPriceOfRisk) {
  ConstantMarket m(Vec::Zero(2), Mat::Identity(2, 2) * 0.2);
  Coefficients c;
  m.evaluate(state_at({1, 2}, {0.5, 1}), c);
  const Vec theta = c.sigma.lu().solve(c.beta);
  EXPECT_EQ(theta.norm(), 0.0);
}

TEST(ConstantOracle, StateIndependentBitIdentical) {
  ConstantMarket m(Vec::Constant(3, 0.02), Mat::Identity(3, 3) * 0.2);
  Coefficients ref;
  m.evaluate(state_at({1, 1, 1}, {1, 1, 1}), ref);
  PathRng r({4, 0, StreamPurpose::sampling, 0});
  for (int k = 0; k < 100; ++k) {
    Coefficients c;
    auto s = state_at({r.uniform(), r.uniform(), r.uniform()}, {r.uniform(), r.uniform(), r.uniform()});
    s.t = r.uniform();
    s.m = r.uniform();
    m.evaluate(s, c);
    EXPECT_TRUE(c.beta == ref.beta);
    EXPECT_TRUE(c.sigma == ref.sigma);
  }
}

TEST(ConstantOracle, PotentialsReproduceDrift) {
  Mat sigma(2, 2);
  sigma << 0.2, 0.05, 0.0, 0.3;
  ConstantMarket m(Vec::Constant(2, 0.03), sigma);
  const auto pot = m.potentials();
  ASSERT_TRUE(pot.has_value());
  PathRng r({5, 0, StreamPurpose::sampling, 0});
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto s = state_at({0.1 + 3 * r.uniform(), 0.1 + 3 * r.uniform()}, {1, 1});
    const Vec b = s.x.cwiseProduct(m.beta());
    const Vec aDH = m.level_covariance(s) * pot->grad_H(s.x);
    worst = std::max(worst, (b - aDH).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(ConstantOracle, SingularSigmaRejected) {
  EXPECT_THROW(ConstantMarket(Vec::Zero(2), Mat::Zero(2, 2)), DomainError);
}

TEST(VsmOracle, DriftAtSymmetricPoint) {
  VolatilityStabilizedMarket m(2, 0.0);
  Coefficients c;
  m.evaluate(state_at({1, 1}, {0.5, 0.5}), c);
  EXPECT_DOUBLE_EQ(c.beta(0), 0.5);
  EXPECT_DOUBLE_EQ(c.beta(1), 0.5);
}

TEST(VsmOracle, DriftIdentityAtInteriorPoints) {
  const double zeta = 0.37;
  VolatilityStabilizedMarket m(3, zeta);
  PathRng r({6, 0, StreamPurpose::sampling, 0});
  for (int k = 0; k < 200; ++k) {
    const auto s = state_at({0.05 + r.uniform(), 0.05 + r.uniform(), 0.05 + r.uniform()},
                            {0.05 + r.uniform(), 0.05 + r.uniform(), 0.05 + r.uniform()});
    Coefficients c;
    m.evaluate(s, c);
    const double total = s.x.sum();
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double mi = s.x(i) / total;
      EXPECT_NEAR(c.beta(i) * 2.0 * mi / s.y(i), 1.0 + zeta, 1e-13);
      EXPECT_NEAR(c.sigma(i, i) * c.sigma(i, i) * s.x(i) * s.x(i), s.x(i), 1e-13);
    }
  }
}

TEST(VsmOracle, DegeneratesOnFace) {
  VolatilityStabilizedMarket m(2, 0.5);
  const auto s = state_at({1.0, 1e-14}, {0.5, 0.5});
  EXPECT_LT(m.level_covariance(s)(1, 1), 1e-13);
  Coefficients c;
  m.evaluate(s, c);
  EXPECT_FALSE(well_conditioned(c.sigma, 1e6));
  EXPECT_THROW(m.evaluate(state_at({1.0, 0.0}, {0.5, 0.5}), c), SingularityError);
}

TEST(Population, ListAndPointLaws) {
  EXPECT_EQ(sample_population(PopulationLaw::list({1, 2, 3}), 3, 0, 0), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(sample_population(PopulationLaw::point(0.5), 2, 0, 0), (std::vector<double>{0.5, 0.5}));
}

TEST(Population, DrawsAreKeyed) {
  const auto law = PopulationLaw::lognormal(0.0, 0.3);
  EXPECT_EQ(sample_population(law, 16, 9, 0), sample_population(law, 16, 9, 0));
  EXPECT_NE(sample_population(law, 16, 9, 0), sample_population(law, 16, 10, 0));
}

TEST(Structure, MismatchedDimensionsRejected) {
  auto cfg = constant_config(2, 2, 0.5, 0.0);
  cfg.x0 = {1.0};
  EXPECT_THROW(check_structure(cfg), ConfigError);
  cfg = constant_config(2, 2, 0.5, 0.0);
  cfg.delta = 1.5;
  EXPECT_THROW(check_structure(cfg), ConfigError);
}
