#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fixtures.hpp"
#include "relarb/error.hpp"
#include "relarb/nash.hpp"

using namespace relarb;
using relarb::testing::constant_config;
using relarb::testing::vsm_config;

namespace {

GradientBlock zero_gradient(Eigen::Index n) {
  GradientBlock g;
  g.dx = Vec::Zero(n);
  g.dx_se = Vec::Zero(n);
  g.dy = Vec::Zero(n);
  g.dy_se = Vec::Zero(n);
  return g;
}

ScenarioConfig toy_vsm() {
  auto cfg = vsm_config(2, 2, 0.5);
  cfg.steps = 20;
  cfg.solver.eval_nodes = 2;
  cfg.solver.sub_paths = 64;
  cfg.solver.tol = 1e-9;
  cfg.solver.max_iters = 100;
  return cfg;
}

}  // namespace

TEST(PhiMap, DeltaOneIgnoresPeerAverage) {
  auto cfg = constant_config(2, 3, 1.0, 0.0);
  cfg.c_law = PopulationLaw::list({0.0, 0.1, -0.1});
  const std::vector<double> u = {0.9, 1.0, 1.1};
  const double a = phi_map(0.3, 2.5, u, cfg);
  EXPECT_EQ(a, phi_map(7.0, 2.5, u, cfg));
  EXPECT_NEAR(a, 2.5 * (0.9 + std::exp(0.1) + 1.1 * std::exp(-0.1)) / 3.0, 1e-15);
}

TEST(PhiMap, SingleInvestorSubstitution) {
  const auto cfg = constant_config(1, 1, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(phi_map(1.0, 1.0, {1.0}, cfg), 1.0);
}

TEST(PhiMap, SymmetricUnderPermutation) {
  auto cfg = constant_config(2, 3, 0.4, 0.0);
  cfg.c_law = PopulationLaw::list({0.05, -0.02, 0.1});
  cfg.v0_law = PopulationLaw::list({1.0, 1.5, 0.8});
  auto perm = cfg;
  perm.c_law = PopulationLaw::list({0.1, 0.05, -0.02});
  perm.v0_law = PopulationLaw::list({0.8, 1.0, 1.5});
  EXPECT_NEAR(phi_map(1.0, 3.0, {0.9, 0.95, 1.0}, cfg), phi_map(1.0, 3.0, {1.0, 0.9, 0.95}, perm), 1e-14);
}

TEST(PhiMap, NonPositiveDenominatorIsInfeasible) {
  const auto cfg = constant_config(1, 1, 0.0, std::log(2.0));
  EXPECT_THROW(phi_map(1.0, 1.0, {1.0}, cfg), InfeasibleError);
}

TEST(Contraction, DegenerateDerivativeIsUnbounded) {
  EXPECT_TRUE(std::isinf(contraction_region({1.0, 1.0}, {0.3, 0.3}, constant_config(1, 2, 0.0, 0.0)).K_upper));
  EXPECT_TRUE(std::isinf(contraction_region({1.0, 1.0}, {0.0, 0.0}, constant_config(1, 2, 0.5, 0.0)).K_upper));
  EXPECT_FALSE(std::isinf(contraction_region({1.0, 1.0}, {0.3, 0.3}, constant_config(1, 2, 0.5, 0.0)).K_upper));
}

TEST(Contraction, Arithmetic) {
  const auto cfg = constant_config(1, 1, 0.5, 0.0);
  const auto b = contraction_region({1.0}, {0.2}, cfg);
  EXPECT_DOUBLE_EQ(b.A, 0.5);
  EXPECT_DOUBLE_EQ(b.D, 0.1);
  EXPECT_DOUBLE_EQ(b.K_upper, 2.5);
}

TEST(Uniqueness, SentinelsAndSymmetry) {
  MarketWeightStats s;
  s.x = 2.0;
  s.drift = 0.05;
  s.variance = 0.04;
  EXPECT_EQ(uniqueness_probability(s, std::numeric_limits<double>::infinity(), 1.0, false).probability, 1.0);
  // K chosen so the numerator vanishes.
  const double K = s.x * std::exp((s.drift - 0.5 * s.variance) * 0.7);
  const auto p = uniqueness_probability(s, K, 0.7, false);
  EXPECT_NEAR(p.cdf_argument, 0.0, 1e-14);
  EXPECT_NEAR(p.probability, 0.5, 1e-14);
}

TEST(Uniqueness, PrintedAndNormalizedDenominators) {
  MarketWeightStats s;
  s.x = 1.0;
  s.variance = 0.25;
  const auto printed = uniqueness_probability(s, std::exp(0.5), 1.0, false);
  const auto normed = uniqueness_probability(s, std::exp(0.5), 1.0, true);
  EXPECT_NEAR(printed.cdf_argument, (0.5 + 0.125) / 0.25, 1e-14);
  EXPECT_NEAR(normed.cdf_argument, (0.5 + 0.125) / 0.5, 1e-14);
}

TEST(Strategies, ZeroGradientGivesMarketWeights) {
  const auto cfg = constant_config(2, 2, 0.5, 0.0);
  StrategyState st;
  st.x = Vec(2);
  st.x << 3.0, 1.0;
  st.u_normalized = 1.0;
  st.coef.resize(2);
  st.coef.sigma = Mat::Identity(2, 2) * 0.2;
  const auto es = equilibrium_strategies(st, zero_gradient(2), cfg);
  EXPECT_DOUBLE_EQ(es.weights(0), 0.75);
  EXPECT_DOUBLE_EQ(es.weights(1), 0.25);
  EXPECT_TRUE(es.diagnostics.in_simplex);
}

TEST(SolveNash, DeltaOneConvergesInOneSweep) {
  auto cfg = toy_vsm();
  cfg.delta = 1.0;
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const auto r = solve_nash(*oracle, cfg, 3);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_LT(r.residual, 1e-10);
}

TEST(SolveNash, IdenticalInvestorsAreBitIdentical) {
  auto cfg = toy_vsm();
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const auto r = solve_nash(*oracle, cfg, 4);
  ASSERT_EQ(r.u_per_investor.size(), 2u);
  EXPECT_EQ(r.u_per_investor[0], r.u_per_investor[1]);
  ASSERT_EQ(r.strategies[0].size(), r.strategies[1].size());
  for (std::size_t j = 0; j < r.strategies[0].size(); ++j) EXPECT_TRUE(r.strategies[0][j] == r.strategies[1][j]);
}

TEST(SolveNash, ValuesProportionalToPreference) {
  auto cfg = toy_vsm();
  cfg.N = 3;
  cfg.c_law = PopulationLaw::list({0.0, 0.05, -0.1});
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const auto r = solve_nash(*oracle, cfg, 5);
  const auto c = cfg.c();
  for (std::size_t l = 1; l < 3; ++l)
    EXPECT_NEAR(r.u_per_investor[l] * std::exp(-c[l]), r.u_per_investor[0] * std::exp(-c[0]), 1e-10);
}

TEST(SolveNash, PermutationEquivariance) {
  auto cfg = toy_vsm();
  cfg.N = 3;
  cfg.c_law = PopulationLaw::list({0.0, 0.05, -0.1});
  cfg.v0_law = PopulationLaw::list({1.0, 1.0, 1.0});
  auto perm = cfg;
  perm.c_law = PopulationLaw::list({-0.1, 0.0, 0.05});
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const auto a = solve_nash(*oracle, cfg, 6);
  const auto b = solve_nash(*oracle, perm, 6);
  EXPECT_EQ(a.u_per_investor[0], b.u_per_investor[1]);
  EXPECT_EQ(a.u_per_investor[2], b.u_per_investor[0]);
  EXPECT_TRUE(a.strategies[1] == b.strategies[2]);
}

TEST(SolveNash, FixedPointMatchesGridSearch) {
  auto cfg = toy_vsm();
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const auto r = solve_nash(*oracle, cfg, 7);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.certificate_residual, 1e-8);
  const NashProblem prob(*oracle, cfg, 7);
  const std::size_t j = prob.nodes() - 1;
  const double lo = 0.5 * r.m_path[j], hi = 1.5 * r.m_path[j];
  const std::size_t points = 1000;
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double best = lo, best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points; ++k) {
    const double m = lo + h * static_cast<double>(k);
    const double gap = std::abs(prob.phi(j, m) - m);
    if (gap < best_gap) {
      best_gap = gap;
      best = m;
    }
  }
  EXPECT_LE(std::abs(best - r.m_path[j]), h);
}

TEST(SolveNash, ContractionInsideRegion) {
  auto cfg = toy_vsm();
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const auto r = solve_nash(*oracle, cfg, 8);
  const NashProblem prob(*oracle, cfg, 8);
  for (std::size_t j = 0; j < prob.nodes(); ++j) {
    if (!(prob.market_total(j) < r.K_upper[j])) continue;
    const double m = r.m_path[j], h = 1e-3 * m;
    const double slope = std::abs(prob.phi(j, m + h) - prob.phi(j, m - h)) / (2.0 * h);
    EXPECT_LT(slope, 1.0);
  }
}
