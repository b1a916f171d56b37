#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "relarb/convergence.hpp"
#include "relarb/error.hpp"
#include "relarb/strategy.hpp"

using namespace relarb;
using relarb::testing::constant_config;
using relarb::testing::vsm_config;

TEST(TrendStatistic, CountsIncreases) {
  const auto t = trend_statistic({1.0, 0.8, 0.85, 0.5, 0.9}, {0.05, 0.05, 0.05, 0.05, 0.05});
  EXPECT_EQ(t.increases, 2u);
  EXPECT_EQ(t.significant_increases, 1u);  // 0.5 -> 0.9 exceeds 2 * sqrt(2) * 0.05
  EXPECT_FALSE(t.non_increasing(2));
}

TEST(TrendStatistic, NoiseOnlyIncreaseIsTolerated) {
  const auto t = trend_statistic({1.0, 0.5, 0.52, 0.2}, {0.05, 0.05, 0.05, 0.05});
  EXPECT_EQ(t.increases, 1u);
  EXPECT_EQ(t.significant_increases, 0u);
  EXPECT_TRUE(t.non_increasing(1));
  EXPECT_FALSE(t.non_increasing(0));
}

TEST(LogLogFit, RecoversPowerLaw) {
  std::vector<double> x, y;
  for (double v : {2.0, 8.0, 32.0, 128.0}) {
    x.push_back(v);
    y.push_back(3.0 * std::pow(v, -0.5));
  }
  const LinearFit f = loglog_fit(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
}

TEST(LogLogFit, SkipsNonPositive) {
  const LinearFit f = loglog_fit({0.0, 1.0, 10.0, 100.0}, {5.0, 1.0, 10.0, 100.0});
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
}

TEST(IidDecay, SlopeNearMinusHalf) {
  const IidDecay d = iid_lognormal_decay({16, 64, 256, 1024}, 0.5, 40, 99);
  ASSERT_EQ(d.w2.size(), 4u);
  EXPECT_NEAR(d.fit.slope, -0.5, 0.3);
  for (std::size_t i = 1; i < d.w2.size(); ++i) EXPECT_LT(d.w2[i], d.w2[i - 1]);
}

TEST(IidDecay, Deterministic) {
  const IidDecay a = iid_lognormal_decay({8, 32}, 0.5, 5, 3);
  const IidDecay b = iid_lognormal_decay({8, 32}, 0.5, 5, 3);
  EXPECT_EQ(a.w2, b.w2);
  EXPECT_THROW(iid_lognormal_decay({8}, 0.5, 1, 3), DomainError);
}

TEST(DeviationGrid, ContainsReferencePortfoliosAndSimplexPoints) {
  const auto g = default_deviation_grid(3, 4, 5);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[0].label, "market");
  EXPECT_EQ(g[1].label, "equal_weight");
  const auto h = default_deviation_grid(3, 4, 5);
  for (std::size_t r = 2; r < g.size(); ++r) EXPECT_EQ(g[r].label, h[r].label);
}

TEST(Epsilon, SelfDeviationIsExactlyZero) {
  const ScenarioConfig cfg = constant_config(2, 4, 0.5, 0.0);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  Vec w(2);
  w << 0.3, 0.7;
  const std::vector<Vec> table(static_cast<std::size_t>(cfg.steps) + 1, w);
  const std::vector<DeviationSpec> grid = {{"self", std::make_shared<FixedWeightsRule>(w)}};
  const EpsilonEstimate e = epsilon_equilibrium(*oracle, cfg, 4, table, grid, 13);
  EXPECT_EQ(e.epsilon, 0.0);
  ASSERT_EQ(e.gaps.size(), 1u);
  EXPECT_EQ(e.gaps[0], 0.0);
}

TEST(Epsilon, ConstantMarketHasNoProfitableDeviation) {
  ScenarioConfig cfg = constant_config(2, 4, 0.5, 0.01);
  cfg.solver.paths = 4000;
  const auto oracle = builtin_market(cfg.market, cfg.n);
  Vec w(2);
  w << 0.5, 0.5;
  const std::vector<Vec> table(static_cast<std::size_t>(cfg.steps) + 1, w);
  const EpsilonEstimate e = epsilon_equilibrium(*oracle, cfg, 4, table, default_deviation_grid(2, 3, 1), 21);
  EXPECT_GE(e.epsilon, 0.0);
  EXPECT_LE(e.epsilon, 3.0 * e.std_err + 1e-12);
  for (std::size_t i = 0; i < e.gaps.size(); ++i) EXPECT_LE(std::abs(e.gaps[i]), 4.0 * e.gap_se[i] + 1e-12);
  EXPECT_NEAR(e.J_mfe, std::exp(0.01), 0.02);
}

TEST(Epsilon, RejectsEmptyInputs) {
  const ScenarioConfig cfg = constant_config(2, 4, 0.5, 0.0);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const std::vector<Vec> table = {Vec::Constant(2, 0.5)};
  EXPECT_THROW(epsilon_equilibrium(*oracle, cfg, 4, table, {}, 1), DomainError);
  EXPECT_THROW(epsilon_equilibrium(*oracle, cfg, 4, {}, default_deviation_grid(2, 0, 1), 1), DomainError);
}

TEST(ChaosDistance, MismatchedNoiseIsRejected) {
  const ScenarioConfig cfg = vsm_config(2, 4, 0.5);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  EXPECT_THROW(chaos_distance(*oracle, cfg, 4, 16, cfg.T, 1, 2), DomainError);
  EXPECT_THROW(chaos_distance(*oracle, cfg, 32, 16, cfg.T, 1, 1), DomainError);
  EXPECT_THROW(chaos_distance(*oracle, cfg, 4, 16, cfg.T + 1.0, 1, 1), DomainError);
}

TEST(ChaosDistance, FullPopulationIsZero) {
  ScenarioConfig cfg = vsm_config(2, 4, 0.5);
  cfg.v0_law = PopulationLaw::lognormal(0.0, 0.3);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  EXPECT_EQ(chaos_distance(*oracle, cfg, 16, 16, cfg.T, 5, 5), 0.0);
  EXPECT_GT(chaos_distance(*oracle, cfg, 4, 16, cfg.T, 5, 5), 0.0);
}

TEST(ScenarioForN, RedrawsLawsUnderSeed) {
  ScenarioConfig cfg = vsm_config(2, 4, 0.5);
  cfg.c_law = PopulationLaw::uniform(0.0, 0.05);
  const ScenarioConfig a = scenario_for_n(cfg, 8, 1);
  const ScenarioConfig b = scenario_for_n(cfg, 8, 1);
  const ScenarioConfig c = scenario_for_n(cfg, 8, 2);
  EXPECT_EQ(a.N, 8u);
  EXPECT_EQ(a.c(), b.c());
  EXPECT_NE(a.c(), c.c());
}

TEST(SweepN, SmallVsmSweepIsDeterministic) {
  ScenarioConfig cfg = vsm_config(2, 2, 0.5);
  cfg.steps = 16;
  cfg.solver.paths = 300;
  cfg.solver.sub_paths = 100;
  cfg.solver.eval_nodes = 2;
  cfg.solver.k_inner = 8;
  cfg.solver.outer_paths = 2;
  cfg.solver.max_iters = 20;
  cfg.solver.tol = 1e-3;
  cfg.convergence.reference_k = 8;
  cfg.convergence.random_deviations = 1;
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const ConvergenceReport a = sweep_n(*oracle, cfg, {2, 4}, {1, 2});
  const ConvergenceReport b = sweep_n(*oracle, cfg, {2, 4}, {1, 2});
  ASSERT_EQ(a.u_N.size(), 2u);
  ASSERT_EQ(a.epsilon_N.size(), 2u);
  EXPECT_EQ(a.u_mf, b.u_mf);
  EXPECT_EQ(a.gaps, b.gaps);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.u_N[i].mean, b.u_N[i].mean);
    EXPECT_EQ(a.epsilon_N[i].epsilon, b.epsilon_N[i].epsilon);
    EXPECT_GE(a.epsilon_N[i].epsilon, 0.0);
  }
  EXPECT_EQ(a.w2_decay.size(), 2u);
  EXPECT_THROW(sweep_n(*oracle, cfg, {4, 2}, {1}), DomainError);
}
