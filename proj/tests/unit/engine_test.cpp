#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "relarb/arbitrage.hpp"
#include "relarb/engine.hpp"
#include "relarb/stats.hpp"
#include "relarb/strategy.hpp"

using namespace relarb;
using relarb::testing::constant_config;
using relarb::testing::vsm_config;

using relarb::testing::FrozenMarket;

TEST(Engine, FrozenDynamicsStayPut) {
  const FrozenMarket oracle(2, 0.0);
  auto cfg = constant_config(2, 3, 0.5, 0.0);
  cfg.v0_law = PopulationLaw::list({1.0, 2.0, 0.5});
  const MarketPortfolioRule rule;
  const auto p = simulate_n_particle(oracle, cfg, rule, 1);
  for (Eigen::Index k = 0; k < p.X.rows(); ++k) {
    EXPECT_EQ(p.X(k, 0), 1.0);
    EXPECT_EQ(p.X(k, 1), 2.0);
    EXPECT_DOUBLE_EQ(p.V(k, 1), 2.0);
  }
}

TEST(Engine, DeterministicGrowthOfWealth) {
  const double r = 0.05;
  const FrozenMarket oracle(2, r);
  auto cfg = constant_config(2, 1, 1.0, 0.0);
  const MarketPortfolioRule rule;
  const auto p = simulate_n_particle(oracle, cfg, rule, 1);
  EXPECT_NEAR(p.V(cfg.steps, 0), std::exp(r * cfg.T), 1e-13);
  EXPECT_NEAR(p.X(cfg.steps, 1), 2.0 * std::exp(r * cfg.T), 1e-13);
}

TEST(Engine, LognormalMeanOfPrice) {
  auto cfg = constant_config(1, 1, 1.0, 0.0, 0.3, 0.2);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  EngineSetup setup = make_setup(*oracle, rule, cfg);
  setup.deflate = false;
  setup.measure = SamplingMeasure::physical;
  const auto init = initial_state(cfg);
  std::vector<double> xt(40000);
  for (std::size_t j = 0; j < xt.size(); ++j)
    xt[j] = run_path(setup, init, {3, j, StreamPurpose::market_noise, 0}).x_T(0);
  const auto s = sample_stats(xt);
  EXPECT_NEAR(s.mean, std::exp(0.06 * cfg.T), 3.0 * s.std_err);
}

TEST(Engine, DeflatorIsMartingaleUnderPhysicalSampling) {
  auto cfg = constant_config(2, 1, 1.0, 0.0, 0.2, 0.3);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  EngineSetup setup = make_setup(*oracle, rule, cfg);
  setup.measure = SamplingMeasure::physical;
  const auto init = initial_state(cfg);
  std::vector<double> L(40000);
  for (std::size_t j = 0; j < L.size(); ++j)
    L[j] = std::exp(run_path(setup, init, {5, j, StreamPurpose::market_noise, 0}).log_L_T);
  const auto s = sample_stats(L);
  EXPECT_NEAR(s.mean, 1.0, 3.0 * s.std_err);
}

TEST(Engine, ZeroDriftMeansUnitDeflator) {
  auto cfg = constant_config(2, 1, 1.0, 0.0, 0.2, 0.0);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  const auto p = simulate_n_particle(*oracle, cfg, rule, 2);
  const auto d = simulate_deflator(p, *oracle);
  for (double l : d.L) EXPECT_EQ(l, 1.0);
}

TEST(Engine, DeflatorReconstructsFromIncrements) {
  auto cfg = vsm_config(2, 3, 0.5);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  const auto p = simulate_n_particle(*oracle, cfg, rule, 4);
  const auto d = simulate_deflator(p, *oracle);
  double acc = 0.0;
  for (std::size_t k = 0; k < d.increments.size(); ++k) {
    acc += d.increments[k];
    EXPECT_NEAR(std::exp(acc), d.L[k + 1], 1e-12 * d.L[k + 1]);
  }
}

TEST(Engine, EndogenousInvestedCapitalIsExact) {
  auto cfg = vsm_config(2, 4, 0.5);
  cfg.v0_law = PopulationLaw::list({1.0, 1.5, 0.7, 1.2});
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  const auto p = simulate_n_particle(*oracle, cfg, rule, 6, 0, true);
  for (std::size_t k = 0; k <= cfg.steps; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    for (Eigen::Index i = 0; i < 2; ++i) {
      double s = 0.0;
      for (Eigen::Index l = 0; l < 4; ++l) s += p.V(r, l) * p.strategy_record[k](l, i);
      EXPECT_EQ(p.Y(r, i), s / 4.0);
    }
  }
}

TEST(Engine, PositivityAcrossSeeds) {
  auto cfg = constant_config(2, 2, 0.5, 0.0, 1.2, 0.5);
  cfg.steps = 20;
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const EqualWeightRule rule;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = simulate_n_particle(*oracle, cfg, rule, seed);
    EXPECT_GT(p.X.minCoeff(), 0.0);
    EXPECT_GT(p.V.minCoeff(), 0.0);
  }
}

TEST(Engine, BitIdenticalAcrossThreads) {
  auto cfg = vsm_config(2, 3, 0.5);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  const EngineSetup setup = make_setup(*oracle, rule, cfg);
  const auto init = initial_state(cfg);
  McOptions o;
  o.paths = 300;
  o.seed = 8;
  o.threads = 1;
  const auto a = deflated_benchmark_samples(setup, init, o);
  o.threads = 4;
  const auto b = deflated_benchmark_samples(setup, init, o);
  EXPECT_EQ(a, b);
}

TEST(Engine, DeflatedMeasureKeepsMartingaleInConstantMarket) {
  auto cfg = constant_config(2, 1, 1.0, 0.0, 0.25, 0.2);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  EngineSetup setup = make_setup(*oracle, rule, cfg);
  ASSERT_EQ(setup.measure, SamplingMeasure::deflated);
  McOptions o;
  o.paths = 20000;
  o.seed = 12;
  const auto s = sample_stats(deflated_benchmark_samples(setup, initial_state(cfg), o));
  EXPECT_NEAR(s.mean, 1.0, 3.0 * s.std_err + 1e-3);
}

TEST(Benchmark, DeltaOneIsMarketTotal) {
  auto cfg = constant_config(2, 2, 1.0, 0.0);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  const auto p = simulate_n_particle(*oracle, cfg, rule, 3);
  const auto b = benchmark_path(p, cfg);
  for (std::size_t k = 0; k <= cfg.steps; ++k)
    EXPECT_DOUBLE_EQ(b.Vbench[k], p.X.row(static_cast<Eigen::Index>(k)).sum());
}

TEST(Benchmark, PeerAverageArithmetic) {
  ParticlePathSet p;
  p.grid = {0.0};
  p.X = Mat::Constant(1, 2, 1.0);
  p.V.resize(1, 2);
  p.V << 1.0, 3.0;
  p.Y = Mat::Zero(1, 2);
  p.v_ref = {1.0, 1.0};
  auto cfg = constant_config(2, 2, 0.5, 0.0);
  cfg.steps = 0;
  const auto b = benchmark_path(p, cfg);
  EXPECT_DOUBLE_EQ(b.Vbench[0], 2.0);
}

TEST(Benchmark, DeltaZeroFrozenIsOne) {
  const FrozenMarket oracle(2, 0.0);
  auto cfg = constant_config(2, 3, 0.0, 0.0);
  cfg.v0_law = PopulationLaw::list({1.0, 2.0, 3.0});
  const MarketPortfolioRule rule;
  const auto b = benchmark_path(simulate_n_particle(oracle, cfg, rule, 1), cfg);
  for (double v : b.Vbench) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(MeanField, PointMassInnerPathsCoincide) {
  auto cfg = vsm_config(2, 1, 0.5);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  const auto mf = simulate_mean_field(*oracle, cfg, rule, 8, 3);
  for (Eigen::Index k = 0; k < mf.inner.rows(); ++k) {
    for (Eigen::Index j = 1; j < mf.inner.cols(); ++j) EXPECT_EQ(mf.inner(k, j), mf.inner(k, 0));
    EXPECT_DOUBLE_EQ(mf.m[static_cast<std::size_t>(k)], mf.inner(k, 0));
  }
}

TEST(MeanField, FrozenDynamicsKeepFlowConstant) {
  const FrozenMarket oracle(2, 0.0);
  auto cfg = constant_config(2, 1, 0.5, 0.0);
  cfg.v0_law = PopulationLaw::lognormal(0.0, 0.3);
  const MarketPortfolioRule rule;
  const auto mf = simulate_mean_field(oracle, cfg, rule, 32, 3);
  for (double m : mf.m) EXPECT_NEAR(m, 1.0, 1e-14);
  for (Eigen::Index k = 1; k < mf.Z.rows(); ++k) EXPECT_NEAR((mf.Z.row(k) - mf.Z.row(0)).norm(), 0.0, 1e-14);
}

TEST(Engine, DeflatedWealthHasFlatMean) {
  auto cfg = constant_config(2, 1, 1.0, 0.0, 0.2, 0.25);
  cfg.steps = 10;
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const MarketPortfolioRule rule;
  const std::size_t paths = 4000;
  std::vector<double> t;
  for (std::size_t k = 0; k <= cfg.steps; ++k) t.push_back(static_cast<double>(k) * cfg.dt());
  // Per-path slopes of V L against t; their mean estimates the drift with an
  // honest standard error.
  std::vector<double> slopes(paths);
  for (std::size_t j = 0; j < paths; ++j) {
    const auto p = simulate_n_particle(*oracle, cfg, rule, 21, j);
    const auto d = simulate_deflator(p, *oracle);
    std::vector<double> vl(cfg.steps + 1);
    for (std::size_t k = 0; k <= cfg.steps; ++k) vl[k] = p.V(static_cast<Eigen::Index>(k), 0) * d.L[k];
    slopes[j] = linear_fit(t, vl).slope;
  }
  const auto fit = sample_stats(slopes);
  EXPECT_LE(std::abs(fit.mean), 3.0 * fit.std_err);
}
