#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "relarb/arbitrage.hpp"
#include "relarb/measure.hpp"
#include "relarb/model.hpp"
#include "relarb/nash.hpp"
#include "relarb/rng.hpp"
#include "relarb/strategy.hpp"

using namespace relarb;

namespace {

ScenarioConfig constant_market(std::size_t n) {
  ScenarioConfig cfg;
  cfg.n = n;
  cfg.N = 2;
  cfg.T = 1.0;
  cfg.steps = 200;
  cfg.delta = 0.5;
  cfg.c_law = PopulationLaw::point(0.01);
  cfg.v0_law = PopulationLaw::point(1.0);
  cfg.x0.assign(n, 1.0);
  cfg.market.kind = MarketKind::constant;
  cfg.market.sigma = Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) * 0.2;
  cfg.market.beta = Vec::Constant(static_cast<Eigen::Index>(n), 0.02);
  return cfg;
}

ScenarioConfig vsm_market(std::size_t N) {
  ScenarioConfig cfg;
  cfg.n = 2;
  cfg.N = N;
  cfg.T = 0.5;
  cfg.steps = 20;
  cfg.delta = 0.5;
  cfg.c_law = PopulationLaw::point(0.0);
  cfg.v0_law = PopulationLaw::point(1.0);
  cfg.x0 = {1.0, 2.0};
  cfg.market.kind = MarketKind::volatility_stabilized;
  cfg.market.zeta = 0.5;
  cfg.solver.eval_nodes = 2;
  cfg.solver.sub_paths = 64;
  cfg.solver.tol = 1e-6;
  return cfg;
}

}  // namespace

static void BM_NormalDraws(benchmark::State& state) {
  PathRng rng({1, 0, StreamPurpose::market_noise, 0});
  double acc = 0.0;
  for (auto _ : state) acc += rng.normal();
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NormalDraws);

static void BM_EstimateU(benchmark::State& state) {
  const auto cfg = constant_market(2);
  const auto oracle = builtin_market(cfg.market, cfg.n);
  const auto paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_u_mc(*oracle, cfg, 0.01, paths, 1).u_hat);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimateU)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_CauchyFd(benchmark::State& state) {
  auto cfg = constant_market(1);
  cfg.market.kind = MarketKind::volatility_stabilized;
  cfg.market.zeta = 0.5;
  cfg.T = 0.5;
  const auto oracle = builtin_market(cfg.market, cfg.n);
  CauchyGridSpec spec;
  spec.nodes_x = spec.nodes_y = static_cast<std::size_t>(state.range(0));
  spec.box_factor = 4.0;
  for (auto _ : state) benchmark::DoNotOptimize(solve_cauchy_fd(*oracle, cfg, spec, 0.0).min_value);
}
BENCHMARK(BM_CauchyFd)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);

static void BM_Wasserstein1d(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  PathRng rng({2, 0, StreamPurpose::sampling, 0});
  std::vector<double> a(M), b(4 * M);
  for (double& v : a) v = std::exp(0.5 * rng.normal());
  for (double& v : b) v = std::exp(0.5 * rng.normal());
  const auto ma = EmpiricalMeasure::from_values(a), mb = EmpiricalMeasure::from_values(b);
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein2_1d(ma, mb));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Wasserstein1d)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

static void BM_SolveNash(benchmark::State& state) {
  const auto cfg = vsm_market(static_cast<std::size_t>(state.range(0)));
  const auto oracle = builtin_market(cfg.market, cfg.n);
  for (auto _ : state) benchmark::DoNotOptimize(solve_nash(*oracle, cfg, 3).residual);
}
BENCHMARK(BM_SolveNash)->Arg(2)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
