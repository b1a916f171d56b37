#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relarb/model.hpp"
#include "relarb/rng.hpp"
#include "relarb/strategy.hpp"

namespace relarb {

// Log-state bounds keeping degenerate paths finite. Hits are counted.
inline constexpr double kLogPriceFloor = -27.631021115928547;  // log(1e-12)
inline constexpr double kLogPriceCap = 27.631021115928547;
inline constexpr double kLogWealthBound = 700.0;

struct ParticlePathSet {
  std::vector<double> grid;
  Mat X;   // (steps+1) x n
  Mat V;   // (steps+1) x N
  Mat Y;   // (steps+1) x n
  Mat dW;  // steps x n
  std::vector<Mat> strategy_record;  // per node, N x n; empty unless requested
  std::vector<double> v_ref;         // normalizing initial wealths v^l
  std::size_t floor_hits = 0;
  std::size_t y_clamps = 0;

  std::size_t steps() const { return grid.empty() ? 0 : grid.size() - 1; }
  std::size_t n() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t N() const { return static_cast<std::size_t>(V.cols()); }
  double peer_average(std::size_t k) const;
};

struct DeflatorPath {
  std::vector<double> L;      // steps+1, L(0) = 1
  std::vector<double> log_L;  // steps+1
  Mat theta;                  // steps x n, evaluated at the left node of each step
  Mat lambda;                 // steps x n
  std::vector<double> Theta;  // steps
  std::vector<double> increments;  // steps, log L(k+1) - log L(k)
};

struct BenchmarkPath {
  std::vector<double> Vbench;
  std::vector<double> market_total;
  std::vector<double> peer_average;
  std::vector<double> relative_log_performance;  // per investor, log(V(T)/Vbench(T))
};

// Starting point of a (sub-)simulation.
struct InitialState {
  double t0 = 0.0;
  std::size_t step0 = 0;
  std::size_t steps = 0;
  double dt = 0.0;
  Vec x;
  std::vector<double> wealth;
  Vec y;  // exogenous mode only
};

InitialState initial_state(const ScenarioConfig& config);

// Everything the stepping kernel needs besides the starting point.
struct EngineSetup {
  const MarketCoefficientOracle* oracle = nullptr;
  const StrategyRule* strategy = nullptr;
  std::vector<double> v_ref;
  double delta = 1.0;
  YMode y_mode = YMode::endogenous;
  bool strict_simplex = false;
  double tol_simplex = 1e-9;
  bool record_strategies = false;
  // When false the deflator is skipped and log L stays 0.
  bool deflate = true;
  SamplingMeasure measure = SamplingMeasure::physical;
};

EngineSetup make_setup(const MarketCoefficientOracle& oracle, const StrategyRule& strategy,
                       const ScenarioConfig& config);

struct PathOutcome {
  Vec x_T;
  std::vector<double> wealth_T;
  double log_L_T = 0.0;
  double bench_0 = 0.0;
  double bench_T = 0.0;
  double peer_T = 0.0;
  std::size_t floor_hits = 0;
  std::size_t y_clamps = 0;
  bool absorbed = false;      // deflated sampling only
  double log_survival = 0.0;  // deflated sampling only

  // Vbench(T) L(T) / Vbench(0), zero on absorbed paths.
  double deflated_benchmark_ratio() const;
};

// Simulates one path. `record` and `deflator` are optional sinks.
PathOutcome run_path(const EngineSetup& setup, const InitialState& init, const StreamKey& key,
                     ParticlePathSet* record = nullptr, DeflatorPath* deflator = nullptr);

ParticlePathSet simulate_n_particle(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                                    const StrategyRule& strategy, std::uint64_t seed,
                                    std::size_t path_index = 0, bool record_strategies = false);

DeflatorPath simulate_deflator(const ParticlePathSet& paths, const MarketCoefficientOracle& oracle,
                               YMode y_mode = YMode::endogenous);

BenchmarkPath benchmark_path(const ParticlePathSet& paths, const ScenarioConfig& config);

struct MeanFieldPathSet {
  std::vector<double> grid;
  Mat B;      // steps x n common-noise increments
  Mat X;      // (steps+1) x n
  Mat inner;  // (steps+1) x K inner wealth paths
  Mat Z;      // (steps+1) x n conditional mean invested capital
  std::vector<double> m;  // conditional mean normalized wealth
  std::vector<double> v0; // inner initial wealth draws
  std::vector<double> c;  // inner preference draws
  std::vector<double> log_L;
  std::size_t floor_hits = 0;
};

// Inner (v0, c) draws: cycles an explicit list, otherwise i.i.d. keyed draws.
std::vector<double> inner_draws(const PopulationLaw& law, std::size_t count, std::uint64_t seed,
                                std::uint64_t sub);
std::vector<double> inner_wealth_draws(const ScenarioConfig& config, std::size_t count, std::uint64_t seed);
std::vector<double> inner_preference_draws(const ScenarioConfig& config, std::size_t count, std::uint64_t seed);

MeanFieldPathSet simulate_mean_field(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                                     const StrategyRule& strategy, std::size_t k_inner, std::uint64_t seed,
                                     std::size_t outer_index = 0);

// CSV dump with header `t,<names>` and 17 significant digits.
std::string paths_csv(const std::vector<double>& grid, const Mat& values, const std::string& prefix);

}  // namespace relarb
