#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relarb/mfg.hpp"
#include "relarb/model.hpp"
#include "relarb/nash.hpp"
#include "relarb/stats.hpp"

namespace relarb {

struct NSummary {
  std::size_t N = 0;
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t solves = 0;
  bool failed = false;
  std::string failure;
};

struct EpsilonEstimate {
  std::size_t N = 0;
  double epsilon = 0.0;   // max over the grid of (J_mfe - J_dev)^+
  double std_err = 0.0;   // paired SE at the maximising deviation
  double J_mfe = 0.0;
  std::vector<double> gaps;  // signed, one per deviation
  std::vector<double> gap_se;
  std::vector<std::string> deviations;
};

struct DecayRow {
  double t = 0.0;
  std::size_t N = 0;
  double w2 = 0.0;
  double w2_se = 0.0;
};

// Counts of increases along a sequence, split by whether they exceed twice
// the combined standard error.
struct TrendStatistic {
  std::size_t increases = 0;
  std::size_t significant_increases = 0;
  // Non-increasing up to at most `allowed` increases within noise.
  bool non_increasing(std::size_t allowed) const {
    return significant_increases == 0 && increases <= allowed;
  }
};

TrendStatistic trend_statistic(const std::vector<double>& values, const std::vector<double>& std_err);

struct ConvergenceReport {
  std::vector<std::size_t> N_values;
  std::vector<NSummary> u_N;
  double u_mf = 0.0;
  double u_mf_se = 0.0;
  std::vector<double> gaps;    // |u_N - u_mf|, paired on each Nash solve's noise streams
  std::vector<double> gap_se;
  TrendStatistic gap_trend;
  std::vector<EpsilonEstimate> epsilon_N;
  TrendStatistic epsilon_trend;
  std::vector<DecayRow> w2_decay;
  LinearFit w2_fit;  // log W2 against log N at the last node time
  bool partial = false;
  std::vector<std::string> warnings;
};

// Scenario for N investors with i.i.d. (c, v0) draws keyed by seed.
ScenarioConfig scenario_for_n(const ScenarioConfig& tmpl, std::size_t N, std::uint64_t seed);

// Nash values per N against one mean-field solve with K = reference_k.
ConvergenceReport sweep_n(const MarketCoefficientOracle& oracle, const ScenarioConfig& tmpl,
                          const std::vector<std::size_t>& N_values, const std::vector<std::uint64_t>& seeds);

struct DeviationSpec {
  std::string label;
  StrategyPtr rule;
};

// Market portfolio, equal weight and `random_points` seeded simplex points.
std::vector<DeviationSpec> default_deviation_grid(std::size_t n, std::size_t random_points, std::uint64_t seed);

// J = E[exp(c) Vbench(T) L(T)] / Vbench(0) for investor 0, everyone else on
// the mean-field map.
EpsilonEstimate epsilon_equilibrium(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                                    std::size_t N, const std::vector<Vec>& mfe_table,
                                    const std::vector<DeviationSpec>& grid, std::uint64_t seed);

// W2 between N-particle and reference wealth marginals on matched common
// noise, nested initial draws. Rows are ordered by node time, then N.
std::vector<DecayRow> chaos_metric(const MarketCoefficientOracle& oracle, const ScenarioConfig& tmpl,
                                   const std::vector<std::size_t>& N_values, const std::vector<double>& node_times,
                                   const std::vector<std::uint64_t>& seeds, std::size_t reference_k);

// W2 between N particles and a reference run at time t. Both sides must use
// the same common-noise seed; a mismatch is a DomainError.
double chaos_distance(const MarketCoefficientOracle& oracle, const ScenarioConfig& tmpl, std::size_t N,
                      std::size_t reference_k, double t, std::uint64_t particle_noise_seed,
                      std::uint64_t reference_noise_seed);

// W2(empirical_M, independent empirical_{4M}) for i.i.d. lognormal samples,
// averaged over replications, with the log-log slope fit.
struct IidDecay {
  std::vector<std::size_t> sizes;
  std::vector<double> w2;
  std::vector<double> w2_se;
  LinearFit fit;
};

IidDecay iid_lognormal_decay(const std::vector<std::size_t>& sizes, double log_sd, std::size_t replications,
                             std::uint64_t seed);

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace relarb
