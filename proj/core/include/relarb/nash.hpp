#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "relarb/arbitrage.hpp"
#include "relarb/engine.hpp"
#include "relarb/model.hpp"
#include "relarb/stats.hpp"

namespace relarb {

// Phi(m) = delta X S / (N - (1-delta) S) with S = sum_l exp(c_l) u_l / v_l,
// u_l normalized. Throws InfeasibleError when the denominator is not positive.
double phi_map(double m, double market_total, const std::vector<double>& u_normalized, const ScenarioConfig& config);

struct ContractionBound {
  double A = 0.0;
  double D = 0.0;
  double K_upper = std::numeric_limits<double>::infinity();
};

ContractionBound contraction_region(const std::vector<double>& u_normalized, const std::vector<double>& du_dm,
                                    const ScenarioConfig& config);

struct UniquenessProbability {
  double probability = 1.0;
  double cdf_argument = std::numeric_limits<double>::infinity();
  bool std_normalized = false;
  // Filled when paths are supplied.
  double empirical_in_K = 0.0;
  double empirical_in_K_se = 0.0;
  double empirical_stay = 0.0;  // fraction never leaving K up to t
  std::size_t paths = 0;
};

// Lognormal statistics of the market total under the market portfolio.
struct MarketWeightStats {
  double x = 1.0;         // X^N at the reference time
  double drift = 0.0;     // m' beta
  double variance = 0.0;  // m' alpha m
};

MarketWeightStats market_weight_stats(const MarketCoefficientOracle& oracle, const Vec& x, const Vec& y, double m);

// Gaussian CDF form at horizon t. The printed form divides by the variance,
// the normalized variant by its square root.
UniquenessProbability uniqueness_probability(const MarketWeightStats& stats, double K_upper, double t,
                                             bool std_normalized);
// Adds empirical frequencies of X^N(t) in K from simulated market totals
// (rows: paths, columns: grid nodes up to t).
void attach_empirical(UniquenessProbability& p, const Mat& market_totals, double K_upper);

// Nodewise fixed-point problem along a reference path.
class NashProblem {
 public:
  NashProblem(const MarketCoefficientOracle& oracle, const ScenarioConfig& config, std::uint64_t seed);

  std::size_t nodes() const { return node_steps_.size(); }
  std::size_t node_step(std::size_t j) const { return node_steps_[j]; }
  double node_time(std::size_t j) const;
  double market_total(std::size_t j) const;
  double reference_m(std::size_t j) const;
  const ParticlePathSet& reference() const { return reference_; }
  const ScenarioConfig& config() const { return config_; }

  // Starting point of the sub-simulation at node j with peer average m.
  InitialState node_state(std::size_t j, double m) const;
  // Normalized value and its standard error at node j, peer average m.
  SampleStats u_normalized(std::size_t j, double m) const;
  // Per-path deflated benchmark ratios behind u_normalized.
  std::vector<double> value_samples(std::size_t j, double m) const;
  McOptions node_options(std::size_t j) const { return options(j); }
  double phi(std::size_t j, double m) const;
  GradientBlock gradient(std::size_t j, double m) const;

 private:
  const MarketCoefficientOracle& oracle_;
  ScenarioConfig config_;
  std::uint64_t seed_;
  StrategyPtr strategy_;
  EngineSetup setup_;
  ParticlePathSet reference_;
  std::vector<std::size_t> node_steps_;
  std::vector<double> c_;

  McOptions options(std::size_t j) const;
};

struct StrategyDiagnostics {
  double sum = 0.0;
  double min = 0.0;
  bool in_simplex = true;
};

struct EquilibriumStrategy {
  Vec weights;
  Vec std_err;
  StrategyDiagnostics diagnostics;
  std::vector<std::string> warnings;
};

struct StrategyState {
  Vec x;
  double m = 1.0;          // peer average
  double u_normalized = 1.0;
  double u_se = 0.0;
  Coefficients coef;       // sigma and tau at the node
};

// pi = mu + X o D vbar + (tau sigma^-1)' D_y vbar with
// vbar = log u (1 + (1-delta) m / (delta X)).
EquilibriumStrategy equilibrium_strategies(const StrategyState& state, const GradientBlock& grad,
                                           const ScenarioConfig& config, bool renormalize = false);

struct NashOptions {
  double damping = 0.5;
  double tol = 1e-6;
  std::size_t max_iters = 200;
  bool strategies = true;
  bool renormalize = false;
};

NashOptions nash_options(const ScenarioConfig& config);

struct EquilibriumResult {
  std::vector<double> node_times;
  std::vector<std::size_t> node_steps;
  std::vector<double> market_total;
  std::vector<double> m_path;
  std::vector<double> m_initial;
  std::vector<double> u_node;     // normalized value at each node, at m*
  std::vector<double> u_node_se;
  std::vector<double> u_per_investor;  // exp(c_l) u at the initial node
  std::vector<double> u_per_investor_se;
  std::vector<std::vector<Vec>> strategies;  // [investor][node]
  std::vector<Vec> strategy_se;              // [node]
  std::vector<StrategyDiagnostics> strategy_diagnostics;  // [node]
  double residual = 0.0;
  std::vector<double> residual_trace;
  double certificate_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> A_path;
  std::vector<double> D_path;
  std::vector<double> K_upper;
  double tau_K_mean = 0.0;        // mean first exit time from K, T when never
  double tau_K_stay_fraction = 0.0;
  std::size_t tau_K_paths = 0;
  UniquenessProbability uniqueness;
  std::vector<std::string> warnings;
};

EquilibriumResult solve_nash(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                             const NashOptions& options, std::uint64_t seed);
EquilibriumResult solve_nash(const MarketCoefficientOracle& oracle, const ScenarioConfig& config, std::uint64_t seed);

}  // namespace relarb
