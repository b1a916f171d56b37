#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relarb/arbitrage.hpp"
#include "relarb/engine.hpp"
#include "relarb/model.hpp"
#include "relarb/nash.hpp"

namespace relarb {

// V* = delta X u / (1 - (1-delta) E[u / v0]), u normalized.
double mean_field_target_wealth(double delta, double market_total, double u_normalized, double mean_u_over_v0);

// Volatility of d(L m) per unit dB: L (mean_k (V^k/v0^k) pi' sigma - m kappa').
Vec deflated_mean_volatility(const Mat& inner_pi, const std::vector<double>& normalized_wealth, const Mat& sigma,
                             const Vec& kappa, double L);

struct MfeStrategyInput {
  Vec x;
  Vec z;
  double m = 1.0;
  double v_star = 1.0;
  Vec vol_Lm;          // row vector of d(L m) against dB
  Coefficients coef;   // sigma, tau at the state
};

// pi = X o D_x log u + (tau sigma^-1)' D_z log u + (delta X / V*) mu
//      + ((1-delta) / V*) sigma^-T vol_Lm.
EquilibriumStrategy mfe_strategy(const MfeStrategyInput& in, const GradientBlock& grad, double delta,
                                 double tol_simplex = 1e-9);

struct VsmState {
  Vec x;
  Vec z;
  double m = 1.0;
  double L = 1.0;
  double Theta = 0.0;
};

struct VsmClosedForm {
  Vec weights;
  Vec vol_m;
};

VsmClosedForm vsm_closed_form(const VsmState& state, const GradientBlock& grad, double zeta, double delta);

// A~ = 1 - (1-delta) E[e^c u / v0], D~ = delta |E[e^c D_m u / v0]|.
ContractionBound contraction_region_mf(double u_normalized, double du_dm, const std::vector<double>& c,
                                       const std::vector<double>& v0, double delta);

struct MfeOptions {
  std::size_t k_inner = 64;
  std::size_t outer_paths = 16;
  std::size_t eval_nodes = 10;
  std::size_t sub_paths = 2000;
  double damping = 0.5;
  double tol = 1e-6;
  std::size_t max_iters = 200;
  std::size_t threads = 1;
  BumpSpec bump;
  std::uint64_t population_seed = 0;  // inner (v0, c) draws
};

MfeOptions mfe_options(const ScenarioConfig& config);

// One matched state of the solve at (outer path, evaluation node).
struct MfeStateRecord {
  std::size_t path = 0;
  std::size_t node = 0;
  std::size_t step = 0;
  double t = 0.0;
  Vec x;
  Vec z;
  double m = 1.0;
  double L = 1.0;
  double Theta = 0.0;
  double u_normalized = 1.0;
  double u_se = 0.0;
  double v_star = 1.0;
  Vec vol_Lm;
  GradientBlock grad;
  Vec pi;
  StrategyDiagnostics diagnostics;
};

struct MeanFieldEquilibrium {
  std::vector<double> grid;
  std::vector<std::size_t> node_steps;
  std::vector<std::vector<double>> m_path;   // [outer][step], frozen flow
  std::vector<std::vector<double>> m_simulated;  // [outer][step], last simulation
  std::vector<Mat> Z_path;                   // [outer], (steps+1) x n
  std::vector<std::vector<Vec>> strategy_path;  // [outer][step]
  double u = 0.0;
  double u_se = 0.0;
  double u_normalized = 0.0;
  double u_normalized_se = 0.0;
  double residual_m = 0.0;
  double residual_phi = 0.0;
  double inner_se = 0.0;  // max over steps of mean over paths of the sd of m across replicate populations
  std::vector<double> residual_m_trace;
  std::vector<double> residual_phi_trace;
  std::size_t iterations = 0;
  bool converged_m = false;
  bool converged_phi = false;
  bool converged = false;
  std::vector<std::vector<double>> A_tilde;   // [outer][node]
  std::vector<std::vector<double>> D_tilde;
  std::vector<std::vector<double>> K_tilde_upper;
  double exit_stay_fraction = 0.0;
  UniquenessProbability uniqueness;
  std::vector<MfeStateRecord> states;
  std::vector<double> inner_v0;
  std::vector<double> inner_c;
  std::vector<std::string> warnings;
};

MeanFieldEquilibrium solve_mfe(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                               const MfeOptions& options, std::uint64_t seed);
MeanFieldEquilibrium solve_mfe(const MarketCoefficientOracle& oracle, const ScenarioConfig& config, std::uint64_t seed);

struct MeanFieldRun {
  ParticlePathSet paths;
  DeflatorPath deflator;
};

// K-particle realization of the conditional law on one common-noise path.
MeanFieldRun simulate_mean_field_path(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                                      const StrategyRule& strategy, const std::vector<double>& v0,
                                      std::uint64_t seed, std::size_t outer_index, bool record_strategies = false);

struct ConsistencyCheck {
  double deviation = 0.0;  // sup over steps of mean over paths |m - m_resim|
  double bound = 0.0;      // residual_m + 3 inner SE
  bool passed = false;
};

// Re-simulates under the returned strategy map with fresh inner draws.
ConsistencyCheck check_consistency(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                                   const MeanFieldEquilibrium& mfe, const MfeOptions& options, std::uint64_t seed);

// Strategy table averaged over outer paths, one row per grid step.
std::vector<Vec> average_strategy(const MeanFieldEquilibrium& mfe);

// Normalized value of the representative investor from the initial state
// under the path-averaged equilibrium map, on caller-chosen noise streams.
// Sharing streams with an N-player solve cancels most sampling error in the
// difference of the two values.
std::vector<double> mfe_initial_value_samples(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                                              const MeanFieldEquilibrium& mfe, const McOptions& options);

}  // namespace relarb
