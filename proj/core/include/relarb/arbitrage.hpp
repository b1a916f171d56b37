#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relarb/engine.hpp"
#include "relarb/model.hpp"
#include "relarb/rng.hpp"

namespace relarb {

struct McOptions {
  std::size_t paths = 10000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  StreamPurpose purpose = StreamPurpose::market_noise;
  std::uint64_t sub = 0;
};

struct ArbitrageEstimate {
  double c = 0.0;
  double u_hat = 0.0;    // optimal proportion including exp(c)
  double std_err = 0.0;
  double u_normalized = 0.0;  // u_hat * exp(-c)
  double std_err_normalized = 0.0;
  std::size_t n_paths = 0;
  bool normalized = false;  // u_hat reported in the normalized convention
  bool has_gradients = false;
  Vec grad_x;
  Vec grad_y;
  double grad_m = 0.0;
  Vec grad_x_se;
  Vec grad_y_se;
  double grad_m_se = 0.0;
  std::size_t floor_hits = 0;
  std::vector<std::string> warnings;
};

// Per-path samples of Vbench(T) L(T) / Vbench(0); streams keyed by path index.
std::vector<double> deflated_benchmark_samples(const EngineSetup& setup, const InitialState& init,
                                               const McOptions& opts, std::size_t* floor_hits = nullptr);

ArbitrageEstimate estimate_u_mc(const EngineSetup& setup, const InitialState& init, double c, const McOptions& opts);

// Investor given by index: c and v taken from the resolved scenario, strategy
// from the scenario's strategy spec.
ArbitrageEstimate estimate_u_mc(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                                std::size_t investor, std::size_t n_paths, std::uint64_t seed);
// Investor given by preference level.
ArbitrageEstimate estimate_u_mc(const MarketCoefficientOracle& oracle, const ScenarioConfig& config, double c,
                                std::size_t n_paths, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gradients of log u by bump-and-revalue with common random numbers.

struct BumpSpec {
  double h_abs = 1e-3;
  double h_rel = 1e-2;
  bool bump_x = true;
  bool bump_y = true;
  bool bump_m = true;
};

struct GradientBlock {
  Vec dx;
  Vec dy;
  double dm = 0.0;
  Vec dx_se;
  Vec dy_se;
  double dm_se = 0.0;
  std::vector<bool> one_sided_x;
  std::vector<bool> one_sided_y;
  bool one_sided_m = false;
  bool y_available = false;
  double u_normalized = 0.0;  // base value
  double u_se = 0.0;
  double du_dm = 0.0;  // derivative of the normalized value itself
  double du_dm_se = 0.0;
  std::vector<std::string> warnings;
};

GradientBlock grad_log_u(const EngineSetup& setup, const InitialState& base, const BumpSpec& bump,
                         const McOptions& opts);
GradientBlock grad_log_u(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                         const BumpSpec& bump, std::uint64_t seed, std::size_t n_paths);

// Y at the initial node: exogenous y0, or (1/N) sum_l v_l pi_l(0).
Vec initial_invested(const ScenarioConfig& config, const StrategyRule& strategy);
double initial_benchmark(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// Generator

struct GeneratorPoint {
  Vec x;
  Vec y;
  double m = 1.0;
  double t = 0.0;
  double delta = 1.0;
  double vbench0 = 1.0;
};

struct LocalDerivatives {
  Vec dx;
  Vec dy;
  Mat dxx;
  Mat dyy;
};

struct Stencil {
  std::function<double(const Vec& x, const Vec& y)> f;
  Vec hx;
  Vec hy;
  std::size_t points_per_axis = 3;
};

LocalDerivatives stencil_derivatives(const Stencil& stencil, const Vec& x, const Vec& y);
double apply_generator(const MarketCoefficientOracle& oracle, const GeneratorPoint& point,
                       const LocalDerivatives& d);
double apply_generator(const MarketCoefficientOracle& oracle, const GeneratorPoint& point, const Stencil& stencil);

// ---------------------------------------------------------------------------
// Finite-difference Cauchy solver (n = 1, axes log x and log y)

enum class FdBoundary { outflow, absorbing_lower_x };

struct CauchyGridSpec {
  std::size_t nodes_x = 129;
  std::size_t nodes_y = 129;
  double box_factor = 8.0;
  double cfl = 0.9;
  FdBoundary boundary = FdBoundary::outflow;
  bool sentinel = true;
  double sentinel_tol = 1e-3;
  std::vector<double> slice_taus;
};

struct CauchySlice {
  double tau = 0.0;
  Mat values;
};

struct CauchyGrid {
  std::vector<double> log_x;
  std::vector<double> log_y;
  double x0 = 0.0;
  double y0 = 0.0;
  double tau_final = 0.0;
  double c = 0.0;
  Mat values;  // nodes_x x nodes_y at tau_final, including exp(c)
  std::vector<CauchySlice> slices;
  std::string boundary;
  double cfl = 0.0;
  double dtau = 0.0;
  std::size_t substeps = 0;
  double min_value = 0.0;
  bool nonnegative = true;
  std::vector<double> max_trace;
  bool max_non_increasing = true;
  bool box_warning = false;
  double sentinel_gap = 0.0;

  double value_at(double x, double y) const;
  // d log u / dx at (x, y) from grid differences.
  double grad_log_x(double x, double y) const;
};

CauchyGrid solve_cauchy_fd(const MarketCoefficientOracle& oracle, const ScenarioConfig& config,
                           const CauchyGridSpec& spec, double c);
// Max |A_h u| over interior nodes of the discrete operator on the grid.
double fd_residual(const MarketCoefficientOracle& oracle, const ScenarioConfig& config, const CauchyGridSpec& spec,
                   const Mat& values);

// ---------------------------------------------------------------------------
// Fichera drift on the faces of the orthant

enum class FaceVerdict { nonnegative_on_face, negative_on_face, mixed };
enum class FicheraVerdict { no_relative_arbitrage, relative_arbitrage_exists, inconclusive };

std::string to_string(FaceVerdict v);
std::string to_string(FicheraVerdict v);

struct FaceRecord {
  std::size_t face = 0;
  bool y_face = false;
  std::size_t coordinate = 0;
  double f_min = 0.0;
  double f_max = 0.0;
  FaceVerdict verdict = FaceVerdict::mixed;
  std::string diagnostic;
};

struct FicheraReport {
  std::vector<FaceRecord> faces;
  FicheraVerdict verdict = FicheraVerdict::inconclusive;
  bool analytic_derivatives = false;
};

struct FicheraBox {
  Vec x_upper;
  Vec y_upper;
  double delta = 1.0;
  double vbench0 = 1.0;
  double m = 1.0;
  std::uint64_t seed = 0;
};

FicheraReport fichera_check(const MarketCoefficientOracle& oracle, const FicheraBox& box,
                            std::size_t samples_per_face, double tol = 1e-10);
FicheraBox fichera_box(const ScenarioConfig& config);

}  // namespace relarb
