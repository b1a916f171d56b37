#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace relarb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Scenario configuration

enum class YMode { endogenous, exogenous };
enum class MarketKind { constant, volatility_stabilized };
enum class StrategyKind { market, equal_weight, fixed };
// Measure under which value estimates are sampled. `deflated` shifts the
// noise by the price of risk and kills paths that reach the boundary.
enum class SamplingMeasure { physical, deflated };

// Either an explicit per-investor list or an i.i.d. sampling law.
struct PopulationLaw {
  enum class Kind { list, uniform, normal, lognormal, point };
  Kind kind = Kind::point;
  std::vector<double> values;  // list
  double a = 0.0;              // point value, uniform low, normal mean, lognormal log-mean
  double b = 0.0;              // uniform high, normal sd, lognormal log-sd

  static PopulationLaw list(std::vector<double> v);
  static PopulationLaw point(double v);
  static PopulationLaw uniform(double low, double high);
  static PopulationLaw normal(double mean, double sd);
  static PopulationLaw lognormal(double log_mean, double log_sd);

  bool is_list() const { return kind == Kind::list; }
  double mean() const;
  std::string kind_name() const;
};

struct MarketParams {
  MarketKind kind = MarketKind::constant;
  Vec beta;    // constant kind
  Mat sigma;   // constant kind
  Vec gamma;   // constant kind, optional (zero when empty)
  Mat tau;     // constant kind, optional (zero when empty)
  double zeta = 0.0;  // volatility-stabilized kind
};

struct StrategySpec {
  StrategyKind kind = StrategyKind::market;
  std::vector<double> weights;  // fixed kind
};

struct SolverSettings {
  std::size_t paths = 20000;
  double damping = 0.5;
  double tol = 1e-6;
  std::size_t max_iters = 200;
  double tol_simplex = 1e-9;
  std::size_t k_inner = 64;
  std::size_t outer_paths = 16;
  std::size_t eval_nodes = 10;
  std::size_t sub_paths = 2000;
  double bump_abs = 1e-3;
  double bump_rel = 1e-2;
  std::size_t threads = 1;
  SamplingMeasure measure = SamplingMeasure::deflated;
};

struct ScenarioFlags {
  bool ccond_literal = false;
  bool cdf_std_normalized = false;
  bool strict_simplex = false;
};

struct FdSettings {
  std::size_t nodes = 129;
  double box_factor = 8.0;
  double cfl = 0.9;
};

struct FicheraSettings {
  std::vector<double> x_upper;  // defaults to 2*x0
  std::vector<double> y_upper;  // defaults to 2*y0 (or 1)
  std::size_t samples_per_face = 64;
};

struct ConvergenceSettings {
  std::vector<std::size_t> n_values = {8, 32, 128, 512};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<double> node_times;  // defaults to {T}
  std::size_t reference_k = 4096;
  std::size_t random_deviations = 2;
};

struct ScenarioConfig {
  int schema_version = 1;
  std::size_t n = 1;
  std::size_t N = 1;
  double T = 1.0;
  std::size_t steps = 100;
  double delta = 1.0;
  PopulationLaw c_law = PopulationLaw::point(0.0);
  PopulationLaw v0_law = PopulationLaw::point(1.0);
  std::vector<double> x0;
  std::vector<double> y0;
  std::uint64_t seed = 0;
  YMode y_mode = YMode::endogenous;
  MarketParams market;
  StrategySpec strategy;
  SolverSettings solver;
  ScenarioFlags flags;
  FdSettings fd;
  FicheraSettings fichera;
  ConvergenceSettings convergence;
  double memory_budget_mb = 1024.0;

  // Per-investor values resolved from the laws (list or seeded draws).
  std::vector<double> c() const;
  std::vector<double> v0() const;
  double dt() const { return T / static_cast<double>(steps); }
};

// Draws `count` i.i.d. samples (or copies the list) with a keyed stream.
std::vector<double> sample_population(const PopulationLaw& law, std::size_t count,
                                      std::uint64_t seed, std::uint64_t sub);

// Throws ConfigError naming the first violated structural invariant.
void check_structure(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// Simplex weights

class SimplexWeights {
 public:
  SimplexWeights() = default;
  // strict: raise AdmissibilityError on deviation beyond tol.
  SimplexWeights(std::vector<double> w, double tol, bool strict);

  const std::vector<double>& values() const { return w_; }
  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  double sum() const;
  double min() const;
  bool admissible() const { return admissible_; }

  static bool within_simplex(std::span<const double> w, double tol);

 private:
  std::vector<double> w_;
  bool admissible_ = true;
};

SimplexWeights market_weights(std::span<const double> x);

// ---------------------------------------------------------------------------
// Market coefficient oracle

enum class MeasureDependence { none, mean_invested, full_measure };

// State at which coefficients are evaluated. y carries the mean invested
// capital (Y in the N-player market, Z in the mean-field market) and m the
// mean normalized wealth.
struct MarketState {
  double t = 0.0;
  Vec x;
  Vec y;
  double m = 1.0;
};

struct Coefficients {
  Vec beta;
  Mat sigma;
  Vec gamma;
  Mat tau;

  void resize(std::size_t n);
};

struct Potentials {
  std::function<double(const Vec&)> H;
  std::function<Vec(const Vec&)> grad_H;
  std::function<double(const Vec&)> I;
  std::function<Vec(const Vec&)> grad_I;
};

class MarketCoefficientOracle {
 public:
  virtual ~MarketCoefficientOracle() = default;

  virtual std::size_t dimension() const = 0;
  virtual void evaluate(const MarketState& state, Coefficients& out) const = 0;
  virtual MeasureDependence measure_dependence() const = 0;
  virtual bool time_homogeneous() const { return true; }
  // Coefficients do not depend on (t, x, y, m) at all.
  virtual bool state_independent() const { return false; }
  // sigma is diagonal at every state.
  virtual bool diagonal_sigma() const { return false; }
  virtual std::optional<Potentials> potentials() const { return std::nullopt; }

  // Level covariances a = diag(x) sigma sigma' diag(x) and psi = tau tau'.
  // Overridden by oracles whose drift is singular where these stay finite.
  virtual Mat level_covariance(const MarketState& state) const;
  virtual Mat invested_covariance(const MarketState& state) const;
  // Row sums of the derivative of the auxiliary diffusion matrix,
  // sum_j D_j a_ij followed by sum_q D_q psi_pq, when known in closed form.
  virtual std::optional<Vec> covariance_divergence(const MarketState& state) const;

  virtual std::string name() const = 0;
};

using OraclePtr = std::shared_ptr<const MarketCoefficientOracle>;

class ConstantMarket final : public MarketCoefficientOracle {
 public:
  ConstantMarket(Vec beta, Mat sigma, Vec gamma = Vec(), Mat tau = Mat());

  std::size_t dimension() const override { return static_cast<std::size_t>(beta_.size()); }
  void evaluate(const MarketState& state, Coefficients& out) const override;
  MeasureDependence measure_dependence() const override { return MeasureDependence::none; }
  bool state_independent() const override { return true; }
  bool diagonal_sigma() const override { return diagonal_; }
  std::optional<Potentials> potentials() const override;
  std::optional<Vec> covariance_divergence(const MarketState& state) const override;
  std::string name() const override { return "constant"; }

  const Vec& beta() const { return beta_; }
  const Mat& sigma() const { return sigma_; }

 private:
  Vec beta_;
  Mat sigma_;
  Vec gamma_;
  Mat tau_;
  bool diagonal_ = false;
};

// beta_i = (1+zeta) y_i / (2 mu_i) with mu the market weights, level
// variance a_ii = x_i, gamma = beta, psi_ii = y_i.
class VolatilityStabilizedMarket final : public MarketCoefficientOracle {
 public:
  static constexpr double degeneracy_floor = 1e-12;

  VolatilityStabilizedMarket(std::size_t n, double zeta);

  std::size_t dimension() const override { return n_; }
  void evaluate(const MarketState& state, Coefficients& out) const override;
  MeasureDependence measure_dependence() const override {
    return MeasureDependence::mean_invested;
  }
  bool diagonal_sigma() const override { return true; }
  Mat level_covariance(const MarketState& state) const override;
  Mat invested_covariance(const MarketState& state) const override;
  std::optional<Vec> covariance_divergence(const MarketState& state) const override;
  std::string name() const override { return "volatility_stabilized"; }

  double zeta() const { return zeta_; }

 private:
  std::size_t n_;
  double zeta_;
};

OraclePtr builtin_market(const MarketParams& params, std::size_t n);

double condition_number(const Mat& m);
// True when the 2-norm condition number of sigma stays below threshold.
bool well_conditioned(const Mat& sigma, double threshold = 1e12);

// ---------------------------------------------------------------------------
// Validation

struct CheckVerdict {
  std::string name;
  bool hard = false;
  bool passed = true;
  double value = 0.0;
  std::string message;
};

struct ValidationReport {
  bool feasible = true;
  std::vector<CheckVerdict> checks;
  std::vector<std::string> messages;

  bool operator==(const ValidationReport& other) const;
};

// Hard check: (1-delta) (1/N) sum exp(c_l)/v_l < 1 (literal form drops 1/N).
double preference_sum(const ScenarioConfig& config);
ValidationReport validate_scenario(const ScenarioConfig& config);

}  // namespace relarb
