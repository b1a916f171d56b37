#include "relarb/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "relarb/error.hpp"
#include "relarb/rng.hpp"

namespace relarb {

namespace {

constexpr std::uint64_t kPreferenceTag = 1;
constexpr std::uint64_t kWealthTag = 2;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// PopulationLaw

PopulationLaw PopulationLaw::list(std::vector<double> v) {
  PopulationLaw law;
  law.kind = Kind::list;
  law.values = std::move(v);
  return law;
}

PopulationLaw PopulationLaw::point(double v) {
  PopulationLaw law;
  law.kind = Kind::point;
  law.a = v;
  return law;
}

PopulationLaw PopulationLaw::uniform(double low, double high) {
  PopulationLaw law;
  law.kind = Kind::uniform;
  law.a = low;
  law.b = high;
  return law;
}

PopulationLaw PopulationLaw::normal(double mean, double sd) {
  PopulationLaw law;
  law.kind = Kind::normal;
  law.a = mean;
  law.b = sd;
  return law;
}

PopulationLaw PopulationLaw::lognormal(double log_mean, double log_sd) {
  PopulationLaw law;
  law.kind = Kind::lognormal;
  law.a = log_mean;
  law.b = log_sd;
  return law;
}

double PopulationLaw::mean() const {
  switch (kind) {
    case Kind::list:
      return values.empty() ? 0.0
                            : std::accumulate(values.begin(), values.end(), 0.0) /
                                  static_cast<double>(values.size());
    case Kind::point:
      return a;
    case Kind::uniform:
      return 0.5 * (a + b);
    case Kind::normal:
      return a;
    case Kind::lognormal:
      return std::exp(a + 0.5 * b * b);
  }
  return 0.0;
}

std::string PopulationLaw::kind_name() const {
  switch (kind) {
    case Kind::list:
      return "list";
    case Kind::point:
      return "point";
    case Kind::uniform:
      return "uniform";
    case Kind::normal:
      return "normal";
    case Kind::lognormal:
      return "lognormal";
  }
  return "unknown";
}

std::vector<double> sample_population(const PopulationLaw& law, std::size_t count,
                                      std::uint64_t seed, std::uint64_t sub) {
  std::vector<double> out(count);
  if (law.kind == PopulationLaw::Kind::list) {
    if (law.values.size() != count)
      throw ConfigError("explicit population list has " + std::to_string(law.values.size()) +
                        " entries, expected " + std::to_string(count));
    return law.values;
  }
  for (std::size_t i = 0; i < count; ++i) {
    switch (law.kind) {
      case PopulationLaw::Kind::point:
        out[i] = law.a;
        break;
      case PopulationLaw::Kind::uniform: {
        PathRng rng({seed, i, StreamPurpose::population, sub});
        out[i] = law.a + (law.b - law.a) * rng.uniform();
        break;
      }
      case PopulationLaw::Kind::normal: {
        PathRng rng({seed, i, StreamPurpose::population, sub});
        out[i] = law.a + law.b * rng.normal();
        break;
      }
      case PopulationLaw::Kind::lognormal: {
        PathRng rng({seed, i, StreamPurpose::population, sub});
        out[i] = std::exp(law.a + law.b * rng.normal());
        break;
      }
      case PopulationLaw::Kind::list:
        break;
    }
  }
  return out;
}

std::vector<double> ScenarioConfig::c() const {
  return sample_population(c_law, N, seed, kPreferenceTag);
}

std::vector<double> ScenarioConfig::v0() const {
  return sample_population(v0_law, N, seed, kWealthTag);
}

void check_structure(const ScenarioConfig& cfg) {
  if (cfg.schema_version != 1)
    throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
  if (cfg.n < 1) throw ConfigError("n must be at least 1");
  if (cfg.N < 1) throw ConfigError("N must be at least 1");
  if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) throw ConfigError("horizon T must be positive");
  if (cfg.steps < 1) throw ConfigError("steps must be at least 1");
  if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0))
    throw ConfigError("delta must lie in [0,1], got " + fmt(cfg.delta));
  if (cfg.x0.size() != cfg.n)
    throw ConfigError("x0 has " + std::to_string(cfg.x0.size()) + " entries, expected n=" +
                      std::to_string(cfg.n));
  for (double x : cfg.x0)
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("initial stock prices must be positive");
  if (!cfg.y0.empty()) {
    if (cfg.y0.size() != cfg.n) throw ConfigError("y0 must have n entries");
    for (double y : cfg.y0)
      if (!(y >= 0.0) || !std::isfinite(y))
        throw ConfigError("initial invested capital must be nonnegative");
  }
  if (cfg.y_mode == YMode::exogenous && cfg.y0.empty())
    throw ConfigError("exogenous Y mode requires y0");
  const auto v = cfg.v0();
  for (double w : v)
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("initial wealths must be positive");
  const auto c = cfg.c();
  if (!all_finite(c)) throw ConfigError("preference levels must be finite");
  if (cfg.c_law.kind == PopulationLaw::Kind::uniform && cfg.c_law.b < cfg.c_law.a)
    throw ConfigError("uniform law requires low <= high");
  if ((cfg.c_law.kind == PopulationLaw::Kind::normal || cfg.c_law.kind == PopulationLaw::Kind::lognormal) &&
      cfg.c_law.b < 0.0)
    throw ConfigError("law spread must be nonnegative");
  if (cfg.v0_law.kind == PopulationLaw::Kind::normal)
    throw ConfigError("initial wealth law must be positive (use lognormal, uniform or point)");

  const auto& mk = cfg.market;
  if (mk.kind == MarketKind::constant) {
    if (static_cast<std::size_t>(mk.beta.size()) != cfg.n) throw ConfigError("market.beta must have n entries");
    if (static_cast<std::size_t>(mk.sigma.rows()) != cfg.n || static_cast<std::size_t>(mk.sigma.cols()) != cfg.n)
      throw ConfigError("market.sigma must be n x n");
    if (mk.gamma.size() != 0 && static_cast<std::size_t>(mk.gamma.size()) != cfg.n)
      throw ConfigError("market.gamma must have n entries");
    if (mk.tau.size() != 0 && (static_cast<std::size_t>(mk.tau.rows()) != cfg.n ||
                               static_cast<std::size_t>(mk.tau.cols()) != cfg.n))
      throw ConfigError("market.tau must be n x n");
  } else if (!(mk.zeta >= 0.0)) {
    throw ConfigError("market.zeta must be nonnegative");
  }
  if (cfg.strategy.kind == StrategyKind::fixed && cfg.strategy.weights.size() != cfg.n)
    throw ConfigError("fixed strategy weights must have n entries");

  const auto& s = cfg.solver;
  if (!(s.damping > 0.0 && s.damping <= 1.0)) throw ConfigError("solver.damping must lie in (0,1]");
  if (!(s.tol > 0.0)) throw ConfigError("solver.tol must be positive");
  if (s.paths < 1) throw ConfigError("solver.paths must be positive");
  if (s.eval_nodes < 1) throw ConfigError("solver.eval_nodes must be positive");
  if (s.sub_paths < 2) throw ConfigError("solver.sub_paths must be at least 2");
  if (s.k_inner < 2) throw ConfigError("solver.k_inner must be at least 2");
  if (s.outer_paths < 1) throw ConfigError("solver.outer_paths must be positive");
  if (s.threads < 1) throw ConfigError("solver.threads must be positive");

  // One recorded path: X, Y (n each), V (N), increments (n), strategies (N n).
  const double bytes = 8.0 * static_cast<double>(cfg.steps + 1) *
                       static_cast<double>(3 * cfg.n + cfg.N + cfg.N * cfg.n);
  if (bytes > cfg.memory_budget_mb * 1024.0 * 1024.0)
    throw ConfigError("steps*n*N exceeds the memory budget of " + fmt(cfg.memory_budget_mb) + " MB");
}

// ---------------------------------------------------------------------------
// Simplex weights

SimplexWeights::SimplexWeights(std::vector<double> w, double tol, bool strict) : w_(std::move(w)) {
  admissible_ = within_simplex(w_, tol);
  if (strict && !admissible_) {
    std::ostringstream os;
    os << "strategy outside the simplex (sum " << sum() << ", min " << min() << ")";
    throw AdmissibilityError(os.str());
  }
}

double SimplexWeights::sum() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

double SimplexWeights::min() const {
  return w_.empty() ? 0.0 : *std::min_element(w_.begin(), w_.end());
}

bool SimplexWeights::within_simplex(std::span<const double> w, double tol) {
  double s = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < -tol) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

SimplexWeights market_weights(std::span<const double> x) {
  if (x.empty()) throw DomainError("market_weights: empty price vector");
  double total = 0.0;
  for (double xi : x) {
    if (!(xi > 0.0) || !std::isfinite(xi))
      throw DomainError("market_weights: prices must be strictly positive");
    total += xi;
  }
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = x[i] / total;
  return SimplexWeights(std::move(w), 1e-12, false);
}

// ---------------------------------------------------------------------------
// Oracles

void Coefficients::resize(std::size_t n) {
  const auto k = static_cast<Eigen::Index>(n);
  if (beta.size() != k) beta.setZero(k);
  if (sigma.rows() != k || sigma.cols() != k) sigma.setZero(k, k);
  if (gamma.size() != k) gamma.setZero(k);
  if (tau.rows() != k || tau.cols() != k) tau.setZero(k, k);
}

Mat MarketCoefficientOracle::level_covariance(const MarketState& state) const {
  Coefficients c;
  c.resize(dimension());
  evaluate(state, c);
  const Mat alpha = c.sigma * c.sigma.transpose();
  return state.x.asDiagonal() * alpha * state.x.asDiagonal();
}

Mat MarketCoefficientOracle::invested_covariance(const MarketState& state) const {
  Coefficients c;
  c.resize(dimension());
  evaluate(state, c);
  return c.tau * c.tau.transpose();
}

std::optional<Vec> MarketCoefficientOracle::covariance_divergence(const MarketState&) const {
  return std::nullopt;
}

ConstantMarket::ConstantMarket(Vec beta, Mat sigma, Vec gamma, Mat tau)
    : beta_(std::move(beta)), sigma_(std::move(sigma)), gamma_(std::move(gamma)), tau_(std::move(tau)) {
  const auto n = beta_.size();
  if (n < 1) throw DomainError("constant market needs at least one stock");
  if (sigma_.rows() != n || sigma_.cols() != n) throw DomainError("constant market: sigma must be n x n");
  if (gamma_.size() == 0) gamma_ = Vec::Zero(n);
  if (tau_.size() == 0) tau_ = Mat::Zero(n, n);
  if (gamma_.size() != n || tau_.rows() != n || tau_.cols() != n)
    throw DomainError("constant market: gamma/tau shape mismatch");
  if (!well_conditioned(sigma_)) throw DomainError("constant market: sigma is singular");
  diagonal_ = sigma_.isDiagonal(0.0);
}

void ConstantMarket::evaluate(const MarketState&, Coefficients& out) const {
  out.beta = beta_;
  out.sigma = sigma_;
  out.gamma = gamma_;
  out.tau = tau_;
}

std::optional<Potentials> ConstantMarket::potentials() const {
  const Mat alpha = sigma_ * sigma_.transpose();
  const Vec h = alpha.ldlt().solve(beta_);
  Potentials p;
  p.H = [h](const Vec& x) { return (h.array() * x.array().log()).sum(); };
  p.grad_H = [h](const Vec& x) -> Vec { return h.array() / x.array(); };
  Vec g = Vec::Zero(gamma_.size());
  if (!gamma_.isZero(0.0)) {
    const Mat psi = tau_ * tau_.transpose();
    Eigen::FullPivLU<Mat> lu(psi);
    if (!lu.isInvertible()) return std::nullopt;
    g = lu.solve(gamma_);
  }
  p.I = [g](const Vec& y) { return g.dot(y); };
  p.grad_I = [g](const Vec&) -> Vec { return g; };
  return p;
}

std::optional<Vec> ConstantMarket::covariance_divergence(const MarketState& state) const {
  const auto n = beta_.size();
  const Mat alpha = sigma_ * sigma_.transpose();
  Vec div = Vec::Zero(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) div(i) = state.x(i) * (alpha.row(i).sum() + alpha(i, i));
  return div;
}

VolatilityStabilizedMarket::VolatilityStabilizedMarket(std::size_t n, double zeta) : n_(n), zeta_(zeta) {
  if (n < 1) throw DomainError("volatility-stabilized market needs at least one stock");
  if (!(zeta >= 0.0)) throw DomainError("volatility-stabilized market: zeta must be nonnegative");
}

void VolatilityStabilizedMarket::evaluate(const MarketState& s, Coefficients& out) const {
  const auto n = static_cast<Eigen::Index>(n_);
  out.resize(n_);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(s.x(i) > 0.0)) throw SingularityError("volatility-stabilized market queried at m_i = 0");
    total += s.x(i);
  }
  out.sigma.setZero();
  out.tau.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = std::max(s.x(i) / total, degeneracy_floor);
    const double z = std::max(s.y(i), degeneracy_floor);
    out.beta(i) = (1.0 + zeta_) * z / (2.0 * mu);
    out.sigma(i, i) = 1.0 / std::sqrt(s.x(i));
    out.gamma(i) = out.beta(i);
    out.tau(i, i) = std::sqrt(z);
  }
}

Mat VolatilityStabilizedMarket::level_covariance(const MarketState& s) const {
  return s.x.asDiagonal();
}

Mat VolatilityStabilizedMarket::invested_covariance(const MarketState& s) const {
  return s.y.cwiseMax(0.0).asDiagonal();
}

std::optional<Vec> VolatilityStabilizedMarket::covariance_divergence(const MarketState&) const {
  return Vec::Ones(static_cast<Eigen::Index>(2 * n_));
}

OraclePtr builtin_market(const MarketParams& params, std::size_t n) {
  if (params.kind == MarketKind::volatility_stabilized)
    return std::make_shared<VolatilityStabilizedMarket>(n, params.zeta);
  if (static_cast<std::size_t>(params.beta.size()) != n)
    throw DomainError("constant market: beta must have n entries");
  return std::make_shared<ConstantMarket>(params.beta, params.sigma, params.gamma, params.tau);
}

double condition_number(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return std::numeric_limits<double>::infinity();
  const double lo = sv(sv.size() - 1);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return sv(0) / lo;
}

bool well_conditioned(const Mat& sigma, double threshold) {
  if (!sigma.allFinite()) return false;
  return condition_number(sigma) < threshold;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::operator==(const ValidationReport& o) const {
  if (feasible != o.feasible || messages != o.messages || checks.size() != o.checks.size()) return false;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto& a = checks[i];
    const auto& b = o.checks[i];
    if (a.name != b.name || a.hard != b.hard || a.passed != b.passed || a.message != b.message) return false;
    if (!(a.value == b.value || (std::isnan(a.value) && std::isnan(b.value)))) return false;
  }
  return true;
}

double preference_sum(const ScenarioConfig& cfg) {
  const auto c = cfg.c();
  const auto v = cfg.v0();
  double s = 0.0;
  for (std::size_t l = 0; l < cfg.N; ++l) s += std::exp(c[l]) / v[l];
  if (!cfg.flags.ccond_literal) s /= static_cast<double>(cfg.N);
  return (1.0 - cfg.delta) * s;
}

namespace {

std::vector<double> initial_weights(const ScenarioConfig& cfg) {
  switch (cfg.strategy.kind) {
    case StrategyKind::market:
      return market_weights(cfg.x0).values();
    case StrategyKind::equal_weight:
      return std::vector<double>(cfg.n, 1.0 / static_cast<double>(cfg.n));
    case StrategyKind::fixed:
      return cfg.strategy.weights;
  }
  return {};
}

}  // namespace

ValidationReport validate_scenario(const ScenarioConfig& cfg) {
  check_structure(cfg);
  ValidationReport rep;
  const auto c = cfg.c();
  const auto v = cfg.v0();

  {
    CheckVerdict chk;
    chk.name = "preference_condition";
    chk.hard = true;
    chk.value = preference_sum(cfg);
    chk.passed = chk.value < 1.0;
    const std::string form = cfg.flags.ccond_literal ? "(1-delta) sum_l exp(c_l)/v_l"
                                                     : "(1-delta) (1/N) sum_l exp(c_l)/v_l";
    chk.message = "preference condition " + form + " < 1: value " + fmt(chk.value) +
                  (chk.passed ? " (satisfied)" : " (violated)");
    rep.checks.push_back(chk);
  }

  const double x_total = std::accumulate(cfg.x0.begin(), cfg.x0.end(), 0.0);
  {
    CheckVerdict chk;
    chk.name = "no_arbitrage_advisory";
    const double bound = std::log(cfg.delta * x_total + 1.0 - cfg.delta);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < cfg.N; ++l) worst = std::min(worst, c[l] - (std::log(v[l]) - bound));
    chk.value = worst;
    chk.passed = worst >= 0.0;
    chk.message = std::string("c_l >= log v_l - log(delta v + 1 - delta) with v read as the total initial "
                              "capitalization X(0) = ") +
                  fmt(x_total) +
                  (chk.passed ? ": martingale regime, no arbitrage relative to market and peers"
                              : ": relative arbitrage not excluded by the preference levels");
    rep.checks.push_back(chk);
  }

  {
    CheckVerdict chk;
    chk.name = "diversity";
    const auto w = market_weights(cfg.x0);
    chk.value = *std::max_element(w.values().begin(), w.values().end());
    chk.passed = chk.value < 1.0;
    chk.message = "max initial market weight " + fmt(chk.value);
    rep.checks.push_back(chk);
  }

  {
    CheckVerdict chk;
    chk.name = "nondegeneracy";
    const auto oracle = builtin_market(cfg.market, cfg.n);
    MarketState st;
    st.x = Eigen::Map<const Vec>(cfg.x0.data(), static_cast<Eigen::Index>(cfg.n));
    if (cfg.y_mode == YMode::exogenous) {
      st.y = Eigen::Map<const Vec>(cfg.y0.data(), static_cast<Eigen::Index>(cfg.n));
    } else {
      const auto w = initial_weights(cfg);
      const double mean_v = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(cfg.N);
      st.y = Vec(static_cast<Eigen::Index>(cfg.n));
      for (std::size_t i = 0; i < cfg.n; ++i) st.y(static_cast<Eigen::Index>(i)) = mean_v * w[i];
    }
    st.m = 1.0;
    Coefficients coef;
    coef.resize(cfg.n);
    oracle->evaluate(st, coef);
    const Mat alpha = coef.sigma * coef.sigma.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(alpha);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    chk.value = lo;
    chk.passed = lo > 0.0 && well_conditioned(coef.sigma);
    chk.message = "eigenvalues of alpha at the initial state in [" + fmt(lo) + ", " + fmt(hi) +
                  "], condition number of sigma " + fmt(condition_number(coef.sigma));
    rep.checks.push_back(chk);
  }

  for (const auto& chk : rep.checks) {
    if (chk.hard && !chk.passed) rep.feasible = false;
    rep.messages.push_back(chk.message);
  }
  return rep;
}

}  // namespace relarb
