#include "relarb/nash.hpp"

#include <algorithm>
#include <cmath>

#include "relarb/error.hpp"
#include "relarb/parallel.hpp"

namespace relarb {

double phi_map(double m, double market_total, const std::vector<double>& u, const ScenarioConfig& cfg) {
  (void)m;  // enters only through u
  const auto c = cfg.c();
  const auto v = cfg.v0();
  if (u.size() != cfg.N) throw DomainError("phi_map: one value per investor required");
  double S = 0.0;
  for (std::size_t l = 0; l < cfg.N; ++l) S += std::exp(c[l]) * u[l] / v[l];
  const double denom = static_cast<double>(cfg.N) - (1.0 - cfg.delta) * S;
  if (!(denom > 0.0))
    throw InfeasibleError("preference condition violated: N - (1-delta) sum exp(c_l) u_l / v_l = " +
                          std::to_string(denom) + " is not positive");
  return cfg.delta * market_total * S / denom;
}

ContractionBound contraction_region(const std::vector<double>& u, const std::vector<double>& du_dm,
                                    const ScenarioConfig& cfg) {
  if (u.size() != cfg.N || du_dm.size() != cfg.N) throw DomainError("contraction_region: one value per investor");
  const auto c = cfg.c();
  const auto v = cfg.v0();
  double S = 0.0, Sd = 0.0;
  for (std::size_t l = 0; l < cfg.N; ++l) {
    S += std::exp(c[l]) * u[l] / v[l];
    Sd += std::exp(c[l]) * du_dm[l] / v[l];
  }
  ContractionBound b;
  b.A = static_cast<double>(cfg.N) - (1.0 - cfg.delta) * S;
  b.D = static_cast<double>(cfg.N) * cfg.delta * std::abs(Sd);
  b.K_upper = b.D > 0.0 ? b.A * b.A / b.D : std::numeric_limits<double>::infinity();
  return b;
}

MarketWeightStats market_weight_stats(const MarketCoefficientOracle& oracle, const Vec& x, const Vec& y, double m) {
  MarketState st;
  st.x = x;
  st.y = y;
  st.m = m;
  Coefficients coef;
  coef.resize(oracle.dimension());
  oracle.evaluate(st, coef);
  const Vec mu = x / x.sum();
  MarketWeightStats s;
  s.x = x.sum();
  s.drift = mu.dot(coef.beta);
  s.variance = (coef.sigma.transpose() * mu).squaredNorm();
  return s;
}

UniquenessProbability uniqueness_probability(const MarketWeightStats& s, double K, double t, bool std_normalized) {
  UniquenessProbability p;
  p.std_normalized = std_normalized;
  if (std::isinf(K)) {
    p.probability = 1.0;
    return p;
  }
  if (!(K > 0.0)) {
    p.probability = 0.0;
    p.cdf_argument = -std::numeric_limits<double>::infinity();
    return p;
  }
  const double var_t = s.variance * t;
  const double num = std::log(K / s.x) - (s.drift - 0.5 * s.variance) * t;
  const double den = std_normalized ? std::sqrt(var_t) : var_t;
  if (!(den > 0.0)) {
    p.cdf_argument = num >= 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    p.probability = num >= 0.0 ? 1.0 : 0.0;
    return p;
  }
  p.cdf_argument = num / den;
  p.probability = normal_cdf(p.cdf_argument);
  return p;
}

void attach_empirical(UniquenessProbability& p, const Mat& totals, double K) {
  const auto P = totals.rows();
  p.paths = static_cast<std::size_t>(P);
  if (P == 0 || totals.cols() == 0) return;
  std::vector<double> in(static_cast<std::size_t>(P)), stay(static_cast<std::size_t>(P));
  for (Eigen::Index r = 0; r < P; ++r) {
    in[static_cast<std::size_t>(r)] = totals(r, totals.cols() - 1) < K ? 1.0 : 0.0;
    stay[static_cast<std::size_t>(r)] = (totals.row(r).array() < K).all() ? 1.0 : 0.0;
  }
  const SampleStats a = sample_stats(in);
  p.empirical_in_K = a.mean;
  p.empirical_in_K_se = a.std_err;
  p.empirical_stay = sample_stats(stay).mean;
}

// ---------------------------------------------------------------------------

NashProblem::NashProblem(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, std::uint64_t seed)
    : oracle_(oracle), config_(cfg), seed_(seed) {
  check_structure(config_);
  strategy_ = make_strategy(config_.strategy, config_.n);
  setup_ = make_setup(oracle_, *strategy_, config_);
  reference_ = simulate_n_particle(oracle_, config_, *strategy_, seed_, 0);
  const std::size_t J = std::max<std::size_t>(1, std::min(config_.solver.eval_nodes, config_.steps));
  for (std::size_t j = 0; j < J; ++j) node_steps_.push_back(j * config_.steps / J);
  c_ = config_.c();
}

double NashProblem::node_time(std::size_t j) const { return reference_.grid[node_steps_[j]]; }

double NashProblem::market_total(std::size_t j) const {
  return reference_.X.row(static_cast<Eigen::Index>(node_steps_[j])).sum();
}

double NashProblem::reference_m(std::size_t j) const { return reference_.peer_average(node_steps_[j]); }

InitialState NashProblem::node_state(std::size_t j, double m) const {
  if (!(m > 0.0)) throw DomainError("peer average must be positive");
  const std::size_t k = node_steps_[j];
  const auto r = static_cast<Eigen::Index>(k);
  InitialState s;
  s.t0 = reference_.grid[k];
  s.step0 = k;
  s.steps = config_.steps - k;
  s.dt = config_.dt();
  s.x = reference_.X.row(r).transpose();
  s.y = reference_.Y.row(r).transpose();
  const double scale = m / reference_m(j);
  s.wealth.resize(config_.N);
  for (std::size_t l = 0; l < config_.N; ++l) s.wealth[l] = reference_.V(r, static_cast<Eigen::Index>(l)) * scale;
  return s;
}

McOptions NashProblem::options(std::size_t j) const {
  McOptions o;
  o.paths = config_.solver.sub_paths;
  o.seed = seed_;
  o.threads = config_.solver.threads;
  o.purpose = StreamPurpose::nash_node;
  o.sub = j;
  return o;
}

SampleStats NashProblem::u_normalized(std::size_t j, double m) const { return sample_stats(value_samples(j, m)); }

std::vector<double> NashProblem::value_samples(std::size_t j, double m) const {
  return deflated_benchmark_samples(setup_, node_state(j, m), options(j));
}

double NashProblem::phi(std::size_t j, double m) const {
  const double u = u_normalized(j, m).mean;
  return phi_map(m, market_total(j), std::vector<double>(config_.N, u), config_);
}

GradientBlock NashProblem::gradient(std::size_t j, double m) const {
  BumpSpec bump;
  bump.h_abs = config_.solver.bump_abs;
  bump.h_rel = config_.solver.bump_rel;
  return grad_log_u(setup_, node_state(j, m), bump, options(j));
}

// ---------------------------------------------------------------------------

EquilibriumStrategy equilibrium_strategies(const StrategyState& st, const GradientBlock& g, const ScenarioConfig& cfg,
                                           bool renormalize) {
  const auto n = st.x.size();
  if (!(cfg.delta > 0.0)) throw DomainError("equilibrium strategies need delta > 0");
  if (g.dx.size() != n) throw DomainError("gradient dimension mismatch");
  if (!(st.u_normalized > 0.0)) throw DomainError("equilibrium strategies need a positive value");
  EquilibriumStrategy out;
  const double X = st.x.sum();
  const double logu = std::log(st.u_normalized);
  const double factor = 1.0 + (1.0 - cfg.delta) * st.m / (cfg.delta * X);
  const double cross = (1.0 - cfg.delta) * st.m / (cfg.delta * X * X);

  Vec dv = g.dx * factor - Vec::Constant(n, cross * logu);
  Vec dv_se(n);
  const double logu_se = st.u_se / st.u_normalized;
  for (Eigen::Index i = 0; i < n; ++i) dv_se(i) = std::hypot(g.dx_se(i) * factor, cross * logu_se);

  const Vec mu = st.x / X;
  out.weights = mu + st.x.cwiseProduct(dv);
  out.std_err = st.x.cwiseProduct(dv_se);

  if (g.y_available && g.dy.size() == n && !g.dy.isZero(0.0)) {
    Eigen::PartialPivLU<Mat> lu(st.coef.sigma);
    if (!(lu.rcond() > 1e-12)) throw SingularityError("sigma is singular at the strategy node");
    // (tau sigma^-1)' = sigma^-T tau'
    const Mat ts = lu.solve(Mat::Identity(n, n)).transpose() * st.coef.tau.transpose();
    const Vec dy = g.dy * factor;
    out.weights += ts * dy;
    const Vec dy_se = g.dy_se * factor;
    for (Eigen::Index i = 0; i < n; ++i) {
      double var = out.std_err(i) * out.std_err(i);
      for (Eigen::Index p = 0; p < n; ++p) var += ts(i, p) * ts(i, p) * dy_se(p) * dy_se(p);
      out.std_err(i) = std::sqrt(var);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (g.one_sided_x.size() == static_cast<std::size_t>(n) && g.one_sided_x[static_cast<std::size_t>(i)])
      out.warnings.push_back("one-sided gradient in coordinate " + std::to_string(i));

  if (renormalize) {
    // Market weights already sum to one; centre the remaining component.
    const Vec extra = out.weights - mu;
    const double shift = extra.sum() / static_cast<double>(n);
    if (shift != 0.0) {
      out.weights = mu + (extra.array() - shift).matrix();
      out.warnings.push_back("non-market component centred to restore unit sum");
    }
  }
  out.diagnostics.sum = out.weights.sum();
  out.diagnostics.min = out.weights.minCoeff();
  out.diagnostics.in_simplex =
      SimplexWeights::within_simplex(std::span<const double>(out.weights.data(), out.weights.size()),
                                     cfg.solver.tol_simplex);
  return out;
}

NashOptions nash_options(const ScenarioConfig& cfg) {
  NashOptions o;
  o.damping = cfg.solver.damping;
  o.tol = cfg.solver.tol;
  o.max_iters = cfg.solver.max_iters;
  return o;
}

namespace {

StrategyState node_strategy_state(const MarketCoefficientOracle& oracle, const NashProblem& prob, std::size_t j,
                                  double m, const SampleStats& u) {
  const InitialState init = prob.node_state(j, m);
  StrategyState st;
  st.x = init.x;
  st.m = m;
  st.u_normalized = u.mean;
  st.u_se = u.std_err;
  MarketState ms;
  ms.t = init.t0;
  ms.x = init.x;
  ms.m = m;
  if (prob.config().y_mode == YMode::exogenous) {
    ms.y = init.y;
  } else {
    ms.y = Vec::Zero(init.x.size());
    const auto strategy = make_strategy(prob.config().strategy, prob.config().n);
    Mat Pi(static_cast<Eigen::Index>(init.wealth.size()), init.x.size());
    StrategyContext ctx;
    ctx.step = init.step0;
    ctx.t = init.t0;
    ctx.x = &init.x;
    ctx.wealth = init.wealth;
    const auto v = prob.config().v0();
    ctx.v_ref = v;
    strategy->weights(ctx, Pi);
    for (std::size_t l = 0; l < init.wealth.size(); ++l)
      ms.y += init.wealth[l] * Pi.row(static_cast<Eigen::Index>(l)).transpose();
    ms.y /= static_cast<double>(init.wealth.size());
  }
  st.coef.resize(oracle.dimension());
  oracle.evaluate(ms, st.coef);
  return st;
}

}  // namespace

EquilibriumResult solve_nash(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, const NashOptions& opt,
                             std::uint64_t seed) {
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
  const NashProblem prob(oracle, cfg, seed);
  const std::size_t J = prob.nodes();
  EquilibriumResult res;
  for (std::size_t j = 0; j < J; ++j) {
    res.node_steps.push_back(prob.node_step(j));
    res.node_times.push_back(prob.node_time(j));
    res.market_total.push_back(prob.market_total(j));
    res.m_initial.push_back(prob.reference_m(j));
  }

  std::vector<double> m = res.m_initial, phi(J);
  for (std::size_t it = 0;; ++it) {
    for (std::size_t j = 0; j < J; ++j) phi[j] = prob.phi(j, m[j]);
    double resid = 0.0, scale = 1.0;
    for (std::size_t j = 0; j < J; ++j) {
      resid = std::max(resid, std::abs(phi[j] - m[j]));
      scale = std::max(scale, std::abs(m[j]));
    }
    res.residual = resid;
    res.residual_trace.push_back(resid);
    if (resid <= opt.tol * scale) {
      res.converged = true;
      break;
    }
    if (it == opt.max_iters) break;
    // The first sweep is undamped so m-independent maps settle at once.
    const double w = it == 0 ? 1.0 : opt.damping;
    for (std::size_t j = 0; j < J; ++j) {
      m[j] = (1.0 - w) * m[j] + w * phi[j];
      if (!(m[j] > 0.0)) throw InfeasibleError("peer average left the positive half-line during iteration");
    }
    res.iterations = it + 1;
  }
  if (!res.converged) res.warnings.push_back("fixed-point iteration hit max_iters");
  res.m_path = m;

  // Independent re-evaluation of the map at the returned path.
  {
    const NashProblem check(oracle, cfg, seed);
    double r = 0.0;
    for (std::size_t j = 0; j < J; ++j) r = std::max(r, std::abs(check.phi(j, m[j]) - m[j]));
    res.certificate_residual = r;
  }

  const auto c = cfg.c();
  res.strategies.assign(cfg.N, {});
  for (std::size_t j = 0; j < J; ++j) {
    const SampleStats u = prob.u_normalized(j, m[j]);
    res.u_node.push_back(u.mean);
    res.u_node_se.push_back(u.std_err);
    const GradientBlock g = prob.gradient(j, m[j]);
    const ContractionBound b = contraction_region(std::vector<double>(cfg.N, u.mean),
                                                  std::vector<double>(cfg.N, g.du_dm), cfg);
    res.A_path.push_back(b.A);
    res.D_path.push_back(b.D);
    res.K_upper.push_back(b.K_upper);
    if (opt.strategies) {
      if (cfg.delta > 0.0) {
        const StrategyState st = node_strategy_state(oracle, prob, j, m[j], u);
        const EquilibriumStrategy es = equilibrium_strategies(st, g, cfg, opt.renormalize);
        for (std::size_t l = 0; l < cfg.N; ++l) res.strategies[l].push_back(es.weights);
        res.strategy_se.push_back(es.std_err);
        res.strategy_diagnostics.push_back(es.diagnostics);
        for (const auto& w : es.warnings) res.warnings.push_back("node " + std::to_string(j) + ": " + w);
      } else if (j == 0) {
        res.warnings.push_back("strategy formula undefined for delta = 0");
      }
    }
  }
  for (std::size_t l = 0; l < cfg.N; ++l) {
    res.u_per_investor.push_back(std::exp(c[l]) * res.u_node[0]);
    res.u_per_investor_se.push_back(std::exp(c[l]) * res.u_node_se[0]);
  }

  // Exit statistics of X^N from K over independent outer paths.
  const std::size_t P = std::max<std::size_t>(1, cfg.solver.outer_paths);
  const auto strategy = make_strategy(cfg.strategy, cfg.n);
  EngineSetup setup = make_setup(oracle, *strategy, cfg);
  setup.deflate = false;
  setup.measure = SamplingMeasure::physical;
  const InitialState init = initial_state(cfg);
  Mat totals(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(cfg.steps + 1));
  parallel_for(P, cfg.solver.threads, [&](std::size_t p) {
    ParticlePathSet rec;
    run_path(setup, init, {seed, p, StreamPurpose::market_noise, 0}, &rec, nullptr);
    totals.row(static_cast<Eigen::Index>(p)) = rec.X.rowwise().sum().transpose();
  });
  std::vector<double> exit_time(P, cfg.T), stay(P, 1.0);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t j = 0; j < J; ++j) {
      if (totals(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(res.node_steps[j])) >= res.K_upper[j]) {
        exit_time[p] = res.node_times[j];
        stay[p] = 0.0;
        break;
      }
    }
  }
  res.tau_K_mean = sample_stats(exit_time).mean;
  res.tau_K_stay_fraction = sample_stats(stay).mean;
  res.tau_K_paths = P;

  const double K = *std::min_element(res.K_upper.begin(), res.K_upper.end());
  const Vec x0 = Eigen::Map<const Vec>(cfg.x0.data(), static_cast<Eigen::Index>(cfg.n));
  const MarketWeightStats ms = market_weight_stats(oracle, x0, initial_invested(cfg, *strategy), 1.0);
  res.uniqueness = uniqueness_probability(ms, K, cfg.T, cfg.flags.cdf_std_normalized);
  attach_empirical(res.uniqueness, totals, K);
  return res;
}

EquilibriumResult solve_nash(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, std::uint64_t seed) {
  return solve_nash(oracle, cfg, nash_options(cfg), seed);
}

}  // namespace relarb
