#include "relarb/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "relarb/error.hpp"

namespace relarb {

namespace {

constexpr std::uint64_t kPreferenceTag = 1;
constexpr std::uint64_t kWealthTag = 2;
constexpr double kDeflatorRcond = 1e-12;

bool finite(const Vec& v) { return v.allFinite(); }

// A frozen stock (zero volatility and zero drift) carries no price of risk.
double diagonal_price(double beta, double sigma, std::size_t step) {
  if (sigma != 0.0) return beta / sigma;
  if (beta == 0.0) return 0.0;
  throw DeflatorError("drift without volatility", step);
}

}  // namespace

double ParticlePathSet::peer_average(std::size_t k) const {
  const auto row = static_cast<Eigen::Index>(k);
  double s = 0.0;
  for (std::size_t l = 0; l < v_ref.size(); ++l) s += V(row, static_cast<Eigen::Index>(l)) / v_ref[l];
  return s / static_cast<double>(v_ref.size());
}

double PathOutcome::deflated_benchmark_ratio() const {
  if (absorbed) return 0.0;
  return bench_T * std::exp(log_L_T + log_survival) / bench_0;
}

InitialState initial_state(const ScenarioConfig& cfg) {
  InitialState s;
  s.t0 = 0.0;
  s.step0 = 0;
  s.steps = cfg.steps;
  s.dt = cfg.dt();
  s.x = Eigen::Map<const Vec>(cfg.x0.data(), static_cast<Eigen::Index>(cfg.n));
  s.wealth = cfg.v0();
  if (cfg.y0.size() == cfg.n)
    s.y = Eigen::Map<const Vec>(cfg.y0.data(), static_cast<Eigen::Index>(cfg.n));
  else
    s.y = Vec::Zero(static_cast<Eigen::Index>(cfg.n));
  return s;
}

EngineSetup make_setup(const MarketCoefficientOracle& oracle, const StrategyRule& strategy,
                       const ScenarioConfig& cfg) {
  EngineSetup s;
  s.oracle = &oracle;
  s.strategy = &strategy;
  s.v_ref = cfg.v0();
  s.delta = cfg.delta;
  s.y_mode = cfg.y_mode;
  s.strict_simplex = cfg.flags.strict_simplex;
  s.tol_simplex = cfg.solver.tol_simplex;
  s.measure = cfg.solver.measure;
  return s;
}

PathOutcome run_path(const EngineSetup& S, const InitialState& init, const StreamKey& key,
                     ParticlePathSet* rec, DeflatorPath* defl) {
  const MarketCoefficientOracle& oracle = *S.oracle;
  const auto n = static_cast<Eigen::Index>(oracle.dimension());
  const std::size_t N = init.wealth.size();
  const std::size_t steps = init.steps;
  const double dt = init.dt;
  const double sqdt = std::sqrt(dt);
  if (init.x.size() != n) throw DomainError("initial state dimension mismatch");
  if (S.v_ref.size() != N) throw DomainError("normalizing wealth count mismatch");
  const bool exogenous = S.y_mode == YMode::exogenous;
  const bool common = S.strategy->common();
  const bool shifted = S.deflate && S.measure == SamplingMeasure::deflated;

  PathRng rng(key);
  MarketState state;
  state.x = init.x;
  state.y = exogenous ? init.y : Vec::Zero(n);
  Vec lx = init.x.array().log();
  std::vector<double> wealth = init.wealth;
  std::vector<double> lv(N);
  for (std::size_t l = 0; l < N; ++l) lv[l] = std::log(wealth[l]);

  Coefficients coef;
  coef.resize(static_cast<std::size_t>(n));
  const bool frozen = oracle.state_independent();
  if (frozen) oracle.evaluate(state, coef);
  const bool diagonal = oracle.diagonal_sigma();
  Eigen::PartialPivLU<Mat> lu(n);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod;

  Vec pi(n), u(n), dw(n), sdw(n), adiag(n), theta(n), lambda = Vec::Zero(n), kappa(n);
  Mat Pi(static_cast<Eigen::Index>(N), n);

  if (rec) {
    rec->grid.resize(steps + 1);
    rec->X.resize(static_cast<Eigen::Index>(steps + 1), n);
    rec->V.resize(static_cast<Eigen::Index>(steps + 1), static_cast<Eigen::Index>(N));
    rec->Y.resize(static_cast<Eigen::Index>(steps + 1), n);
    rec->dW.resize(static_cast<Eigen::Index>(steps), n);
    rec->v_ref = S.v_ref;
    rec->strategy_record.clear();
    if (S.record_strategies) rec->strategy_record.resize(steps + 1);
  }
  if (defl) {
    defl->L.assign(steps + 1, 1.0);
    defl->log_L.assign(steps + 1, 0.0);
    defl->theta.setZero(static_cast<Eigen::Index>(steps), n);
    defl->lambda.setZero(static_cast<Eigen::Index>(steps), n);
    defl->Theta.assign(steps, 0.0);
    defl->increments.assign(steps, 0.0);
  }

  PathOutcome out;
  double log_L = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double t = init.t0 + static_cast<double>(k) * dt;
    StrategyContext ctx;
    ctx.step = init.step0 + k;
    ctx.t = t;
    ctx.x = &state.x;
    ctx.wealth = wealth;
    ctx.v_ref = S.v_ref;
    ctx.path = key.index;
    if (common) {
      S.strategy->common_weights(ctx, pi);
      for (std::size_t l = 0; l < N; ++l) Pi.row(static_cast<Eigen::Index>(l)) = pi.transpose();
    } else {
      S.strategy->weights(ctx, Pi);
    }
    if (S.strict_simplex) {
      for (std::size_t l = 0; l < N; ++l) {
        const Vec row = Pi.row(static_cast<Eigen::Index>(l)).transpose();
        if (!SimplexWeights::within_simplex(std::span<const double>(row.data(), row.size()), S.tol_simplex))
          throw AdmissibilityError("strategy of investor " + std::to_string(l) +
                                   " outside the simplex at step " + std::to_string(init.step0 + k));
      }
    }

    double msum = 0.0;
    for (std::size_t l = 0; l < N; ++l) msum += wealth[l] / S.v_ref[l];
    state.m = msum / static_cast<double>(N);
    state.t = t;
    if (!exogenous) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < N; ++l) s += wealth[l] * Pi(static_cast<Eigen::Index>(l), i);
        state.y(i) = s / static_cast<double>(N);
      }
    }
    if (k == 0) {
      out.bench_0 = S.delta * state.x.sum() + (1.0 - S.delta) * state.m;
    }

    if (rec) {
      const auto r = static_cast<Eigen::Index>(k);
      rec->grid[k] = t;
      rec->X.row(r) = state.x.transpose();
      for (std::size_t l = 0; l < N; ++l) rec->V(r, static_cast<Eigen::Index>(l)) = wealth[l];
      rec->Y.row(r) = state.y.transpose();
      if (S.record_strategies) rec->strategy_record[k] = Pi;
    }
    if (k == steps || (out.absorbed && !rec && !defl)) break;

    if (!frozen) oracle.evaluate(state, coef);
    if (!finite(coef.beta) || !coef.sigma.allFinite())
      throw SimulationError("non-finite market coefficients", init.step0 + k);
    if (exogenous && (!finite(coef.gamma) || !coef.tau.allFinite()))
      throw SimulationError("non-finite invested-capital coefficients", init.step0 + k);

    for (Eigen::Index i = 0; i < n; ++i) dw(i) = sqdt * rng.normal();

    // Market price of risk and deflator increment.
    if (!S.deflate) {
      theta.setZero();
    } else if (diagonal) {
      for (Eigen::Index i = 0; i < n; ++i) theta(i) = diagonal_price(coef.beta(i), coef.sigma(i, i), init.step0 + k);
    } else {
      lu.compute(coef.sigma);
      if (!(lu.rcond() > kDeflatorRcond)) throw DeflatorError("singular sigma", init.step0 + k);
      theta.noalias() = lu.solve(coef.beta);
    }
    if (exogenous && S.deflate) {
      if (coef.gamma.isZero(0.0)) {
        lambda.setZero();
      } else {
        cod.compute(coef.tau);
        lambda = cod.solve(coef.gamma);
      }
    }
    if (!finite(theta) || !finite(lambda)) throw DeflatorError("non-finite market price of risk", init.step0 + k);
    kappa = theta + lambda;
    double inc = -kappa.dot(dw) - 0.5 * kappa.squaredNorm() * dt;
    if (shifted) {
      // Girsanov shift: noise under the deflated measure, L stays 1.
      dw -= kappa * dt;
      inc = 0.0;
    }
    log_L = std::clamp(log_L + inc, -kLogWealthBound, kLogWealthBound);
    if (defl) {
      const auto r = static_cast<Eigen::Index>(k);
      defl->theta.row(r) = theta.transpose();
      defl->lambda.row(r) = lambda.transpose();
      defl->Theta[k] = std::sqrt(theta.squaredNorm() + lambda.squaredNorm());
      defl->increments[k] = inc;
      defl->log_L[k + 1] = log_L;
      defl->L[k + 1] = std::exp(log_L);
    }
    if (rec) rec->dW.row(static_cast<Eigen::Index>(k)) = dw.transpose();

    // Wealth updates use the node weights before prices move.
    sdw.noalias() = coef.sigma * dw;
    if (common) {
      u.noalias() = coef.sigma.transpose() * pi;
      const double drift = (pi.dot(coef.beta) - 0.5 * u.squaredNorm()) * dt + u.dot(dw);
      for (std::size_t l = 0; l < N; ++l) lv[l] += drift;
    } else {
      for (std::size_t l = 0; l < N; ++l) {
        pi = Pi.row(static_cast<Eigen::Index>(l)).transpose();
        u.noalias() = coef.sigma.transpose() * pi;
        lv[l] += (pi.dot(coef.beta) - 0.5 * u.squaredNorm()) * dt + u.dot(dw);
      }
    }
    for (std::size_t l = 0; l < N; ++l) {
      if (!std::isfinite(lv[l])) throw SimulationError("non-finite wealth", init.step0 + k);
      if (lv[l] < -kLogWealthBound || lv[l] > kLogWealthBound) {
        lv[l] = std::clamp(lv[l], -kLogWealthBound, kLogWealthBound);
        ++out.floor_hits;
      }
      wealth[l] = std::exp(lv[l]);
    }

    for (Eigen::Index i = 0; i < n; ++i) adiag(i) = coef.sigma.row(i).squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (shifted && !out.absorbed) {
        // Survival of the step against absorption at zero: the level-Euler
        // endpoint and a Brownian-bridge crossing probability.
        const double ret = coef.beta(i) * dt + sdw(i);
        const double level_var = adiag(i) * dt;
        if (ret <= -1.0) {
          out.absorbed = true;
        } else if (level_var > 0.0) {
          const double p_cross = std::exp(-2.0 * (1.0 + ret) / level_var);
          if (p_cross >= 1.0) out.absorbed = true;
          else out.log_survival += std::log1p(-p_cross);
        }
      }
      lx(i) += (coef.beta(i) - 0.5 * adiag(i)) * dt + sdw(i);
      if (!std::isfinite(lx(i))) throw SimulationError("non-finite stock price", init.step0 + k);
      if (lx(i) < kLogPriceFloor || lx(i) > kLogPriceCap) {
        if (shifted && lx(i) < kLogPriceFloor) out.absorbed = true;
        lx(i) = std::clamp(lx(i), kLogPriceFloor, kLogPriceCap);
        ++out.floor_hits;
      }
      state.x(i) = std::exp(lx(i));
    }

    if (exogenous) {
      state.y.noalias() += coef.gamma * dt + coef.tau * dw;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (state.y(i) < 0.0) {
          state.y(i) = 0.0;
          ++out.y_clamps;
        }
      }
    }
  }

  out.x_T = state.x;
  out.wealth_T = wealth;
  out.log_L_T = log_L;
  out.peer_T = state.m;
  out.bench_T = S.delta * state.x.sum() + (1.0 - S.delta) * state.m;
  if (rec) {
    rec->floor_hits = out.floor_hits;
    rec->y_clamps = out.y_clamps;
  }
  return out;
}

ParticlePathSet simulate_n_particle(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                                    const StrategyRule& strategy, std::uint64_t seed, std::size_t path_index,
                                    bool record_strategies) {
  check_structure(cfg);
  EngineSetup setup = make_setup(oracle, strategy, cfg);
  setup.record_strategies = record_strategies;
  setup.deflate = false;
  setup.measure = SamplingMeasure::physical;
  ParticlePathSet rec;
  run_path(setup, initial_state(cfg), {seed, path_index, StreamPurpose::market_noise, 0}, &rec, nullptr);
  return rec;
}

DeflatorPath simulate_deflator(const ParticlePathSet& paths, const MarketCoefficientOracle& oracle, YMode y_mode) {
  const std::size_t steps = paths.steps();
  const auto n = static_cast<Eigen::Index>(paths.n());
  const std::size_t N = paths.N();
  DeflatorPath d;
  d.L.assign(steps + 1, 1.0);
  d.log_L.assign(steps + 1, 0.0);
  d.theta.setZero(static_cast<Eigen::Index>(steps), n);
  d.lambda.setZero(static_cast<Eigen::Index>(steps), n);
  d.Theta.assign(steps, 0.0);
  d.increments.assign(steps, 0.0);

  Coefficients coef;
  coef.resize(paths.n());
  MarketState state;
  Eigen::PartialPivLU<Mat> lu(n);
  Vec theta(n), lambda = Vec::Zero(n), kappa(n);
  double log_L = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    state.t = paths.grid[k];
    state.x = paths.X.row(r).transpose();
    state.y = paths.Y.row(r).transpose();
    double msum = 0.0;
    for (std::size_t l = 0; l < N; ++l) msum += paths.V(r, static_cast<Eigen::Index>(l)) / paths.v_ref[l];
    state.m = msum / static_cast<double>(N);
    oracle.evaluate(state, coef);
    if (oracle.diagonal_sigma()) {
      for (Eigen::Index i = 0; i < n; ++i) theta(i) = diagonal_price(coef.beta(i), coef.sigma(i, i), k);
    } else {
      lu.compute(coef.sigma);
      if (!(lu.rcond() > kDeflatorRcond)) throw DeflatorError("singular sigma", k);
      theta.noalias() = lu.solve(coef.beta);
    }
    if (y_mode == YMode::exogenous && !coef.gamma.isZero(0.0)) {
      Eigen::CompleteOrthogonalDecomposition<Mat> cod(coef.tau);
      lambda = cod.solve(coef.gamma);
    } else {
      lambda.setZero();
    }
    if (!finite(theta) || !finite(lambda)) throw DeflatorError("non-finite market price of risk", k);
    kappa = theta + lambda;
    const Vec dw = paths.dW.row(r).transpose();
    const double inc = -kappa.dot(dw) - 0.5 * kappa.squaredNorm() * (paths.grid[k + 1] - paths.grid[k]);
    log_L = std::clamp(log_L + inc, -kLogWealthBound, kLogWealthBound);
    d.theta.row(r) = theta.transpose();
    d.lambda.row(r) = lambda.transpose();
    d.Theta[k] = std::sqrt(theta.squaredNorm() + lambda.squaredNorm());
    d.increments[k] = inc;
    d.log_L[k + 1] = log_L;
    d.L[k + 1] = std::exp(log_L);
  }
  return d;
}

BenchmarkPath benchmark_path(const ParticlePathSet& paths, const ScenarioConfig& cfg) {
  if (paths.n() != cfg.n || paths.N() != cfg.N) throw DomainError("benchmark_path: shape mismatch with config");
  BenchmarkPath b;
  const std::size_t K = paths.steps() + 1;
  b.Vbench.resize(K);
  b.market_total.resize(K);
  b.peer_average.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    b.market_total[k] = paths.X.row(static_cast<Eigen::Index>(k)).sum();
    b.peer_average[k] = paths.peer_average(k);
    b.Vbench[k] = cfg.delta * b.market_total[k] + (1.0 - cfg.delta) * b.peer_average[k];
  }
  b.relative_log_performance.resize(paths.N());
  const auto last = static_cast<Eigen::Index>(K - 1);
  for (std::size_t l = 0; l < paths.N(); ++l)
    b.relative_log_performance[l] = std::log(paths.V(last, static_cast<Eigen::Index>(l)) / b.Vbench[K - 1]);
  return b;
}

std::vector<double> inner_draws(const PopulationLaw& law, std::size_t count, std::uint64_t seed, std::uint64_t sub) {
  if (law.kind == PopulationLaw::Kind::list) {
    if (law.values.empty()) throw ConfigError("empty population list");
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = law.values[k % law.values.size()];
    return out;
  }
  return sample_population(law, count, seed, sub);
}

std::vector<double> inner_wealth_draws(const ScenarioConfig& cfg, std::size_t count, std::uint64_t seed) {
  return inner_draws(cfg.v0_law, count, seed, kWealthTag);
}

std::vector<double> inner_preference_draws(const ScenarioConfig& cfg, std::size_t count, std::uint64_t seed) {
  return inner_draws(cfg.c_law, count, seed, kPreferenceTag);
}

MeanFieldPathSet simulate_mean_field(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                                     const StrategyRule& strategy, std::size_t k_inner, std::uint64_t seed,
                                     std::size_t outer_index) {
  if (k_inner < 2) throw ConfigError("K_inner must be at least 2 for conditional means");
  if (oracle.measure_dependence() == MeasureDependence::full_measure)
    throw ConfigError("full-measure oracles need a measure flow; use the mfg module");
  check_structure(cfg);
  EngineSetup setup = make_setup(oracle, strategy, cfg);
  setup.measure = SamplingMeasure::physical;
  setup.v_ref = inner_wealth_draws(cfg, k_inner, cfg.seed);
  InitialState init = initial_state(cfg);
  init.wealth = setup.v_ref;

  ParticlePathSet rec;
  DeflatorPath defl;
  const PathOutcome out =
      run_path(setup, init, {seed, outer_index, StreamPurpose::market_noise, 0}, &rec, &defl);

  MeanFieldPathSet mf;
  mf.grid = rec.grid;
  mf.B = rec.dW;
  mf.X = rec.X;
  mf.inner = rec.V;
  mf.Z = rec.Y;
  mf.m.resize(rec.grid.size());
  for (std::size_t k = 0; k < rec.grid.size(); ++k) mf.m[k] = rec.peer_average(k);
  mf.v0 = setup.v_ref;
  mf.c = inner_preference_draws(cfg, k_inner, cfg.seed);
  mf.log_L = defl.log_L;
  mf.floor_hits = out.floor_hits;
  return mf;
}

std::string paths_csv(const std::vector<double>& grid, const Mat& values, const std::string& prefix) {
  std::string out = "t";
  for (Eigen::Index j = 0; j < values.cols(); ++j) out += "," + prefix + std::to_string(j);
  out += "\n";
  char buf[64];
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", grid[k]);
    out += buf;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", values(static_cast<Eigen::Index>(k), j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace relarb
