#include "relarb/mfg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relarb/error.hpp"
#include "relarb/parallel.hpp"
#include "relarb/stats.hpp"
#include "relarb/strategy.hpp"

namespace relarb {

double mean_field_target_wealth(double delta, double X, double u, double mean_u_over_v0) {
  const double denom = 1.0 - (1.0 - delta) * mean_u_over_v0;
  if (!(denom > 0.0))
    throw InfeasibleError("preference condition violated: 1 - (1-delta) E[u/v0] = " + std::to_string(denom) +
                          " is not positive");
  const double v = delta * X * u / denom;
  if (!(v > 0.0)) throw DomainError("optimal mean-field wealth is not positive");
  return v;
}

Vec deflated_mean_volatility(const Mat& inner_pi, const std::vector<double>& nw, const Mat& sigma, const Vec& kappa,
                             double L) {
  const auto K = static_cast<Eigen::Index>(nw.size());
  if (inner_pi.rows() != K) throw DomainError("one strategy row per inner particle required");
  Vec vol = Vec::Zero(sigma.cols());
  for (Eigen::Index k = 0; k < K; ++k) vol += nw[static_cast<std::size_t>(k)] * (sigma.transpose() * inner_pi.row(k).transpose());
  vol /= static_cast<double>(K);
  const double m = pairwise_sum(nw) / static_cast<double>(K);
  return L * (vol - m * kappa);
}

EquilibriumStrategy mfe_strategy(const MfeStrategyInput& in, const GradientBlock& g, double delta, double tol_simplex) {
  const auto n = in.x.size();
  if (g.dx.size() != n) throw DomainError("gradient dimension mismatch");
  if (!(in.v_star > 0.0)) throw DomainError("optimal mean-field wealth must be positive");
  EquilibriumStrategy out;
  const double X = in.x.sum();
  const Vec mu = in.x / X;
  out.weights = in.x.cwiseProduct(g.dx) + (delta * X / in.v_star) * mu;
  out.std_err = in.x.cwiseProduct(g.dx_se);

  const bool need_y = g.y_available && g.dy.size() == n && !g.dy.isZero(0.0);
  const bool need_vol = delta < 1.0 && in.vol_Lm.size() == n && !in.vol_Lm.isZero(0.0);
  if (need_y || need_vol) {
    Eigen::PartialPivLU<Mat> lu(in.coef.sigma);
    if (!(lu.rcond() > 1e-12)) throw SingularityError("sigma is singular at the mean-field state");
    const Mat sinv_t = lu.solve(Mat::Identity(n, n)).transpose();
    if (need_y) {
      const Mat ts = sinv_t * in.coef.tau.transpose();
      out.weights += ts * g.dy;
      for (Eigen::Index i = 0; i < n; ++i) {
        double var = out.std_err(i) * out.std_err(i);
        for (Eigen::Index p = 0; p < n; ++p) var += ts(i, p) * ts(i, p) * g.dy_se(p) * g.dy_se(p);
        out.std_err(i) = std::sqrt(var);
      }
    }
    if (need_vol) out.weights += ((1.0 - delta) / in.v_star) * (sinv_t * in.vol_Lm);
  }
  out.diagnostics.sum = out.weights.sum();
  out.diagnostics.min = out.weights.minCoeff();
  out.diagnostics.in_simplex =
      SimplexWeights::within_simplex(std::span<const double>(out.weights.data(), out.weights.size()), tol_simplex);
  return out;
}

VsmClosedForm vsm_closed_form(const VsmState& s, const GradientBlock& g, double zeta, double delta) {
  if (!(zeta >= 0.0)) throw DomainError("zeta must be nonnegative");
  const auto n = s.x.size();
  if (g.dx.size() != n || s.z.size() != n) throw DomainError("closed form: dimension mismatch");
  if (std::abs(1.0 - g.dm) < 1e-10) throw SingularityError("D_m log u = 1: volatility of m is unbounded");
  const double X = s.x.sum();
  const double denom = delta * X + (1.0 - delta) * s.m;
  VsmClosedForm out;
  out.weights.resize(n);
  out.vol_m.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sx = std::sqrt(s.x(i));
    const double dz = g.dy.size() == n ? g.dy(i) : 0.0;
    const double zterm = dz != 0.0 ? dz / std::sqrt(s.z(i)) : 0.0;
    const double vol = (sx * g.dx(i) + zterm + delta * sx / denom) / (1.0 - g.dm);
    out.vol_m(i) = vol;
    const double tau_sinv = dz != 0.0 ? std::sqrt(s.z(i)) * sx : 0.0;
    out.weights(i) = s.x(i) * g.dx(i) + tau_sinv * dz + vol * sx * g.dm +
                     (delta * s.x(i) + (1.0 - delta) * s.L * sx * (s.m * s.Theta + vol)) / denom;
  }
  return out;
}

ContractionBound contraction_region_mf(double u, double du_dm, const std::vector<double>& c,
                                       const std::vector<double>& v0, double delta) {
  if (c.size() != v0.size() || c.empty()) throw DomainError("contraction_region_mf: matched draws required");
  std::vector<double> a(c.size()), d(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    a[k] = std::exp(c[k]) * u / v0[k];
    d[k] = std::exp(c[k]) * du_dm / v0[k];
  }
  const double K = static_cast<double>(c.size());
  ContractionBound b;
  b.A = 1.0 - (1.0 - delta) * pairwise_sum(a) / K;
  b.D = delta * std::abs(pairwise_sum(d) / K);
  b.K_upper = b.D > 0.0 ? b.A * b.A / b.D : std::numeric_limits<double>::infinity();
  return b;
}

MfeOptions mfe_options(const ScenarioConfig& cfg) {
  MfeOptions o;
  o.k_inner = cfg.solver.k_inner;
  o.outer_paths = cfg.solver.outer_paths;
  o.eval_nodes = cfg.solver.eval_nodes;
  o.sub_paths = cfg.solver.sub_paths;
  o.damping = cfg.solver.damping;
  o.tol = cfg.solver.tol;
  o.max_iters = cfg.solver.max_iters;
  o.threads = cfg.solver.threads;
  o.bump.h_abs = cfg.solver.bump_abs;
  o.bump.h_rel = cfg.solver.bump_rel;
  o.population_seed = cfg.seed;
  return o;
}

MeanFieldRun simulate_mean_field_path(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                                      const StrategyRule& strategy, const std::vector<double>& v0, std::uint64_t seed,
                                      std::size_t outer_index, bool record_strategies) {
  if (v0.size() < 2) throw ConfigError("K_inner must be at least 2 for conditional means");
  EngineSetup setup = make_setup(oracle, strategy, cfg);
  setup.v_ref = v0;
  setup.record_strategies = record_strategies;
  setup.measure = SamplingMeasure::physical;
  InitialState init = initial_state(cfg);
  init.wealth = v0;
  MeanFieldRun run;
  run_path(setup, init, {seed, outer_index, StreamPurpose::market_noise, 0}, &run.paths, &run.deflator);
  return run;
}

namespace {

double mean_of(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

std::vector<double> normalized_wealth(const ParticlePathSet& p, std::size_t k) {
  std::vector<double> nw(p.N());
  for (std::size_t l = 0; l < p.N(); ++l)
    nw[l] = p.V(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) / p.v_ref[l];
  return nw;
}

// Largest over steps of the path-average of |a - b|.
double flow_gap(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  const std::size_t P = a.size(), K = a.front().size();
  double worst = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> d(P);
    for (std::size_t p = 0; p < P; ++p) d[p] = std::abs(a[p][k] - b[p][k]);
    worst = std::max(worst, mean_of(d));
  }
  return worst;
}

}  // namespace

MeanFieldEquilibrium solve_mfe(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, const MfeOptions& opt,
                               std::uint64_t seed) {
  check_structure(cfg);
  if (opt.k_inner < 2) throw ConfigError("K_inner must be at least 2 for conditional means");
  if (opt.outer_paths < 1) throw ConfigError("at least one common-noise path required");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
  if (oracle.measure_dependence() == MeasureDependence::full_measure)
    throw ConfigError("full-measure oracles are not supported by the mean-field solver");

  const std::size_t P = opt.outer_paths, steps = cfg.steps;
  const auto n = static_cast<Eigen::Index>(cfg.n);
  MeanFieldEquilibrium res;
  res.inner_v0 = inner_wealth_draws(cfg, opt.k_inner, opt.population_seed);
  res.inner_c = inner_preference_draws(cfg, opt.k_inner, opt.population_seed);
  const std::size_t J = std::max<std::size_t>(1, std::min(opt.eval_nodes, steps));
  for (std::size_t j = 0; j < J; ++j) res.node_steps.push_back(j * steps / J);
  std::vector<double> inv_v0(res.inner_v0.size());
  for (std::size_t k = 0; k < inv_v0.size(); ++k) inv_v0[k] = 1.0 / res.inner_v0[k];
  const double mean_inv_v0 = mean_of(inv_v0);

  // Initial map: the scenario strategy recorded along each common-noise path.
  const StrategyPtr base = make_strategy(cfg.strategy, cfg.n);
  std::vector<MeanFieldRun> runs(P);
  parallel_for(P, opt.threads, [&](std::size_t p) {
    runs[p] = simulate_mean_field_path(oracle, cfg, *base, res.inner_v0, seed, p, true);
  });
  std::vector<std::vector<Vec>> table(P, std::vector<Vec>(steps + 1));
  std::vector<std::vector<double>> m_frozen(P, std::vector<double>(steps + 1));
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k <= steps; ++k) {
      table[p][k] = runs[p].paths.strategy_record[k].row(0).transpose();
      m_frozen[p][k] = runs[p].paths.peer_average(k);
    }
  res.grid = runs[0].paths.grid;

  std::vector<std::vector<double>> m_sim(P, std::vector<double>(steps + 1));
  std::vector<MfeStateRecord> records(P * J);
  for (std::size_t it = 0;; ++it) {
    // Step (i): simulate the particle flow under the current map.
    if (it > 0) {
      const PathTableRule rule(table);
      parallel_for(P, opt.threads, [&](std::size_t p) {
        runs[p] = simulate_mean_field_path(oracle, cfg, rule, res.inner_v0, seed, p, false);
      });
    }
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k <= steps; ++k) m_sim[p][k] = runs[p].paths.peer_average(k);

    // Step (ii): value, gradients and the implied optimal map at the nodes.
    parallel_for(P * J, opt.threads, [&](std::size_t task) {
      const std::size_t p = task / J, j = task % J, k = res.node_steps[j];
      const ParticlePathSet& rec = runs[p].paths;
      const auto r = static_cast<Eigen::Index>(k);
      MfeStateRecord s;
      s.path = p;
      s.node = j;
      s.step = k;
      s.t = rec.grid[k];
      s.x = rec.X.row(r).transpose();
      s.z = rec.Y.row(r).transpose();
      s.m = m_frozen[p][k];
      const std::vector<double> nw = normalized_wealth(rec, k);
      std::vector<double> wealth(rec.N());
      for (std::size_t l = 0; l < rec.N(); ++l) wealth[l] = rec.V(r, static_cast<Eigen::Index>(l));
      const double v_rep = mean_of(wealth) / m_sim[p][k];

      // Representative particle started at the node with peer average m.
      const TimeTableRule path_rule(table[p]);
      EngineSetup setup = make_setup(oracle, path_rule, cfg);
      setup.v_ref = {v_rep};
      InitialState init;
      init.t0 = rec.grid[k];
      init.step0 = k;
      init.steps = steps - k;
      init.dt = cfg.dt();
      init.x = s.x;
      init.y = s.z;
      init.wealth = {s.m * v_rep};
      McOptions mc;
      mc.paths = opt.sub_paths;
      mc.seed = seed;
      mc.threads = 1;
      mc.purpose = StreamPurpose::mf_node;
      mc.sub = task;
      s.grad = grad_log_u(setup, init, opt.bump, mc);
      s.u_normalized = s.grad.u_normalized;
      s.u_se = s.grad.u_se;

      const DeflatorPath& d = runs[p].deflator;
      s.L = d.L[k];
      Vec kappa = Vec::Zero(n);
      if (k < steps) {
        kappa = (d.theta.row(r) + d.lambda.row(r)).transpose();
        s.Theta = d.Theta[k];
      } else if (steps > 0) {
        kappa = (d.theta.row(r - 1) + d.lambda.row(r - 1)).transpose();
        s.Theta = d.Theta[k - 1];
      }
      MfeStrategyInput in;
      in.x = s.x;
      in.z = s.z;
      in.m = s.m;
      MarketState ms;
      ms.t = s.t;
      ms.x = s.x;
      ms.y = s.z;
      ms.m = s.m;
      in.coef.resize(cfg.n);
      oracle.evaluate(ms, in.coef);
      Mat inner_pi(static_cast<Eigen::Index>(nw.size()), n);
      for (Eigen::Index l = 0; l < inner_pi.rows(); ++l) inner_pi.row(l) = table[p][k].transpose();
      s.vol_Lm = deflated_mean_volatility(inner_pi, nw, in.coef.sigma, kappa, s.L);
      in.vol_Lm = s.vol_Lm;
      s.v_star = mean_field_target_wealth(cfg.delta, s.x.sum(), s.u_normalized, s.u_normalized * mean_inv_v0);
      in.v_star = s.v_star;
      const EquilibriumStrategy es = mfe_strategy(in, s.grad, cfg.delta, cfg.solver.tol_simplex);
      s.pi = es.weights;
      s.diagnostics = es.diagnostics;
      records[task] = std::move(s);
    });

    const double m_scale = 1.0;
    res.residual_m = flow_gap(m_frozen, m_sim);
    double resid_phi = 0.0;
    for (const auto& s : records) resid_phi = std::max(resid_phi, (s.pi - table[s.path][s.step]).cwiseAbs().maxCoeff());
    res.residual_phi = resid_phi;
    res.residual_m_trace.push_back(res.residual_m);
    res.residual_phi_trace.push_back(res.residual_phi);
    double flow_scale = m_scale;
    for (const auto& row : m_frozen) flow_scale = std::max(flow_scale, *std::max_element(row.begin(), row.end()));
    res.converged_m = res.residual_m <= opt.tol * flow_scale;
    res.converged_phi = res.residual_phi <= opt.tol;
    if ((res.converged_m && res.converged_phi) || it == opt.max_iters) break;

    // Step (iii): damped block update of the map and of the frozen flow.
    const double w = opt.damping;
    for (const auto& s : records) {
      const std::size_t end = s.node + 1 < J ? res.node_steps[s.node + 1] : steps + 1;
      for (std::size_t k = s.step; k < end; ++k) table[s.path][k] = (1.0 - w) * table[s.path][k] + w * s.pi;
    }
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k <= steps; ++k) m_frozen[p][k] = (1.0 - w) * m_frozen[p][k] + w * m_sim[p][k];
    res.iterations = it + 1;
  }
  res.converged = res.converged_m && res.converged_phi;
  if (!res.converged) res.warnings.push_back("mean-field iteration hit max_iters before both fixed points settled");

  // Outputs on the last simulated flow.
  // The value at t = 0 pools the independent node-0 estimates of every
  // common-noise path; they share the initial state, so this is the same
  // estimator as the N-player value.
  std::vector<double> ec(res.inner_c.size());
  for (std::size_t k = 0; k < ec.size(); ++k) ec[k] = std::exp(res.inner_c[k]);
  const double ec_mean = mean_of(ec);
  res.m_path = m_frozen;
  res.m_simulated = m_sim;
  res.strategy_path = table;
  res.Z_path.resize(P);
  std::vector<double> u0(P), var0(P);
  for (std::size_t p = 0; p < P; ++p) {
    res.Z_path[p] = runs[p].paths.Y;
    u0[p] = records[p * J].u_normalized;
    var0[p] = records[p * J].u_se * records[p * J].u_se;
  }
  const double Pd = static_cast<double>(P);
  res.u_normalized = mean_of(u0);
  res.u_normalized_se = std::sqrt(pairwise_sum(var0)) / Pd;
  res.u = ec_mean * res.u_normalized;
  res.u_se = ec_mean * res.u_normalized_se;

  // Inner sampling error of the flow: spread of the flow across replicate
  // populations of size K under the final map. The flow moves with the
  // population mean through Z, so within-population spread alone understates it.
  {
    constexpr std::size_t R = 8;
    const PathTableRule rule(table);
    std::vector<std::vector<double>> v0s(R);
    for (std::size_t r = 0; r < R; ++r)
      v0s[r] = inner_wealth_draws(cfg, opt.k_inner, derive_seed({opt.population_seed, 2 + r, StreamPurpose::sampling, 0}));
    std::vector<std::vector<double>> rep(P * R);
    parallel_for(P * R, opt.threads, [&](std::size_t task) {
      const std::size_t p = task / R;
      const MeanFieldRun run = simulate_mean_field_path(oracle, cfg, rule, v0s[task % R], seed, p, false);
      for (std::size_t k = 0; k <= steps; ++k) rep[task].push_back(run.paths.peer_average(k));
    });
    for (std::size_t k = 0; k <= steps; ++k) {
      std::vector<double> sd(P);
      for (std::size_t p = 0; p < P; ++p) {
        std::vector<double> m(R);
        for (std::size_t r = 0; r < R; ++r) m[r] = rep[p * R + r][k];
        sd[p] = std::sqrt(sample_stats(m).variance);
      }
      res.inner_se = std::max(res.inner_se, mean_of(sd));
    }
  }

  res.A_tilde.assign(P, std::vector<double>(J));
  res.D_tilde.assign(P, std::vector<double>(J));
  res.K_tilde_upper.assign(P, std::vector<double>(J));
  std::vector<double> stay(P, 1.0);
  double K_min = std::numeric_limits<double>::infinity();
  for (const auto& s : records) {
    const ContractionBound b = contraction_region_mf(s.u_normalized, s.grad.du_dm, res.inner_c, res.inner_v0, cfg.delta);
    res.A_tilde[s.path][s.node] = b.A;
    res.D_tilde[s.path][s.node] = b.D;
    res.K_tilde_upper[s.path][s.node] = b.K_upper;
    K_min = std::min(K_min, b.K_upper);
    if (s.x.sum() >= b.K_upper) stay[s.path] = 0.0;
  }
  res.exit_stay_fraction = mean_of(stay);
  const Vec x0 = Eigen::Map<const Vec>(cfg.x0.data(), n);
  const Vec z0 = runs[0].paths.Y.row(0).transpose();
  res.uniqueness = uniqueness_probability(market_weight_stats(oracle, x0, z0, 1.0), K_min, cfg.T,
                                          cfg.flags.cdf_std_normalized);
  Mat totals(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(steps + 1));
  for (std::size_t p = 0; p < P; ++p) totals.row(static_cast<Eigen::Index>(p)) = runs[p].paths.X.rowwise().sum().transpose();
  attach_empirical(res.uniqueness, totals, K_min);
  res.states = std::move(records);
  return res;
}

MeanFieldEquilibrium solve_mfe(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, std::uint64_t seed) {
  return solve_mfe(oracle, cfg, mfe_options(cfg), seed);
}

ConsistencyCheck check_consistency(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                                   const MeanFieldEquilibrium& mfe, const MfeOptions& opt, std::uint64_t seed) {
  const std::size_t P = mfe.strategy_path.size();
  // Fresh inner population on the same common noise.
  const auto v0 = inner_wealth_draws(cfg, opt.k_inner, derive_seed({opt.population_seed, 1, StreamPurpose::sampling, 0}));
  const PathTableRule rule(mfe.strategy_path);
  std::vector<std::vector<double>> m_resim(P, std::vector<double>(cfg.steps + 1));
  parallel_for(P, opt.threads, [&](std::size_t p) {
    const MeanFieldRun run = simulate_mean_field_path(oracle, cfg, rule, v0, seed, p, false);
    for (std::size_t k = 0; k <= cfg.steps; ++k) m_resim[p][k] = run.paths.peer_average(k);
  });
  ConsistencyCheck c;
  c.deviation = flow_gap(mfe.m_path, m_resim);
  c.bound = mfe.residual_m + 3.0 * mfe.inner_se;
  c.passed = c.deviation <= c.bound;
  return c;
}

std::vector<Vec> average_strategy(const MeanFieldEquilibrium& mfe) {
  const std::size_t P = mfe.strategy_path.size();
  if (P == 0) return {};
  std::vector<Vec> avg(mfe.strategy_path.front().size());
  for (std::size_t k = 0; k < avg.size(); ++k) {
    avg[k] = Vec::Zero(mfe.strategy_path.front()[k].size());
    for (std::size_t p = 0; p < P; ++p) avg[k] += mfe.strategy_path[p][k];
    avg[k] /= static_cast<double>(P);
  }
  return avg;
}

std::vector<double> mfe_initial_value_samples(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                                              const MeanFieldEquilibrium& mfe, const McOptions& opt) {
  if (mfe.strategy_path.empty() || mfe.m_path.empty() || mfe.inner_v0.empty())
    throw DomainError("mean-field equilibrium has no recorded map");
  const TimeTableRule rule(average_strategy(mfe));
  EngineSetup setup = make_setup(oracle, rule, cfg);
  const double v_rep = mean_of(mfe.inner_v0);
  setup.v_ref = {v_rep};
  InitialState init = initial_state(cfg);
  double m0 = 0.0;
  for (const auto& row : mfe.m_path) m0 += row.front();
  m0 /= static_cast<double>(mfe.m_path.size());
  init.wealth = {m0 * v_rep};
  return deflated_benchmark_samples(setup, init, opt);
}

}  // namespace relarb
