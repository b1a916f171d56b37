#include "relarb/convergence.hpp"

#include <algorithm>
#include <cmath>

#include "relarb/arbitrage.hpp"
#include "relarb/error.hpp"
#include "relarb/measure.hpp"
#include "relarb/parallel.hpp"
#include "relarb/rng.hpp"

namespace relarb {

TrendStatistic trend_statistic(const std::vector<double>& v, const std::vector<double>& se) {
  TrendStatistic t;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] <= v[i - 1]) continue;
    ++t.increases;
    const double s0 = i - 1 < se.size() ? se[i - 1] : 0.0;
    const double s1 = i < se.size() ? se[i] : 0.0;
    if (v[i] - v[i - 1] > 2.0 * std::hypot(s0, s1)) ++t.significant_increases;
  }
  return t;
}

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return linear_fit(lx, ly);
}

ScenarioConfig scenario_for_n(const ScenarioConfig& tmpl, std::size_t N, std::uint64_t seed) {
  ScenarioConfig cfg = tmpl;
  cfg.N = N;
  cfg.seed = seed;
  // Explicit lists are cycled; laws are drawn afresh under the new seed.
  if (cfg.c_law.is_list()) cfg.c_law = PopulationLaw::list(inner_preference_draws(tmpl, N, seed));
  if (cfg.v0_law.is_list()) cfg.v0_law = PopulationLaw::list(inner_wealth_draws(tmpl, N, seed));
  return cfg;
}

std::vector<DeviationSpec> default_deviation_grid(std::size_t n, std::size_t random_points, std::uint64_t seed) {
  std::vector<DeviationSpec> grid;
  grid.push_back({"market", std::make_shared<MarketPortfolioRule>()});
  grid.push_back({"equal_weight", std::make_shared<EqualWeightRule>()});
  for (std::size_t r = 0; r < random_points; ++r) {
    PathRng rng({seed, r, StreamPurpose::deviation, 0});
    Vec w(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = -std::log(1.0 - rng.uniform());
    w /= w.sum();
    grid.push_back({"random_" + std::to_string(r), std::make_shared<FixedWeightsRule>(w)});
  }
  return grid;
}

namespace {

std::vector<double> objective_samples(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                                      const StrategyRule& rule, std::uint64_t seed) {
  const EngineSetup setup = make_setup(oracle, rule, cfg);
  const InitialState init = initial_state(cfg);
  McOptions mc;
  mc.paths = cfg.solver.paths;
  mc.seed = seed;
  mc.threads = cfg.solver.threads;
  return deflated_benchmark_samples(setup, init, mc);
}

}  // namespace

EpsilonEstimate epsilon_equilibrium(const MarketCoefficientOracle& oracle, const ScenarioConfig& tmpl, std::size_t N,
                                    const std::vector<Vec>& mfe_table, const std::vector<DeviationSpec>& grid,
                                    std::uint64_t seed) {
  if (grid.empty()) throw DomainError("deviation grid is empty");
  if (mfe_table.empty()) throw DomainError("mean-field strategy table is empty");
  const ScenarioConfig cfg = scenario_for_n(tmpl, N, seed);
  const double ec = std::exp(cfg.c().front());
  auto base = std::make_shared<TimeTableRule>(mfe_table);
  const std::vector<double> ref = objective_samples(oracle, cfg, *base, seed);

  EpsilonEstimate e;
  e.N = N;
  e.J_mfe = ec * sample_stats(ref).mean;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& d : grid) {
    const DeviationRule rule(base, d.rule, 0);
    const std::vector<double> dev = objective_samples(oracle, cfg, rule, seed);
    std::vector<double> diff(ref.size());
    for (std::size_t p = 0; p < ref.size(); ++p) diff[p] = ec * (ref[p] - dev[p]);
    const SampleStats s = sample_stats(diff);
    e.gaps.push_back(s.mean);
    e.gap_se.push_back(s.std_err);
    e.deviations.push_back(d.label);
    if (s.mean > best) {
      best = s.mean;
      e.std_err = s.std_err;
    }
  }
  e.epsilon = std::max(0.0, best);
  return e;
}

double chaos_distance(const MarketCoefficientOracle& oracle, const ScenarioConfig& tmpl, std::size_t N,
                      std::size_t reference_k, double t, std::uint64_t particle_noise_seed,
                      std::uint64_t reference_noise_seed) {
  if (particle_noise_seed != reference_noise_seed)
    throw DomainError("chaos metric needs matched common noise on both sides");
  if (N < 2 || N > reference_k) throw DomainError("chaos metric needs 2 <= N <= reference K");
  if (!(t >= 0.0 && t <= tmpl.T)) throw DomainError("node time outside [0, T]");
  const std::uint64_t seed = particle_noise_seed;
  const std::vector<double> v_ref = inner_wealth_draws(tmpl, reference_k, seed);
  const std::vector<double> v_n(v_ref.begin(), v_ref.begin() + static_cast<std::ptrdiff_t>(N));
  const StrategyPtr rule = make_strategy(tmpl.strategy, tmpl.n);
  const MeanFieldRun a = simulate_mean_field_path(oracle, tmpl, *rule, v_n, seed, 0);
  const MeanFieldRun b = simulate_mean_field_path(oracle, tmpl, *rule, v_ref, seed, 0);
  const auto k = static_cast<Eigen::Index>(std::llround(t / tmpl.dt()));
  const Vec wa = a.paths.V.row(k).transpose();
  const Vec wb = b.paths.V.row(k).transpose();
  return wasserstein2_1d(EmpiricalMeasure::from_values(std::span<const double>(wa.data(), wa.size())),
                         EmpiricalMeasure::from_values(std::span<const double>(wb.data(), wb.size())));
}

std::vector<DecayRow> chaos_metric(const MarketCoefficientOracle& oracle, const ScenarioConfig& tmpl,
                                   const std::vector<std::size_t>& N_values, const std::vector<double>& node_times,
                                   const std::vector<std::uint64_t>& seeds, std::size_t reference_k) {
  if (seeds.empty()) throw DomainError("chaos metric needs at least one seed");
  const std::vector<double> times = node_times.empty() ? std::vector<double>{tmpl.T} : node_times;
  std::vector<DecayRow> rows;
  for (double t : times) {
    for (std::size_t N : N_values) {
      std::vector<double> w(seeds.size());
      parallel_for(seeds.size(), tmpl.solver.threads, [&](std::size_t s) {
        w[s] = chaos_distance(oracle, tmpl, N, reference_k, t, seeds[s], seeds[s]);
      });
      const SampleStats st = sample_stats(w);
      rows.push_back({t, N, st.mean, st.std_err});
    }
  }
  return rows;
}

IidDecay iid_lognormal_decay(const std::vector<std::size_t>& sizes, double log_sd, std::size_t replications,
                             std::uint64_t seed) {
  if (replications < 2) throw DomainError("at least two replications required");
  IidDecay out;
  out.sizes = sizes;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::size_t M = sizes[i];
    std::vector<double> w(replications);
    for (std::size_t r = 0; r < replications; ++r) {
      PathRng rng({seed, r, StreamPurpose::sampling, static_cast<std::uint64_t>(i)});
      std::vector<double> a(M), b(4 * M);
      for (double& v : a) v = std::exp(log_sd * rng.normal());
      for (double& v : b) v = std::exp(log_sd * rng.normal());
      w[r] = wasserstein2_1d(EmpiricalMeasure::from_values(a), EmpiricalMeasure::from_values(b));
    }
    const SampleStats st = sample_stats(w);
    out.w2.push_back(st.mean);
    out.w2_se.push_back(st.std_err);
  }
  std::vector<double> x(sizes.begin(), sizes.end());
  out.fit = loglog_fit(x, out.w2);
  return out;
}

ConvergenceReport sweep_n(const MarketCoefficientOracle& oracle, const ScenarioConfig& tmpl,
                          const std::vector<std::size_t>& N_values, const std::vector<std::uint64_t>& seeds) {
  if (N_values.empty() || seeds.empty()) throw DomainError("sweep needs N values and seeds");
  for (std::size_t i = 1; i < N_values.size(); ++i)
    if (N_values[i] <= N_values[i - 1]) throw DomainError("N values must be strictly increasing");
  ConvergenceReport rep;
  rep.N_values = N_values;

  // Mean-field reference, solved once.
  MfeOptions mo = mfe_options(tmpl);
  mo.k_inner = std::max<std::size_t>(tmpl.convergence.reference_k, 2);
  mo.population_seed = seeds.front();
  const MeanFieldEquilibrium mfe = solve_mfe(oracle, tmpl, mo, seeds.front());
  rep.u_mf = mfe.u;
  rep.u_mf_se = mfe.u_se;
  if (!mfe.converged) rep.warnings.push_back("mean-field reference did not converge");
  const std::vector<Vec> table = average_strategy(mfe);
  const auto grid = default_deviation_grid(tmpl.n, tmpl.convergence.random_deviations, seeds.front());

  double ec_mf = 0.0;
  for (double c : mfe.inner_c) ec_mf += std::exp(c);
  ec_mf /= static_cast<double>(mfe.inner_c.size());

  for (std::size_t N : N_values) {
    NSummary s;
    s.N = N;
    std::vector<double> means, ses, gap_means, gap_vars;
    try {
      for (std::uint64_t seed : seeds) {
        const ScenarioConfig cfg = scenario_for_n(tmpl, N, seed);
        const EquilibriumResult r = solve_nash(oracle, cfg, seed);
        means.push_back(sample_stats(r.u_per_investor).mean);
        const SampleStats se = sample_stats(r.u_per_investor_se);
        ses.push_back(se.mean);
        if (!r.converged) rep.warnings.push_back("Nash solve did not converge at N=" + std::to_string(N));

        // Paired difference u_N - u_mf on the Nash solve's own noise streams.
        const NashProblem prob(oracle, cfg, seed);
        const std::vector<double> a = prob.value_samples(0, r.m_path[0]);
        const std::vector<double> b = mfe_initial_value_samples(oracle, tmpl, mfe, prob.node_options(0));
        double ec_n = 0.0;
        for (double c : cfg.c()) ec_n += std::exp(c);
        ec_n /= static_cast<double>(N);
        std::vector<double> d(a.size());
        for (std::size_t p = 0; p < a.size(); ++p) d[p] = ec_n * a[p] - ec_mf * b[p];
        const SampleStats ds = sample_stats(d);
        gap_means.push_back(ds.mean);
        gap_vars.push_back(ds.std_err * ds.std_err);
      }
      const SampleStats m = sample_stats(means);
      double mc = 0.0;
      for (double x : ses) mc += x * x;
      const double S = static_cast<double>(means.size());
      s.mean = m.mean;
      s.std_err = std::sqrt((means.size() > 1 ? m.variance / S : 0.0) + mc / (S * S));
      s.solves = means.size();
    } catch (const Error& e) {
      s.failed = true;
      s.failure = e.what();
      rep.partial = true;
    }
    rep.u_N.push_back(s);
    if (s.failed || gap_means.empty()) {
      rep.gaps.push_back(std::numeric_limits<double>::quiet_NaN());
      rep.gap_se.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      const double S = static_cast<double>(gap_means.size());
      rep.gaps.push_back(std::abs(pairwise_sum(gap_means) / S));
      rep.gap_se.push_back(std::sqrt(pairwise_sum(gap_vars)) / S);
    }

    try {
      rep.epsilon_N.push_back(epsilon_equilibrium(oracle, tmpl, N, table, grid, seeds.front()));
    } catch (const Error& e) {
      EpsilonEstimate f;
      f.N = N;
      f.epsilon = std::numeric_limits<double>::quiet_NaN();
      rep.epsilon_N.push_back(f);
      rep.partial = true;
      rep.warnings.push_back("epsilon estimate failed at N=" + std::to_string(N) + ": " + e.what());
    }
  }
  rep.gap_trend = trend_statistic(rep.gaps, rep.gap_se);
  std::vector<double> eps, eps_se;
  for (const auto& e : rep.epsilon_N) {
    eps.push_back(e.epsilon);
    eps_se.push_back(e.std_err);
  }
  rep.epsilon_trend = trend_statistic(eps, eps_se);

  std::vector<std::size_t> chaos_n;
  for (std::size_t N : N_values)
    if (N >= 2 && N <= mo.k_inner) chaos_n.push_back(N);
  rep.w2_decay = chaos_metric(oracle, tmpl, chaos_n, tmpl.convergence.node_times, seeds, mo.k_inner);
  std::vector<double> xs, ys;
  const double last_t = rep.w2_decay.empty() ? 0.0 : rep.w2_decay.back().t;
  for (const auto& r : rep.w2_decay)
    if (r.t == last_t) {
      xs.push_back(static_cast<double>(r.N));
      ys.push_back(r.w2);
    }
  rep.w2_fit = loglog_fit(xs, ys);
  return rep;
}

}  // namespace relarb
