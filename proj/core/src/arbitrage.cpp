#include "relarb/arbitrage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relarb/error.hpp"
#include "relarb/parallel.hpp"
#include "relarb/stats.hpp"
#include "relarb/strategy.hpp"

namespace relarb {

std::vector<double> deflated_benchmark_samples(const EngineSetup& setup, const InitialState& init,
                                               const McOptions& opts, std::size_t* floor_hits) {
  std::vector<double> samples(opts.paths);
  std::vector<std::size_t> hits(opts.paths, 0);
  parallel_for(opts.paths, opts.threads, [&](std::size_t p) {
    const PathOutcome out = run_path(setup, init, {opts.seed, p, opts.purpose, opts.sub});
    samples[p] = out.deflated_benchmark_ratio();
    hits[p] = out.floor_hits;
  });
  if (floor_hits) *floor_hits = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
  return samples;
}

ArbitrageEstimate estimate_u_mc(const EngineSetup& setup, const InitialState& init, double c, const McOptions& opts) {
  ArbitrageEstimate est;
  est.c = c;
  est.n_paths = opts.paths;
  const auto samples = deflated_benchmark_samples(setup, init, opts, &est.floor_hits);
  const SampleStats st = sample_stats(samples);
  est.u_normalized = st.mean;
  est.std_err_normalized = st.std_err;
  est.u_hat = std::exp(c) * st.mean;
  est.std_err = std::exp(c) * st.std_err;
  if (opts.paths < 100) est.warnings.push_back("fewer than 100 paths; standard error unreliable");
  if (est.floor_hits > 0)
    est.warnings.push_back(std::to_string(est.floor_hits) + " log-state clamps on degenerate paths");
  if (!(est.u_hat > 0.0)) est.warnings.push_back("non-positive estimate");
  return est;
}

namespace {

McOptions options_from(const ScenarioConfig& cfg, std::size_t n_paths, std::uint64_t seed) {
  McOptions o;
  o.paths = n_paths;
  o.seed = seed;
  o.threads = cfg.solver.threads;
  return o;
}

}  // namespace

ArbitrageEstimate estimate_u_mc(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                                std::size_t investor, std::size_t n_paths, std::uint64_t seed) {
  check_structure(cfg);
  if (investor >= cfg.N) throw DomainError("investor index out of range");
  const auto strategy = make_strategy(cfg.strategy, cfg.n);
  const EngineSetup setup = make_setup(oracle, *strategy, cfg);
  return estimate_u_mc(setup, initial_state(cfg), cfg.c()[investor], options_from(cfg, n_paths, seed));
}

ArbitrageEstimate estimate_u_mc(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, double c,
                                std::size_t n_paths, std::uint64_t seed) {
  check_structure(cfg);
  const auto strategy = make_strategy(cfg.strategy, cfg.n);
  const EngineSetup setup = make_setup(oracle, *strategy, cfg);
  return estimate_u_mc(setup, initial_state(cfg), c, options_from(cfg, n_paths, seed));
}

// ---------------------------------------------------------------------------

namespace {

struct BumpResult {
  double value = 0.0;
  double se = 0.0;
  double dvalue = 0.0;  // derivative of the normalized value
  double dvalue_se = 0.0;
  bool one_sided = false;
};

BumpResult central_log_difference(const std::vector<double>& plus, const std::vector<double>& minus,
                                  double span, double base_mean) {
  BumpResult r;
  const double mp = pairwise_sum(plus) / static_cast<double>(plus.size());
  const double mm = pairwise_sum(minus) / static_cast<double>(minus.size());
  r.value = (std::log(mp) - std::log(mm)) / span;
  std::vector<double> diff(plus.size());
  for (std::size_t p = 0; p < plus.size(); ++p) diff[p] = (plus[p] - minus[p]) / span;
  const SampleStats st = sample_stats(diff);
  r.dvalue = st.mean;
  r.dvalue_se = st.std_err;
  r.se = st.std_err / base_mean;
  return r;
}

}  // namespace

GradientBlock grad_log_u(const EngineSetup& setup, const InitialState& base, const BumpSpec& bump,
                         const McOptions& opts) {
  GradientBlock g;
  const auto n = base.x.size();
  const auto s0 = deflated_benchmark_samples(setup, base, opts);
  const SampleStats st0 = sample_stats(s0);
  g.u_normalized = st0.mean;
  g.u_se = st0.std_err;
  if (!(st0.mean > 0.0)) throw DomainError("grad_log_u: non-positive base value");
  auto width = [&](double coord) { return std::max(bump.h_abs, bump.h_rel * std::abs(coord)); };

  g.dx = Vec::Zero(n);
  g.dx_se = Vec::Zero(n);
  g.one_sided_x.assign(static_cast<std::size_t>(n), false);
  if (bump.bump_x) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = width(base.x(i));
      InitialState up = base;
      up.x(i) += h;
      const auto sp = deflated_benchmark_samples(setup, up, opts);
      BumpResult r;
      if (base.x(i) - h > 0.0) {
        InitialState dn = base;
        dn.x(i) -= h;
        r = central_log_difference(sp, deflated_benchmark_samples(setup, dn, opts), 2.0 * h, st0.mean);
      } else {
        r = central_log_difference(sp, s0, h, st0.mean);
        r.one_sided = true;
        g.warnings.push_back("one-sided x difference for coordinate " + std::to_string(i));
      }
      g.dx(i) = r.value;
      g.dx_se(i) = r.se;
      g.one_sided_x[static_cast<std::size_t>(i)] = r.one_sided;
    }
  }

  g.dy = Vec::Zero(n);
  g.dy_se = Vec::Zero(n);
  g.one_sided_y.assign(static_cast<std::size_t>(n), false);
  g.y_available = setup.y_mode == YMode::exogenous;
  if (bump.bump_y && g.y_available) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = width(base.y(i));
      InitialState up = base;
      up.y(i) += h;
      const auto sp = deflated_benchmark_samples(setup, up, opts);
      BumpResult r;
      if (base.y(i) - h >= 0.0) {
        InitialState dn = base;
        dn.y(i) -= h;
        r = central_log_difference(sp, deflated_benchmark_samples(setup, dn, opts), 2.0 * h, st0.mean);
      } else {
        r = central_log_difference(sp, s0, h, st0.mean);
        r.one_sided = true;
        g.warnings.push_back("one-sided y difference for coordinate " + std::to_string(i));
      }
      g.dy(i) = r.value;
      g.dy_se(i) = r.se;
      g.one_sided_y[static_cast<std::size_t>(i)] = r.one_sided;
    }
  } else if (!g.y_available) {
    g.warnings.push_back("invested capital is endogenous; y-gradient not defined and reported as zero");
  }

  if (bump.bump_m) {
    double m0 = 0.0;
    for (std::size_t l = 0; l < base.wealth.size(); ++l) m0 += base.wealth[l] / setup.v_ref[l];
    m0 /= static_cast<double>(base.wealth.size());
    const double h = width(m0);
    auto scaled = [&](double target) {
      InitialState s = base;
      for (double& w : s.wealth) w *= target / m0;
      return s;
    };
    const auto sp = deflated_benchmark_samples(setup, scaled(m0 + h), opts);
    BumpResult r;
    if (m0 - h > 0.0) {
      r = central_log_difference(sp, deflated_benchmark_samples(setup, scaled(m0 - h), opts), 2.0 * h, st0.mean);
    } else {
      r = central_log_difference(sp, s0, h, st0.mean);
      r.one_sided = true;
      g.warnings.push_back("one-sided m difference");
    }
    g.dm = r.value;
    g.dm_se = r.se;
    g.du_dm = r.dvalue;
    g.du_dm_se = r.dvalue_se;
    g.one_sided_m = r.one_sided;
  }
  return g;
}

GradientBlock grad_log_u(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, const BumpSpec& bump,
                         std::uint64_t seed, std::size_t n_paths) {
  check_structure(cfg);
  const auto strategy = make_strategy(cfg.strategy, cfg.n);
  const EngineSetup setup = make_setup(oracle, *strategy, cfg);
  return grad_log_u(setup, initial_state(cfg), bump, options_from(cfg, n_paths, seed));
}

Vec initial_invested(const ScenarioConfig& cfg, const StrategyRule& strategy) {
  const auto n = static_cast<Eigen::Index>(cfg.n);
  if (cfg.y_mode == YMode::exogenous) return Eigen::Map<const Vec>(cfg.y0.data(), n);
  const auto v = cfg.v0();
  const Vec x = Eigen::Map<const Vec>(cfg.x0.data(), n);
  Mat Pi(static_cast<Eigen::Index>(cfg.N), n);
  StrategyContext ctx;
  ctx.x = &x;
  ctx.wealth = v;
  ctx.v_ref = v;
  strategy.weights(ctx, Pi);
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t l = 0; l < cfg.N; ++l) s += v[l] * Pi(static_cast<Eigen::Index>(l), i);
    y(i) = s / static_cast<double>(cfg.N);
  }
  return y;
}

double initial_benchmark(const ScenarioConfig& cfg) {
  const double total = std::accumulate(cfg.x0.begin(), cfg.x0.end(), 0.0);
  return cfg.delta * total + (1.0 - cfg.delta);
}

// ---------------------------------------------------------------------------
// Generator

LocalDerivatives stencil_derivatives(const Stencil& s, const Vec& x, const Vec& y) {
  if (s.points_per_axis < 3) throw DomainError("stencil too small for second differences");
  if (s.hx.size() != x.size() || s.hy.size() != y.size()) throw DomainError("stencil step sizes mismatch");
  const bool wide = s.points_per_axis >= 5;
  LocalDerivatives d;
  const double f0 = s.f(x, y);

  // Coordinates 0..n-1 are x, n..2n-1 are y.
  const auto nx = x.size();
  const auto ny = y.size();
  auto eval = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
    Vec xx = x, yy = y;
    auto shift = [&](Eigen::Index k, double h) {
      if (k < nx)
        xx(k) += h;
      else
        yy(k - nx) += h;
    };
    if (i >= 0) shift(i, di);
    if (j >= 0) shift(j, dj);
    return s.f(xx, yy);
  };
  auto step = [&](Eigen::Index k) { return k < nx ? s.hx(k) : s.hy(k - nx); };

  const Eigen::Index total = nx + ny;
  Vec grad(total);
  Mat hess = Mat::Zero(total, total);
  for (Eigen::Index i = 0; i < total; ++i) {
    const double h = step(i);
    const double fp = eval(i, h, -1, 0.0), fm = eval(i, -h, -1, 0.0);
    if (wide) {
      const double fp2 = eval(i, 2 * h, -1, 0.0), fm2 = eval(i, -2 * h, -1, 0.0);
      grad(i) = (-fp2 + 8 * fp - 8 * fm + fm2) / (12 * h);
      hess(i, i) = (-fp2 + 16 * fp - 30 * f0 + 16 * fm - fm2) / (12 * h * h);
    } else {
      grad(i) = (fp - fm) / (2 * h);
      hess(i, i) = (fp - 2 * f0 + fm) / (h * h);
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = step(j);
      const double v = (eval(i, h, j, hj) - eval(i, h, j, -hj) - eval(i, -h, j, hj) + eval(i, -h, j, -hj)) /
                       (4 * h * hj);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  d.dx = grad.head(nx);
  d.dy = grad.tail(ny);
  d.dxx = hess.topLeftCorner(nx, nx);
  d.dyy = hess.bottomRightCorner(ny, ny);
  return d;
}

double apply_generator(const MarketCoefficientOracle& oracle, const GeneratorPoint& p, const LocalDerivatives& d) {
  MarketState st;
  st.t = p.t;
  st.x = p.x;
  st.y = p.y;
  st.m = p.m;
  const Mat a = oracle.level_covariance(st);
  double out = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out += 0.5 * a(i, j) * (d.dxx(i, j) + 2.0 * p.delta * d.dx(i) / p.vbench0);
  if (d.dyy.size() > 0) {
    const Mat psi = oracle.invested_covariance(st);
    for (Eigen::Index q = 0; q < psi.rows(); ++q)
      for (Eigen::Index r = 0; r < psi.cols(); ++r) out += 0.5 * psi(q, r) * d.dyy(q, r);
  }
  return out;
}

double apply_generator(const MarketCoefficientOracle& oracle, const GeneratorPoint& p, const Stencil& s) {
  return apply_generator(oracle, p, stencil_derivatives(s, p.x, p.y));
}

// ---------------------------------------------------------------------------
// Fichera drift

std::string to_string(FaceVerdict v) {
  switch (v) {
    case FaceVerdict::nonnegative_on_face:
      return "nonnegative_on_face";
    case FaceVerdict::negative_on_face:
      return "negative_on_face";
    case FaceVerdict::mixed:
      return "mixed";
  }
  return "mixed";
}

std::string to_string(FicheraVerdict v) {
  switch (v) {
    case FicheraVerdict::no_relative_arbitrage:
      return "no_relative_arbitrage";
    case FicheraVerdict::relative_arbitrage_exists:
      return "relative_arbitrage_exists";
    case FicheraVerdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

namespace {

// Row sums of the derivative of the block-diagonal auxiliary diffusion
// matrix by one-sided or central differences into the orthant.
Vec numeric_divergence(const MarketCoefficientOracle& oracle, const MarketState& st, const FicheraBox& box) {
  const auto n = st.x.size();
  Vec div = Vec::Zero(2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = 1e-5 * box.x_upper(j);
    MarketState up = st, dn = st;
    up.x(j) += h;
    const Mat ap = oracle.level_covariance(up);
    Mat am;
    double span;
    if (st.x(j) - h > 0.0) {
      dn.x(j) -= h;
      am = oracle.level_covariance(dn);
      span = 2.0 * h;
    } else {
      am = oracle.level_covariance(st);
      span = h;
    }
    for (Eigen::Index i = 0; i < n; ++i) div(i) += (ap(i, j) - am(i, j)) / span;
  }
  for (Eigen::Index q = 0; q < n; ++q) {
    const double h = 1e-5 * box.y_upper(q);
    MarketState up = st, dn = st;
    up.y(q) += h;
    const Mat pp = oracle.invested_covariance(up);
    Mat pm;
    double span;
    if (st.y(q) - h > 0.0) {
      dn.y(q) -= h;
      pm = oracle.invested_covariance(dn);
      span = 2.0 * h;
    } else {
      pm = oracle.invested_covariance(st);
      span = h;
    }
    for (Eigen::Index p = 0; p < n; ++p) div(n + p) += (pp(p, q) - pm(p, q)) / span;
  }
  return div;
}

}  // namespace

FicheraReport fichera_check(const MarketCoefficientOracle& oracle, const FicheraBox& box,
                            std::size_t samples_per_face, double tol) {
  const auto n = static_cast<Eigen::Index>(oracle.dimension());
  if (box.x_upper.size() != n || box.y_upper.size() != n) throw DomainError("Fichera box dimension mismatch");
  if (samples_per_face < 1) throw DomainError("Fichera check needs at least one sample per face");
  FicheraReport rep;
  rep.analytic_derivatives = true;
  for (Eigen::Index face = 0; face < 2 * n; ++face) {
    FaceRecord rec;
    rec.face = static_cast<std::size_t>(face);
    rec.y_face = face >= n;
    rec.coordinate = static_cast<std::size_t>(rec.y_face ? face - n : face);
    rec.f_min = std::numeric_limits<double>::infinity();
    rec.f_max = -std::numeric_limits<double>::infinity();
    bool bad = false;
    for (std::size_t s = 0; s < samples_per_face; ++s) {
      PathRng rng({box.seed, s, StreamPurpose::fichera, static_cast<std::uint64_t>(face)});
      MarketState st;
      st.m = box.m;
      st.x.resize(n);
      st.y.resize(n);
      for (Eigen::Index j = 0; j < n; ++j) st.x(j) = box.x_upper(j) * (0.01 + 0.99 * rng.uniform());
      for (Eigen::Index j = 0; j < n; ++j) st.y(j) = box.y_upper(j) * (0.01 + 0.99 * rng.uniform());
      if (rec.y_face)
        st.y(face - n) = 0.0;
      else
        st.x(face) = 0.0;
      double f;
      try {
        auto div = oracle.covariance_divergence(st);
        if (!div) {
          rep.analytic_derivatives = false;
          div = numeric_divergence(oracle, st, box);
        }
        if (rec.y_face) {
          f = -0.5 * (*div)(face);
        } else {
          const Mat a = oracle.level_covariance(st);
          const double bhat = box.delta / box.vbench0 * a.row(face).sum();
          f = bhat - 0.5 * (*div)(face);
        }
      } catch (const Error& e) {
        f = std::numeric_limits<double>::quiet_NaN();
        rec.diagnostic = e.what();
      }
      if (!std::isfinite(f)) {
        bad = true;
        if (rec.diagnostic.empty()) rec.diagnostic = "non-finite Fichera drift estimate";
        continue;
      }
      rec.f_min = std::min(rec.f_min, f);
      rec.f_max = std::max(rec.f_max, f);
    }
    if (bad)
      rec.verdict = FaceVerdict::mixed;
    else if (rec.f_min >= -tol)
      rec.verdict = FaceVerdict::nonnegative_on_face;
    else if (rec.f_max < -tol)
      rec.verdict = FaceVerdict::negative_on_face;
    else
      rec.verdict = FaceVerdict::mixed;
    rep.faces.push_back(rec);
  }
  const bool all_nonneg = std::all_of(rep.faces.begin(), rep.faces.end(),
                                      [](const FaceRecord& r) { return r.verdict == FaceVerdict::nonnegative_on_face; });
  const bool all_neg = std::all_of(rep.faces.begin(), rep.faces.end(),
                                   [](const FaceRecord& r) { return r.verdict == FaceVerdict::negative_on_face; });
  rep.verdict = all_nonneg ? FicheraVerdict::no_relative_arbitrage
                           : (all_neg ? FicheraVerdict::relative_arbitrage_exists : FicheraVerdict::inconclusive);
  return rep;
}

FicheraBox fichera_box(const ScenarioConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(cfg.n);
  FicheraBox box;
  box.x_upper.resize(n);
  box.y_upper.resize(n);
  const auto strategy = make_strategy(cfg.strategy, cfg.n);
  const Vec y_init = initial_invested(cfg, *strategy);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    box.x_upper(i) = cfg.fichera.x_upper.size() == cfg.n ? cfg.fichera.x_upper[k] : 2.0 * cfg.x0[k];
    box.y_upper(i) = cfg.fichera.y_upper.size() == cfg.n ? cfg.fichera.y_upper[k]
                                                          : (y_init(i) > 0.0 ? 2.0 * y_init(i) : 1.0);
  }
  box.delta = cfg.delta;
  box.vbench0 = initial_benchmark(cfg);
  box.seed = cfg.seed;
  return box;
}

}  // namespace relarb
