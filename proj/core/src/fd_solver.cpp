#include <algorithm>
#include <cmath>
#include <limits>

#include "relarb/arbitrage.hpp"
#include "relarb/error.hpp"
#include "relarb/strategy.hpp"

// Explicit upwind marching of the one-stock Cauchy problem in (log x, log y).

namespace relarb {

namespace {

struct Operator {
  std::size_t nx = 0, ny = 0;
  double hx = 0.0, hy = 0.0;
  std::vector<double> log_x, log_y;
  // Per-node coefficients of u_xixi, u_xi, u_etaeta, u_eta.
  Mat dxx, cx, dyy, cy;
  double rate = 0.0;  // max explicit amplification rate
};

std::vector<double> axis(double centre, double factor, std::size_t nodes) {
  std::vector<double> a(nodes);
  const double lo = std::log(centre / factor), hi = std::log(centre * factor);
  for (std::size_t i = 0; i < nodes; ++i)
    a[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nodes - 1);
  return a;
}

double resolve_y0(const ScenarioConfig& cfg) {
  const auto strategy = make_strategy(cfg.strategy, cfg.n);
  const double y = initial_invested(cfg, *strategy)(0);
  return y > 0.0 ? y : 1.0;
}

Operator build_operator(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, const CauchyGridSpec& spec,
                        double box_factor) {
  if (cfg.n != 1 || oracle.dimension() != 1) throw DomainError("finite-difference solver supports n = 1 only");
  if (!oracle.time_homogeneous()) throw DomainError("finite-difference solver needs time-homogeneous coefficients");
  if (spec.nodes_x < 3 || spec.nodes_y < 3) throw DomainError("finite-difference grid needs at least 3 nodes per axis");
  if (!(box_factor > 1.0)) throw DomainError("truncation box factor must exceed 1");
  Operator op;
  op.nx = spec.nodes_x;
  op.ny = spec.nodes_y;
  op.log_x = axis(cfg.x0[0], box_factor, op.nx);
  op.log_y = axis(resolve_y0(cfg), box_factor, op.ny);
  op.hx = op.log_x[1] - op.log_x[0];
  op.hy = op.log_y[1] - op.log_y[0];
  const auto NX = static_cast<Eigen::Index>(op.nx), NY = static_cast<Eigen::Index>(op.ny);
  op.dxx.resize(NX, NY);
  op.cx.resize(NX, NY);
  op.dyy.resize(NX, NY);
  op.cy.resize(NX, NY);
  const double vb0 = initial_benchmark(cfg);
  MarketState st;
  st.x.resize(1);
  st.y.resize(1);
  st.m = 1.0;
  for (Eigen::Index i = 0; i < NX; ++i) {
    const double x = std::exp(op.log_x[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < NY; ++j) {
      const double y = std::exp(op.log_y[static_cast<std::size_t>(j)]);
      st.x(0) = x;
      st.y(0) = y;
      const double a = oracle.level_covariance(st)(0, 0);
      const double psi = oracle.invested_covariance(st)(0, 0);
      if (!std::isfinite(a) || !std::isfinite(psi)) throw DomainError("non-finite diffusion on the grid");
      op.dxx(i, j) = 0.5 * a / (x * x);
      op.cx(i, j) = -0.5 * a / (x * x) + cfg.delta * a / (x * vb0);
      op.dyy(i, j) = 0.5 * psi / (y * y);
      op.cy(i, j) = -0.5 * psi / (y * y);
      const double r = 2.0 * op.dxx(i, j) / (op.hx * op.hx) + std::abs(op.cx(i, j)) / op.hx +
                       2.0 * op.dyy(i, j) / (op.hy * op.hy) + std::abs(op.cy(i, j)) / op.hy;
      op.rate = std::max(op.rate, r);
    }
  }
  return op;
}

// Discrete operator at one node. Edges drop the second difference and take
// an upwind first difference only when the upwind neighbour exists.
double apply(const Operator& op, const Mat& u, Eigen::Index i, Eigen::Index j) {
  const auto NX = static_cast<Eigen::Index>(op.nx), NY = static_cast<Eigen::Index>(op.ny);
  const double u0 = u(i, j);
  double out = 0.0;
  const bool ix = i > 0 && i < NX - 1;
  const bool iy = j > 0 && j < NY - 1;
  if (ix) out += op.dxx(i, j) * (u(i + 1, j) - 2.0 * u0 + u(i - 1, j)) / (op.hx * op.hx);
  if (iy) out += op.dyy(i, j) * (u(i, j + 1) - 2.0 * u0 + u(i, j - 1)) / (op.hy * op.hy);
  const double cx = op.cx(i, j);
  if (cx > 0.0 && i < NX - 1) out += cx * (u(i + 1, j) - u0) / op.hx;
  if (cx < 0.0 && i > 0) out += cx * (u0 - u(i - 1, j)) / op.hx;
  const double cy = op.cy(i, j);
  if (cy > 0.0 && j < NY - 1) out += cy * (u(i, j + 1) - u0) / op.hy;
  if (cy < 0.0 && j > 0) out += cy * (u0 - u(i, j - 1)) / op.hy;
  return out;
}

struct March {
  Mat values;
  std::vector<CauchySlice> slices;
  std::vector<double> max_trace;
  double dtau = 0.0;
  std::size_t substeps = 0;
  double cfl = 0.0;
  double min_value = 0.0;
};

March march(const Operator& op, double T, double c, const CauchyGridSpec& spec) {
  March m;
  const auto NX = static_cast<Eigen::Index>(op.nx), NY = static_cast<Eigen::Index>(op.ny);
  const double cfl_target = std::min(spec.cfl, 0.9);
  if (!(cfl_target > 0.0)) throw DomainError("CFL target must be positive");
  m.substeps = op.rate > 0.0 ? static_cast<std::size_t>(std::ceil(T * op.rate / cfl_target)) : 1;
  m.substeps = std::max<std::size_t>(m.substeps, 1);
  m.dtau = T / static_cast<double>(m.substeps);
  m.cfl = m.dtau * op.rate;

  Mat u = Mat::Constant(NX, NY, std::exp(c));
  Mat next(NX, NY);
  const bool absorbing = spec.boundary == FdBoundary::absorbing_lower_x;
  const std::size_t stride = std::max<std::size_t>(1, m.substeps / 1000);
  m.max_trace.push_back(u.maxCoeff());
  std::vector<double> taus = spec.slice_taus;
  std::sort(taus.begin(), taus.end());
  std::size_t next_slice = 0;
  while (next_slice < taus.size() && taus[next_slice] <= 0.0) m.slices.push_back({taus[next_slice++], u});
  m.min_value = u.minCoeff();
  for (std::size_t s = 1; s <= m.substeps; ++s) {
    for (Eigen::Index i = 0; i < NX; ++i)
      for (Eigen::Index j = 0; j < NY; ++j) next(i, j) = u(i, j) + m.dtau * apply(op, u, i, j);
    if (absorbing) next.row(0).setZero();
    u.swap(next);
    const double tau = m.dtau * static_cast<double>(s);
    m.min_value = std::min(m.min_value, u.minCoeff());
    if (s % stride == 0 || s == m.substeps) m.max_trace.push_back(u.maxCoeff());
    while (next_slice < taus.size() && taus[next_slice] <= tau + 0.5 * m.dtau) m.slices.push_back({taus[next_slice++], u});
  }
  m.values = std::move(u);
  return m;
}

double interpolate(const std::vector<double>& ax, const std::vector<double>& ay, const Mat& v, double lx, double ly) {
  auto locate = [](const std::vector<double>& a, double p, std::size_t& k, double& w) {
    if (p < a.front() || p > a.back()) throw DomainError("point outside the finite-difference grid");
    const double h = a[1] - a[0];
    k = std::min(static_cast<std::size_t>((p - a.front()) / h), a.size() - 2);
    w = (p - a[k]) / h;
  };
  std::size_t i, j;
  double wx, wy;
  locate(ax, lx, i, wx);
  locate(ay, ly, j, wy);
  const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
  return (1 - wx) * (1 - wy) * v(I, J) + wx * (1 - wy) * v(I + 1, J) + (1 - wx) * wy * v(I, J + 1) +
         wx * wy * v(I + 1, J + 1);
}

}  // namespace

double CauchyGrid::value_at(double x, double y) const {
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("grid lookup needs positive coordinates");
  return interpolate(log_x, log_y, values, std::log(x), std::log(y));
}

double CauchyGrid::grad_log_x(double x, double y) const {
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("grid lookup needs positive coordinates");
  const double h = log_x[1] - log_x[0];
  const double lx = std::log(x), ly = std::log(y);
  const double lo = std::max(lx - h, log_x.front()), hi = std::min(lx + h, log_x.back());
  const double up = interpolate(log_x, log_y, values, hi, ly);
  const double dn = interpolate(log_x, log_y, values, lo, ly);
  if (!(up > 0.0) || !(dn > 0.0)) throw DomainError("log-gradient undefined where the grid value vanishes");
  return (std::log(up) - std::log(dn)) / (hi - lo) / x;
}

CauchyGrid solve_cauchy_fd(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg,
                           const CauchyGridSpec& spec, double c) {
  check_structure(cfg);
  const Operator op = build_operator(oracle, cfg, spec, spec.box_factor);
  March m = march(op, cfg.T, c, spec);

  CauchyGrid g;
  g.log_x = op.log_x;
  g.log_y = op.log_y;
  g.x0 = cfg.x0[0];
  g.y0 = resolve_y0(cfg);
  g.tau_final = cfg.T;
  g.c = c;
  g.values = std::move(m.values);
  g.slices = std::move(m.slices);
  g.boundary = spec.boundary == FdBoundary::outflow ? "outflow" : "absorbing_lower_x";
  g.cfl = m.cfl;
  g.dtau = m.dtau;
  g.substeps = m.substeps;
  g.min_value = m.min_value;
  g.nonnegative = m.min_value >= 0.0;
  g.max_trace = std::move(m.max_trace);
  g.max_non_increasing = true;
  for (std::size_t k = 1; k < g.max_trace.size(); ++k)
    if (g.max_trace[k] > g.max_trace[k - 1] * (1.0 + 1e-12)) g.max_non_increasing = false;

  if (spec.sentinel) {
    const double inner_factor = std::sqrt(spec.box_factor);
    const Operator small = build_operator(oracle, cfg, spec, inner_factor);
    const March ms = march(small, cfg.T, c, spec);
    const double v_big = g.value_at(g.x0, g.y0);
    const double v_small = interpolate(small.log_x, small.log_y, ms.values, std::log(g.x0), std::log(g.y0));
    g.sentinel_gap = std::abs(v_big - v_small);
    g.box_warning = g.sentinel_gap > spec.sentinel_tol * std::max(1.0, std::abs(v_big));
  }
  return g;
}

double fd_residual(const MarketCoefficientOracle& oracle, const ScenarioConfig& cfg, const CauchyGridSpec& spec,
                   const Mat& values) {
  const Operator op = build_operator(oracle, cfg, spec, spec.box_factor);
  if (values.rows() != static_cast<Eigen::Index>(op.nx) || values.cols() != static_cast<Eigen::Index>(op.ny))
    throw DomainError("residual grid shape mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 1; i + 1 < values.rows(); ++i)
    for (Eigen::Index j = 1; j + 1 < values.cols(); ++j) worst = std::max(worst, std::abs(apply(op, values, i, j)));
  return worst;
}

}  // namespace relarb
