#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "relarb/model.hpp"

namespace relarb::testing {

// Deterministic market: zero volatility, constant growth rate.
class FrozenMarket final : public MarketCoefficientOracle {
 public:
  FrozenMarket(std::size_t n, double rate) : n_(n), rate_(rate) {}
  std::size_t dimension() const override { return n_; }
  void evaluate(const MarketState&, Coefficients& out) const override {
    out.resize(n_);
    out.beta.setConstant(rate_);
    out.sigma.setZero();
  }
  MeasureDependence measure_dependence() const override { return MeasureDependence::none; }
  bool state_independent() const override { return true; }
  bool diagonal_sigma() const override { return true; }
  std::string name() const override { return "frozen"; }

 private:
  std::size_t n_;
  double rate_;
};

// Diagonal constant market with price of risk theta on every stock.
inline ScenarioConfig constant_config(std::size_t n, std::size_t N, double delta, double c, double sigma = 0.2,
                                      double theta = 0.1) {
  ScenarioConfig cfg;
  cfg.n = n;
  cfg.N = N;
  cfg.T = 1.0;
  cfg.steps = 50;
  cfg.delta = delta;
  cfg.c_law = PopulationLaw::point(c);
  cfg.v0_law = PopulationLaw::point(1.0);
  cfg.x0.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) cfg.x0[i] = 1.0 + static_cast<double>(i);
  cfg.seed = 11;
  cfg.market.kind = MarketKind::constant;
  cfg.market.sigma = Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) * sigma;
  cfg.market.beta = Vec::Constant(static_cast<Eigen::Index>(n), sigma * theta);
  cfg.solver.paths = 2000;
  cfg.solver.sub_paths = 400;
  cfg.solver.eval_nodes = 4;
  cfg.solver.max_iters = 40;
  cfg.solver.tol = 1e-8;
  return cfg;
}

inline ScenarioConfig vsm_config(std::size_t n, std::size_t N, double delta, double zeta = 0.5) {
  ScenarioConfig cfg;
  cfg.n = n;
  cfg.N = N;
  cfg.T = 0.5;
  cfg.steps = 40;
  cfg.delta = delta;
  cfg.c_law = PopulationLaw::point(0.0);
  cfg.v0_law = PopulationLaw::point(1.0);
  cfg.x0.clear();
  for (std::size_t i = 0; i < n; ++i) cfg.x0.push_back(1.0 + static_cast<double>(i));
  cfg.seed = 7;
  cfg.market.kind = MarketKind::volatility_stabilized;
  cfg.market.zeta = zeta;
  cfg.solver.paths = 2000;
  cfg.solver.sub_paths = 400;
  cfg.solver.eval_nodes = 4;
  cfg.solver.k_inner = 16;
  cfg.solver.outer_paths = 4;
  cfg.solver.max_iters = 30;
  cfg.solver.tol = 1e-4;
  return cfg;
}

}  // namespace relarb::testing
