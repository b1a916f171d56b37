#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "relarb/model.hpp"

namespace relarb {

struct StrategyContext {
  std::size_t step = 0;  // global grid index
  double t = 0.0;
  const Vec* x = nullptr;
  std::span<const double> wealth;
  std::span<const double> v_ref;
  std::size_t path = 0;  // outer path index, used by open-loop tables
};

// Portfolio rule for all investors at a grid node.
class StrategyRule {
 public:
  virtual ~StrategyRule() = default;

  // True when every investor holds the same weights.
  virtual bool common() const { return true; }
  // Weights shared by all investors; only called when common().
  virtual void common_weights(const StrategyContext& ctx, Vec& out) const = 0;
  // Per-investor weights, one row per investor. The default broadcasts.
  virtual void weights(const StrategyContext& ctx, Mat& out) const;
  virtual std::string name() const = 0;
};

using StrategyPtr = std::shared_ptr<const StrategyRule>;

class MarketPortfolioRule final : public StrategyRule {
 public:
  void common_weights(const StrategyContext& ctx, Vec& out) const override;
  std::string name() const override { return "market"; }
};

class EqualWeightRule final : public StrategyRule {
 public:
  void common_weights(const StrategyContext& ctx, Vec& out) const override;
  std::string name() const override { return "equal_weight"; }
};

class FixedWeightsRule final : public StrategyRule {
 public:
  explicit FixedWeightsRule(Vec w) : w_(std::move(w)) {}
  void common_weights(const StrategyContext& ctx, Vec& out) const override;
  std::string name() const override { return "fixed"; }

 private:
  Vec w_;
};

// Deterministic weights per global grid index; indices past the table use
// its last row.
class TimeTableRule final : public StrategyRule {
 public:
  explicit TimeTableRule(std::vector<Vec> table);
  void common_weights(const StrategyContext& ctx, Vec& out) const override;
  std::string name() const override { return "time_table"; }

 private:
  std::vector<Vec> table_;
};

// Open-loop weights per (outer path, grid index).
class PathTableRule final : public StrategyRule {
 public:
  explicit PathTableRule(std::vector<std::vector<Vec>> table);
  void common_weights(const StrategyContext& ctx, Vec& out) const override;
  std::string name() const override { return "path_table"; }

 private:
  std::vector<std::vector<Vec>> table_;
};

class FunctionRule final : public StrategyRule {
 public:
  using Fn = std::function<void(const StrategyContext&, Vec&)>;
  explicit FunctionRule(Fn fn, std::string label = "function") : fn_(std::move(fn)), label_(std::move(label)) {}
  void common_weights(const StrategyContext& ctx, Vec& out) const override { fn_(ctx, out); }
  std::string name() const override { return label_; }

 private:
  Fn fn_;
  std::string label_;
};

// One investor follows `deviation`, everyone else follows `base`.
class DeviationRule final : public StrategyRule {
 public:
  DeviationRule(StrategyPtr base, StrategyPtr deviation, std::size_t investor = 0);
  bool common() const override { return false; }
  void common_weights(const StrategyContext& ctx, Vec& out) const override;
  void weights(const StrategyContext& ctx, Mat& out) const override;
  std::string name() const override { return "deviation"; }

 private:
  StrategyPtr base_;
  StrategyPtr deviation_;
  std::size_t investor_;
};

StrategyPtr make_strategy(const StrategySpec& spec, std::size_t n);

}  // namespace relarb
