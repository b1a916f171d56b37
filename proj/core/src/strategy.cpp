#include "relarb/strategy.hpp"

#include "relarb/error.hpp"

namespace relarb {

void StrategyRule::weights(const StrategyContext& ctx, Mat& out) const {
  Vec w(out.cols());
  common_weights(ctx, w);
  for (Eigen::Index l = 0; l < out.rows(); ++l) out.row(l) = w.transpose();
}

void MarketPortfolioRule::common_weights(const StrategyContext& ctx, Vec& out) const {
  const Vec& x = *ctx.x;
  out = x / x.sum();
}

void EqualWeightRule::common_weights(const StrategyContext& ctx, Vec& out) const {
  out.setConstant(ctx.x->size(), 1.0 / static_cast<double>(ctx.x->size()));
}

void FixedWeightsRule::common_weights(const StrategyContext&, Vec& out) const { out = w_; }

TimeTableRule::TimeTableRule(std::vector<Vec> table) : table_(std::move(table)) {
  if (table_.empty()) throw DomainError("time table strategy needs at least one row");
}

void TimeTableRule::common_weights(const StrategyContext& ctx, Vec& out) const {
  out = table_[std::min(ctx.step, table_.size() - 1)];
}

PathTableRule::PathTableRule(std::vector<std::vector<Vec>> table) : table_(std::move(table)) {
  if (table_.empty() || table_.front().empty()) throw DomainError("path table strategy is empty");
}

void PathTableRule::common_weights(const StrategyContext& ctx, Vec& out) const {
  if (ctx.path >= table_.size()) throw DomainError("path table strategy has no row for this path");
  const auto& rows = table_[ctx.path];
  out = rows[std::min(ctx.step, rows.size() - 1)];
}

DeviationRule::DeviationRule(StrategyPtr base, StrategyPtr deviation, std::size_t investor)
    : base_(std::move(base)), deviation_(std::move(deviation)), investor_(investor) {}

void DeviationRule::common_weights(const StrategyContext&, Vec&) const {
  throw DomainError("deviation rule has no common weights");
}

void DeviationRule::weights(const StrategyContext& ctx, Mat& out) const {
  base_->weights(ctx, out);
  Mat dev(out.rows(), out.cols());
  deviation_->weights(ctx, dev);
  out.row(static_cast<Eigen::Index>(investor_)) = dev.row(static_cast<Eigen::Index>(investor_));
}

StrategyPtr make_strategy(const StrategySpec& spec, std::size_t n) {
  switch (spec.kind) {
    case StrategyKind::market:
      return std::make_shared<MarketPortfolioRule>();
    case StrategyKind::equal_weight:
      return std::make_shared<EqualWeightRule>();
    case StrategyKind::fixed: {
      if (spec.weights.size() != n) throw ConfigError("fixed strategy weights must have n entries");
      return std::make_shared<FixedWeightsRule>(
          Eigen::Map<const Vec>(spec.weights.data(), static_cast<Eigen::Index>(n)));
    }
  }
  throw ConfigError("unknown strategy kind");
}

}  // namespace relarb
