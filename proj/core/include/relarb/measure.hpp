#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "relarb/model.hpp"

namespace relarb {

class EmpiricalMeasure {
 public:
  // points: M x d, one atom per row. Weights default to 1/M.
  explicit EmpiricalMeasure(Mat points, std::vector<double> weights = {});
  static EmpiricalMeasure from_values(std::span<const double> values);

  std::size_t dimension() const { return static_cast<std::size_t>(points_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  const Mat& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  bool uniform() const { return uniform_; }

  double integrate(const std::function<double(const Vec&)>& f) const;
  EmpiricalMeasure scaled(double factor) const;
  EmpiricalMeasure projected(const Vec& direction) const;

 private:
  Mat points_;
  std::vector<double> weights_;
  bool uniform_ = true;
};

EmpiricalMeasure empirical_measure(const Mat& points, std::vector<double> weights = {});

// Exact 1-D W2 through the quantile coupling; handles unequal atom counts and
// general weights.
double wasserstein2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Root mean of 1-D W2^2 over seeded uniformly random unit directions.
double sliced_wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t n_projections,
                           std::uint64_t seed);
// Same, with explicit directions (rows normalised internally).
double sliced_wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const Mat& directions);

// Exact W2 between uniform measures with equal atom counts via an optimal
// assignment (Hungarian method). Limited to 256 atoms.
double exact_wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Minimum-cost perfect assignment for a square cost matrix; returns the
// column assigned to each row.
std::vector<std::size_t> solve_assignment(const Mat& cost);

// Mean across inner paths (columns) at a node (row).
double conditional_mean(const Mat& inner_paths, std::size_t node);

}  // namespace relarb
