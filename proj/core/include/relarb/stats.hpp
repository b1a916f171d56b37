#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relarb {

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double std_err = 0.0;
  std::size_t count = 0;
};

// Fixed pairwise reduction tree over the input order.
double pairwise_sum(std::span<const double> values);
SampleStats sample_stats(std::span<const double> values);

double normal_cdf(double z);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
};

// Ordinary least squares with a 95% normal-approximation interval on the slope.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace relarb
