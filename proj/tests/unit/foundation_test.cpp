#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "relarb/error.hpp"
#include "relarb/parallel.hpp"
#include "relarb/rng.hpp"
#include "relarb/stats.hpp"

using namespace relarb;

TEST(Rng, KeyedStreamsAreReproducible) {
  PathRng a({42, 3, StreamPurpose::market_noise, 0});
  PathRng b({42, 3, StreamPurpose::market_noise, 0});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, PurposeAndIndexSeparateStreams) {
  const auto base = derive_seed({42, 3, StreamPurpose::market_noise, 0});
  EXPECT_NE(base, derive_seed({42, 4, StreamPurpose::market_noise, 0}));
  EXPECT_NE(base, derive_seed({42, 3, StreamPurpose::population, 0}));
  EXPECT_NE(base, derive_seed({42, 3, StreamPurpose::market_noise, 1}));
  EXPECT_NE(base, derive_seed({43, 3, StreamPurpose::market_noise, 0}));
}

TEST(Rng, NormalStreamHasUnitMoments) {
  PathRng r({9, 0, StreamPurpose::sampling, 0});
  std::vector<double> z(200000);
  for (auto& v : z) v = r.normal();
  const auto s = sample_stats(z);
  EXPECT_NEAR(s.mean, 0.0, 4.0 * s.std_err);
  EXPECT_NEAR(s.variance, 1.0, 0.02);
}

TEST(Stats, PairwiseSumMatchesNaiveOnIntegers) {
  std::vector<double> v(1001);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(pairwise_sum(v), 1001.0 * 1002.0 / 2.0);
}

TEST(Stats, PairwiseSumIsOrderFixed) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(4097);
  for (auto& x : v) x = u(g);
  EXPECT_EQ(pairwise_sum(v), pairwise_sum(std::vector<double>(v)));
}

TEST(Stats, SampleStatsKnownValues) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const auto s = sample_stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.std_err, std::sqrt(5.0 / 12.0));
  EXPECT_EQ(s.count, 4u);
}

TEST(Stats, LinearFitRecoversExactLine) {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> y;
  for (double xi : x) y.push_back(2.0 - 0.5 * xi);
  const auto f = linear_fit(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-14);
  EXPECT_NEAR(f.intercept, 2.0, 1e-14);
  EXPECT_NEAR(f.slope_se, 0.0, 1e-12);
}

TEST(Stats, NormalCdfReferencePoints) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(normal_cdf(-1.0), 0.15865525393145707, 1e-14);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  auto run = [](std::size_t threads) {
    std::vector<double> out(257);
    parallel_for(out.size(), threads, [&](std::size_t i) {
      PathRng r({1, i, StreamPurpose::market_noise, 0});
      out[i] = r.normal();
    });
    return pairwise_sum(out);
  };
  const double one = run(1);
  EXPECT_EQ(one, run(3));
  EXPECT_EQ(one, run(8));
}

TEST(Parallel, RethrowsLowestFailingIndex) {
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 30 || i == 80) throw SimulationError("boom", i);
    });
    FAIL() << "no exception";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.step(), 30u);
  }
}

TEST(Errors, HierarchyRootsAtError) {
  EXPECT_THROW(throw DeflatorError("x", 1), SimulationError);
  EXPECT_THROW(throw InfeasibleError("x"), Error);
  EXPECT_THROW(throw ConfigError("x"), std::runtime_error);
}
