#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "relarb/error.hpp"
#include "relarb/measure.hpp"
#include "relarb/rng.hpp"
#include "relarb/stats.hpp"

using namespace relarb;

namespace {

std::vector<double> draws(std::uint64_t seed, std::size_t count) {
  PathRng r({seed, 0, StreamPurpose::sampling, 0});
  std::vector<double> v(count);
  for (auto& x : v) x = r.normal();
  return v;
}

Mat cloud(std::uint64_t seed, std::size_t count, double shift) {
  PathRng r({seed, 0, StreamPurpose::sampling, 0});
  Mat m(static_cast<Eigen::Index>(count), 2);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m(i, 0) = r.normal() + shift;
    m(i, 1) = r.normal();
  }
  return m;
}

}  // namespace

TEST(Empirical, SingleAtomHasFullWeight) {
  EmpiricalMeasure m(Mat::Constant(1, 2, 3.0));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m.weights()[0], 1.0);
}

TEST(Empirical, IntegralOfEqualPoints) {
  EmpiricalMeasure m(Mat::Constant(4, 2, 0.7));
  EXPECT_DOUBLE_EQ(m.integrate([](const Vec& v) { return std::exp(v.sum()); }), std::exp(1.4));
}

TEST(Empirical, BoxIndicatorCountsAtoms) {
  const std::vector<double> pts = {0.1, 0.5, 0.9, 1.2, 1.7, 2.5, 3.0, -0.4, 0.95, 1.05};
  const auto m = EmpiricalMeasure::from_values(pts);
  std::size_t inside = 0;
  for (double p : pts) inside += (p >= 0.5 && p <= 1.5) ? 1 : 0;
  const double mass = m.integrate([](const Vec& v) { return (v(0) >= 0.5 && v(0) <= 1.5) ? 1.0 : 0.0; });
  EXPECT_DOUBLE_EQ(mass, static_cast<double>(inside) / 10.0);
}

TEST(Wasserstein1d, KnownValues) {
  const std::vector<double> a = {0.0}, b = {3.0};
  EXPECT_DOUBLE_EQ(wasserstein2_1d(EmpiricalMeasure::from_values(a), EmpiricalMeasure::from_values(b)), 3.0);
  const std::vector<double> c = {0.0, 1.0}, d = {1.0, 2.0};
  const auto mc = EmpiricalMeasure::from_values(c);
  const auto md = EmpiricalMeasure::from_values(d);
  EXPECT_DOUBLE_EQ(wasserstein2_1d(mc, md), 1.0);
  EXPECT_DOUBLE_EQ(wasserstein2_1d(mc, mc), 0.0);
}

TEST(Wasserstein1d, AgreesWithAssignmentOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = EmpiricalMeasure::from_values(draws(seed, 40));
    auto bv = draws(seed + 100, 40);
    for (auto& v : bv) v = 0.5 + 2.0 * v;
    const auto b = EmpiricalMeasure::from_values(bv);
    EXPECT_NEAR(wasserstein2_1d(a, b), exact_wasserstein2(a, b), 1e-12);
  }
}

TEST(Wasserstein1d, MetricAxioms) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = EmpiricalMeasure::from_values(draws(seed, 17));
    const auto b = EmpiricalMeasure::from_values(draws(seed + 50, 23));
    const auto c = EmpiricalMeasure::from_values(draws(seed + 90, 31));
    EXPECT_EQ(wasserstein2_1d(a, b), wasserstein2_1d(b, a));
    EXPECT_LE(wasserstein2_1d(a, c), wasserstein2_1d(a, b) + wasserstein2_1d(b, c) + 1e-12);
  }
}

TEST(Wasserstein1d, PositiveScaling) {
  const auto a = EmpiricalMeasure::from_values(draws(1, 30));
  const auto b = EmpiricalMeasure::from_values(draws(2, 45));
  const double lambda = 2.75;
  EXPECT_NEAR(wasserstein2_1d(a.scaled(lambda), b.scaled(lambda)), lambda * wasserstein2_1d(a, b), 1e-12);
}

TEST(Wasserstein1d, WeightedAtoms) {
  // Mass 1/4 at 0 and 3/4 at 1 against a point mass at 1: sqrt(1/4).
  EmpiricalMeasure a(Mat((Mat(2, 1) << 0.0, 1.0).finished()), {0.25, 0.75});
  EmpiricalMeasure b(Mat::Constant(1, 1, 1.0));
  EXPECT_NEAR(wasserstein2_1d(a, b), 0.5, 1e-15);
}

TEST(Sliced, IdenticalMeasuresGiveZero) {
  const EmpiricalMeasure a(cloud(3, 50, 0.0));
  EXPECT_DOUBLE_EQ(sliced_wasserstein2(a, a, 16, 1), 0.0);
}

TEST(Sliced, AxisProjectionReducesToOneDimension) {
  const auto v = draws(4, 25), w = draws(5, 25);
  const auto a = EmpiricalMeasure::from_values(v);
  const auto b = EmpiricalMeasure::from_values(w);
  EXPECT_NEAR(sliced_wasserstein2(a, b, Mat::Ones(1, 1)), wasserstein2_1d(a, b), 1e-12);
}

TEST(Sliced, CloseToExactOnShiftedClouds) {
  const EmpiricalMeasure a(cloud(6, 128, 0.0));
  const EmpiricalMeasure b(cloud(7, 128, 1.0));
  const double exact = exact_wasserstein2(a, b);
  // Sliced W2 averages squared projections, so it sits near exact / sqrt(d).
  const double sliced = sliced_wasserstein2(a, b, 64, 9) * std::sqrt(2.0);
  EXPECT_NEAR(sliced, exact, 0.1 * exact);
}

TEST(Assignment, SolvesSmallProblem) {
  Mat cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto a = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a[i]));
  EXPECT_DOUBLE_EQ(total, 5.0);
}

TEST(Assignment, RejectsLargeMeasures) {
  const EmpiricalMeasure a(cloud(1, 300, 0.0));
  EXPECT_THROW(exact_wasserstein2(a, a), DomainError);
}

TEST(ConditionalMean, KnownValues) {
  EXPECT_DOUBLE_EQ(conditional_mean(Mat::Constant(2, 5, 5.0), 1), 5.0);
  Mat m(1, 2);
  m << 1.0, 3.0;
  EXPECT_DOUBLE_EQ(conditional_mean(m, 0), 2.0);
}

TEST(ConditionalMean, VarianceScalesInverselyWithSampleSize) {
  auto spread = [](std::size_t K) {
    std::vector<double> est(200);
    for (std::size_t r = 0; r < est.size(); ++r) {
      PathRng g({77, r, StreamPurpose::sampling, K});
      Mat row(1, static_cast<Eigen::Index>(K));
      for (Eigen::Index j = 0; j < row.cols(); ++j) row(0, j) = g.normal();
      est[r] = conditional_mean(row, 0);
    }
    return sample_stats(est).variance;
  };
  const double ratio = spread(16) / spread(256);
  EXPECT_GT(ratio, 16.0 * 0.6);
  EXPECT_LT(ratio, 16.0 / 0.6);
}
