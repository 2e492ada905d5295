#include <gtest/gtest.h>

#include <cmath>

#include "roughfut/selftest/oracles.hpp"
#include "roughfut/volterra.hpp"

using namespace roughfut;

namespace {

struct Moments {
  double var;
  double se;
};

Moments sample_variance(const Matrix& m, std::size_t k) {
  const std::size_t n = m.rows();
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = m(j, k);
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = m(j, k) - mean;
    s4 += d * d * d * d;
  }
  return {var, std::sqrt((s4 / n - var * var) / n)};
}

}  // namespace

TEST(Volterra, BrownianCaseIsCumulativeSum) {
  const TimeGrid grid(1.0, 50);
  const auto p = volterra_paths(0.5, grid, 200, 17);
  for (std::size_t j = 0; j < 200; ++j) {
    double w = 0.0;
    EXPECT_EQ(p.wtilde(j, 0), 0.0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      w += p.dw(j, k);
      EXPECT_NEAR(p.wtilde(j, k + 1), w, 1e-12);
    }
  }
}

TEST(Volterra, RejectsHurstOutsideUnitInterval) {
  const TimeGrid grid(1.0, 10);
  EXPECT_THROW(volterra_paths(0.0, grid, 10, 1), InvalidParam);
  EXPECT_THROW(volterra_paths(1.0, grid, 10, 1), InvalidParam);
}

TEST(Volterra, QuadratureOracleMatchesClosedFormVariance) {
  for (double h : {0.1, 0.3, 0.5}) {
    for (double t : {0.25, 1.0}) EXPECT_NEAR(oracle::volterra_covariance(h, t, t), std::pow(t, 2 * h), 1e-8);
  }
}

TEST(Volterra, VarianceLawRoughCase) {
  const TimeGrid grid(1.0, 100);
  const auto p = volterra_paths(0.1, grid, 100000, 2024);
  const auto m = sample_variance(p.wtilde, grid.node(1.0));
  EXPECT_NEAR(m.var, 1.0, 3.0 * m.se);
}

TEST(Volterra, CrossCovarianceMatchesQuadrature) {
  const double h = 0.3;
  const TimeGrid grid(1.0, 100);
  const auto p = volterra_paths(h, grid, 100000, 99);
  const auto ks = grid.node(0.5);
  const auto kt = grid.node(1.0);
  double c = 0.0;
  for (std::size_t j = 0; j < p.wtilde.rows(); ++j) c += p.wtilde(j, ks) * p.wtilde(j, kt);
  c /= static_cast<double>(p.wtilde.rows());
  const double exact = oracle::volterra_covariance(h, 0.5, 1.0);
  EXPECT_NEAR(c / exact, 1.0, 0.02);
}

TEST(Volterra, DeterministicAcrossThreadCountsAndPrefixes) {
  const TimeGrid grid(0.5, 60);
  const auto a = volterra_paths(0.2, grid, 301, 5, 1);
  const auto b = volterra_paths(0.2, grid, 301, 5, 4);
  EXPECT_EQ(a.wtilde, b.wtilde);
  EXPECT_EQ(a.dw, b.dw);
  const auto pre = volterra_paths(0.2, grid.prefix(10), 301, 5, 3);
  for (std::size_t j = 0; j < 301; ++j)
    for (std::size_t k = 0; k <= 10; ++k) EXPECT_EQ(pre.wtilde(j, k), a.wtilde(j, k));
}
