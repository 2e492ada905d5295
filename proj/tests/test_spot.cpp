#include <gtest/gtest.h>

#include <cmath>

#include "roughfut/spot.hpp"

using namespace roughfut;

namespace {

ModelSpec with_variance(VarianceModel v, double rho = -0.3, double a = 0.5) {
  return ModelSpec{std::move(v), SpotParams{a, Correlation::scalar(rho)}};
}

}  // namespace

TEST(SpotPaths, ZeroVarianceStaysAtOne) {
  const TimeGrid grid(1.0, 50);
  const Matrix v(20, grid.nodes());
  const Matrix dw(20, grid.steps());
  const auto s = spot_paths({0.5, Correlation::scalar(-0.5)}, v, dw, grid, 4);
  for (double x : s.data()) EXPECT_EQ(x, 1.0);
}

TEST(SpotPaths, RejectsCorrelationOutsideUnitInterval) {
  const TimeGrid grid(1.0, 10);
  const Matrix v(2, grid.nodes());
  const Matrix dw(2, grid.steps());
  EXPECT_THROW(spot_paths({0.5, Correlation::scalar(1.2)}, v, dw, grid, 1), InvalidParam);
  EXPECT_THROW(spot_paths({0.5, Correlation::piecewise({0.5, 1.0}, {-0.2, -1.5})}, v, dw, grid, 1), InvalidParam);
}

TEST(SpotPaths, SingleBucketEqualsScalarCorrelation) {
  const TimeGrid grid(1.0, 60);
  const auto xi = ForwardVarianceCurve::flat(0.09);
  const ModelSpec scalar = with_variance(RBergomiParams{0.1, 1.5, xi}, -0.4);
  ModelSpec bucketed = scalar;
  bucketed.spot.corr = Correlation::piecewise({1.0}, {-0.4});
  const auto a = simulate_paths(scalar, grid, 500, 9);
  const auto b = simulate_paths(bucketed, grid, 500, 9);
  EXPECT_EQ(a.s, b.s);
}

TEST(SpotPaths, PiecewiseCorrelationSwitchesAtBucketEnd) {
  const TimeGrid grid(1.0, 10);
  const Correlation c = Correlation::piecewise({0.5, 1.0}, {-0.1, -0.3});
  EXPECT_EQ(c.at(0.0), -0.1);
  EXPECT_EQ(c.at(0.49), -0.1);
  EXPECT_EQ(c.at(0.5), -0.3);
  EXPECT_EQ(c.at(2.0), -0.3);
}

TEST(SpotPaths, FlooredAtZero) {
  const TimeGrid grid(1.0, 20);
  const auto b = simulate_paths(with_variance(BergomiParams{6.0, 2.0, ForwardVarianceCurve::flat(4.0)}), grid, 2000, 3);
  for (double x : b.s.data()) ASSERT_GE(x, 0.0);
}

class SpotMean : public ::testing::TestWithParam<int> {};

TEST_P(SpotMean, NormalisedSpotIsUnbiased) {
  const auto xi = ForwardVarianceCurve({0.5, 1.0}, {0.12, 0.15}, LeftAnchor::fixed, 0.10);
  std::vector<ModelSpec> models{
      with_variance(RBergomiParams{0.0778, 2.1617, xi}, -0.3087),
      with_variance(RHestonParams{0.2774, 2.0567, 5.6187, xi}, -0.2017),
      with_variance(BergomiParams{16.4983, 46.6008, xi}, -0.2108),
      with_variance(HestonParams{9.9747, 42.8659, 0.0405, xi}, -0.2004),
  };
  const auto& model = models[GetParam()];
  const TimeGrid grid(1.0, 100);
  const auto b = simulate_paths(model, grid, 20000, 31);
  for (double t : {0.25, 0.5, 1.0}) {
    const auto k = grid.node(t);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < b.n_paths(); ++j) {
      s1 += b.s(j, k);
      s2 += b.s(j, k) * b.s(j, k);
    }
    const double n = static_cast<double>(b.n_paths());
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 1.0, 3.0 * se) << to_string(family_of(model.variance)) << " t=" << t;
  }
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, SpotMean, ::testing::Range(0, 4));

TEST(Simulate, SingleMeshGivesOneBatch) {
  const auto model = with_variance(RBergomiParams{0.1, 1.0, ForwardVarianceCurve::flat(0.04)});
  const auto out = simulate(model, DualMeshPlan::single({0.25, 0.5}, 100), 50, 2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.begin()->first, Mesh::single);
  EXPECT_DOUBLE_EQ(out.begin()->second.grid.horizon(), 0.5);
}

TEST(Simulate, DualMeshGivesIndependentFineAndCoarseBatches) {
  const auto model = with_variance(RBergomiParams{0.1, 1.0, ForwardVarianceCurve::flat(0.04)});
  const auto plan = DualMeshPlan::dual({0.5, 0.05, 0.25}, 2000, 300);
  const auto out = simulate(model, plan, 20, 2);
  ASSERT_EQ(out.size(), 2u);
  const auto& fine = out.at(Mesh::fine);
  const auto& coarse = out.at(Mesh::coarse);
  EXPECT_DOUBLE_EQ(fine.grid.horizon(), 0.05);
  EXPECT_EQ(fine.grid.steps(), 100u);
  EXPECT_DOUBLE_EQ(coarse.grid.horizon(), 0.5);
  EXPECT_NE(fine.seed, coarse.seed);
  EXPECT_EQ(plan.mesh_for(0.05), Mesh::fine);
  EXPECT_EQ(plan.mesh_for(0.25), Mesh::coarse);
}

TEST(Simulate, DeterministicAcrossRunsAndThreads) {
  const auto model = with_variance(RHestonParams{0.2, 0.8, 2.0, ForwardVarianceCurve::flat(0.06)});
  const TimeGrid grid(0.5, 80);
  const auto a = simulate_paths(model, grid, 123, 77, {1});
  const auto b = simulate_paths(model, grid, 123, 77, {4});
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.v, b.v);
  const auto c = simulate_paths(model, grid, 123, 78, {1});
  EXPECT_NE(a.s, c.s);
}
