#include <gtest/gtest.h>

#include <cmath>

#include "roughfut/selftest/oracles.hpp"
#include "roughfut/variance.hpp"

using namespace roughfut;

namespace {

struct Stat {
  double mean;
  double se;
};

Stat column_stat(const Matrix& m, std::size_t k) {
  double s1 = 0.0, s2 = 0.0;
  const double n = static_cast<double>(m.rows());
  for (std::size_t j = 0; j < m.rows(); ++j) {
    s1 += m(j, k);
    s2 += m(j, k) * m(j, k);
  }
  const double mean = s1 / n;
  return {mean, std::sqrt((s2 / n - mean * mean) / n)};
}

using oracle::rheston_xi0_curve;

}  // namespace

TEST(RBergomi, ZeroVolOfVolReproducesCurve) {
  const TimeGrid grid(1.0, 40);
  const RBergomiParams p{0.1, 0.0, ForwardVarianceCurve({0.5, 1.0}, {0.04, 0.09}, LeftAnchor::fixed, 0.02)};
  const auto b = simulate_rbergomi(p, grid, 50, 3);
  for (std::size_t j = 0; j < 50; ++j)
    for (std::size_t k = 0; k < grid.nodes(); ++k) EXPECT_DOUBLE_EQ(b.v(j, k), p.xi0.eval(grid.time(k)));
}

TEST(RBergomi, MeanVarianceMatchesForwardCurve) {
  const TimeGrid grid(0.5, 100);
  const RBergomiParams p{0.1, 1.5, ForwardVarianceCurve::flat(0.04)};
  const auto b = simulate_rbergomi(p, grid, 200000, 8);
  const auto st = column_stat(b.v, grid.node(0.5));
  EXPECT_NEAR(st.mean, 0.04, 3.0 * st.se);
  for (double x : b.v.data()) ASSERT_GT(x, 0.0);
}

TEST(RBergomi, BrownianCaseCouplesWithBergomiAsKappaVanishes) {
  const TimeGrid grid(0.5, 50);
  const auto xi = ForwardVarianceCurve::flat(0.05);
  const auto rb = simulate_rbergomi({0.5, 1.0, xi}, grid, 100, 21);
  const auto bg = simulate_bergomi({1.0, 1e-9, xi}, grid, 100, 21);
  for (std::size_t j = 0; j < 100; ++j) {
    for (std::size_t k = 0; k < grid.nodes(); ++k) EXPECT_NEAR(bg.v(j, k) / rb.v(j, k), 1.0, 1e-6);
    for (std::size_t k = 0; k < grid.steps(); ++k) EXPECT_EQ(bg.dw(j, k), rb.dw(j, k));
  }
}

TEST(Bergomi, ZeroVolOfVolReproducesCurve) {
  const TimeGrid grid(1.0, 20);
  const BergomiParams p{0.0, 3.0, ForwardVarianceCurve({1.0}, {0.07}, LeftAnchor::fixed, 0.03)};
  const auto b = simulate_bergomi(p, grid, 10, 1);
  for (std::size_t k = 0; k < grid.nodes(); ++k) EXPECT_DOUBLE_EQ(b.v(4, k), p.xi0.eval(grid.time(k)));
}

TEST(Bergomi, MeanVarianceMatchesForwardCurve) {
  const TimeGrid grid(1.0, 50);
  const BergomiParams p{4.0, 10.0, ForwardVarianceCurve::flat(0.06)};
  const auto b = simulate_bergomi(p, grid, 100000, 12);
  for (double t : {0.2, 1.0}) {
    const auto st = column_stat(b.v, grid.node(t));
    EXPECT_NEAR(st.mean, 0.06, 3.0 * st.se) << "t=" << t;
  }
}

TEST(Heston, DeterministicLimitFollowsOde) {
  const int n = 400;
  const TimeGrid grid(1.0, n);
  const HestonParams p{0.0, 2.0, 0.09, ForwardVarianceCurve::flat(0.04)};
  const auto b = simulate_heston(p, grid, 5, 1);
  for (std::size_t k = 0; k < grid.nodes(); ++k) {
    const double t = grid.time(k);
    const double exact = 0.04 + (0.09 - 0.04) * std::exp(-2.0 * t);
    EXPECT_NEAR(b.v(0, k), exact, 2.0 * 0.05 / n);
  }
}

TEST(Heston, FullTruncationKeepsVarianceNonnegative) {
  const TimeGrid grid(1.0, 50);
  const HestonParams p{1.5, 1.0, 0.02, ForwardVarianceCurve::flat(0.02)};
  const auto b = simulate_heston(p, grid, 2000, 4);
  for (double x : b.v.data()) ASSERT_GE(x, 0.0);
  EXPECT_GT(b.truncated_fraction, 0.0);
}

class RHestonBackends : public ::testing::TestWithParam<RHestonBackend> {};

TEST_P(RHestonBackends, ZeroVolOfVolWithFlatCurveIsConstant) {
  const TimeGrid grid(1.0, 30);
  const RHestonParams p{0.3, 0.0, 5.0, ForwardVarianceCurve::flat(0.05)};
  const auto b = simulate_rheston(p, grid, 20, 2, {0, GetParam()});
  for (double x : b.v.data()) EXPECT_NEAR(x, 0.05, 1e-15);
}

TEST_P(RHestonBackends, MeanMatchesVolterraEquationSolutionAtModerateVolOfVol) {
  // V0 = 0.12 relaxing to a long variance of 0.16.
  const double horizon = 1.0;
  const auto xi0 = rheston_xi0_curve(0.12, 0.16, 5.0, 0.3, horizon);
  const TimeGrid grid(horizon, 100);
  const RHestonParams p{0.3, 0.4, 5.0, xi0};
  const auto b = simulate_rheston(p, grid, 30000, 77, {0, GetParam()});
  for (double x : b.v.data()) ASSERT_GE(x, 0.0);
  for (double t : {0.1, 0.25, 0.5, 1.0}) {
    const auto st = column_stat(b.v, grid.node(t));
    const double target = xi0.eval(t);
    EXPECT_LT(std::abs(st.mean / target - 1.0), 0.02) << "t=" << t;
  }
}

TEST(RHeston, HqeMeanMatchesVolterraEquationSolutionAtHighVolOfVol) {
  const double horizon = 1.0;
  const auto xi0 = rheston_xi0_curve(0.12, 0.16, 5.0, 0.3, horizon);
  const TimeGrid grid(horizon, 100);
  const RHestonParams p{0.3, 2.0, 5.0, xi0};
  const auto b = simulate_rheston(p, grid, 30000, 77, {0, RHestonBackend::hqe});
  for (double t : {0.1, 0.25, 0.5, 1.0}) {
    const auto st = column_stat(b.v, grid.node(t));
    const double target = xi0.eval(t);
    EXPECT_LT(std::abs(st.mean / target - 1.0), 3.0 * st.se / target + 0.005) << "t=" << t;
  }
}

TEST(RHeston, EulerFlooringBiasesMeanUpwardAtHighVolOfVol) {
  // Full truncation leaves the raw scheme unbiased but the floored output is
  // not; this pins the known direction of the error.
  const TimeGrid grid(1.0, 100);
  const RHestonParams p{0.3, 2.0, 5.0, ForwardVarianceCurve::flat(0.16)};
  const auto b = simulate_rheston(p, grid, 5000, 3, {0, RHestonBackend::euler});
  const auto st = column_stat(b.v, grid.node(1.0));
  EXPECT_GT(st.mean, 0.16);
  EXPECT_GT(b.truncated_fraction, 0.1);
}

TEST_P(RHestonBackends, DeterministicAcrossThreads) {
  const TimeGrid grid(0.5, 40);
  const RHestonParams p{0.2, 1.0, 2.0, ForwardVarianceCurve::flat(0.04)};
  const auto a = simulate_rheston(p, grid, 97, 6, {1, GetParam()});
  const auto c = simulate_rheston(p, grid, 97, 6, {3, GetParam()});
  EXPECT_EQ(a.v, c.v);
  EXPECT_EQ(a.dw, c.dw);
}

INSTANTIATE_TEST_SUITE_P(All, RHestonBackends, ::testing::Values(RHestonBackend::hqe, RHestonBackend::euler),
                         [](const auto& info) { return info.param == RHestonBackend::hqe ? "hqe" : "euler"; });

TEST(RHeston, OracleSatisfiesItsFixedPoint) {
  // A stationary start (V0 = vbar) must stay flat under the fractional equation.
  const auto xi = oracle::rheston_forward_variance(0.04, [](double) { return 0.04; }, 3.0, 0.2, 1.0, 200);
  for (double x : xi) EXPECT_NEAR(x, 0.04, 1e-12);
  // H = 1/2 reduces to the ODE xi' = kappa (vbar - xi).
  const auto ode = oracle::rheston_forward_variance(0.02, [](double) { return 0.06; }, 2.0, 0.5, 1.0, 1000);
  EXPECT_NEAR(ode.back(), 0.06 + (0.02 - 0.06) * std::exp(-2.0), 1e-6);
}

TEST(QeDraw, MatchesRequestedMoments) {
  for (double psi : {0.3, 1.2, 3.0}) {
    const double m = 0.05;
    const double s2 = psi * m * m;
    std::mt19937_64 gen(1);
    std::normal_distribution<double> z;
    double s1 = 0.0, sq = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      const double x = detail::qe_draw(m, s2, z(gen));
      ASSERT_GE(x, 0.0);
      s1 += x;
      sq += x * x;
    }
    const double mean = s1 / n;
    EXPECT_NEAR(mean, m, 4.0 * std::sqrt(s2 / n));
    EXPECT_NEAR(sq / n - mean * mean, s2, 0.03 * s2) << "psi=" << psi;
  }
}
