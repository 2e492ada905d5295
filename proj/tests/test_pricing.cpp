#include <gtest/gtest.h>

#include <cmath>

#include "roughfut/black.hpp"
#include "roughfut/pricing.hpp"

using namespace roughfut;

namespace {

ModelSpec model_of(VarianceModel v, double rho = -0.3, double a = 0.5) {
  return ModelSpec{std::move(v), SpotParams{a, Correlation::scalar(rho)}};
}

PathBatch rbergomi_batch(double a, std::size_t n, std::uint64_t seed = 5) {
  const TimeGrid grid(0.5, 100);
  return simulate_paths(model_of(RBergomiParams{0.1, 1.5, ForwardVarianceCurve::flat(0.09)}, -0.3, a), grid, n, seed);
}

}  // namespace

TEST(FuturesPrice, ClosedForm) {
  EXPECT_NEAR(futures_price(0.9, 0.0, 1.0, 0.5, 100.0), 100.0 * (1.0 - 0.1 * std::exp(-0.5)), 1e-12);
  EXPECT_NEAR(futures_price(0.9, 0.0, 1.0, 0.5, 100.0), 93.93469340287367, 1e-9);
  for (double a : {0.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(futures_price(1.0, 0.2, 0.7, a, 64.0), 64.0);
  EXPECT_DOUBLE_EQ(futures_price(0.8, 0.1, 0.9, 0.0, 50.0), 40.0);
  EXPECT_THROW(futures_price(1.0, 1.0, 0.5, 0.5, 50.0), InvalidParam);
  // Not clamped: s = 0 and small a gives a non-positive price.
  EXPECT_LE(futures_price(0.0, 0.0, 0.1, 0.0, 50.0), 0.0);
}

TEST(FuturesCurve, LogLinearBetweenPillars) {
  const FuturesCurve c({{0.5, 60.0}, {1.0, 70.0}});
  EXPECT_DOUBLE_EQ(c(0.2), 60.0);
  EXPECT_DOUBLE_EQ(c(2.0), 70.0);
  EXPECT_NEAR(c(0.75), std::sqrt(60.0 * 70.0), 1e-12);
  EXPECT_THROW(FuturesCurve({{0.5, -1.0}}), InvalidParam);
}

TEST(McVanilla, ZeroStrikeCallIsTheMeanFutures) {
  const auto b = rbergomi_batch(0.5, 20000);
  const FuturesCurve curve(70.0);
  const auto p = mc_vanilla(b, {0.0, 0.5, 0.6, true}, 0.5, curve);
  EXPECT_NEAR(p.price, 70.0, 3.0 * p.std_error);
}

TEST(McVanilla, FarStrikeCallIsWorthless) {
  const auto b = rbergomi_batch(0.5, 2000);
  const auto p = mc_vanilla(b, {1e6, 0.5, 0.6, true}, 0.5, FuturesCurve(70.0));
  EXPECT_EQ(p.price, 0.0);
}

TEST(McVanilla, PutCallParityOnSharedPaths) {
  const auto b = rbergomi_batch(1.0, 5000);
  const FuturesCurve curve(70.0);
  const auto mean_f = mc_vanilla(b, {0.0, 0.5, 0.75, true}, 1.0, curve).price;
  for (double k : {50.0, 70.0, 90.0}) {
    const auto c = mc_vanilla(b, {k, 0.5, 0.75, true}, 1.0, curve);
    const auto p = mc_vanilla(b, {k, 0.5, 0.75, false}, 1.0, curve);
    EXPECT_NEAR(c.price - p.price, mean_f - k, 1e-10 * k);
  }
}

TEST(McVanilla, CallPriceNonIncreasingInStrike) {
  const auto b = rbergomi_batch(0.5, 3000);
  double prev = 1e300;
  for (double k = 30.0; k <= 120.0; k += 2.5) {
    const double p = mc_vanilla(b, {k, 0.5, 0.5, true}, 0.5, FuturesCurve(70.0)).price;
    EXPECT_LE(p, prev);
    prev = p;
  }
}

TEST(McVanilla, ExpiryMustBeAGridNode) {
  const auto b = rbergomi_batch(0.5, 10);
  EXPECT_THROW(mc_vanilla(b, {70.0, 0.123, 0.5, true}, 0.5, FuturesCurve(70.0)), GridMismatch);
}

TEST(McVanilla, ControlVariateKeepsPriceAndShrinksError) {
  const auto b = rbergomi_batch(0.5, 20000);
  const FuturesCurve curve(70.0);
  const VanillaSpec spec{65.0, 0.5, 0.5, true};
  const auto plain = mc_vanilla(b, spec, 0.5, curve, false);
  const auto cv = mc_vanilla(b, spec, 0.5, curve, true);
  EXPECT_NEAR(cv.price, plain.price, 3.0 * plain.std_error);
  EXPECT_LT(cv.std_error, plain.std_error);
}

TEST(Black, ZeroVolLimitIsIntrinsic) {
  for (double k : {80.0, 100.0, 120.0}) {
    EXPECT_NEAR(black_price(100.0, k, 0.5, 1e-15), std::max(100.0 - k, 0.0), 1e-12);
    EXPECT_NEAR(black_price(100.0, k, 0.5, 1e-15, false), std::max(k - 100.0, 0.0), 1e-12);
  }
}

TEST(Black, AtTheMoneyFormula) {
  for (double s : {0.1, 0.35, 1.2}) {
    const double t = 0.7;
    EXPECT_NEAR(black_price(80.0, 80.0, t, s), 80.0 * (2.0 * norm_cdf(0.5 * s * std::sqrt(t)) - 1.0), 1e-12);
  }
}

TEST(Black, RoundTrip) {
  EXPECT_NEAR(implied_vol(black_price(100.0, 95.0, 0.5, 0.35), 100.0, 95.0, 0.5), 0.35, 1e-8);
  for (double fk : {0.6, 0.9, 1.0, 1.1, 1.6})
    for (double t : {0.01, 0.25, 2.0})
      for (double s : {0.05, 0.3, 1.0, 2.5}) {
        const bool call = fk <= 1.0;
        const double k = 100.0 / fk;
        const double p = black_price(100.0, k, t, s, call);
        if (p - intrinsic(100.0, k, call) < 1e-12 * k) continue;
        EXPECT_NEAR(implied_vol(p, 100.0, k, t, call), s, 1e-8) << fk << " " << t << " " << s;
      }
}

TEST(Black, OutOfBandPricesHaveNoVol) {
  EXPECT_THROW(implied_vol(4.0, 100.0, 95.0, 0.5), OutOfBand);    // below intrinsic
  EXPECT_THROW(implied_vol(101.0, 100.0, 95.0, 0.5), OutOfBand);  // above the forward
}

TEST(ModelSmile, LognormalCaseIsFlat) {
  const auto model = model_of(RBergomiParams{0.1, 0.0, ForwardVarianceCurve::flat(0.04)}, -0.3, 0.0);
  const FuturesCurve curve(70.0);
  SmileSettings set;
  set.n_paths = 40000;
  set.steps_per_year = 200;
  std::vector<VanillaSpec> specs;
  for (double x : {-0.4, -0.2, 0.0, 0.2, 0.4}) specs.push_back({70.0 * std::exp(x), 1.0, 1.0, x >= 0.0});
  const auto smile = model_smile(model, specs, curve, set);
  ASSERT_EQ(smile.size(), specs.size());
  for (const auto& p : smile) {
    ASSERT_EQ(p.status, VolStatus::ok);
    // Euler bias of the spot scheme is O(dt); the rest is sampling error.
    const double vol_se = p.mc_stderr / black_vega(70.0, p.strike, 1.0, 0.2);
    EXPECT_NEAR(p.model_vol, 0.20, 3.0 * vol_se + 2e-3) << "K=" << p.strike;
  }
}

TEST(ModelSmile, EmptyAndOrdering) {
  const auto model = model_of(RBergomiParams{0.1, 1.0, ForwardVarianceCurve::flat(0.04)});
  SmileSettings set;
  set.n_paths = 1000;
  EXPECT_TRUE(model_smile(model, {}, FuturesCurve(70.0), set).empty());
  const auto two = model_smile(model, {{80.0, 0.25, 0.3, true}, {60.0, 0.25, 0.3, false}}, FuturesCurve(70.0), set);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].strike, 60.0);
  EXPECT_EQ(two[1].strike, 80.0);
  EXPECT_THROW(model_smile(model, {{80.0, 0.25, 0.3, true}, {60.0, 0.5, 0.6, true}}, FuturesCurve(70.0), set),
               InvalidParam);
}

TEST(ModelSmile, OutOfBandPointsAreFlagged) {
  const auto model = model_of(RBergomiParams{0.1, 0.0, ForwardVarianceCurve::flat(0.0001)});
  SmileSettings set;
  set.n_paths = 500;
  const auto smile = model_smile(model, {{200.0, 0.25, 0.25, true}}, FuturesCurve(70.0), set);
  ASSERT_EQ(smile.size(), 1u);
  EXPECT_EQ(smile[0].status, VolStatus::below_band);
  EXPECT_EQ(smile[0].model_vol, 0.0);
}

TEST(TermStructure, FanOutWithMeanReversion) {
  const auto model = model_of(RBergomiParams{0.1, 1.0, ForwardVarianceCurve::flat(0.09)});
  SmileSettings set;
  set.n_paths = 20000;
  set.steps_per_year = 100;
  const std::vector<double> t_opts{0.25, 0.5, 0.75, 1.0};
  const auto ts = atm_term_structure(model, 1.0, t_opts, {0.0, 0.5, 2.0}, FuturesCurve(70.0), set);
  ASSERT_EQ(ts.size(), 3u);
  // Non-increasing in a at every expiry.
  for (std::size_t i = 0; i < t_opts.size(); ++i) {
    EXPECT_GE(ts[0][i].implied_vol, ts[1][i].implied_vol);
    EXPECT_GE(ts[1][i].implied_vol, ts[2][i].implied_vol);
  }
  // a = 2 rises towards the futures maturity.
  for (std::size_t i = 0; i + 1 < t_opts.size(); ++i) EXPECT_LT(ts[2][i].implied_vol, ts[2][i + 1].implied_vol);
  EXPECT_THROW(atm_term_structure(model, 0.5, t_opts, {0.0}, FuturesCurve(70.0), set), InvalidParam);
}

TEST(Reductions, BrownianRoughHestonMatchesClassicalHeston) {
  const double v = 0.09;
  const auto xi = ForwardVarianceCurve::flat(v);
  const auto rough = model_of(RHestonParams{0.5, 0.3, 2.0, xi}, -0.5);
  const auto classic = model_of(HestonParams{0.3, 2.0, v, xi}, -0.5);
  const TimeGrid grid(1.0, 100);
  const auto a = simulate_paths(rough, grid, 50000, 3);
  const auto b = simulate_paths(classic, grid, 50000, 4);
  const FuturesCurve curve(70.0);
  for (double k : {60.0, 70.0, 80.0}) {
    const auto pa = mc_vanilla(a, {k, 1.0, 1.0, k >= 70.0}, 0.5, curve);
    const auto pb = mc_vanilla(b, {k, 1.0, 1.0, k >= 70.0}, 0.5, curve);
    EXPECT_NEAR(pa.price, pb.price, 3.0 * std::hypot(pa.std_error, pb.std_error)) << "K=" << k;
  }
}
