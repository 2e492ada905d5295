#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "roughfut/market_data.hpp"

using namespace roughfut;

namespace {

const auto kValuation = parse_date("2025-03-14");

QuoteSurface parse(const std::string& text) {
  std::istringstream in(text);
  return parse_quote_surface(in, kValuation);
}

const std::string kHeader = "ticker,t_opt,t_fut,f0,strike,is_call,mkt_vol,bid_ask,volume\n";

}  // namespace

TEST(QuoteSurface, LoadsSevenContractsOrderedByExpiry) {
  const auto s = load_quote_surface(ROUGHFUT_TEST_DATA "/cl_20250314_quotes.csv", kValuation);
  ASSERT_EQ(s.maturities(), 7u);
  const std::vector<std::string> expected{"CLJ5", "CLK5", "CLM5", "CLN5", "CLQ5", "CLU5", "CLZ5"};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(s.contracts[i].ticker, expected[i]);
    if (i > 0) EXPECT_LT(s.contracts[i - 1].t_opt, s.contracts[i].t_opt);
  }
  // CLJ5 expires three days after valuation.
  EXPECT_NEAR(s.contracts[0].t_opt, 3.0 / 365.0, 1e-9);
  // The zero-volume row without a bid-ask is dropped.
  EXPECT_EQ(s.quotes.back().size(), 6u);
  EXPECT_EQ(s.quotes[5].size(), 6u);
}

TEST(QuoteSurface, EmptyContractIsRejected) {
  // Every row of CLK5 is cleaned away, leaving the contract without quotes.
  const std::string text = kHeader +
                           "CLJ5,0.01,0.02,67,60,0,0.35,0.01,10\n"
                           "CLK5,0.1,0.11,67,60,0,0.35,,0\n";
  EXPECT_THROW(parse(text), InvariantError);
}

TEST(QuoteSurface, DecreasingStrikesAreRejected) {
  const std::string text = kHeader +
                           "CLJ5,0.01,0.02,67,60,1,0.35,0.01,10\n"
                           "CLJ5,0.01,0.02,67,55,1,0.36,0.01,10\n";
  EXPECT_THROW(parse(text), InvariantError);
}

TEST(QuoteSurface, OptionExpiryAfterFuturesIsRejected) {
  EXPECT_THROW(parse(kHeader + "CLJ5,0.05,0.02,67,60,1,0.35,0.01,10\n"), InvariantError);
}

TEST(QuoteSurface, MalformedRowReportsLine) {
  try {
    parse(kHeader + "CLJ5,0.01,0.02,67,60,1,0.35,0.01,10\nCLJ5,0.01,abc,67,65,1,0.35,0.01,10\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse(kHeader + "CLJ5,0.01,0.02,67\n"), ParseError);
  EXPECT_THROW(parse("wrong,header\n"), ParseError);
}

TEST(QuoteSurface, MissingBidAskIsFlooredAtZero) {
  const auto s = parse(kHeader + "CLJ5,0.01,0.02,67,60,0,0.35,,12\n");
  EXPECT_EQ(s.quotes[0][0].bid_ask, 0.0);
  EXPECT_EQ(s.quotes[0][0].volume, 12.0);
}

TEST(QuoteSurface, KeepsOutOfTheMoneySideAtSharedStrike) {
  const auto s = parse(kHeader +
                       "CLJ5,0.01,0.02,67,60,1,0.40,0.01,10\n"
                       "CLJ5,0.01,0.02,67,60,0,0.35,0.01,10\n"
                       "CLJ5,0.01,0.02,67,70,1,0.31,0.01,10\n"
                       "CLJ5,0.01,0.02,67,70,0,0.33,0.01,10\n");
  ASSERT_EQ(s.quotes[0].size(), 2u);
  EXPECT_FALSE(s.quotes[0][0].is_call);
  EXPECT_DOUBLE_EQ(s.quotes[0][0].mkt_vol, 0.35);
  EXPECT_TRUE(s.quotes[0][1].is_call);
  EXPECT_DOUBLE_EQ(s.quotes[0][1].mkt_vol, 0.31);
}

TEST(QuoteSurface, SaveThenLoadIsLossless) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    QuoteSurface s;
    s.valuation_date = kValuation;
    const int m = 1 + static_cast<int>(u(gen) * 4);
    double t = 0.0;
    for (int i = 0; i < m; ++i) {
      t += 0.01 + u(gen) * 0.3;
      s.contracts.push_back({"C" + std::to_string(i), t, t + u(gen) * 0.05, 40.0 + 60.0 * u(gen)});
      std::vector<OptionQuote> qs;
      double k = 10.0 * u(gen) + 1.0;
      const int nq = 1 + static_cast<int>(u(gen) * 6);
      for (int j = 0; j < nq; ++j) {
        k += 0.1 + 7.0 * u(gen);
        qs.push_back({k, 0.05 + u(gen), 0.1 * u(gen), std::floor(1000 * u(gen)) + 1.0, u(gen) < 0.5});
      }
      s.quotes.push_back(qs);
    }
    std::stringstream buf;
    write_quote_surface(buf, s);
    const auto back = parse_quote_surface(buf, kValuation);
    EXPECT_EQ(back, s);
  }
}

// --- realised volatility proxies ------------------------------------------

namespace {

IntradaySeries series_from_returns(std::int64_t start, const std::vector<double>& returns, double p0 = 4.2) {
  IntradaySeries s;
  s.bin_seconds = 300;
  double p = p0;
  s.timestamps.push_back(start);
  s.log_prices.push_back(p);
  for (std::size_t i = 0; i < returns.size(); ++i) {
    p += returns[i];
    s.timestamps.push_back(start + 300 * static_cast<std::int64_t>(i + 1));
    s.log_prices.push_back(p);
  }
  return s;
}

}  // namespace

TEST(DailyRv, SumOfSquaredReturns) {
  const auto s = series_from_returns(1000, {0.01, -0.01, 0.02});
  const auto rv = daily_rv_proxies(s, {{1000, 1000 + 900}}, 1);
  ASSERT_EQ(rv.size(), 1u);
  EXPECT_NEAR(rv[0].rv, std::sqrt(6e-4), 1e-15);
  EXPECT_NEAR(rv[0].rv, 0.024495, 1e-6);
  EXPECT_EQ(rv[0].returns, 3u);
}

TEST(DailyRv, ConstantPricesGiveZeroAndAreRetained) {
  const auto s = series_from_returns(0, std::vector<double>(60, 0.0));
  const auto rv = daily_rv_proxies(s, {{0, 60 * 300}});
  ASSERT_EQ(rv.size(), 1u);
  EXPECT_EQ(rv[0].rv, 0.0);
}

TEST(DailyRv, ThinDaysAreDropped) {
  auto s = series_from_returns(0, std::vector<double>(60, 0.001));
  // second day with only three returns
  const std::int64_t d2 = 100000;
  for (int i = 0; i < 4; ++i) {
    s.timestamps.push_back(d2 + 300 * i);
    s.log_prices.push_back(4.0 + 0.01 * i);
  }
  const auto rv = daily_rv_proxies(s, {{0, 60 * 300}, {d2, d2 + 3 * 300}});
  ASSERT_EQ(rv.size(), 1u);
  EXPECT_EQ(rv[0].day, 0u);
  EXPECT_THROW(daily_rv_proxies(s, {{d2, d2 + 3 * 300}}), EmptyOutput);
}

TEST(DailyRv, PreviousTickSampling) {
  // 10-second ticks aggregated to 5-minute returns.
  IntradaySeries s;
  s.bin_seconds = 300;
  for (int i = 0; i <= 90; ++i) {
    s.timestamps.push_back(10 * i);
    s.log_prices.push_back(0.001 * i);
  }
  const auto rv = daily_rv_proxies(s, {{0, 900}}, 1);
  ASSERT_EQ(rv.size(), 1u);
  EXPECT_EQ(rv[0].returns, 3u);
  EXPECT_NEAR(rv[0].rv, std::sqrt(3 * 0.03 * 0.03), 1e-12);
}

TEST(DailyRv, InvariantUnderLevelShiftAndLinearInScale) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z(0.0, 0.002);
  std::vector<double> r(80);
  for (auto& x : r) x = z(gen);
  const std::vector<TradingDay> cal{{0, 80 * 300}};
  const auto base = daily_rv_proxies(series_from_returns(0, r, 4.0), cal);
  const auto shifted = daily_rv_proxies(series_from_returns(0, r, 7.5), cal);
  EXPECT_NEAR(base[0].rv, shifted[0].rv, 1e-13);
  for (double c : {0.5, 3.0}) {
    auto rc = r;
    for (auto& x : rc) x *= c;
    const auto scaled = daily_rv_proxies(series_from_returns(0, rc, 4.0), cal);
    EXPECT_NEAR(scaled[0].rv, c * base[0].rv, 1e-13);
  }
}

TEST(DailyRv, NonIncreasingTimestampsRejected) {
  IntradaySeries s;
  s.timestamps = {0, 300, 300};
  s.log_prices = {1, 1, 1};
  EXPECT_THROW(daily_rv_proxies(s, {{0, 900}}, 1), InvariantError);
}
