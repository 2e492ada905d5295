#include <gtest/gtest.h>

#include <random>

#include "roughfut/fv_curve.hpp"

using namespace roughfut;

TEST(ForwardVarianceCurve, LinearSegmentAndFlatExtrapolation) {
  const ForwardVarianceCurve c({1.0}, {0.08}, LeftAnchor::fixed, 0.04);
  EXPECT_DOUBLE_EQ(c.eval(0.5), 0.06);
  EXPECT_DOUBLE_EQ(c.eval(2.0), 0.08);
  EXPECT_DOUBLE_EQ(c.eval(0.0), 0.04);
  EXPECT_THROW(c.eval(-0.1), InvalidParam);
}

TEST(ForwardVarianceCurve, ConstantCurve) {
  const auto c = ForwardVarianceCurve::flat(0.04);
  for (double t : {0.0, 0.3, 10.0}) EXPECT_EQ(c.eval(t), 0.04);
}

TEST(ForwardVarianceCurve, FlatAnchorStartsAtFirstLevel) {
  const ForwardVarianceCurve c({0.5, 1.0}, {0.05, 0.07});
  EXPECT_EQ(c.left_value(), 0.05);
  EXPECT_DOUBLE_EQ(c.eval(0.2), 0.05);
  EXPECT_DOUBLE_EQ(c.eval(0.75), 0.06);
}

TEST(ForwardVarianceCurve, WithLevel) {
  const ForwardVarianceCurve c({1.0}, {0.04});
  EXPECT_DOUBLE_EQ(c.with_level(0, 0.09).eval(1.0), 0.09);
  EXPECT_THROW(c.with_level(0, -0.01), InvalidParam);
  const ForwardVarianceCurve two({0.5, 1.0}, {0.04, 0.05});
  EXPECT_THROW(two.with_level(2, 0.05), IndexError);
  const auto moved = two.with_level(1, 0.09);
  EXPECT_EQ(moved.knots(), two.knots());
  EXPECT_EQ(moved.levels()[0], 0.04);
}

TEST(ForwardVarianceCurve, InvalidConstruction) {
  EXPECT_THROW(ForwardVarianceCurve({1.0, 0.5}, {0.04, 0.04}), InvalidParam);
  EXPECT_THROW(ForwardVarianceCurve({1.0}, {-0.04}), InvalidParam);
  EXPECT_THROW(ForwardVarianceCurve({1.0}, {0.04, 0.05}), InvalidParam);
}

TEST(ForwardVarianceCurve, PiecewiseLinearContinuousAndNonnegative) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> knots, levels;
    double t = 0.0;
    const int m = 1 + static_cast<int>(6 * u(gen));
    for (int i = 0; i < m; ++i) {
      t += 0.05 + u(gen);
      knots.push_back(t);
      levels.push_back(0.2 * u(gen));
    }
    const ForwardVarianceCurve c(knots, levels, LeftAnchor::fixed, 0.2 * u(gen));
    // chord property on every segment, and continuity at knots
    for (int i = 0; i < m; ++i) {
      const double t0 = i == 0 ? 0.0 : knots[i - 1];
      const double y0 = i == 0 ? c.left_value() : levels[i - 1];
      for (double w : {0.0, 0.25, 0.5, 0.9, 1.0}) {
        const double x = t0 + w * (knots[i] - t0);
        EXPECT_NEAR(c.eval(x), y0 + w * (levels[i] - y0), 1e-15);
        EXPECT_GE(c.eval(x), 0.0);
      }
      EXPECT_NEAR(c.eval(knots[i] - 1e-12), c.eval(knots[i]), 1e-9);
    }
    // re-setting a level to its own value changes nothing
    const auto i = static_cast<std::size_t>(u(gen) * m);
    const auto same = c.with_level(i, c.eval(knots[i]));
    for (double x = 0.0; x < t + 1.0; x += 0.037) EXPECT_EQ(same.eval(x), c.eval(x));
  }
}

TEST(ForwardVarianceCurve, JsonRoundTrip) {
  const ForwardVarianceCurve c({0.25, 0.5}, {0.05, 0.07}, LeftAnchor::fixed, 0.03);
  const nlohmann::json j = c;
  EXPECT_EQ(j["left_value"], 0.03);
  EXPECT_EQ(j["knots"].size(), 2u);
  EXPECT_EQ(j.get<ForwardVarianceCurve>(), c);
  const auto flat = nlohmann::json::parse(R"({"left_value": 0.04, "knots": [], "levels": []})");
  EXPECT_EQ(flat.get<ForwardVarianceCurve>().eval(3.0), 0.04);
}
