#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "roughfut/errors.hpp"

namespace roughfut {

/// How the curve behaves on [0, t_1).
enum class LeftAnchor {
  flat,   ///< value at t = 0 tracks the first level (flat start)
  fixed,  ///< value at t = 0 is an independent stored level
};

/// Piecewise-linear initial forward-variance curve xi_0(t).
///
/// Linear between (0, left_value) and the (knot, level) pairs, flat beyond the
/// last knot. The same type also carries the classical Heston long-variance
/// curve, which is parameterised identically.
class ForwardVarianceCurve {
 public:
  ForwardVarianceCurve() = default;

  /// Constant curve.
  explicit ForwardVarianceCurve(double value) : left_value_(value), anchor_(LeftAnchor::fixed) {
    if (!(value >= 0.0)) throw InvalidParam("forward variance must be nonnegative");
  }

  ForwardVarianceCurve(std::vector<double> knots, std::vector<double> levels,
                       LeftAnchor anchor = LeftAnchor::flat, double left_value = 0.0)
      : knots_(std::move(knots)), levels_(std::move(levels)), left_value_(left_value), anchor_(anchor) {
    if (knots_.size() != levels_.size()) throw InvalidParam("knots and levels differ in length");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!(knots_[i] > 0.0)) throw InvalidParam("knots must be positive");
      if (i > 0 && !(knots_[i] > knots_[i - 1])) throw InvalidParam("knots must be strictly increasing");
      if (!(levels_[i] >= 0.0)) throw InvalidParam("forward variance levels must be nonnegative");
    }
    if (anchor_ == LeftAnchor::flat) {
      left_value_ = levels_.empty() ? left_value : levels_.front();
    }
    if (!(left_value_ >= 0.0)) throw InvalidParam("left value must be nonnegative");
  }

  static ForwardVarianceCurve flat(double value) { return ForwardVarianceCurve(value); }

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& levels() const noexcept { return levels_; }
  double left_value() const noexcept { return left_value_; }
  LeftAnchor anchor() const noexcept { return anchor_; }
  std::size_t size() const noexcept { return knots_.size(); }

  double operator()(double t) const { return eval(t); }

  double eval(double t) const {
    if (t < 0.0) throw InvalidParam("forward variance evaluated at negative time");
    if (knots_.empty()) return left_value_;
    if (t >= knots_.back()) return levels_.back();
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    const auto i = static_cast<std::size_t>(it - knots_.begin());
    const double t0 = i == 0 ? 0.0 : knots_[i - 1];
    const double y0 = i == 0 ? left_value_ : levels_[i - 1];
    const double w = (t - t0) / (knots_[i] - t0);
    return y0 + w * (levels_[i] - y0);
  }

  ForwardVarianceCurve with_level(std::size_t i, double new_level) const {
    if (i >= knots_.size()) throw IndexError("knot index " + std::to_string(i) + " out of range");
    if (!(new_level >= 0.0)) throw InvalidParam("forward variance levels must be nonnegative");
    ForwardVarianceCurve out = *this;
    out.levels_[i] = new_level;
    if (i == 0 && anchor_ == LeftAnchor::flat) out.left_value_ = new_level;
    return out;
  }

  friend bool operator==(const ForwardVarianceCurve&, const ForwardVarianceCurve&) = default;

 private:
  std::vector<double> knots_;
  std::vector<double> levels_;
  double left_value_ = 0.0;
  LeftAnchor anchor_ = LeftAnchor::flat;
};

inline void to_json(nlohmann::json& j, const ForwardVarianceCurve& c) {
  j = nlohmann::json{{"left_value", c.left_value()},
                     {"knots", c.knots()},
                     {"levels", c.levels()},
                     {"left_anchor", c.anchor() == LeftAnchor::flat ? "flat" : "fixed"}};
}

inline void from_json(const nlohmann::json& j, ForwardVarianceCurve& c) {
  const auto knots = j.value("knots", std::vector<double>{});
  const auto levels = j.value("levels", std::vector<double>{});
  const double left = j.value("left_value", levels.empty() ? 0.0 : levels.front());
  const std::string anchor = j.value("left_anchor", std::string(knots.empty() ? "fixed" : "flat"));
  if (anchor != "flat" && anchor != "fixed") throw InvalidParam("left_anchor must be flat or fixed");
  if (knots.empty()) {
    c = ForwardVarianceCurve(left);
  } else {
    c = ForwardVarianceCurve(knots, levels, anchor == "flat" ? LeftAnchor::flat : LeftAnchor::fixed, left);
  }
}

}  // namespace roughfut
