#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "roughfut/errors.hpp"
#include "roughfut/fv_curve.hpp"

namespace roughfut {

/// Rough Bergomi: v_t = xi0(t) exp(eta W~_t - eta^2 t^{2H} / 2).
struct RBergomiParams {
  double hurst = 0.1;
  double eta = 1.5;
  ForwardVarianceCurve xi0 = ForwardVarianceCurve::flat(0.04);
};

/// Rough Heston driven directly by the initial forward-variance curve.
struct RHestonParams {
  double hurst = 0.3;
  double eta = 0.3;
  double kappa = 1.0;
  ForwardVarianceCurve xi0 = ForwardVarianceCurve::flat(0.04);
};

/// One-factor Bergomi with an Ornstein-Uhlenbeck driver.
struct BergomiParams {
  double eta = 1.0;
  double kappa = 1.0;
  ForwardVarianceCurve xi0 = ForwardVarianceCurve::flat(0.04);
};

/// Classical Heston with a piecewise-linear long-variance curve.
struct HestonParams {
  double eta = 0.3;
  double kappa = 1.0;
  double v0 = 0.04;
  ForwardVarianceCurve vbar = ForwardVarianceCurve::flat(0.04);
};

using VarianceModel = std::variant<RBergomiParams, RHestonParams, BergomiParams, HestonParams>;

enum class Family { rbergomi, rheston, bergomi, heston };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::rbergomi: return "rbergomi";
    case Family::rheston: return "rheston";
    case Family::bergomi: return "bergomi";
    case Family::heston: return "heston";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "rbergomi") return Family::rbergomi;
  if (s == "rheston") return Family::rheston;
  if (s == "bergomi") return Family::bergomi;
  if (s == "heston") return Family::heston;
  throw InvalidParam("unknown model '" + s + "' (expected rbergomi, rheston, bergomi or heston)");
}

inline Family family_of(const VarianceModel& m) { return static_cast<Family>(m.index()); }

/// Correlation between the spot and variance drivers: a scalar, or
/// piecewise-constant buckets where value[i] holds on [end[i-1], end[i]) and
/// the last value holds beyond the last end.
struct Correlation {
  std::vector<double> bucket_ends;
  std::vector<double> values{-0.3};

  static Correlation scalar(double rho) { return Correlation{{}, {rho}}; }
  static Correlation piecewise(std::vector<double> ends, std::vector<double> values) {
    return Correlation{std::move(ends), std::move(values)};
  }

  bool is_scalar() const noexcept { return values.size() == 1; }

  double at(double t) const {
    for (std::size_t i = 0; i < bucket_ends.size() && i + 1 < values.size(); ++i)
      if (t < bucket_ends[i]) return values[i];
    return values.back();
  }

  void validate() const {
    if (values.empty()) throw InvalidParam("correlation needs at least one value");
    if (!bucket_ends.empty() && bucket_ends.size() + 1 != values.size() && bucket_ends.size() != values.size())
      throw InvalidParam("correlation buckets and values are inconsistent");
    for (double r : values)
      if (!(std::abs(r) <= 1.0)) throw InvalidParam("correlation must lie in [-1, 1]");
  }
};

struct SpotParams {
  double mean_reversion = 0.5;
  Correlation corr = Correlation::scalar(-0.3);
};

struct ModelSpec {
  VarianceModel variance;
  SpotParams spot;
};

inline void validate_hurst(double h) {
  if (!(h > 0.0 && h < 1.0)) throw InvalidParam("Hurst parameter must lie in (0, 1)");
}

inline void validate(const RBergomiParams& p) {
  validate_hurst(p.hurst);
  if (!(p.eta >= 0.0)) throw InvalidParam("vol-of-vol eta must be nonnegative");
}

inline void validate(const RHestonParams& p) {
  validate_hurst(p.hurst);
  if (!(p.eta >= 0.0)) throw InvalidParam("vol-of-vol eta must be nonnegative");
  if (!(p.kappa > 0.0)) throw InvalidParam("kappa must be positive");
}

inline void validate(const BergomiParams& p) {
  if (!(p.eta >= 0.0)) throw InvalidParam("vol-of-vol eta must be nonnegative");
  if (!(p.kappa > 0.0)) throw InvalidParam("kappa must be positive");
}

inline void validate(const HestonParams& p) {
  if (!(p.eta >= 0.0)) throw InvalidParam("vol-of-vol eta must be nonnegative");
  if (!(p.kappa > 0.0)) throw InvalidParam("kappa must be positive");
  if (!(p.v0 >= 0.0)) throw InvalidParam("initial variance must be nonnegative");
}

inline void validate(const SpotParams& s) {
  if (!(s.mean_reversion >= 0.0)) throw InvalidParam("mean reversion a must be nonnegative");
  s.corr.validate();
}

/// The rough Bergomi martingale result needs rho < 0.
inline void validate(const ModelSpec& m) {
  std::visit([](const auto& p) { validate(p); }, m.variance);
  validate(m.spot);
  if (family_of(m.variance) == Family::rbergomi) {
    for (double r : m.spot.corr.values)
      if (!(r < 0.0)) throw InvalidParam("rough Bergomi requires rho < 0 for the futures to be martingales");
  }
}

/// The calibrated term curve: xi0 for forward-variance models, vbar for Heston.
inline const ForwardVarianceCurve& term_curve(const VarianceModel& m) {
  return std::visit(
      [](const auto& p) -> const ForwardVarianceCurve& {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HestonParams>) {
          return p.vbar;
        } else {
          return p.xi0;
        }
      },
      m);
}

inline void set_term_curve(VarianceModel& m, ForwardVarianceCurve c) {
  std::visit(
      [&](auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HestonParams>) {
          p.vbar = std::move(c);
        } else {
          p.xi0 = std::move(c);
        }
      },
      m);
}

}  // namespace roughfut
