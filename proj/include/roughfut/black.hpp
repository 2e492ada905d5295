#pragma once

#include <algorithm>
#include <cmath>

#include "roughfut/errors.hpp"

namespace roughfut {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
inline double norm_pdf(double x) { return 0.3989422804014327 * std::exp(-0.5 * x * x); }

inline double intrinsic(double forward, double strike, bool is_call) {
  return is_call ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
}

namespace detail {

/// Out-of-the-money leg (call above the forward, put below). Equals the time
/// value of either option and carries no cancellation.
inline double otm_black(double F, double K, double total_sd) {
  if (total_sd <= 0.0) return 0.0;
  const double d1 = std::log(F / K) / total_sd + 0.5 * total_sd;
  const double d2 = d1 - total_sd;
  if (K >= F) return F * norm_cdf(d1) - K * norm_cdf(d2);
  return K * norm_cdf(-d2) - F * norm_cdf(-d1);
}

}  // namespace detail

/// Undiscounted Black-76 price of a futures option.
inline double black_price(double forward, double strike, double t, double sigma, bool is_call = true) {
  if (!(forward > 0.0) || !(strike > 0.0) || !(t >= 0.0) || !(sigma >= 0.0))
    throw InvalidParam("black_price needs F, K > 0 and t, sigma >= 0");
  return intrinsic(forward, strike, is_call) + detail::otm_black(forward, strike, sigma * std::sqrt(t));
}

inline double black_vega(double forward, double strike, double t, double sigma) {
  const double sd = sigma * std::sqrt(t);
  if (sd <= 0.0) return 0.0;
  const double d1 = std::log(forward / strike) / sd + 0.5 * sd;
  return forward * norm_pdf(d1) * std::sqrt(t);
}

/// Black-76 implied volatility by safeguarded Newton on a bisection bracket
/// starting from [1e-4, 5]. Throws OutOfBand when the price lies outside the
/// no-arbitrage band, i.e. no volatility reproduces it.
inline double implied_vol(double price, double forward, double strike, double t, bool is_call = true) {
  if (!(forward > 0.0) || !(strike > 0.0) || !(t > 0.0)) throw InvalidParam("implied_vol needs F, K, t > 0");
  const double tv = price - intrinsic(forward, strike, is_call);
  const double cap = std::min(forward, strike);
  if (!(tv > 0.0) || !(tv < cap)) throw OutOfBand("option price outside the no-arbitrage band");

  const double sqt = std::sqrt(t);
  auto f = [&](double s) { return detail::otm_black(forward, strike, s * sqt) - tv; };

  double lo = 1e-4;
  double hi = 5.0;
  while (f(lo) > 0.0 && lo > 1e-12) lo *= 0.1;
  while (f(hi) < 0.0 && hi < 1e3) hi *= 2.0;
  if (f(lo) > 0.0 || f(hi) < 0.0) throw OutOfBand("implied volatility outside the solvable range");

  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fs = f(s);
    if (fs == 0.0) return s;
    (fs > 0.0 ? hi : lo) = s;
    const double vega = black_vega(forward, strike, t, s);
    double next = vega > 0.0 ? s - fs / vega : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-15 * s || hi - lo <= 1e-15 * hi) return next;
    s = next;
  }
  return s;
}

}  // namespace roughfut
