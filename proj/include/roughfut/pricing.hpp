#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "roughfut/black.hpp"
#include "roughfut/errors.hpp"
#include "roughfut/spot.hpp"

namespace roughfut {

/// Initial futures curve T -> F0(T), log-linear between pillars and flat
/// outside them.
class FuturesCurve {
 public:
  FuturesCurve() = default;

  explicit FuturesCurve(double flat_price) : FuturesCurve({{0.0, flat_price}}) {}

  explicit FuturesCurve(std::vector<std::pair<double, double>> pillars) : pillars_(std::move(pillars)) {
    if (pillars_.empty()) throw InvalidParam("futures curve needs at least one pillar");
    std::sort(pillars_.begin(), pillars_.end());
    for (std::size_t i = 0; i < pillars_.size(); ++i) {
      if (!(pillars_[i].second > 0.0)) throw InvalidParam("futures prices must be positive");
      if (i > 0 && !(pillars_[i].first > pillars_[i - 1].first))
        throw InvalidParam("futures pillars must have distinct maturities");
    }
  }

  const std::vector<std::pair<double, double>>& pillars() const noexcept { return pillars_; }

  double operator()(double T) const {
    if (pillars_.empty()) throw InvalidParam("empty futures curve");
    if (T <= pillars_.front().first) return pillars_.front().second;
    if (T >= pillars_.back().first) return pillars_.back().second;
    const auto it = std::upper_bound(pillars_.begin(), pillars_.end(), std::make_pair(T, 0.0),
                                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto& [t1, f1] = *it;
    const auto& [t0, f0] = *(it - 1);
    const double w = (T - t0) / (t1 - t0);
    return std::exp((1.0 - w) * std::log(f0) + w * std::log(f1));
  }

 private:
  std::vector<std::pair<double, double>> pillars_;
};

/// F_t(T) = F0(T) (1 - (1 - s_t) e^{-a (T - t)}) for constant mean reversion a.
inline double futures_price(double s, double t, double T, double a, double f0_T) {
  if (t > T) throw InvalidParam("futures price requested after maturity");
  return f0_T * (1.0 - (1.0 - s) * std::exp(-a * (T - t)));
}

inline double futures_price(double s, double t, double T, double a, const FuturesCurve& curve) {
  return futures_price(s, t, T, a, curve(T));
}

struct VanillaSpec {
  double strike = 0.0;
  double t_opt = 0.0;
  double t_fut = 0.0;
  bool is_call = true;
};

struct McPrice {
  double price = 0.0;
  double std_error = 0.0;
};

inline double vanilla_payoff(double forward, double strike, bool is_call) {
  return is_call ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
}

/// Sample mean and standard error of f over the paths at grid node k.
template <class Fn>
McPrice sample_mean(const Matrix& s, std::size_t k, Fn&& f) {
  const std::size_t n = s.rows();
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = f(s(j, k));
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / static_cast<double>(n - 1)) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

/// Undiscounted Monte Carlo price of a futures option. With control_variate
/// set, the futures price itself (known mean F0(T)) is used as a control.
inline McPrice mc_vanilla(const PathBatch& batch, const VanillaSpec& spec, double a, const FuturesCurve& curve,
                          bool control_variate = false) {
  if (!(spec.strike >= 0.0) || spec.t_opt > spec.t_fut) throw InvalidParam("invalid vanilla spec");
  const std::size_t k = batch.grid.node(spec.t_opt);
  const double t = batch.grid.time(k);
  const double f0 = curve(spec.t_fut);
  const double damp = std::exp(-a * (spec.t_fut - t));
  const auto fwd = [&](double s) { return f0 * (1.0 - (1.0 - s) * damp); };
  const auto payoff = [&](double s) { return vanilla_payoff(fwd(s), spec.strike, spec.is_call); };
  if (!control_variate) return sample_mean(batch.s, k, payoff);

  const std::size_t n = batch.n_paths();
  double my = 0.0, mx = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    my += payoff(batch.s(j, k));
    mx += fwd(batch.s(j, k));
  }
  my /= n;
  mx /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = fwd(batch.s(j, k)) - mx;
    sxy += dx * (payoff(batch.s(j, k)) - my);
    sxx += dx * dx;
  }
  const double beta = sxx > 0.0 ? sxy / sxx : 0.0;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double y = payoff(batch.s(j, k)) - beta * (fwd(batch.s(j, k)) - f0);
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

enum class VolStatus { ok, below_band, above_band };

/// Model smile point. When inversion fails the vol is set to the band edge
/// (0 below the intrinsic value, kMaxVol above the upper bound).
struct SmilePoint {
  double strike = 0.0;
  bool is_call = true;
  double price = 0.0;
  double mc_stderr = 0.0;
  double model_vol = 0.0;
  VolStatus status = VolStatus::ok;
};

inline constexpr double kMaxVol = 5.0;

inline SmilePoint invert_point(double strike, bool is_call, McPrice p, double forward, double t) {
  SmilePoint sp{strike, is_call, p.price, p.std_error, 0.0, VolStatus::ok};
  try {
    sp.model_vol = implied_vol(p.price, forward, strike, t, is_call);
  } catch (const OutOfBand&) {
    const double tv = p.price - intrinsic(forward, strike, is_call);
    sp.status = tv > 0.0 ? VolStatus::above_band : VolStatus::below_band;
    sp.model_vol = sp.status == VolStatus::above_band ? kMaxVol : 0.0;
  }
  return sp;
}

/// Prices every spec from one batch and inverts to Black vols.
inline std::vector<SmilePoint> smile_from_batch(const PathBatch& batch, const std::vector<VanillaSpec>& specs,
                                                double a, const FuturesCurve& curve, bool control_variate = false) {
  std::vector<SmilePoint> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    const auto p = mc_vanilla(batch, spec, a, curve, control_variate);
    out.push_back(invert_point(spec.strike, spec.is_call, p, curve(spec.t_fut), spec.t_opt));
  }
  return out;
}

struct SmileSettings {
  std::size_t n_paths = 100000;
  int steps_per_year = 300;
  std::uint64_t seed = 1;
  SimOptions sim{};
  bool control_variate = false;
};

/// Model smile for one maturity: a single simulation up to t_opt, reused for
/// all strikes. Strikes whose price falls outside the band are flagged.
inline std::vector<SmilePoint> model_smile(const ModelSpec& model, const std::vector<VanillaSpec>& specs,
                                           const FuturesCurve& curve, const SmileSettings& settings) {
  if (specs.empty()) return {};
  for (const auto& s : specs)
    if (s.t_opt != specs.front().t_opt || s.t_fut != specs.front().t_fut)
      throw InvalidParam("model_smile needs specs sharing (t_opt, t_fut)");
  std::vector<std::size_t> order(specs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return specs[a].strike < specs[b].strike; });
  std::vector<VanillaSpec> sorted;
  for (auto i : order) sorted.push_back(specs[i]);

  const TimeGrid grid(specs.front().t_opt, settings.steps_per_year);
  const auto batch = simulate_paths(model, grid, settings.n_paths, settings.seed, settings.sim);
  return smile_from_batch(batch, sorted, model.spot.mean_reversion, curve, settings.control_variate);
}

struct TermStructurePoint {
  double a = 0.0;
  double t_opt = 0.0;  // grid node actually used
  double strike = 0.0;
  double price = 0.0;
  double std_error = 0.0;
  double implied_vol = 0.0;
  VolStatus status = VolStatus::ok;
};

/// ATM (K = F0(t_fut)) implied vols of options on one futures contract for
/// several option expiries and mean-reversion speeds. The variance paths and
/// spot noise are shared across a; option expiries are snapped to the
/// nearest node of a grid ending at the latest expiry.
inline std::vector<std::vector<TermStructurePoint>> atm_term_structure(const ModelSpec& model, double t_fut,
                                                                       const std::vector<double>& t_opts,
                                                                       const std::vector<double>& a_values,
                                                                       const FuturesCurve& curve,
                                                                       const SmileSettings& settings) {
  if (t_opts.empty() || a_values.empty()) throw InvalidParam("term structure needs expiries and speeds");
  for (double t : t_opts)
    if (!(t > 0.0) || t > t_fut) throw InvalidParam("option expiries must lie in (0, t_fut]");
  validate(model);
  const double horizon = *std::max_element(t_opts.begin(), t_opts.end());
  const TimeGrid grid(horizon, settings.steps_per_year);
  const auto vb = simulate_variance(model.variance, grid, settings.n_paths, settings.seed,
                                    {settings.sim.threads, settings.sim.rheston_backend});
  const double strike = curve(t_fut);

  std::vector<std::vector<TermStructurePoint>> out;
  for (double a : a_values) {
    SpotParams sp = model.spot;
    sp.mean_reversion = a;
    PathBatch batch{grid, spot_paths(sp, vb.v, vb.dw, grid, settings.seed, settings.sim.threads), Matrix{},
                    settings.seed, vb.truncated_fraction};
    std::vector<TermStructurePoint> row;
    for (double t : t_opts) {
      const double node_t = grid.time(grid.nearest(t));
      const VanillaSpec spec{strike, node_t, t_fut, true};
      const auto p = mc_vanilla(batch, spec, a, curve, settings.control_variate);
      const auto sp_pt = invert_point(strike, true, p, strike, node_t);
      row.push_back({a, node_t, strike, p.price, p.std_error, sp_pt.model_vol, sp_pt.status});
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace roughfut
