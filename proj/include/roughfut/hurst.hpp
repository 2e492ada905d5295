#pragma once

// Hurst exponent from daily realised-volatility proxies: empirical moments
// m(q, d) of non-overlapping log-RV increments, then a log-log regression of
// m on the lag whose slope is H q.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "roughfut/errors.hpp"
#include "roughfut/market_data.hpp"

namespace roughfut {

struct MomentTable {
  std::string contract;
  std::vector<double> q;
  std::vector<std::size_t> delta;
  std::vector<std::vector<double>> m;  // m[iq][id]
  std::vector<std::vector<std::size_t>> count;
};

struct QSlope {
  double q = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  std::vector<double> intercepts;  // one per contract, or one when averaged
  double r2 = 0.0;
  double h = 0.0;
  double h_se = 0.0;
  std::size_t points = 0;
  std::size_t excluded = 0;  // zero moments left out of the regression
};

enum class Pooling { fixed_effects, averaged };

struct HurstFit {
  Pooling pooling = Pooling::fixed_effects;
  std::vector<QSlope> per_q;
  double h = 0.0;
  double h_se = 0.0;
  bool in_range = false;  // pooled estimate lies in (0, 1)
};

inline std::vector<std::size_t> lag_range(std::size_t dmax) {
  std::vector<std::size_t> d(dmax);
  for (std::size_t i = 0; i < dmax; ++i) d[i] = i + 1;
  return d;
}

/// m(q, d) = (1/N) sum_k |log rv[k d] - log rv[(k-1) d]|^q with N = floor((n-1)/d).
inline MomentTable moments(const std::vector<double>& rv, const std::vector<double>& q,
                           const std::vector<std::size_t>& delta, std::string contract = {}) {
  if (q.empty() || delta.empty()) throw InvalidParam("moments need at least one q and one lag");
  std::size_t dmax = 0;
  for (auto d : delta) {
    if (d == 0) throw InvalidParam("lags must be positive");
    dmax = std::max(dmax, d);
  }
  for (double x : q)
    if (!(x > 0.0)) throw InvalidParam("moment orders must be positive");
  if (rv.size() < 2 * dmax)
    throw InsufficientData("series of " + std::to_string(rv.size()) + " days is shorter than twice the largest lag " +
                           std::to_string(dmax));
  std::vector<double> lr(rv.size());
  for (std::size_t i = 0; i < rv.size(); ++i) {
    if (!(rv[i] > 0.0) || !std::isfinite(rv[i])) throw InvalidParam("realised volatility must be positive and finite");
    lr[i] = std::log(rv[i]);
  }
  MomentTable t{std::move(contract), q, delta, {}, {}};
  t.m.assign(q.size(), std::vector<double>(delta.size(), 0.0));
  t.count.assign(q.size(), std::vector<std::size_t>(delta.size(), 0));
  for (std::size_t id = 0; id < delta.size(); ++id) {
    const std::size_t d = delta[id];
    const std::size_t n = (lr.size() - 1) / d;
    for (std::size_t iq = 0; iq < q.size(); ++iq) {
      double sum = 0.0;
      for (std::size_t k = 1; k <= n; ++k) sum += std::pow(std::abs(lr[k * d] - lr[(k - 1) * d]), q[iq]);
      t.m[iq][id] = sum / static_cast<double>(n);
      t.count[iq][id] = n;
    }
  }
  return t;
}

inline std::vector<MomentTable> moments(const std::vector<std::vector<double>>& rv, const std::vector<double>& q,
                                        const std::vector<std::size_t>& delta,
                                        const std::vector<std::string>& names = {}) {
  std::vector<MomentTable> out;
  for (std::size_t c = 0; c < rv.size(); ++c)
    out.push_back(moments(rv[c], q, delta, c < names.size() ? names[c] : "contract_" + std::to_string(c + 1)));
  return out;
}

/// Positive RV values in calendar order; zero days cannot be logged.
inline std::vector<double> positive_rv(const std::vector<DailyRv>& days) {
  std::vector<double> out;
  for (const auto& d : days)
    if (d.rv > 0.0) out.push_back(d.rv);
  return out;
}

namespace detail {

struct Group {
  std::vector<double> x, y;
};

/// Common slope with one intercept per group (within estimator).
inline QSlope fixed_effects_fit(double q, const std::vector<Group>& groups, std::size_t excluded) {
  QSlope r;
  r.q = q;
  r.excluded = excluded;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  std::vector<double> xbar, ybar;
  std::size_t used_groups = 0;
  for (const auto& g : groups) {
    r.points += g.x.size();
    if (g.x.empty()) {
      xbar.push_back(0.0);
      ybar.push_back(0.0);
      continue;
    }
    ++used_groups;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      mx += g.x[i];
      my += g.y[i];
    }
    mx /= static_cast<double>(g.x.size());
    my /= static_cast<double>(g.x.size());
    xbar.push_back(mx);
    ybar.push_back(my);
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      const double dx = g.x[i] - mx, dy = g.y[i] - my;
      sxx += dx * dx;
      sxy += dx * dy;
      syy += dy * dy;
    }
  }
  if (r.points < used_groups + 2 || r.points < 3)
    throw DegenerateRegression("q = " + std::to_string(q) + ": fewer than 3 usable points");
  if (!(sxx > 0.0)) throw DegenerateRegression("q = " + std::to_string(q) + ": no variation in log lag");
  r.slope = sxy / sxx;
  for (std::size_t c = 0; c < groups.size(); ++c)
    r.intercepts.push_back(groups[c].x.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : ybar[c] - r.slope * xbar[c]);
  const double ssr = std::max(syy - r.slope * sxy, 0.0);
  const auto dof = static_cast<double>(r.points - used_groups - 1);
  r.slope_se = dof > 0.0 ? std::sqrt(ssr / dof / sxx) : 0.0;
  r.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  r.h = r.slope / q;
  r.h_se = r.slope_se / q;
  if (!std::isfinite(r.slope)) throw DegenerateRegression("non-finite slope");
  return r;
}

}  // namespace detail

/// Per-q OLS of log m on log lag. Fixed effects stack every contract with its
/// own intercept; averaged pools log m per lag across contracts first. The
/// pooled H is the inverse-variance weighted mean of H_q.
inline HurstFit estimate_h(const std::vector<MomentTable>& tables, Pooling pooling = Pooling::fixed_effects) {
  if (tables.empty()) throw DegenerateRegression("no moment tables");
  const auto& q = tables.front().q;
  const auto& delta = tables.front().delta;
  for (const auto& t : tables)
    if (t.q != q || t.delta != delta) throw AlignmentError("moment tables use different q or lag sets");

  HurstFit fit;
  fit.pooling = pooling;
  for (std::size_t iq = 0; iq < q.size(); ++iq) {
    std::size_t excluded = 0;
    std::vector<detail::Group> groups;
    if (pooling == Pooling::fixed_effects) {
      for (const auto& t : tables) {
        detail::Group g;
        for (std::size_t id = 0; id < delta.size(); ++id) {
          if (!(t.m[iq][id] > 0.0)) {
            ++excluded;
            continue;
          }
          g.x.push_back(std::log(static_cast<double>(delta[id])));
          g.y.push_back(std::log(t.m[iq][id]));
        }
        groups.push_back(std::move(g));
      }
    } else {
      detail::Group g;
      for (std::size_t id = 0; id < delta.size(); ++id) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& t : tables) {
          if (!(t.m[iq][id] > 0.0)) {
            ++excluded;
            continue;
          }
          sum += std::log(t.m[iq][id]);
          ++n;
        }
        if (n == 0) continue;
        g.x.push_back(std::log(static_cast<double>(delta[id])));
        g.y.push_back(sum / static_cast<double>(n));
      }
      groups.push_back(std::move(g));
    }
    fit.per_q.push_back(detail::fixed_effects_fit(q[iq], groups, excluded));
  }

  double wsum = 0.0, whsum = 0.0;
  std::size_t exact = 0;
  double exact_sum = 0.0;
  for (const auto& s : fit.per_q) {
    if (s.h_se > 0.0) {
      const double w = 1.0 / (s.h_se * s.h_se);
      wsum += w;
      whsum += w * s.h;
    } else {
      ++exact;
      exact_sum += s.h;
    }
  }
  if (exact > 0) {
    fit.h = exact_sum / static_cast<double>(exact);
    fit.h_se = 0.0;
  } else {
    fit.h = whsum / wsum;
    fit.h_se = 1.0 / std::sqrt(wsum);
  }
  fit.in_range = fit.h > 0.0 && fit.h < 1.0;
  return fit;
}

inline std::string to_string(Pooling p) { return p == Pooling::fixed_effects ? "fixed-effects" : "averaged"; }

inline nlohmann::json hurst_json(const HurstFit& fit, const std::vector<MomentTable>& tables) {
  nlohmann::json j;
  j["pooling"] = to_string(fit.pooling);
  j["h"] = fit.h;
  j["h_se"] = fit.h_se;
  j["in_range"] = fit.in_range;
  std::vector<std::string> names;
  for (const auto& t : tables) names.push_back(t.contract);
  j["contracts"] = names;
  auto& arr = j["per_q"] = nlohmann::json::array();
  for (const auto& s : fit.per_q) {
    nlohmann::json e;
    e["q"] = s.q;
    e["slope"] = s.slope;
    e["slope_se"] = s.slope_se;
    e["h"] = s.h;
    e["h_se"] = s.h_se;
    e["r2"] = s.r2;
    e["points"] = s.points;
    e["excluded_zero_moments"] = s.excluded;
    nlohmann::json ic = nlohmann::json::array();
    for (double x : s.intercepts) ic.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json());
    e["intercepts"] = ic;
    arr.push_back(e);
  }
  return j;
}

/// Regression scatter rows: q,delta,log_delta,log_m,contract.
inline void write_moment_scatter(std::ostream& out, const std::vector<MomentTable>& tables) {
  out << "q,delta,log_delta,log_m,contract\n";
  for (const auto& t : tables)
    for (std::size_t iq = 0; iq < t.q.size(); ++iq)
      for (std::size_t id = 0; id < t.delta.size(); ++id) {
        if (!(t.m[iq][id] > 0.0)) continue;
        out << detail::fmt_double(t.q[iq]) << ',' << t.delta[id] << ','
            << detail::fmt_double(std::log(static_cast<double>(t.delta[id]))) << ','
            << detail::fmt_double(std::log(t.m[iq][id])) << ',' << t.contract << '\n';
      }
}

}  // namespace roughfut
