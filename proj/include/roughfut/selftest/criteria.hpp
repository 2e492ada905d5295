#pragma once

// Acceptance criteria as runnable checks. The full profile uses the path
// counts the criteria are stated for; the quick profile (selftest default)
// uses fewer paths and widens fixed tolerances by sqrt(N_full / N), which the
// report flags.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "roughfut/black.hpp"
#include "roughfut/calibration.hpp"
#include "roughfut/cli.hpp"
#include "roughfut/hurst.hpp"
#include "roughfut/pricing.hpp"
#include "roughfut/selftest/oracles.hpp"
#include "roughfut/selftest/synthetic.hpp"
#include "roughfut/spot.hpp"
#include "roughfut/variance.hpp"
#include "roughfut/volterra.hpp"

namespace roughfut::selftest {

struct Options {
  bool full = false;
  std::optional<std::size_t> n_paths;  // overrides both profiles
  unsigned threads = 0;
  std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "roughfut_selftest";
};

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;  // one per sub-check

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { lines.push_back("info " + what); }
};

struct Report {
  int id = 0;
  std::string name;
  bool pass = false;
  bool widened = false;
  double seconds = 0.0;
  std::vector<std::string> lines;
};

/// Profile-dependent path counts and tolerance widening for one criterion.
class Context {
 public:
  explicit Context(const Options& o) : opt_(o) {}

  std::size_t paths(std::size_t full_n, std::size_t quick_n) {
    const std::size_t n = opt_.n_paths ? *opt_.n_paths : (opt_.full ? full_n : quick_n);
    if (n < full_n) widened_ = true;
    return std::max<std::size_t>(n, 2);
  }

  /// Factor for a fixed tolerance stated at full_n when running n paths.
  static double widen(std::size_t full_n, std::size_t n) {
    return n < full_n ? std::sqrt(static_cast<double>(full_n) / static_cast<double>(n)) : 1.0;
  }

  bool full() const { return opt_.full; }
  bool widened() const { return widened_; }
  void mark_widened() { widened_ = true; }
  unsigned threads() const { return opt_.threads; }
  const std::filesystem::path& work_dir() const { return opt_.work_dir; }

 private:
  Options opt_;
  bool widened_ = false;
};

namespace detail {

struct Stat {
  double mean = 0.0;
  double se = 0.0;
};

inline Stat column_stat(const Matrix& m, std::size_t k, const std::function<double(double)>& f = nullptr) {
  double s1 = 0.0, s2 = 0.0;
  const double n = static_cast<double>(m.rows());
  for (std::size_t j = 0; j < m.rows(); ++j) {
    const double x = f ? f(m(j, k)) : m(j, k);
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  return {mean, std::sqrt(std::max(s2 / n - mean * mean, 0.0) / (n - 1.0))};
}

inline std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

inline ModelSpec spec(VarianceModel v, double rho, double a = 0.5) {
  return ModelSpec{std::move(v), SpotParams{a, Correlation::scalar(rho)}};
}

/// Realistic fitted-scale parameters of the four model variants.
inline std::vector<ModelSpec> fitted_scale_models() {
  const auto xi = ForwardVarianceCurve({0.5, 1.0}, {0.12, 0.15}, LeftAnchor::fixed, 0.10);
  return {spec(RBergomiParams{0.0778, 2.1617, xi}, -0.3087), spec(RHestonParams{0.2774, 2.0567, 5.6187, xi}, -0.2017),
          spec(BergomiParams{16.4983, 46.6008, xi}, -0.2108), spec(HestonParams{9.9747, 42.8659, 0.0405, xi}, -0.2004)};
}

inline double atm_vol_se(const SmilePoint& p, double forward, double t) {
  const double vega = black_vega(forward, p.strike, t, std::max(p.model_vol, 1e-3));
  return p.mc_stderr / vega;
}

}  // namespace detail

// --- 1 ---------------------------------------------------------------------------

inline Outcome martingale(Context& ctx) {
  Outcome out;
  const std::size_t n = ctx.paths(100000, 20000);
  const TimeGrid grid(1.0, 100);
  const double f0 = 70.0, t_fut = 1.2;
  std::uint64_t seed = 101;
  for (const auto& m : detail::fitted_scale_models()) {
    const auto b = simulate_paths(m, grid, n, seed++, {ctx.threads(), RHestonBackend::hqe});
    const std::string fam = to_string(family_of(m.variance));
    for (double t : {0.25, 0.5, 1.0}) {
      const auto k = grid.node(t);
      const auto s = detail::column_stat(b.s, k);
      out.check(std::abs(s.mean - 1.0) <= 3.0 * s.se,
                detail::fmt("%-8s t=%.2f  mean s = %.5f, |dev| = %.2f SE", fam.c_str(), t, s.mean,
                            std::abs(s.mean - 1.0) / s.se));
      const auto f = detail::column_stat(b.s, k, [&](double x) { return futures_price(x, t, t_fut, 0.5, f0); });
      out.check(std::abs(f.mean - f0) <= 3.0 * f.se,
                detail::fmt("%-8s t=%.2f  mean F = %.4f vs F0 = %.1f, |dev| = %.2f SE", fam.c_str(), t, f.mean, f0,
                            std::abs(f.mean - f0) / f.se));
    }
  }
  return out;
}

// --- 2 ---------------------------------------------------------------------------

inline Outcome volterra_law(Context& ctx) {
  Outcome out;
  const std::size_t n = ctx.paths(100000, 20000);
  const double w = Context::widen(100000, n);
  const TimeGrid grid(1.0, 100);
  std::uint64_t seed = 201;
  for (double h : {0.1, 0.3, 0.5}) {
    const auto p = volterra_paths(h, grid, n, seed++, ctx.threads());
    for (double t : {0.25, 1.0}) {
      const auto k = grid.node(t);
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s1 += p.wtilde(j, k);
        s2 += p.wtilde(j, k) * p.wtilde(j, k);
      }
      const double mean = s1 / static_cast<double>(n);
      const double var = s2 / static_cast<double>(n) - mean * mean;
      const double rel = std::abs(var / std::pow(t, 2.0 * h) - 1.0);
      out.check(rel < 0.01 * w, detail::fmt("H=%.1f t=%.2f  Var = %.5f vs t^2H = %.5f, rel err %.3f%% (tol %.2f%%)", h,
                                             t, var, std::pow(t, 2.0 * h), 100.0 * rel, w));
    }
    const auto ks = grid.node(0.5), kt = grid.node(1.0);
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) c += p.wtilde(j, ks) * p.wtilde(j, kt);
    c /= static_cast<double>(n);
    const double exact = oracle::volterra_covariance(h, 0.5, 1.0);
    const double rel = std::abs(c / exact - 1.0);
    out.check(rel < 0.02 * w, detail::fmt("H=%.1f  Cov(0.5, 1) = %.5f vs quadrature %.5f, rel err %.3f%% (tol %.2f%%)",
                                           h, c, exact, 100.0 * rel, 2.0 * w));
  }
  return out;
}

// --- 3 ---------------------------------------------------------------------------

inline Outcome forward_variance(Context& ctx) {
  Outcome out;
  const std::size_t n = ctx.paths(100000, 20000);
  const double w = Context::widen(100000, n);
  const TimeGrid grid(1.0, 100);
  {
    const auto xi = ForwardVarianceCurve({0.5, 1.0}, {0.12, 0.15}, LeftAnchor::fixed, 0.10);
    const auto b = simulate_rbergomi({0.0778, 2.1617, xi}, grid, n, 301, {ctx.threads()});
    for (double t : {0.25, 0.5, 1.0}) {
      const auto s = detail::column_stat(b.v, grid.node(t));
      out.check(std::abs(s.mean - xi(t)) <= 3.0 * s.se,
                detail::fmt("rbergomi t=%.2f  mean v = %.5f vs xi0 = %.5f, |dev| = %.2f SE", t, s.mean, xi(t),
                            std::abs(s.mean - xi(t)) / s.se));
    }
  }
  // xi0 from the Volterra equation with V0 = 0.12 relaxing to vbar = 0.16.
  const auto xi = oracle::rheston_xi0_curve(0.12, 0.16, 5.0, 0.3, 1.0);
  for (auto backend : {RHestonBackend::hqe, RHestonBackend::euler}) {
    const auto b = simulate_rheston({0.3, 2.0, 5.0, xi}, grid, n, 302, {ctx.threads(), backend});
    const char* name = backend == RHestonBackend::hqe ? "rheston/hqe  " : "rheston/euler";
    for (double t : {0.1, 0.25, 0.5, 1.0}) {
      const auto s = detail::column_stat(b.v, grid.node(t));
      const double rel = std::abs(s.mean / xi(t) - 1.0);
      out.check(rel <= 0.02 * w, detail::fmt("%s t=%.2f  mean v = %.5f vs oracle %.5f, rel err %.2f%% (tol %.2f%%)",
                                              name, t, s.mean, xi(t), 100.0 * rel, 2.0 * w));
    }
    out.note(detail::fmt("%s fraction of floored variance nodes %.3f", name, b.truncated_fraction));
  }
  return out;
}

// --- 4 ---------------------------------------------------------------------------

inline Outcome reductions(Context& ctx) {
  Outcome out;
  const std::size_t n = ctx.paths(200000, 20000);
  const double tol = 0.005 * Context::widen(200000, n);
  const double f0 = 70.0;
  const FuturesCurve curve(f0);
  const auto xi = ForwardVarianceCurve::flat(0.09);
  const std::vector<std::pair<ModelSpec, ModelSpec>> pairs{
      {detail::spec(RBergomiParams{0.5, 1.0, xi}, -0.3), detail::spec(BergomiParams{1.0, 1e-8, xi}, -0.3)},
      {detail::spec(RHestonParams{0.5, 0.5, 2.0, xi}, -0.5), detail::spec(HestonParams{0.5, 2.0, 0.09, xi}, -0.5)}};
  std::uint64_t seed = 401;
  for (const auto& [rough, classic] : pairs) {
    const TimeGrid grid(0.5, 300);
    const auto a = simulate_paths(rough, grid, n, seed++, {ctx.threads()});
    const auto b = simulate_paths(classic, grid, n, seed++, {ctx.threads()});
    for (double t : {0.25, 0.5}) {
      const double node_t = grid.time(grid.nearest(t));
      const VanillaSpec vs{f0, node_t, node_t, true};
      const auto pa = invert_point(f0, true, mc_vanilla(a, vs, 0.5, curve), f0, node_t);
      const auto pb = invert_point(f0, true, mc_vanilla(b, vs, 0.5, curve), f0, node_t);
      const double d = std::abs(pa.model_vol - pb.model_vol);
      const double se = std::hypot(detail::atm_vol_se(pa, f0, node_t), detail::atm_vol_se(pb, f0, node_t));
      out.check(d <= tol, detail::fmt("%s vs %s t=%.2f  ATM %.4f vs %.4f, diff %.2f vol pts (tol %.2f, MC SE %.2f)",
                                      to_string(family_of(rough.variance)).c_str(),
                                      to_string(family_of(classic.variance)).c_str(), t, pa.model_vol, pb.model_vol,
                                      100.0 * d, 100.0 * tol, 100.0 * se));
    }
  }
  return out;
}

// --- 5 ---------------------------------------------------------------------------

inline Outcome black_inversion(Context&) {
  Outcome out;
  double worst = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < 10; ++i) {
    const double fk = 0.7 + 0.6 * i / 9.0;
    for (int j = 0; j < 10; ++j) {
      const double t = 0.05 + 1.95 * j / 9.0;
      for (double sigma : {0.1, 0.25, 0.5, 1.0, 2.0}) {
        const double k = 100.0 / fk;
        const bool call = k >= 100.0;  // out of the money side
        const double p = black_price(100.0, k, t, sigma, call);
        double err = 1.0;
        try {
          err = std::abs(implied_vol(p, 100.0, k, t, call) - sigma);
        } catch (const OutOfBand&) {
        }
        worst = std::max(worst, err);
        ++count;
      }
    }
  }
  out.check(worst < 1e-8, detail::fmt("round trip over %zu grid points, max |error| = %.2e", count, worst));
  double limit = 0.0;
  for (double k : {60.0, 80.0, 100.0, 120.0, 140.0})
    for (bool call : {true, false}) limit = std::max(limit, std::abs(black_price(100.0, k, 0.5, 1e-15, call) - intrinsic(100.0, k, call)));
  out.check(limit < 1e-12, detail::fmt("sigma -> 0 limit, max |price - intrinsic| = %.2e", limit));
  return out;
}

// --- 6 ---------------------------------------------------------------------------

inline Outcome loss_fixtures(Context&) {
  Outcome out;
  auto surface = [](std::vector<OptionQuote> qs) {
    QuoteSurface s;
    s.contracts.push_back({"FIX", 0.1, 0.12, 70.0});
    s.quotes.push_back(std::move(qs));
    return s;
  };
  {
    const auto s = surface({{60.0, 0.30, 0.02, 100.0, false}, {70.0, 0.35, 0.005, 50.0, true}});
    const auto b = loss(s, {{0.30, 0.33}});
    // weights 100 / 0.02 = 5000 and 50 / max(0.01, 0.005) = 5000; L = 5000 * 0.02 / 10000
    out.check(quote_weight(s.quotes[0][1]) == 5000.0 && std::abs(b.total - 0.01) < 1e-15,
              detail::fmt("worked example: weight %.1f, L_1 = %.17g", quote_weight(s.quotes[0][1]), b.total));
  }
  {
    const auto s = surface({{70.0, 0.40, 0.03, 20.0, true}});
    const auto b = loss(s, {{0.35}});
    out.check(std::abs(b.total - 0.10) < 1e-15 && std::abs(b.penalties[0][0] - 0.05) < 1e-15,
              detail::fmt("error 0.05 pays weighted 0.05 plus penalty 0.05: L = %.17g", b.total));
  }
  {
    const auto s = surface({{60.0, 0.30, 0.02, 100.0, false}, {70.0, 0.35, 0.02, 0.0, true}});
    const auto b = loss(s, {{0.30, 0.25}});
    out.check(b.weighted[0] == 0.0 && std::abs(b.total - 0.10) < 1e-15,
              detail::fmt("zero-volume quote pays only the penalty: L = %.17g", b.total));
  }
  {
    const auto s = surface({{70.0, 0.5, 0.03, 20.0, true}});
    out.check(loss(s, {{0.25}}, 0.25).total == 0.25, "error equal to the cutoff pays no penalty");
  }
  {
    const auto s = surface({{60.0, 0.30, 0.02, 100.0, false}});
    bool thrown = false;
    try {
      loss(s, {{0.3, 0.3}});
    } catch (const AlignmentError&) {
      thrown = true;
    }
    out.check(thrown, "misaligned model vols are rejected");
  }
  return out;
}

// --- 7 and 8: synthetic rBergomi surfaces ------------------------------------------------

namespace detail {

inline CalibrationConfig synthetic_config(std::size_t n, std::uint64_t seed, unsigned threads) {
  CalibrationConfig c;
  c.n_paths = n;
  c.seed = seed;
  c.sim.threads = threads;
  return c;
}

inline constexpr double kH = 0.0778, kEta = 2.1617, kRho = -0.3087, kLevel = 0.09;

/// Synthetic surface priced with an independent generator seed.
inline QuoteSurface reference_surface(const std::vector<double>& rhos, std::size_t n, unsigned threads) {
  auto s = synthetic::skeleton(synthetic::reference_maturities(), synthetic::reference_moneyness());
  const RBergomiParams truth{kH, kEta, synthetic::flat_curve(s, kLevel)};
  auto cfg = synthetic_config(n, 777, threads);
  if (rhos.size() > 1) cfg.rho_mode = RhoMode::per_maturity;
  return synthetic::price_surface(s, truth, rhos, cfg);
}

}  // namespace detail

inline Outcome xi0_fit(Context& ctx) {
  Outcome out;
  const std::size_t n = ctx.paths(100000, 20000);
  const double tol = 0.003 * Context::widen(100000, n);
  const auto surface = detail::reference_surface({detail::kRho}, n, ctx.threads());
  auto cfg = detail::synthetic_config(n, 1, ctx.threads());
  const ModelSpec m{RBergomiParams{detail::kH, detail::kEta, ForwardVarianceCurve::flat(0.2)},
                    {cfg.a, Correlation::scalar(detail::kRho)}};
  const auto e = fit_xi0(m, surface, cfg);
  // Reprice the fitted curve with fresh random numbers: the gap to the
  // market is then bisection tolerance plus genuine MC noise.
  auto fresh = cfg;
  fresh.seed = 2;
  const auto check = SurfaceEngine(surface, fresh).price(RBergomiParams{detail::kH, detail::kEta, e.curve}, {detail::kRho});
  for (std::size_t i = 0; i < surface.maturities(); ++i) {
    const auto& f = e.maturities[i];
    const char* ticker = surface.contracts[i].ticker.c_str();
    const double gap = std::abs(f.atm_model_vol - f.atm_market_vol);
    out.check(f.converged && !f.bracket_hit && gap <= cfg.tolerance,
              detail::fmt("%s  ATM model %.6f vs market %.6f, gap %.1e (tol %.0e), %d bisection steps", ticker,
                          f.atm_model_vol, f.atm_market_vol, gap, cfg.tolerance, f.iterations));
    const auto j = atm_index(surface.contracts[i], surface.quotes[i]);
    const double fresh_gap = std::abs(check.maturities[i].smile[j].model_vol - surface.quotes[i][j].mkt_vol);
    out.check(fresh_gap <= cfg.tolerance + tol,
              detail::fmt("%s  repriced with a fresh seed: ATM %.5f vs market %.5f, %.3f vol pts (tol %.3f)", ticker,
                          check.maturities[i].smile[j].model_vol, surface.quotes[i][j].mkt_vol, 100.0 * fresh_gap,
                          100.0 * (cfg.tolerance + tol)));
    out.note(detail::fmt("%s  fitted xi0 level %.5f (vol %.4f) vs generator 0.09", ticker, f.level, std::sqrt(f.level)));
  }
  return out;
}

inline Outcome self_calibration(Context& ctx) {
  Outcome out;
  const std::size_t n = ctx.paths(20000, 4000);
  const std::size_t gen_n = ctx.full() ? 100000 : 20000;
  const std::size_t global = 200, local = 100;
  const double rho_tol = 0.1 * Context::widen(20000, n);
  auto cfg = detail::synthetic_config(n, 1, ctx.threads());
  cfg.global_budget = global;
  cfg.local_budget = local;

  auto run = [&](RhoMode mode, const std::vector<double>& rhos) {
    const auto surface = detail::reference_surface(rhos, gen_n, ctx.threads());
    auto c = cfg;
    c.rho_mode = mode;
    const SurfaceEngine engine(surface, c);
    const double reference =
        engine.fit(RBergomiParams{detail::kH, detail::kEta, engine.initial_curve()}, rhos).breakdown.total;
    const auto start = Clock::now();
    const auto r = calibrate(Family::rbergomi, surface, c);
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    out.check(r.evaluation.breakdown.total <= 1.2 * reference,
              detail::fmt("%s  loss %.6g vs 1.2 x generator loss %.6g (%zu + %zu evaluations, %.0f s)",
                          to_string(mode).c_str(), r.evaluation.breakdown.total, 1.2 * reference,
                          r.global_evaluations, r.local_evaluations, secs));
    std::string params;
    for (std::size_t i = 0; i < r.names.size(); ++i) params += detail::fmt(" %s=%.4f", r.names[i].c_str(), r.x[i]);
    out.note(to_string(mode) + " fitted" + params);
    return r;
  };

  run(RhoMode::scalar, {detail::kRho});
  const std::vector<double> truth{-0.1, -0.3};
  const auto r = run(RhoMode::per_maturity, truth);
  for (std::size_t i = 0; i < truth.size(); ++i)
    out.check(std::abs(r.rhos[i] - truth[i]) <= rho_tol,
              detail::fmt("per-maturity rho_%zu = %.4f vs %.1f (tol %.2f)", i + 1, r.rhos[i], truth[i], rho_tol));
  return out;
}

// --- 9 ---------------------------------------------------------------------------

inline Outcome samuelson(Context& ctx) {
  Outcome out;
  const std::size_t n = ctx.paths(100000, 20000);
  const double f0 = 70.0, t_fut = 0.44;
  const std::vector<double> a_values{0.0, 0.5, 1.0, 2.0};
  std::vector<double> t_opts;
  for (int i = 0; i < 8; ++i) t_opts.push_back(0.05 + 0.05 * i);
  SmileSettings set;
  set.n_paths = n;
  set.steps_per_year = 300;
  set.seed = 901;
  set.sim.threads = ctx.threads();

  auto spreads = [&](const ModelSpec& m, const char* label) {
    const auto ts = atm_term_structure(m, t_fut, t_opts, a_values, FuturesCurve(f0), set);
    std::vector<double> spread;
    std::string row;
    for (std::size_t i = 0; i < a_values.size(); ++i) {
      spread.push_back(ts[i].back().implied_vol - ts[i].front().implied_vol);
      row += detail::fmt(" a=%.1f: %+.4f", a_values[i], spread.back());
    }
    bool increasing = true;
    for (std::size_t i = 1; i < spread.size(); ++i) increasing = increasing && spread[i] > spread[i - 1];
    out.check(increasing, std::string(label) + " spread ATM(t_opt 0.40) - ATM(t_opt 0.05) strictly increasing:" + row);
    return ts.front();
  };

  // Lognormal variance: the a = 0 profile must equal sqrt(xi0) at every expiry.
  const auto flat = spreads(detail::spec(RBergomiParams{0.1, 0.0, ForwardVarianceCurve::flat(0.1)}, -0.3), "eta=0   ");
  double worst = 0.0;
  for (const auto& p : flat) {
    const double se = p.std_error / black_vega(f0, f0, p.t_opt, p.implied_vol);
    worst = std::max(worst, std::abs(p.implied_vol - std::sqrt(0.1)) / se);
  }
  out.check(worst <= 3.0, detail::fmt("eta=0    a=0 profile flat at sqrt(xi0) = %.4f, max |dev| = %.2f SE",
                                      std::sqrt(0.1), worst));

  const auto rough = spreads(detail::fitted_scale_models().front(), "rbergomi");
  const auto lo = std::min_element(rough.begin(), rough.end(), [](auto& x, auto& y) { return x.implied_vol < y.implied_vol; });
  const auto hi = std::max_element(rough.begin(), rough.end(), [](auto& x, auto& y) { return x.implied_vol < y.implied_vol; });
  out.note(detail::fmt("rbergomi a=0 profile ranges %.4f..%.4f (the model's own ATM term structure)", lo->implied_vol,
                       hi->implied_vol));
  return out;
}

// --- 10 --------------------------------------------------------------------------

inline Outcome hurst_recovery(Context&) {
  Outcome out;
  const std::vector<double> q{0.5, 1.0, 1.5, 2.0, 3.0};
  for (double h : {0.1, 0.3, 0.5}) {
    const auto table = moments(synthetic::fbm_rv(h, 5000, 17), q, lag_range(31));
    const auto fit = estimate_h({table});
    out.check(std::abs(fit.h - h) <= 0.03, detail::fmt("H=%.1f  H_hat = %.4f (SE %.4f)", h, fit.h, fit.h_se));
    double min_r2 = 1.0, worst_z = 0.0;
    for (const auto& s : fit.per_q) {
      min_r2 = std::min(min_r2, s.r2);
      worst_z = std::max(worst_z, std::abs(s.h - fit.h) / std::hypot(s.h_se, fit.h_se));
    }
    out.check(min_r2 > 0.95, detail::fmt("H=%.1f  min R^2 over q = %.3f", h, min_r2));
    out.check(worst_z <= 2.0, detail::fmt("H=%.1f  per-q H_q within %.2f SE of pooled", h, worst_z));
  }
  return out;
}

// --- 11 --------------------------------------------------------------------------

namespace detail {

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Every non-manifest file in a run directory, by name.
inline std::map<std::string, std::string> outputs_of(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.find(".manifest.json") == std::string::npos) out[name] = slurp(e.path());
  }
  return out;
}

}  // namespace detail

inline Outcome determinism(Context& ctx) {
  Outcome out;
  namespace fs = std::filesystem;
  const fs::path root = ctx.work_dir() / "determinism";
  fs::remove_all(root);
  const fs::path inputs = root / "inputs";
  fs::create_directories(inputs);

  auto surface = detail::reference_surface({detail::kRho}, 2000, 1);
  save_quote_surface((inputs / "quotes.csv").string(), surface);
  std::vector<std::vector<double>> rv;
  for (std::uint64_t s : {5, 6}) rv.push_back(synthetic::fbm_rv(0.15, 300, s));
  const auto returns = synthetic::write_intraday(inputs / "intraday", rv, 11);

  std::vector<std::pair<std::string, cli::json>> runs;
  {
    auto c = cli::simulate_defaults();
    c.update({{"model", "rbergomi"}, {"hurst", 0.1}, {"eta", 1.5}, {"rho", -0.3}, {"n_paths", 3000},
              {"maturities", "0.1,0.5"}, {"mesh", "500:100"}, {"seed", 7}, {"paths", "paths.csv"}, {"paths_max", 5}});
    runs.emplace_back("simulate", c);
  }
  {
    auto c = cli::calibrate_defaults();
    c.update({{"model", "rbergomi"}, {"quotes", (inputs / "quotes.csv").string()}, {"n_paths", 1000},
              {"global_budget", 6}, {"local_budget", 4}, {"seed", 3}});
    runs.emplace_back("calibrate", c);
  }
  {
    auto c = cli::hurst_defaults();
    c.update({{"returns", returns}, {"calendar", (inputs / "intraday" / "calendar.csv").string()}, {"dmax", 10}});
    runs.emplace_back("hurst", c);
  }

  for (auto& [command, base] : runs) {
    const std::string outfile = command == "simulate" ? "summary.csv" : "result.json";
    std::vector<std::map<std::string, std::string>> results;
    for (unsigned threads : {1u, 4u, 1u}) {
      const fs::path dir = root / (command + "_" + std::to_string(results.size()));
      auto c = base;
      if (results.size() == 2) {
        // third run replays the first run's manifest
        c = cli::defaults_for(command);
        cli::apply_config_file(c, cli::sidecar(root / (command + "_0") / outfile, ".manifest.json").string());
      } else if (c.contains("threads")) {
        c["threads"] = threads;
      }
      c["out"] = (dir / outfile).string();
      if (c.contains("paths") && c["paths"].is_string()) c["paths"] = (dir / "paths.csv").string();
      cli::run(command, c);
      results.push_back(detail::outputs_of(dir));
    }
    const bool same = results[0] == results[1] && results[0] == results[2];
    std::size_t bytes = 0;
    for (const auto& [name, data] : results[0]) bytes += data.size();
    out.check(same && !results[0].empty(),
              detail::fmt("%-9s %zu output files (%zu bytes) identical across threads 1/4 and a manifest replay",
                          command.c_str(), results[0].size(), bytes));
  }
  return out;
}

// --- registry --------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(Context&)> run;
};

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "martingale", martingale},          {2, "volterra", volterra_law},
      {3, "forward-variance", forward_variance}, {4, "reductions", reductions},
      {5, "black", black_inversion},          {6, "loss", loss_fixtures},
      {7, "xi0-fit", xi0_fit},                {8, "self-calibration", self_calibration},
      {9, "samuelson", samuelson},            {10, "hurst", hurst_recovery},
      {11, "determinism", determinism}};
  return all;
}

inline Report run_one(const Criterion& c, const Options& opt) {
  Context ctx(opt);
  Report r;
  r.id = c.id;
  r.name = c.name;
  const auto start = Clock::now();
  try {
    auto o = c.run(ctx);
    r.pass = o.pass;
    r.lines = std::move(o.lines);
  } catch (const std::exception& e) {
    r.pass = false;
    r.lines.push_back(std::string("FAIL exception: ") + e.what());
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.widened = ctx.widened();
  return r;
}

/// One status line per criterion followed by its indented sub-checks.
inline void print(std::ostream& os, const Report& r) {
  os << (r.pass ? "PASS " : "FAIL ") << std::setw(2) << r.id << ' ' << std::left << std::setw(17) << r.name
     << std::right << detail::fmt(" %7.1f s", r.seconds) << (r.widened ? "  [reduced N, widened tolerances]" : "")
     << '\n';
  for (const auto& l : r.lines) os << "        " << l << '\n';
  os.flush();
}

/// Runs the selected criteria (all when `only` is empty); true iff all pass.
inline bool run_all(std::ostream& os, const Options& opt, const std::vector<std::string>& only = {}) {
  bool ok = true;
  std::size_t ran = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end() &&
        std::find(only.begin(), only.end(), std::to_string(c.id)) == only.end())
      continue;
    const auto r = run_one(c, opt);
    print(os, r);
    ok = ok && r.pass;
    ++ran;
  }
  if (ran == 0) throw cli::ConfigError("no criterion matches the selection");
  return ok;
}

}  // namespace roughfut::selftest
