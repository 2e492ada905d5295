#pragma once

// Synthetic option-quote surfaces priced by the library's own engine under a
// known model, for round-trip tests of the calibrator.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "roughfut/calibration.hpp"
#include "roughfut/rng.hpp"
#include "roughfut/selftest/oracles.hpp"

namespace roughfut::synthetic {

struct MaturitySpec {
  std::string ticker;
  double t_opt = 0.0;
  double t_fut = 0.0;
  double f0 = 70.0;
};

/// Quote skeleton with strikes f0 * moneyness rounded to 0.25, OTM side per
/// strike, volume peaking at the money and bid-ask widening in the wings.
inline QuoteSurface skeleton(const std::vector<MaturitySpec>& mats, const std::vector<double>& moneyness) {
  QuoteSurface s;
  for (const auto& m : mats) {
    s.contracts.push_back({m.ticker, m.t_opt, m.t_fut, m.f0});
    std::vector<OptionQuote> qs;
    for (double x : moneyness) {
      const double k = std::round(m.f0 * x * 4.0) / 4.0;
      const double d = std::abs(std::log(x));
      qs.push_back({k, 0.3, 0.004 + 0.04 * d, std::round(800.0 * std::exp(-8.0 * d)), k >= m.f0});
    }
    s.quotes.push_back(std::move(qs));
  }
  validate(s);
  return s;
}

/// Replaces the market vols with model vols of `model` priced on the given
/// configuration. Quotes whose model price leaves the no-arbitrage band keep
/// the band-edge vol, so callers should keep strikes moderate.
inline QuoteSurface price_surface(QuoteSurface s, const VarianceModel& model, const std::vector<double>& rhos,
                                  const CalibrationConfig& config) {
  const auto e = SurfaceEngine(s, config).price(model, rhos);
  for (std::size_t i = 0; i < s.maturities(); ++i)
    for (std::size_t j = 0; j < s.quotes[i].size(); ++j) s.quotes[i][j].mkt_vol = e.maturities[i].smile[j].model_vol;
  validate(s);
  return s;
}

/// Term curve on the surface's option expiries with one constant level.
inline ForwardVarianceCurve flat_curve(const QuoteSurface& s, double level) {
  std::vector<double> knots, levels;
  for (const auto& c : s.contracts) {
    knots.push_back(c.t_opt);
    levels.push_back(level);
  }
  return ForwardVarianceCurve(knots, levels);
}

/// Two-maturity rBergomi reference surface shared by the fixtures and the
/// acceptance suite.
inline std::vector<MaturitySpec> reference_maturities() {
  return {{"SYN1", 0.1, 0.12, 70.0}, {"SYN2", 0.25, 0.27, 71.0}};
}

inline std::vector<double> reference_moneyness() { return {0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2}; }

/// Daily realised vols whose logarithm is an exact fBm path.
inline std::vector<double> fbm_rv(double hurst, std::size_t days, std::uint64_t seed, double scale = 0.3) {
  const auto path = oracle::fbm_path(hurst, days - 1, seed);
  std::vector<double> rv;
  for (double x : path) rv.push_back(0.02 * std::exp(scale * x));
  return rv;
}

/// Writes a trading calendar and one intraday log-price file per contract
/// whose 5-minute returns reproduce the given daily realised vols exactly.
/// Returns the price file paths; the calendar is `dir/calendar.csv`.
inline std::vector<std::string> write_intraday(const std::filesystem::path& dir,
                                               const std::vector<std::vector<double>>& daily_rv,
                                               std::uint64_t seed, int bins_per_day = 78) {
  std::filesystem::create_directories(dir);
  const std::size_t days = daily_rv.front().size();
  const std::int64_t bin = 300, base = 1735722000;  // 2025-01-01 09:00 UTC
  {
    std::ofstream cal(dir / "calendar.csv");
    cal << "day_start_epoch,day_end_epoch\n";
    for (std::size_t d = 0; d < days; ++d)
      cal << base + static_cast<std::int64_t>(d) * 86400 << ','
          << base + static_cast<std::int64_t>(d) * 86400 + bins_per_day * bin << '\n';
  }
  std::vector<std::string> files;
  for (std::size_t c = 0; c < daily_rv.size(); ++c) {
    const auto path = dir / ("contract_" + std::to_string(c + 1) + ".csv");
    std::ofstream out(path);
    out << "epoch_seconds,log_price\n";
    double x = std::log(70.0);
    std::vector<double> z(bins_per_day);
    for (std::size_t d = 0; d < days; ++d) {
      PathRng rng(seed + c, Stream::generator, d);
      double ss = 0.0;
      for (double& v : z) {
        v = rng.normal();
        ss += v * v;
      }
      const double scale = daily_rv[c][d] / std::sqrt(ss);
      const std::int64_t start = base + static_cast<std::int64_t>(d) * 86400;
      out << start << ',' << detail::fmt_double(x) << '\n';
      for (int i = 0; i < bins_per_day; ++i) {
        x += scale * z[i];
        out << start + (i + 1) * bin << ',' << detail::fmt_double(x) << '\n';
      }
    }
    files.push_back(path.string());
  }
  return files;
}

}  // namespace roughfut::synthetic
