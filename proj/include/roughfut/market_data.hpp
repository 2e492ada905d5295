#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "roughfut/errors.hpp"

namespace roughfut {

/// A futures contract and the option series written on it. Times are year
/// fractions (ACT/365) from the valuation date; t_fut is the effective last
/// trading time of the futures.
struct FuturesContract {
  std::string ticker;
  double t_opt = 0.0;
  double t_fut = 0.0;
  double f0 = 0.0;

  friend bool operator==(const FuturesContract&, const FuturesContract&) = default;
};

struct OptionQuote {
  double strike = 0.0;
  double mkt_vol = 0.0;
  double bid_ask = 0.0;
  double volume = 0.0;
  bool is_call = true;

  friend bool operator==(const OptionQuote&, const OptionQuote&) = default;
};

/// Quoted implied vols per contract. Quoted American vols are used as
/// European vols.
struct QuoteSurface {
  std::vector<FuturesContract> contracts;          // ascending t_opt
  std::vector<std::vector<OptionQuote>> quotes;    // per contract, ascending strike
  std::chrono::year_month_day valuation_date{};

  std::size_t maturities() const noexcept { return contracts.size(); }
  std::size_t quote_count() const noexcept {
    std::size_t n = 0;
    for (const auto& q : quotes) n += q.size();
    return n;
  }

  friend bool operator==(const QuoteSurface&, const QuoteSurface&) = default;
};

inline void validate(const QuoteSurface& s) {
  if (s.contracts.size() != s.quotes.size()) throw InvariantError("contracts and quote lists differ in length");
  for (std::size_t i = 0; i < s.contracts.size(); ++i) {
    const auto& c = s.contracts[i];
    if (!(c.t_opt > 0.0) || !(c.t_opt <= c.t_fut))
      throw InvariantError(c.ticker + ": require 0 < t_opt <= t_fut");
    if (!(c.f0 > 0.0)) throw InvariantError(c.ticker + ": f0 must be positive");
    if (i > 0 && c.t_opt < s.contracts[i - 1].t_opt)
      throw InvariantError("contracts must be ordered by t_opt");
    if (s.quotes[i].empty()) throw InvariantError(c.ticker + ": contract has no quotes");
    for (std::size_t j = 0; j < s.quotes[i].size(); ++j) {
      const auto& q = s.quotes[i][j];
      if (!(q.strike > 0.0)) throw InvariantError(c.ticker + ": strike must be positive");
      if (!(q.mkt_vol > 0.0)) throw InvariantError(c.ticker + ": market vol must be positive");
      if (!(q.volume >= 0.0) || !(q.bid_ask >= 0.0))
        throw InvariantError(c.ticker + ": volume and bid-ask must be nonnegative");
      if (j > 0 && !(q.strike > s.quotes[i][j - 1].strike))
        throw InvariantError(c.ticker + ": strikes must be strictly increasing");
    }
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view field, std::size_t line, const char* name) {
  // std::from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value))
    throw ParseError(line, std::string("bad ") + name + " '" + std::string(field) + "'");
  return value;
}

inline std::int64_t parse_int(std::string_view field, std::size_t line, const char* name) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError(line, std::string("bad ") + name + " '" + std::string(field) + "'");
  return value;
}

inline bool parse_flag(std::string_view field, std::size_t line) {
  if (field == "1" || field == "true" || field == "C" || field == "c" || field == "call") return true;
  if (field == "0" || field == "false" || field == "P" || field == "p" || field == "put") return false;
  throw ParseError(line, "bad is_call '" + std::string(field) + "'");
}

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline std::chrono::year_month_day parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (std::sscanf(std::string(text).c_str(), "%d-%u-%u", &y, &m, &d) != 3)
    throw InvalidParam("date must be YYYY-MM-DD: " + std::string(text));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw InvalidParam("invalid calendar date: " + std::string(text));
  return ymd;
}

inline std::string format_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline constexpr std::string_view kQuoteHeader = "ticker,t_opt,t_fut,f0,strike,is_call,mkt_vol,bid_ask,volume";

/// Parses a quote CSV. Rows with zero volume and no bid-ask are dropped;
/// a missing bid-ask is otherwise floored at 0. When a put and a call share a
/// strike, the out-of-the-money side is kept (puts below f0, calls at or above).
inline QuoteSurface parse_quote_surface(std::istream& in, std::chrono::year_month_day valuation_date) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) break;
  }
  {
    const auto cols = detail::split_csv(line);
    const auto expected = detail::split_csv(kQuoteHeader);
    if (cols != expected) throw ParseError(lineno, "expected header '" + std::string(kQuoteHeader) + "'");
  }

  struct Row {
    OptionQuote q;
    std::size_t line;
  };
  std::vector<FuturesContract> contracts;
  std::vector<std::vector<Row>> rows;
  std::map<std::string, std::size_t, std::less<>> index;

  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto f = detail::split_csv(text);
    if (f.size() != 9) throw ParseError(lineno, "expected 9 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(lineno, "empty ticker");

    FuturesContract c{std::string(f[0]), detail::parse_double(f[1], lineno, "t_opt"),
                      detail::parse_double(f[2], lineno, "t_fut"), detail::parse_double(f[3], lineno, "f0")};
    if (!(c.t_opt > 0.0) || c.t_opt > c.t_fut)
      throw InvariantError("line " + std::to_string(lineno) + ": require 0 < t_opt <= t_fut");
    if (!(c.f0 > 0.0)) throw InvariantError("line " + std::to_string(lineno) + ": f0 must be positive");

    OptionQuote q;
    q.strike = detail::parse_double(f[4], lineno, "strike");
    q.is_call = detail::parse_flag(f[5], lineno);
    q.mkt_vol = detail::parse_double(f[6], lineno, "mkt_vol");
    const bool has_ba = !f[7].empty();
    q.bid_ask = has_ba ? detail::parse_double(f[7], lineno, "bid_ask") : 0.0;
    q.volume = f[8].empty() ? 0.0 : detail::parse_double(f[8], lineno, "volume");

    auto it = index.find(c.ticker);
    if (it == index.end()) {
      it = index.emplace(c.ticker, contracts.size()).first;
      contracts.push_back(c);
      rows.emplace_back();
    } else if (!(contracts[it->second] == c)) {
      throw InvariantError("line " + std::to_string(lineno) + ": contract fields differ for " + c.ticker);
    }
    if (q.volume == 0.0 && !has_ba) continue;
    if (!(q.strike > 0.0) || !(q.mkt_vol > 0.0) || q.volume < 0.0 || q.bid_ask < 0.0)
      throw InvariantError("line " + std::to_string(lineno) + ": quote field out of range");
    rows[it->second].push_back({q, lineno});
  }

  // Contracts whose every row was cleaned away still count.
  QuoteSurface s;
  s.valuation_date = valuation_date;
  std::vector<std::size_t> order(contracts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return contracts[a].t_opt < contracts[b].t_opt; });

  for (const std::size_t i : order) {
    const auto& c = contracts[i];
    std::vector<OptionQuote> kept;
    for (const auto& r : rows[i]) {
      if (!kept.empty() && kept.back().strike == r.q.strike && kept.back().is_call != r.q.is_call) {
        const bool want_call = r.q.strike >= c.f0;
        if (r.q.is_call == want_call) kept.back() = r.q;
        continue;
      }
      if (!kept.empty() && !(r.q.strike > kept.back().strike))
        throw InvariantError("line " + std::to_string(r.line) + ": strikes must be strictly increasing for " +
                             c.ticker);
      kept.push_back(r.q);
    }
    s.contracts.push_back(c);
    s.quotes.push_back(std::move(kept));
  }
  validate(s);
  return s;
}

inline QuoteSurface load_quote_surface(const std::string& path, std::chrono::year_month_day valuation_date) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path);
  return parse_quote_surface(in, valuation_date);
}

inline void write_quote_surface(std::ostream& out, const QuoteSurface& s) {
  out << kQuoteHeader << '\n';
  for (std::size_t i = 0; i < s.contracts.size(); ++i) {
    const auto& c = s.contracts[i];
    for (const auto& q : s.quotes[i]) {
      out << c.ticker << ',' << detail::fmt_double(c.t_opt) << ',' << detail::fmt_double(c.t_fut) << ','
          << detail::fmt_double(c.f0) << ',' << detail::fmt_double(q.strike) << ',' << (q.is_call ? 1 : 0)
          << ',' << detail::fmt_double(q.mkt_vol) << ',' << detail::fmt_double(q.bid_ask) << ','
          << detail::fmt_double(q.volume) << '\n';
    }
  }
}

inline void save_quote_surface(const std::string& path, const QuoteSurface& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_quote_surface(out, s);
}

// --- intraday data -------------------------------------------------------

struct IntradaySeries {
  std::vector<std::int64_t> timestamps;  // epoch seconds, strictly increasing
  std::vector<double> log_prices;
  std::int64_t bin_seconds = 300;
};

struct TradingDay {
  std::int64_t start = 0;
  std::int64_t end = 0;
};

struct DailyRv {
  std::size_t day = 0;  // index into the trading calendar
  double rv = 0.0;
  std::size_t returns = 0;
};

inline void validate(const IntradaySeries& s) {
  if (s.timestamps.size() != s.log_prices.size()) throw InvariantError("timestamps and prices differ in length");
  if (s.bin_seconds <= 0) throw InvariantError("bin_seconds must be positive");
  for (std::size_t i = 1; i < s.timestamps.size(); ++i)
    if (s.timestamps[i] <= s.timestamps[i - 1]) throw InvariantError("timestamps must be strictly increasing");
}

inline IntradaySeries load_intraday(const std::string& path, std::int64_t bin_seconds) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path);
  IntradaySeries s;
  s.bin_seconds = bin_seconds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto f = detail::split_csv(text);
    if (f.size() != 2) throw ParseError(lineno, "expected epoch_seconds,log_price");
    if (lineno == 1 && f[0] == "epoch_seconds") continue;
    s.timestamps.push_back(detail::parse_int(f[0], lineno, "epoch_seconds"));
    s.log_prices.push_back(detail::parse_double(f[1], lineno, "log_price"));
  }
  validate(s);
  return s;
}

inline std::vector<TradingDay> load_calendar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path);
  std::vector<TradingDay> days;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto f = detail::split_csv(text);
    if (f.size() != 2) throw ParseError(lineno, "expected day_start_epoch,day_end_epoch");
    if (lineno == 1 && f[0] == "day_start_epoch") continue;
    TradingDay d{detail::parse_int(f[0], lineno, "day_start_epoch"), detail::parse_int(f[1], lineno, "day_end_epoch")};
    if (d.end <= d.start) throw InvariantError("line " + std::to_string(lineno) + ": day end must follow start");
    if (!days.empty() && d.start < days.back().end)
      throw InvariantError("line " + std::to_string(lineno) + ": trading days overlap");
    days.push_back(d);
  }
  return days;
}

/// Daily realised-volatility proxies RV_d = sqrt(sum of squared intraday log
/// returns), sampled every bin_seconds from the day start with previous-tick
/// values. Days with fewer than min_returns returns are dropped.
inline std::vector<DailyRv> daily_rv_proxies(const IntradaySeries& series, const std::vector<TradingDay>& calendar,
                                             std::size_t min_returns = 50) {
  validate(series);
  std::vector<DailyRv> out;
  std::size_t cursor = 0;
  const auto n = series.timestamps.size();
  for (std::size_t d = 0; d < calendar.size(); ++d) {
    const auto& day = calendar[d];
    while (cursor < n && series.timestamps[cursor] < day.start) ++cursor;
    std::size_t i = cursor;
    std::optional<double> last_obs;
    std::optional<double> prev_sample;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (std::int64_t g = day.start; g <= day.end; g += series.bin_seconds) {
      while (i < n && series.timestamps[i] <= g) last_obs = series.log_prices[i++];
      if (!last_obs) continue;
      if (prev_sample) {
        const double r = *last_obs - *prev_sample;
        sum_sq += r * r;
        ++count;
      }
      prev_sample = last_obs;
    }
    while (cursor < n && series.timestamps[cursor] <= day.end) ++cursor;
    if (count >= min_returns && count > 0) out.push_back({d, std::sqrt(sum_sq), count});
  }
  if (out.empty()) throw EmptyOutput("no trading day survived the minimum-returns filter");
  return out;
}

}  // namespace roughfut
