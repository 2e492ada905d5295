#pragma once

// Command implementations behind the roughfut executable. Each command takes
// a fully resolved JSON configuration, writes its outputs and a run manifest
// next to them, and returns a short JSON summary. Flag parsing lives in the
// tool itself so the commands can also be driven in-process.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "roughfut/calibration.hpp"
#include "roughfut/hurst.hpp"
#include "roughfut/market_data.hpp"
#include "roughfut/pricing.hpp"
#include "roughfut/spot.hpp"

#ifndef ROUGHFUT_VERSION
#define ROUGHFUT_VERSION "0.1.0"
#endif

namespace roughfut::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Bad flags, config values or input files: exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// --- value parsing -----------------------------------------------------------

inline double to_double(const std::string& s) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw ConfigError("not a number: '" + s + "'");
  return x;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(std::string(detail::trim(cur)));
  return out;
}

/// "0,0.5,1" or "start:end:count" (count points, both ends included).
inline std::vector<double> parse_values(const std::string& s) {
  if (detail::trim(s).empty()) return {};
  const auto parts = split(s, ':');
  if (parts.size() == 3) {
    const double a = to_double(parts[0]), b = to_double(parts[1]);
    const double n = to_double(parts[2]);
    if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError("range count must be a positive integer: '" + s + "'");
    if (n == 1.0) return {a};
    std::vector<double> out;
    for (int i = 0; i < static_cast<int>(n); ++i) out.push_back(a + (b - a) * i / (n - 1.0));
    return out;
  }
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(to_double(p));
  return out;
}

inline std::vector<double> values_of(const json& v) {
  if (v.is_array()) return v.get<std::vector<double>>();
  if (v.is_number()) return {v.get<double>()};
  if (v.is_string()) return parse_values(v.get<std::string>());
  throw ConfigError("expected a number list");
}

/// Term curve from "flat:0.04", "0.04", "t1:v1,t2:v2" or a JSON object.
inline ForwardVarianceCurve parse_curve(const json& v) {
  if (v.is_object()) return v.get<ForwardVarianceCurve>();
  if (v.is_number()) return ForwardVarianceCurve::flat(v.get<double>());
  const std::string s = v.get<std::string>();
  if (s.rfind("flat:", 0) == 0) return ForwardVarianceCurve::flat(to_double(s.substr(5)));
  if (s.find(':') == std::string::npos) return ForwardVarianceCurve::flat(to_double(s));
  std::vector<double> knots, levels;
  for (const auto& pair : split(s, ',')) {
    const auto kv = split(pair, ':');
    if (kv.size() != 2) throw ConfigError("curve points must be t:level, got '" + pair + "'");
    knots.push_back(to_double(kv[0]));
    levels.push_back(to_double(kv[1]));
  }
  return ForwardVarianceCurve(knots, levels);
}

/// Scalar rho, or "end1:rho1,end2:rho2" buckets (the last value holds beyond).
inline Correlation parse_corr(const json& v) {
  if (v.is_number()) return Correlation::scalar(v.get<double>());
  const std::string s = v.get<std::string>();
  if (s.find(':') == std::string::npos) return Correlation::scalar(to_double(s));
  std::vector<double> ends, vals;
  for (const auto& pair : split(s, ',')) {
    const auto kv = split(pair, ':');
    if (kv.size() != 2) throw ConfigError("correlation buckets must be end:rho, got '" + pair + "'");
    ends.push_back(to_double(kv[0]));
    vals.push_back(to_double(kv[1]));
  }
  return Correlation::piecewise(ends, vals);
}

inline std::pair<int, int> parse_mesh(const std::string& s) {
  const auto p = split(s, ':');
  if (p.size() != 2) throw ConfigError("mesh must be fine:coarse steps per year, got '" + s + "'");
  return {static_cast<int>(to_double(p[0])), static_cast<int>(to_double(p[1]))};
}

inline std::chrono::year_month_day parse_day(const std::string& s) {
  try {
    return roughfut::parse_date(s);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad date '") + s + "': " + e.what());
  }
}

// --- model configuration -------------------------------------------------------

/// Fills family-specific defaults into a model config in place.
inline void resolve_model(json& cfg) {
  if (!cfg.contains("model") || cfg["model"].is_null()) throw ConfigError("--model is required");
  Family f;
  try {
    f = parse_family(cfg["model"].get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  for (const auto& name : variance_parameter_names(f))
    if (!cfg.contains(name) || cfg[name].is_null()) cfg[name] = default_start(f, name);
  if (!cfg.contains("rho") || cfg["rho"].is_null()) cfg["rho"] = default_start(f, "rho");
}

inline ModelSpec model_from(const json& cfg) {
  const Family f = parse_family(cfg.at("model").get<std::string>());
  const auto curve = parse_curve(cfg.at("xi0"));
  ModelSpec m;
  switch (f) {
    case Family::rbergomi:
      m.variance = RBergomiParams{cfg.at("hurst").get<double>(), cfg.at("eta").get<double>(), curve};
      break;
    case Family::rheston:
      m.variance = RHestonParams{cfg.at("hurst").get<double>(), cfg.at("eta").get<double>(),
                                 cfg.at("kappa").get<double>(), curve};
      break;
    case Family::bergomi:
      m.variance = BergomiParams{cfg.at("eta").get<double>(), cfg.at("kappa").get<double>(), curve};
      break;
    case Family::heston:
      m.variance = HestonParams{cfg.at("eta").get<double>(), cfg.at("kappa").get<double>(),
                                cfg.at("v0").get<double>(), curve};
      break;
  }
  m.spot = SpotParams{cfg.at("a").get<double>(), parse_corr(cfg.at("rho"))};
  validate(m);
  return m;
}

inline SimOptions sim_options(const json& cfg) {
  SimOptions o;
  o.threads = cfg.value("threads", 0u);
  o.rheston_backend = parse_backend(cfg.value("backend", std::string("hqe")));
  return o;
}

// --- output plumbing -----------------------------------------------------------

/// 64-bit FNV-1a of a file's bytes, as hex.
inline std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

inline fs::path sidecar(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

inline void write_json(const fs::path& p, const json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

/// Command, resolved config, seed, version, input digests and wall time. The
/// config block can be fed back through --config to reproduce the outputs.
inline void write_manifest(const fs::path& out, const std::string& command, const json& cfg,
                           const std::vector<std::string>& inputs, double wall_seconds,
                           const std::vector<fs::path>& outputs) {
  json digests = json::object();
  for (const auto& f : inputs) digests[f] = digest_file(f);
  std::vector<std::string> outs;
  for (const auto& p : outputs) outs.push_back(p.filename().string());
  write_json(sidecar(out, ".manifest.json"), {{"command", command},
                                              {"config", cfg},
                                              {"seed", cfg.value("seed", std::uint64_t{0})},
                                              {"version", ROUGHFUT_VERSION},
                                              {"inputs", digests},
                                              {"outputs", outs},
                                              {"wall_seconds", wall_seconds}});
}

inline std::string num(double x) { return detail::fmt_double(x); }

inline double elapsed(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

inline fs::path out_path(const json& cfg) {
  if (!cfg.contains("out") || !cfg["out"].is_string() || cfg["out"].get<std::string>().empty())
    throw ConfigError("--out is required");
  return fs::path(cfg["out"].get<std::string>());
}

// --- simulate ------------------------------------------------------------------

/// Keys shared by the commands that build a model from flags.
inline json with_model_keys(json d) {
  for (const char* k : {"hurst", "eta", "kappa"}) d[k] = nullptr;
  return d;
}

inline json simulate_defaults() {
  return with_model_keys({{"model", nullptr}, {"xi0", "flat:0.04"}, {"a", 0.5},       {"rho", nullptr},
          {"v0", nullptr},    {"n_paths", 100000},  {"seed", 1},      {"maturities", "1"},
          {"steps", 300},     {"mesh", nullptr},    {"paths", nullptr}, {"paths_max", 1000},
          {"backend", "hqe"}, {"threads", 0},       {"out", nullptr}});
}

struct SimulatePlan {
  ModelSpec model;
  DualMeshPlan plan;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  SimOptions sim;
};

inline void resolve_v0(json& cfg) {
  if (cfg.value("model", std::string()) == "heston" && cfg["v0"].is_null()) cfg["v0"] = parse_curve(cfg["xi0"])(0.0);
}

inline SimulatePlan prepare_simulate(json& cfg) {
  try {
    resolve_model(cfg);
    resolve_v0(cfg);
    SimulatePlan p;
    p.model = model_from(cfg);
    const auto mats = values_of(cfg.at("maturities"));
    if (mats.empty()) throw ConfigError("at least one maturity is required");
    if (cfg["mesh"].is_string() && mats.size() > 1) {
      const auto [fine, coarse] = parse_mesh(cfg["mesh"].get<std::string>());
      p.plan = DualMeshPlan::dual(mats, fine, coarse);
    } else {
      p.plan = DualMeshPlan::single(mats, cfg.at("steps").get<int>());
    }
    p.n_paths = cfg.at("n_paths").get<std::size_t>();
    if (p.n_paths == 0) throw ConfigError("--n-paths must be positive");
    p.seed = cfg.at("seed").get<std::uint64_t>();
    p.sim = sim_options(cfg);
    out_path(cfg);
    return p;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

/// Summary CSV per grid node: mesh,t,mean_s,stderr_s,mean_v.
inline json cmd_simulate(json cfg) {
  const auto start = Clock::now();
  const auto p = prepare_simulate(cfg);
  const auto out = out_path(cfg);
  const auto batches = simulate(p.model, p.plan, p.n_paths, p.seed, p.sim);
  std::vector<fs::path> written{out};
  {
    auto f = open_out(out);
    f << "mesh,t,mean_s,stderr_s,mean_v\n";
    for (const auto& [mesh, b] : batches) {
      const double n = static_cast<double>(b.n_paths());
      for (std::size_t k = 0; k < b.grid.nodes(); ++k) {
        double s1 = 0.0, s2 = 0.0, v1 = 0.0;
        for (std::size_t j = 0; j < b.n_paths(); ++j) {
          s1 += b.s(j, k);
          s2 += b.s(j, k) * b.s(j, k);
          v1 += b.v(j, k);
        }
        const double mean = s1 / n;
        const double se = n > 1.0 ? std::sqrt(std::max(s2 / n - mean * mean, 0.0) / (n - 1.0)) : 0.0;
        f << to_string(mesh) << ',' << num(b.grid.time(k)) << ',' << num(mean) << ',' << num(se) << ','
          << num(v1 / n) << '\n';
      }
    }
  }
  if (cfg["paths"].is_string()) {
    const fs::path dump = cfg["paths"].get<std::string>();
    const auto limit = cfg.at("paths_max").get<std::size_t>();
    for (const auto& [mesh, b] : batches) {
      const fs::path target = batches.size() == 1 ? dump : sidecar(dump, "_" + to_string(mesh) + dump.extension().string());
      auto f = open_out(target);
      f << "t,path_id,s,v\n";
      for (std::size_t j = 0; j < std::min(limit, b.n_paths()); ++j)
        for (std::size_t k = 0; k < b.grid.nodes(); ++k)
          f << num(b.grid.time(k)) << ',' << j << ',' << num(b.s(j, k)) << ',' << num(b.v(j, k)) << '\n';
      written.push_back(target);
    }
  }
  write_manifest(out, "simulate", cfg, {}, elapsed(start), written);
  double worst = 0.0;
  for (const auto& [mesh, b] : batches) worst = std::max(worst, b.truncated_fraction);
  return {{"outputs", written.size()}, {"truncated_fraction", worst}};
}

// --- price ---------------------------------------------------------------------

inline json price_defaults() {
  return with_model_keys({{"model", nullptr},  {"xi0", "flat:0.04"}, {"a", 0.5},        {"rho", nullptr},
          {"v0", nullptr},     {"tfut", 0.5},        {"topt", "0.5"},    {"f0", 70.0},
          {"strike_grid", "0.8:1.2:9"}, {"strikes", nullptr}, {"option_type", "otm"},
          {"n_paths", 100000}, {"seed", 1},          {"steps", 300},     {"control_variate", false},
          {"backend", "hqe"},  {"threads", 0},       {"out", nullptr}});
}

inline std::vector<double> strikes_of(const json& cfg, double forward) {
  if (cfg.contains("strikes") && !cfg["strikes"].is_null()) return values_of(cfg["strikes"]);
  auto rel = values_of(cfg.at("strike_grid"));
  for (double& k : rel) k *= forward;
  return rel;
}

inline bool is_call_for(const std::string& type, double strike, double forward) {
  if (type == "call") return true;
  if (type == "put") return false;
  if (type == "otm") return strike >= forward;
  throw ConfigError("option type must be call, put or otm");
}

/// Smile CSV: a,t_opt,strike,price,stderr,implied_vol (nan when out of band).
inline json cmd_price(json cfg) {
  const auto start = Clock::now();
  ModelSpec model;
  std::vector<double> topts, strikes;
  double tfut = 0.0;
  FuturesCurve curve(1.0);
  SmileSettings set;
  std::string type;
  try {
    resolve_model(cfg);
    resolve_v0(cfg);
    model = model_from(cfg);
    tfut = cfg.at("tfut").get<double>();
    topts = values_of(cfg.at("topt"));
    if (topts.empty()) throw ConfigError("--topt needs at least one expiry");
    for (double t : topts)
      if (!(t > 0.0 && t <= tfut)) throw ConfigError("option expiries must lie in (0, tfut]");
    curve = FuturesCurve(cfg.at("f0").get<double>());
    strikes = strikes_of(cfg, curve(tfut));
    if (strikes.empty()) throw ConfigError("no strikes requested");
    for (double k : strikes)
      if (!(k > 0.0)) throw ConfigError("strikes must be positive");
    type = cfg.at("option_type").get<std::string>();
    is_call_for(type, 1.0, 1.0);
    set.n_paths = cfg.at("n_paths").get<std::size_t>();
    set.steps_per_year = cfg.at("steps").get<int>();
    set.seed = cfg.at("seed").get<std::uint64_t>();
    set.sim = sim_options(cfg);
    set.control_variate = cfg.at("control_variate").get<bool>();
    out_path(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto out = out_path(cfg);
  auto f = open_out(out);
  f << "a,t_opt,strike,price,stderr,implied_vol\n";
  std::size_t rows = 0;
  for (double t : topts) {
    std::vector<VanillaSpec> specs;
    for (double k : strikes) specs.push_back({k, t, tfut, is_call_for(type, k, curve(tfut))});
    for (const auto& p : model_smile(model, specs, curve, set)) {
      f << num(model.spot.mean_reversion) << ',' << num(t) << ',' << num(p.strike) << ',' << num(p.price) << ','
        << num(p.mc_stderr) << ',' << (p.status == VolStatus::ok ? num(p.model_vol) : "nan") << '\n';
      ++rows;
    }
  }
  f.close();
  write_manifest(out, "price", cfg, {}, elapsed(start), {out});
  return {{"rows", rows}};
}

// --- samuelson -------------------------------------------------------------------

inline json samuelson_defaults() {
  auto d = price_defaults();
  d.erase("strike_grid");
  d.erase("strikes");
  d.erase("option_type");
  d["a_list"] = "0,0.5,1,2";
  d["tfut"] = 0.44;
  d["topt"] = "0.05:0.40:8";
  return d;
}

/// ATM term structure per mean-reversion speed, same columns as price.
inline json cmd_samuelson(json cfg) {
  const auto start = Clock::now();
  ModelSpec model;
  std::vector<double> a_values, topts;
  double tfut = 0.0;
  FuturesCurve curve(1.0);
  SmileSettings set;
  try {
    resolve_model(cfg);
    resolve_v0(cfg);
    a_values = values_of(cfg.at("a_list"));
    if (a_values.empty()) throw ConfigError("--a needs at least one mean-reversion speed");
    for (double a : a_values)
      if (!(a >= 0.0)) throw ConfigError("mean-reversion speeds must be nonnegative");
    model = model_from(cfg);
    tfut = cfg.at("tfut").get<double>();
    topts = values_of(cfg.at("topt"));
    if (topts.empty()) throw ConfigError("--topt needs at least one expiry");
    for (double t : topts)
      if (!(t > 0.0 && t <= tfut)) throw ConfigError("option expiries must lie in (0, tfut]");
    curve = FuturesCurve(cfg.at("f0").get<double>());
    set.n_paths = cfg.at("n_paths").get<std::size_t>();
    set.steps_per_year = cfg.at("steps").get<int>();
    set.seed = cfg.at("seed").get<std::uint64_t>();
    set.sim = sim_options(cfg);
    set.control_variate = cfg.at("control_variate").get<bool>();
    out_path(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto out = out_path(cfg);
  const auto ts = atm_term_structure(model, tfut, topts, a_values, curve, set);
  auto f = open_out(out);
  f << "a,t_opt,strike,price,stderr,implied_vol\n";
  for (const auto& row : ts)
    for (const auto& p : row)
      f << num(p.a) << ',' << num(p.t_opt) << ',' << num(p.strike) << ',' << num(p.price) << ',' << num(p.std_error)
        << ',' << (p.status == VolStatus::ok ? num(p.implied_vol) : "nan") << '\n';
  f.close();
  write_manifest(out, "samuelson", cfg, {}, elapsed(start), {out});
  return {{"rows", a_values.size() * topts.size()}};
}

// --- calibrate -------------------------------------------------------------------

inline json calibrate_defaults() {
  return {{"model", nullptr},     {"quotes", nullptr},      {"valuation_date", "1970-01-01"},
          {"a", 0.5},             {"rho_mode", "scalar"},   {"global_budget", 200},
          {"local_budget", 100},  {"seed", 1},              {"n_paths", 100000},
          {"mesh", "2000:300"},   {"single_mesh", false},   {"cutoff", 0.03},
          {"tolerance", 1e-4},    {"max_bisection", 60},    {"level_min", 1e-4},
          {"level_max", 4.0},     {"time_limit", 0.0},      {"bounds", json::object()},
          {"initial", json::object()}, {"backend", "hqe"},  {"threads", 0},
          {"out", nullptr}};
}

inline CalibrationConfig calibration_config(const json& cfg) {
  CalibrationConfig c;
  c.a = cfg.at("a").get<double>();
  c.cutoff = cfg.at("cutoff").get<double>();
  c.tolerance = cfg.at("tolerance").get<double>();
  c.max_bisection = cfg.at("max_bisection").get<int>();
  c.level_min = cfg.at("level_min").get<double>();
  c.level_max = cfg.at("level_max").get<double>();
  c.global_budget = cfg.at("global_budget").get<std::size_t>();
  c.local_budget = cfg.at("local_budget").get<std::size_t>();
  c.seed = cfg.at("seed").get<std::uint64_t>();
  c.n_paths = cfg.at("n_paths").get<std::size_t>();
  const auto [fine, coarse] = parse_mesh(cfg.at("mesh").get<std::string>());
  c.fine_steps = fine;
  c.coarse_steps = coarse;
  c.dual_mesh = !cfg.at("single_mesh").get<bool>();
  c.rho_mode = parse_rho_mode(cfg.at("rho_mode").get<std::string>());
  for (const auto& [name, r] : cfg.at("bounds").items()) {
    if (!r.is_array() || r.size() != 2) throw ConfigError("bounds." + name + " must be [lo, hi]");
    c.bounds[name] = {r[0].get<double>(), r[1].get<double>()};
  }
  for (const auto& [name, x] : cfg.at("initial").items()) c.initial[name] = x.get<double>();
  c.time_limit = cfg.at("time_limit").get<double>();
  c.sim = sim_options(cfg);
  c.validate();
  return c;
}

/// Smile CSV per maturity: strike,mkt_vol,model_vol,volume,bid_ask.
inline void write_smile(const fs::path& p, const std::vector<OptionQuote>& qs, const MaturityFit& m) {
  auto f = open_out(p);
  f << "strike,mkt_vol,model_vol,volume,bid_ask\n";
  for (std::size_t j = 0; j < qs.size(); ++j)
    f << num(qs[j].strike) << ',' << num(qs[j].mkt_vol) << ',' << num(m.smile[j].model_vol) << ','
      << num(qs[j].volume) << ',' << num(qs[j].bid_ask) << '\n';
}

inline json cmd_calibrate(json cfg) {
  const auto start = Clock::now();
  Family family;
  QuoteSurface surface;
  CalibrationConfig config;
  std::string quotes;
  try {
    if (!cfg.contains("model") || cfg["model"].is_null()) throw ConfigError("--model is required");
    family = parse_family(cfg["model"].get<std::string>());
    if (!cfg["quotes"].is_string()) throw ConfigError("--quotes is required");
    quotes = cfg["quotes"].get<std::string>();
    surface = load_quote_surface(quotes, parse_day(cfg.at("valuation_date").get<std::string>()));
    config = calibration_config(cfg);
    out_path(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto out = out_path(cfg);
  const auto r = calibrate(family, surface, config);
  auto j = result_json(r, surface);
  std::vector<fs::path> written{out};
  for (std::size_t i = 0; i < surface.maturities(); ++i) {
    const auto p = sidecar(out, "_smile_" + surface.contracts[i].ticker + ".csv");
    write_smile(p, surface.quotes[i], r.evaluation.maturities[i]);
    written.push_back(p);
  }
  write_json(out, j);
  write_manifest(out, "calibrate", cfg, {quotes}, elapsed(start), written);
  return {{"loss", r.evaluation.breakdown.total}, {"evaluations", r.evaluations}, {"timed_out", r.timed_out}};
}

// --- hurst -----------------------------------------------------------------------

inline json hurst_defaults() {
  return {{"returns", json::array()}, {"calendar", nullptr}, {"q", "0.5,1,1.5,2,3"}, {"dmax", 31},
          {"pooled", true},          {"pooling", "fixed-effects"}, {"bin_seconds", 300},
          {"min_returns", 50},       {"out", nullptr}};
}

inline Pooling parse_pooling(const std::string& s) {
  if (s == "fixed-effects") return Pooling::fixed_effects;
  if (s == "averaged") return Pooling::averaged;
  throw ConfigError("pooling must be fixed-effects or averaged");
}

/// Pooled fit (unless disabled) plus one fit per contract; scatter CSV
/// q,delta,log_delta,log_m,contract beside the JSON.
inline json cmd_hurst(json cfg) {
  const auto start = Clock::now();
  std::vector<std::string> files;
  std::string calendar_file;
  std::vector<double> q;
  std::size_t dmax = 0;
  Pooling pooling;
  std::vector<MomentTable> tables;
  try {
    files = cfg.at("returns").get<std::vector<std::string>>();
    if (files.empty()) throw ConfigError("--returns needs at least one file");
    if (!cfg["calendar"].is_string()) throw ConfigError("--calendar is required");
    calendar_file = cfg["calendar"].get<std::string>();
    q = values_of(cfg.at("q"));
    dmax = cfg.at("dmax").get<std::size_t>();
    if (dmax < 2) throw ConfigError("--dmax must be at least 2");
    pooling = parse_pooling(cfg.at("pooling").get<std::string>());
    out_path(cfg);
    const auto calendar = load_calendar(calendar_file);
    for (const auto& file : files) {
      const auto series = load_intraday(file, cfg.at("bin_seconds").get<std::int64_t>());
      const auto rv = positive_rv(daily_rv_proxies(series, calendar, cfg.at("min_returns").get<std::size_t>()));
      tables.push_back(moments(rv, q, lag_range(dmax), fs::path(file).stem().string()));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto out = out_path(cfg);
  json j;
  j["version"] = ROUGHFUT_VERSION;
  if (cfg.at("pooled").get<bool>()) j["pooled"] = hurst_json(estimate_h(tables, pooling), tables);
  json per = json::array();
  for (const auto& t : tables) {
    try {
      per.push_back(hurst_json(estimate_h({t}), {t}));
    } catch (const DegenerateRegression& e) {
      per.push_back({{"contracts", {t.contract}}, {"error", e.what()}});
    }
  }
  j["per_contract"] = per;
  write_json(out, j);
  const auto scatter = sidecar(out, "_scatter.csv");
  {
    auto f = open_out(scatter);
    write_moment_scatter(f, tables);
  }
  std::vector<std::string> inputs = files;
  inputs.push_back(calendar_file);
  write_manifest(out, "hurst", cfg, inputs, elapsed(start), {out, scatter});
  json summary = {{"contracts", tables.size()}};
  if (j.contains("pooled")) summary["h"] = j["pooled"]["h"];
  return summary;
}

// --- dispatch ----------------------------------------------------------------------

inline json defaults_for(const std::string& command) {
  if (command == "simulate") return simulate_defaults();
  if (command == "price") return price_defaults();
  if (command == "samuelson") return samuelson_defaults();
  if (command == "calibrate") return calibrate_defaults();
  if (command == "hurst") return hurst_defaults();
  throw ConfigError("unknown command '" + command + "'");
}

/// Overlays a --config file on the flag values. A run manifest is accepted
/// too, in which case its config block is used.
inline void apply_config_file(json& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  json file;
  try {
    file = json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (file.contains("command") && file.contains("config")) file = file["config"];
  if (!file.is_object()) throw ConfigError("config " + path + " must be a JSON object");
  for (const auto& [k, v] : file.items()) {
    if (!cfg.contains(k)) throw ConfigError("config " + path + ": unknown key '" + k + "'");
    cfg[k] = v;
  }
}

inline json run(const std::string& command, const json& cfg) {
  if (command == "simulate") return cmd_simulate(cfg);
  if (command == "price") return cmd_price(cfg);
  if (command == "samuelson") return cmd_samuelson(cfg);
  if (command == "calibrate") return cmd_calibrate(cfg);
  if (command == "hurst") return cmd_hurst(cfg);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace roughfut::cli
