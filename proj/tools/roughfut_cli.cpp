// roughfut command-line front end. Flags are bound to the JSON keys the
// command implementations read; --config overlays a JSON file (or a previous
// run manifest) on top of them.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roughfut/cli.hpp"
#include "roughfut/selftest/criteria.hpp"

namespace {

using roughfut::cli::json;

enum class Kind { number, integer, text, auto_number, flag, negated_flag, list };

struct Binding {
  std::string key;
  Kind kind;
  std::string value;
  std::vector<std::string> values;
  bool set = false;
  CLI::Option* option = nullptr;
};

/// Collects flag bindings for one subcommand.
class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& help) : sub_(app.add_subcommand(name, help)) {}

  CLI::App* app() const { return sub_; }

  void add(const std::string& flags, const std::string& key, Kind kind, const std::string& help) {
    auto& b = bindings_.emplace_back(std::make_unique<Binding>(Binding{key, kind, {}, {}, false, nullptr}));
    switch (kind) {
      case Kind::flag:
      case Kind::negated_flag:
        b->option = sub_->add_flag(flags, b->set, help);
        break;
      case Kind::list:
        b->option = sub_->add_option(flags, b->values, help);
        break;
      default:
        b->option = sub_->add_option(flags, b->value, help);
    }
  }

  /// Defaults, then the thread-count environment variable, then flags, then --config.
  json resolve(const std::string& name) const {
    auto cfg = roughfut::cli::defaults_for(name);
    if (const char* env = std::getenv("ROUGHFUT_THREADS"); env && cfg.contains("threads"))
      cfg["threads"] = std::stoul(env);
    std::string config_file;
    for (const auto& b : bindings_) {
      if (b->option->count() == 0) continue;
      if (b->key == "config") {
        config_file = b->value;
        continue;
      }
      cfg[b->key] = convert(*b);
    }
    if (!config_file.empty()) roughfut::cli::apply_config_file(cfg, config_file);
    return cfg;
  }

 private:
  static json convert(const Binding& b) {
    using roughfut::cli::ConfigError;
    try {
      switch (b.kind) {
        case Kind::number:
          return roughfut::cli::to_double(b.value);
        case Kind::integer: {
          std::size_t used = 0;
          const auto v = std::stoll(b.value, &used);
          if (used != b.value.size() || v < 0) throw std::invalid_argument(b.value);
          return v;
        }
        case Kind::auto_number:
          try {
            return roughfut::cli::to_double(b.value);
          } catch (const std::exception&) {
            return b.value;
          }
        case Kind::flag:
          return true;
        case Kind::negated_flag:
          return false;
        case Kind::list:
          return b.values;
        case Kind::text:
          return b.value;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("invalid value '" + b.value + "' for " + b.option->get_name());
    }
    return nullptr;
  }

  CLI::App* sub_;
  std::vector<std::unique_ptr<Binding>> bindings_;
};

void add_model_flags(Command& c, bool samuelson) {
  c.add("--model", "model", Kind::text, "rbergomi | rheston | bergomi | heston");
  c.add("--h,--hurst", "hurst", Kind::number, "Hurst parameter");
  c.add("--eta", "eta", Kind::number, "vol-of-vol");
  c.add("--kappa", "kappa", Kind::number, "mean reversion of variance (rheston, bergomi, heston)");
  c.add("--v0", "v0", Kind::number, "initial variance (heston)");
  c.add("--rho", "rho", Kind::auto_number, "correlation, scalar or piecewise 'end:rho,...'");
  c.add("--xi0", "xi0", Kind::text, "forward variance: flat:x, x, or t:v,t:v,...");
  if (samuelson)
    c.add("--a", "a_list", Kind::text, "mean-reversion speeds of the spot, comma list");
  else
    c.add("--a", "a", Kind::number, "mean-reversion speed of the spot");
  c.add("--n-paths", "n_paths", Kind::integer, "Monte Carlo paths");
  c.add("--seed", "seed", Kind::integer, "master seed");
  c.add("--steps", "steps", Kind::integer, "time steps per year");
  c.add("--backend", "backend", Kind::text, "rough Heston scheme: hqe | euler");
}

void add_common(Command& c, bool threads = true) {
  if (threads) c.add("--threads", "threads", Kind::integer, "worker threads (0 = all cores)");
  c.add("--out", "out", Kind::text, "output file");
  c.add("--config", "config", Kind::text, "JSON config or run manifest; overrides flags");
}

int config_error(const std::string& msg, const CLI::App* usage) {
  std::cerr << "error: " << msg << '\n';
  if (usage) std::cerr << '\n' << usage->help();
  return roughfut::cli::kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Rough volatility models for commodity futures options", "roughfut");
  app.set_version_flag("--version", std::string(ROUGHFUT_VERSION));
  app.require_subcommand(1);
  // --h is the Hurst flag, so help is long-form only below the top level
  app.set_help_flag("--help", "print this help and exit");

  std::map<std::string, std::unique_ptr<Command>> commands;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    return *(commands[name] = std::make_unique<Command>(app, name, help));
  };

  auto& sim = make("simulate", "simulate spot and variance paths");
  add_model_flags(sim, false);
  sim.add("--maturities", "maturities", Kind::text, "simulation horizons, comma list");
  sim.add("--mesh", "mesh", Kind::text, "dual mesh fine:coarse steps per year");
  sim.add("--paths", "paths", Kind::text, "optional path dump CSV");
  sim.add("--paths-max", "paths_max", Kind::integer, "paths written to the dump");
  add_common(sim);

  auto& price = make("price", "Monte Carlo smile of one futures option maturity");
  add_model_flags(price, false);
  price.add("--tfut", "tfut", Kind::number, "futures maturity");
  price.add("--topt", "topt", Kind::text, "option expiries");
  price.add("--f0", "f0", Kind::number, "initial futures price");
  price.add("--strike-grid", "strike_grid", Kind::text, "relative strikes start:end:count");
  price.add("--strikes", "strikes", Kind::text, "absolute strikes, comma list");
  price.add("--option-type", "option_type", Kind::text, "otm | call | put");
  price.add("--control-variate", "control_variate", Kind::flag, "use the futures price as control");
  add_common(price);

  auto& sam = make("samuelson", "ATM vol term structure across spot mean-reversion speeds");
  add_model_flags(sam, true);
  sam.add("--tfut", "tfut", Kind::number, "futures maturity");
  sam.add("--topt", "topt", Kind::text, "option expiries start:end:count or comma list");
  sam.add("--f0", "f0", Kind::number, "initial futures price");
  sam.add("--control-variate", "control_variate", Kind::flag, "use the futures price as control");
  add_common(sam);

  auto& cal = make("calibrate", "calibrate a model to a quote surface");
  cal.add("--model", "model", Kind::text, "rbergomi | rheston | bergomi | heston");
  cal.add("--quotes", "quotes", Kind::text, "quote CSV");
  cal.add("--valuation-date", "valuation_date", Kind::text, "YYYY-MM-DD");
  cal.add("--a", "a", Kind::number, "fixed spot mean-reversion speed");
  cal.add("--rho-mode", "rho_mode", Kind::text, "scalar | per-maturity");
  cal.add("--budget", "budget", Kind::text, "global[:local] evaluation budget");
  cal.add("--global-budget", "global_budget", Kind::integer, "global search evaluations");
  cal.add("--local-budget", "local_budget", Kind::integer, "local refinement evaluations");
  cal.add("--n-paths", "n_paths", Kind::integer, "Monte Carlo paths");
  cal.add("--seed", "seed", Kind::integer, "master seed");
  cal.add("--mesh", "mesh", Kind::text, "fine:coarse steps per year");
  cal.add("--single-mesh", "single_mesh", Kind::flag, "price every maturity on the coarse mesh");
  cal.add("--cutoff", "cutoff", Kind::number, "penalty cutoff in vol units");
  cal.add("--tolerance", "tolerance", Kind::number, "bisection tolerance on the ATM vol");
  cal.add("--max-bisection", "max_bisection", Kind::integer, "bisection iteration cap");
  cal.add("--time-limit", "time_limit", Kind::number, "wall-clock limit in seconds (0 = none)");
  cal.add("--backend", "backend", Kind::text, "rough Heston scheme: hqe | euler");
  add_common(cal);

  auto& hur = make("hurst", "Hurst exponent from intraday futures prices");
  hur.add("--returns", "returns", Kind::list, "intraday log-price CSVs, one per contract");
  hur.add("--calendar", "calendar", Kind::text, "trading calendar CSV");
  hur.add("--q", "q", Kind::text, "moment orders, comma list");
  hur.add("--dmax", "dmax", Kind::integer, "largest lag in days");
  hur.add("--pooled", "pooled", Kind::flag, "fit all contracts jointly (default)");
  hur.add("--no-pooled", "pooled", Kind::negated_flag, "per-contract fits only");
  hur.add("--pooling", "pooling", Kind::text, "fixed-effects | averaged");
  hur.add("--bin-seconds", "bin_seconds", Kind::integer, "return sampling interval");
  hur.add("--min-returns", "min_returns", Kind::integer, "minimum returns for a valid day");
  add_common(hur, false);

  auto* self = app.add_subcommand("selftest", "run the acceptance checks");
  std::vector<std::string> only;
  std::size_t self_paths = 0;
  bool full = false, list = false;
  unsigned self_threads = 0;
  std::string work_dir;
  self->add_option("--only", only, "criterion names or numbers");
  self->add_option("--n-paths", self_paths, "path count for every Monte Carlo criterion");
  self->add_flag("--full", full, "use the stated path counts instead of the reduced profile");
  self->add_flag("--list", list, "list the criteria and exit");
  self->add_option("--threads", self_threads, "worker threads (0 = all cores)");
  self->add_option("--work-dir", work_dir, "scratch directory for the determinism check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const CLI::App* usage = &app;
    for (const auto* sub : app.get_subcommands()) usage = sub;
    return config_error(e.what(), usage);
  }

  if (self->parsed()) {
    namespace st = roughfut::selftest;
    if (list) {
      for (const auto& c : st::criteria()) std::cout << c.id << ' ' << c.name << '\n';
      return roughfut::cli::kExitOk;
    }
    st::Options opt;
    opt.full = full;
    if (self_paths > 0) opt.n_paths = self_paths;
    opt.threads = self_threads;
    if (const char* env = std::getenv("ROUGHFUT_THREADS"); env && self->count("--threads") == 0)
      opt.threads = static_cast<unsigned>(std::stoul(env));
    if (!work_dir.empty()) opt.work_dir = work_dir;
    try {
      return st::run_all(std::cout, opt, only) ? roughfut::cli::kExitOk : 1;
    } catch (const roughfut::cli::ConfigError& e) {
      return config_error(e.what(), self);
    }
  }

  for (const auto& [name, cmd] : commands) {
    if (!cmd->app()->parsed()) continue;
    json cfg;
    try {
      cfg = cmd->resolve(name);
      if (cfg.contains("budget")) {
        const auto parts = roughfut::cli::split(cfg["budget"].get<std::string>(), ':');
        if (parts.empty() || parts.size() > 2) throw roughfut::cli::ConfigError("--budget must be G or G:L");
        cfg["global_budget"] = std::stoul(parts[0]);
        if (parts.size() == 2) cfg["local_budget"] = std::stoul(parts[1]);
        cfg.erase("budget");
      }
    } catch (const roughfut::cli::ConfigError& e) {
      return config_error(e.what(), cmd->app());
    } catch (const std::exception& e) {
      return config_error(e.what(), cmd->app());
    }
    try {
      std::cout << roughfut::cli::run(name, cfg).dump() << '\n';
      return roughfut::cli::kExitOk;
    } catch (const roughfut::cli::ConfigError& e) {
      return config_error(e.what(), cmd->app());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return roughfut::cli::kExitRuntime;
    }
  }
  return config_error("no command given", &app);
}
