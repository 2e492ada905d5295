#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roughfut/black.hpp"
#include "roughfut/errors.hpp"
#include "roughfut/fv_curve.hpp"
#include "roughfut/market_data.hpp"
#include "roughfut/models.hpp"
#include "roughfut/optimize.hpp"
#include "roughfut/parallel.hpp"
#include "roughfut/pricing.hpp"
#include "roughfut/spot.hpp"
#include "roughfut/time_grid.hpp"
#include "roughfut/variance.hpp"

namespace roughfut {

// --- loss ------------------------------------------------------------------

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> per_maturity;
  std::vector<double> weighted;  // weighted-error term per maturity, before penalties
  std::vector<std::vector<double>> abs_errors;
  std::vector<std::vector<double>> penalties;
};

/// Weight of one quote: volume / max(0.01, bid-ask).
inline double quote_weight(const OptionQuote& q) { return q.volume / std::max(0.01, q.bid_ask); }

/// L = sum_i [ (1/w_i) sum_j w_ij |err_ij| + sum_j 1{|err_ij| > cutoff} |err_ij| ].
/// Quotes flagged in `failed` always pay the penalty term.
inline LossBreakdown loss(const QuoteSurface& surface, const std::vector<std::vector<double>>& model_vols,
                          double cutoff = 0.03, const std::vector<std::vector<bool>>* failed = nullptr) {
  if (model_vols.size() != surface.maturities())
    throw AlignmentError("model vols cover " + std::to_string(model_vols.size()) + " maturities, surface has " +
                         std::to_string(surface.maturities()));
  if (failed && failed->size() != model_vols.size()) throw AlignmentError("failure mask does not match the surface");
  LossBreakdown b;
  for (std::size_t i = 0; i < surface.maturities(); ++i) {
    const auto& qs = surface.quotes[i];
    if (model_vols[i].size() != qs.size() || (failed && (*failed)[i].size() != qs.size()))
      throw AlignmentError("maturity " + surface.contracts[i].ticker + ": model vols do not match the quotes");
    double wsum = 0.0, werr = 0.0, pen = 0.0;
    std::vector<double> errs, pens;
    for (std::size_t j = 0; j < qs.size(); ++j) {
      const double e = std::abs(qs[j].mkt_vol - model_vols[i][j]);
      const double w = quote_weight(qs[j]);
      wsum += w;
      werr += w * e;
      const bool hit = e > cutoff || (failed && (*failed)[i][j]);
      errs.push_back(e);
      pens.push_back(hit ? e : 0.0);
      pen += pens.back();
    }
    const double term = wsum > 0.0 ? werr / wsum : 0.0;
    b.weighted.push_back(term);
    b.per_maturity.push_back(term + pen);
    b.abs_errors.push_back(std::move(errs));
    b.penalties.push_back(std::move(pens));
    b.total += b.per_maturity.back();
  }
  return b;
}

// --- configuration ---------------------------------------------------------

enum class RhoMode { scalar, per_maturity };

inline std::string to_string(RhoMode m) { return m == RhoMode::scalar ? "scalar" : "per-maturity"; }

inline RhoMode parse_rho_mode(const std::string& s) {
  if (s == "scalar") return RhoMode::scalar;
  if (s == "per-maturity") return RhoMode::per_maturity;
  throw InvalidParam("unknown correlation mode '" + s + "' (expected scalar or per-maturity)");
}

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct CalibrationConfig {
  double a = 0.5;
  double cutoff = 0.03;
  double tolerance = 1e-4;
  int max_bisection = 60;
  double level_min = 1e-4;
  double level_max = 4.0;
  std::size_t global_budget = 200;
  std::size_t local_budget = 100;
  std::uint64_t seed = 1;
  std::size_t n_paths = 100000;
  int fine_steps = 2000;
  int coarse_steps = 300;
  bool dual_mesh = true;
  RhoMode rho_mode = RhoMode::scalar;
  /// Overrides of the default search ranges, by parameter name.
  std::map<std::string, ParamRange> bounds;
  /// Starting point, by parameter name; missing entries use family defaults.
  std::map<std::string, double> initial;
  /// Wall-clock limit in seconds for the whole search; 0 disables it.
  double time_limit = 0.0;
  SimOptions sim;

  void validate() const {
    if (!(a >= 0.0)) throw InvalidParam("mean reversion a must be non-negative");
    if (!(cutoff >= 0.0)) throw InvalidParam("penalty cutoff must be non-negative");
    if (!(tolerance > 0.0) || max_bisection < 1) throw InvalidParam("bisection needs tolerance > 0 and >= 1 iteration");
    if (!(level_min > 0.0 && level_min < level_max)) throw InvalidParam("level bracket must satisfy 0 < min < max");
    if (global_budget < 1) throw InvalidParam("global budget must be at least 1");
    if (n_paths < 1) throw InvalidParam("number of paths must be positive");
    if (fine_steps < 1 || coarse_steps < 1) throw InvalidParam("mesh sizes must be positive");
    for (const auto& [name, r] : bounds)
      if (!(r.lo < r.hi)) throw InvalidParam("bounds for " + name + " must satisfy lo < hi");
  }
};

/// Names of the family's own parameters, excluding correlation.
inline std::vector<std::string> variance_parameter_names(Family f) {
  switch (f) {
    case Family::rbergomi: return {"hurst", "eta"};
    case Family::rheston: return {"hurst", "eta", "kappa"};
    case Family::bergomi: return {"eta", "kappa"};
    case Family::heston: return {"eta", "kappa", "v0"};
  }
  return {};
}

inline ParamRange default_range(Family f, const std::string& name) {
  if (name == "hurst") return {0.01, 0.99};
  if (name == "eta") return f == Family::bergomi ? ParamRange{0.01, 30.0} : f == Family::heston ? ParamRange{0.01, 15.0} : ParamRange{0.01, 5.0};
  if (name == "kappa") return f == Family::rheston ? ParamRange{0.01, 20.0} : ParamRange{0.01, 60.0};
  if (name == "v0") return {1e-4, 1.0};
  if (name.rfind("rho", 0) == 0) return f == Family::rbergomi ? ParamRange{-1.0, 0.0} : ParamRange{-1.0, 1.0};
  throw InvalidParam("unknown parameter '" + name + "'");
}

inline double default_start(Family f, const std::string& name) {
  if (name == "hurst") return f == Family::rbergomi ? 0.1 : 0.3;
  if (name == "eta") return f == Family::bergomi ? 5.0 : f == Family::heston ? 2.0 : 1.5;
  if (name == "kappa") return f == Family::rheston ? 2.0 : 10.0;
  if (name == "v0") return 0.09;
  if (name.rfind("rho", 0) == 0) return -0.5;
  throw InvalidParam("unknown parameter '" + name + "'");
}

/// Full search-space layout: family parameters, then one correlation (scalar
/// mode) or one per maturity (rho_1 ... rho_M).
inline std::vector<std::string> parameter_names(Family f, RhoMode mode, std::size_t maturities) {
  auto names = variance_parameter_names(f);
  if (mode == RhoMode::scalar) {
    names.push_back("rho");
  } else {
    for (std::size_t i = 0; i < maturities; ++i) names.push_back("rho_" + std::to_string(i + 1));
  }
  return names;
}

/// Variance model skeleton from a parameter vector; the term curve is a
/// placeholder until the nested fit replaces it.
inline VarianceModel make_variance(Family f, const std::vector<double>& x, const ForwardVarianceCurve& curve) {
  switch (f) {
    case Family::rbergomi: return RBergomiParams{x.at(0), x.at(1), curve};
    case Family::rheston: return RHestonParams{x.at(0), x.at(1), x.at(2), curve};
    case Family::bergomi: return BergomiParams{x.at(0), x.at(1), curve};
    case Family::heston: return HestonParams{x.at(0), x.at(1), x.at(2), curve};
  }
  throw InvalidParam("unknown model family");
}

// --- surface pricing engine ------------------------------------------------

/// Model smile of one maturity plus the nested-fit diagnostics.
struct MaturityFit {
  std::vector<SmilePoint> smile;
  double level = 0.0;
  int iterations = 0;
  bool converged = true;
  bool bracket_hit = false;  // ATM vol not attainable inside the level bracket
  double atm_model_vol = 0.0;
  double atm_market_vol = 0.0;
};

struct SurfaceEvaluation {
  ForwardVarianceCurve curve;
  std::vector<MaturityFit> maturities;
  LossBreakdown breakdown;

  std::vector<std::vector<double>> model_vols() const {
    std::vector<std::vector<double>> out;
    for (const auto& m : maturities) {
      out.emplace_back();
      for (const auto& p : m.smile) out.back().push_back(p.model_vol);
    }
    return out;
  }
};

/// Index of the quote whose strike is nearest the futures price (lower strike
/// on ties).
inline std::size_t atm_index(const FuturesContract& c, const std::vector<OptionQuote>& qs) {
  if (qs.empty()) throw InvariantError("contract " + c.ticker + " has no quotes");
  std::size_t best = 0;
  for (std::size_t j = 1; j < qs.size(); ++j)
    if (std::abs(qs[j].strike - c.f0) < std::abs(qs[best].strike - c.f0)) best = j;
  return best;
}

/// Prices a quote surface under one model with common random numbers, either
/// for a given term curve or while fitting its levels maturity by maturity.
///
/// Each maturity is priced on the mesh the plan assigns it, at the last grid
/// node not after its expiry, so the curve on nodes used for maturity i only
/// depends on levels 1..i. Spot states are carried from one maturity to the
/// next (scalar correlation) or restarted per maturity (per-maturity
/// correlation); either way the numbers equal a plain simulation of the mesh.
class SurfaceEngine {
 public:
  SurfaceEngine(const QuoteSurface& surface, CalibrationConfig config) : surface_(surface), cfg_(std::move(config)) {
    validate(surface_);
    cfg_.validate();
    std::vector<double> mats;
    for (const auto& c : surface_.contracts) mats.push_back(c.t_opt);
    plan_ = cfg_.dual_mesh ? DualMeshPlan::dual(mats, cfg_.fine_steps, cfg_.coarse_steps)
                           : DualMeshPlan::single(mats, cfg_.coarse_steps);
    for (const Mesh m : meshes()) {
      MeshData d;
      d.grid = plan_.grid(m);
      d.seed = plan_.is_dual() ? mesh_seed(cfg_.seed, m) : cfg_.seed;
      d.dperp = spot_increments(d.grid, cfg_.n_paths, d.seed, cfg_.sim.threads);
      mesh_.emplace(m, std::move(d));
    }
    for (std::size_t i = 0; i < surface_.maturities(); ++i) {
      const Mesh m = plan_.assignment[i];
      const auto& g = mesh_.at(m).grid;
      node_.push_back(floor_node(g, surface_.contracts[i].t_opt));
      if (node_.back() == 0)
        throw InvalidParam("expiry of " + surface_.contracts[i].ticker + " is shorter than one step of its mesh");
      mesh_of_.push_back(m);
    }
  }

  const QuoteSurface& surface() const noexcept { return surface_; }
  const CalibrationConfig& config() const noexcept { return cfg_; }
  const DualMeshPlan& plan() const noexcept { return plan_; }

  /// Time actually used as option expiry for maturity i.
  double expiry(std::size_t i) const { return mesh_.at(mesh_of_[i]).grid.time(node_[i]); }

  /// Knots at the option expiries; every level starts at the market ATM variance.
  ForwardVarianceCurve initial_curve() const {
    std::vector<double> knots, levels;
    for (std::size_t i = 0; i < surface_.maturities(); ++i) {
      const auto& c = surface_.contracts[i];
      const double v = surface_.quotes[i][atm_index(c, surface_.quotes[i])].mkt_vol;
      knots.push_back(c.t_opt);
      levels.push_back(std::clamp(v * v, cfg_.level_min, cfg_.level_max));
    }
    return ForwardVarianceCurve(knots, levels);
  }

  /// Nested fit: levels are bisected in maturity order, then every smile is priced.
  SurfaceEvaluation fit(const VarianceModel& skeleton, const std::vector<double>& rhos) const {
    return run(skeleton, rhos, true);
  }

  /// Prices the surface for a model whose term curve is already set.
  SurfaceEvaluation price(const VarianceModel& model, const std::vector<double>& rhos) const {
    return run(model, rhos, false);
  }

 private:
  struct MeshData {
    TimeGrid grid;
    std::uint64_t seed = 0;
    Matrix dperp;
  };

  /// Per-evaluation variance source on one mesh.
  struct Driver {
    const MeshData* mesh = nullptr;
    bool multiplicative = false;
    Matrix factor;  // v = factor * curve (rBergomi, Bergomi)
    Matrix dw;
    // Running spot state for scalar correlation.
    std::size_t node = 0;
    std::vector<double> s;
  };

  static std::size_t floor_node(const TimeGrid& g, double t) {
    const std::size_t k = g.nearest(t);
    return g.time(k) > t + 1e-12 && k > 0 ? k - 1 : k;
  }

  std::vector<Mesh> meshes() const {
    if (plan_.is_dual()) return {Mesh::fine, Mesh::coarse};
    return {Mesh::single};
  }

  static std::vector<double> levels_on(const ForwardVarianceCurve& c, const TimeGrid& g, std::size_t k_end) {
    std::vector<double> lv(k_end + 1);
    for (std::size_t k = 0; k <= k_end; ++k) lv[k] = c.eval(g.time(k));
    return lv;
  }

  Driver make_driver(const VarianceModel& model, Mesh m) const {
    Driver d;
    d.mesh = &mesh_.at(m);
    const auto& g = d.mesh->grid;
    if (const auto* p = std::get_if<RBergomiParams>(&model)) {
      auto vp = volterra_paths(p->hurst, g, cfg_.n_paths, d.mesh->seed, cfg_.sim.threads);
      d.factor = rbergomi_factor(p->hurst, p->eta, vp.wtilde, g);
      d.dw = std::move(vp.dw);
      d.multiplicative = true;
    } else if (const auto* p = std::get_if<BergomiParams>(&model)) {
      auto [f, dw] = bergomi_factor(p->eta, p->kappa, g, cfg_.n_paths, d.mesh->seed, cfg_.sim.threads);
      d.factor = std::move(f);
      d.dw = std::move(dw);
      d.multiplicative = true;
    }
    d.s.assign(cfg_.n_paths, 1.0);
    return d;
  }

  /// Advances spot states from node k0 to k1 with v[j,k] given by `vol`.
  template <class Var>
  void advance(std::vector<double>& s, const Driver& d, const Matrix& dw, std::size_t k0, std::size_t k1, double rho,
               Var&& var) const {
    if (k1 <= k0) return;
    const double dt = d.mesh->grid.dt();
    const double rp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double a = cfg_.a;
    parallel_for(s.size(), cfg_.sim.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) {
        double x = s[j];
        for (std::size_t k = k0; k < k1; ++k)
          x = detail::spot_step(x, a, dt, var(j, k), rho, rp, dw(j, k), d.mesh->dperp(j, k));
        s[j] = x;
      }
    });
  }

  SmilePoint price_quote(const std::vector<double>& s, std::size_t i, const OptionQuote& q) const {
    const auto& c = surface_.contracts[i];
    const double t = expiry(i);
    const double damp = std::exp(-cfg_.a * (c.t_fut - t));
    const std::size_t n = s.size();
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = vanilla_payoff(c.f0 * (1.0 - (1.0 - s[j]) * damp), q.strike, q.is_call);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / static_cast<double>(n - 1)) : 0.0;
    return invert_point(q.strike, q.is_call, {mean, std::sqrt(var / static_cast<double>(n))}, c.f0, t);
  }

  SurfaceEvaluation run(const VarianceModel& model, const std::vector<double>& rhos, bool fitting) const {
    const std::size_t M = surface_.maturities();
    const bool per_maturity = cfg_.rho_mode == RhoMode::per_maturity;
    if (rhos.size() != (per_maturity ? M : 1))
      throw InvalidParam("expected " + std::to_string(per_maturity ? M : 1) + " correlation value(s)");
    for (double r : rhos) {
      SpotParams sp{cfg_.a, Correlation::scalar(r)};
      validate(ModelSpec{model, sp});
    }

    SurfaceEvaluation out;
    out.curve = fitting ? initial_curve() : term_curve(model);
    if (out.curve.knots().size() != M) throw InvalidParam("term curve must have one knot per maturity");
    std::map<Mesh, Driver> drivers;
    for (const Mesh m : meshes()) drivers.emplace(m, make_driver(model, m));

    for (std::size_t i = 0; i < M; ++i) {
      Driver& d = drivers.at(mesh_of_[i]);
      const double rho = per_maturity ? rhos[i] : rhos[0];
      // Checkpoint: last node on this mesh whose curve value no longer moves.
      const std::size_t c = i == 0 ? 0 : std::min(floor_node(d.mesh->grid, surface_.contracts[i - 1].t_opt), node_[i]);
      std::vector<double> s0;
      std::size_t k0;
      if (per_maturity) {
        s0.assign(cfg_.n_paths, 1.0);
        k0 = 0;
      } else {
        s0 = d.s;
        k0 = d.node;
      }
      if (k0 < c) {
        // The curve up to node c is final, so this segment is priced once.
        const auto pre = spot_to(model, out.curve, d, c, std::move(s0), k0, rho);
        s0 = pre;
        k0 = c;
      }

      const auto& qs = surface_.quotes[i];
      const std::size_t atm = atm_index(surface_.contracts[i], qs);
      MaturityFit mf;
      mf.atm_market_vol = qs[atm].mkt_vol;
      std::vector<double> s_exp;
      if (fitting) {
        double lo = cfg_.level_min, hi = cfg_.level_max;
        auto trial = [&](double level) {
          auto cv = out.curve.with_level(i, level);
          auto s = spot_to(model, cv, d, node_[i], s0, k0, rho);
          const double vol = price_quote(s, i, qs[atm]).model_vol;
          return std::make_tuple(std::move(cv), std::move(s), vol);
        };
        bool accepted = false;
        for (int it = 0; it < cfg_.max_bisection; ++it) {
          if (lo == cfg_.level_min && hi < 2.0 * cfg_.level_min) {
            auto [cv, s, vol] = trial(cfg_.level_min);
            ++mf.iterations;
            if (vol - mf.atm_market_vol >= 0.0) {
              mf.bracket_hit = std::abs(vol - mf.atm_market_vol) >= cfg_.tolerance;
              out.curve = std::move(cv);
              s_exp = std::move(s);
              mf.atm_model_vol = vol;
              accepted = true;
              break;
            }
          }
          if (hi == cfg_.level_max && lo > 0.999 * cfg_.level_max) {
            auto [cv, s, vol] = trial(cfg_.level_max);
            ++mf.iterations;
            if (vol - mf.atm_market_vol <= 0.0) {
              mf.bracket_hit = std::abs(vol - mf.atm_market_vol) >= cfg_.tolerance;
              out.curve = std::move(cv);
              s_exp = std::move(s);
              mf.atm_model_vol = vol;
              accepted = true;
              break;
            }
          }
          const double mid = 0.5 * (lo + hi);
          auto [cv, s, vol] = trial(mid);
          ++mf.iterations;
          const double g = vol - mf.atm_market_vol;
          if (std::abs(g) < cfg_.tolerance || it + 1 == cfg_.max_bisection) {
            mf.converged = std::abs(g) < cfg_.tolerance;
            out.curve = std::move(cv);
            s_exp = std::move(s);
            mf.atm_model_vol = vol;
            accepted = true;
            break;
          }
          (g > 0.0 ? hi : lo) = mid;
        }
        if (!accepted) throw InvariantError("bisection ended without a level");
      } else {
        s_exp = spot_to(model, out.curve, d, node_[i], s0, k0, rho);
      }
      mf.level = out.curve.levels()[i];
      for (const auto& q : qs) mf.smile.push_back(price_quote(s_exp, i, q));
      if (!fitting) mf.atm_model_vol = mf.smile[atm].model_vol;
      if (!per_maturity) {
        d.s = std::move(s_exp);
        d.node = node_[i];
      }
      out.maturities.push_back(std::move(mf));
    }

    std::vector<std::vector<bool>> failed;
    for (const auto& m : out.maturities) {
      failed.emplace_back();
      for (const auto& p : m.smile) failed.back().push_back(p.status != VolStatus::ok);
    }
    out.breakdown = loss(surface_, out.model_vols(), cfg_.cutoff, &failed);
    return out;
  }

  /// Spot states at node k1 under `curve`, starting from states `s0` at node k0.
  std::vector<double> spot_to(const VarianceModel& model, const ForwardVarianceCurve& curve, Driver& d,
                              std::size_t k1, std::vector<double> s0, std::size_t k0, double rho) const {
    const auto& g = d.mesh->grid;
    if (d.multiplicative) {
      const auto lv = levels_on(curve, g, k1);
      advance(s0, d, d.dw, k0, k1, rho, [&](std::size_t j, std::size_t k) { return d.factor(j, k) * lv[k]; });
    } else {
      VarianceModel m = model;
      set_term_curve(m, curve);
      const auto vb = simulate_variance(m, g.prefix(k1), cfg_.n_paths, d.mesh->seed,
                                        {cfg_.sim.threads, cfg_.sim.rheston_backend});
      advance(s0, d, vb.dw, k0, k1, rho, [&](std::size_t j, std::size_t k) { return vb.v(j, k); });
    }
    return s0;
  }

  QuoteSurface surface_;
  CalibrationConfig cfg_;
  DualMeshPlan plan_;
  std::map<Mesh, MeshData> mesh_;
  std::vector<std::size_t> node_;
  std::vector<Mesh> mesh_of_;
};

// --- nested fit and outer search ---------------------------------------------

/// Fits the term-curve levels for fixed parameters (scalar correlation unless
/// the config says otherwise).
inline SurfaceEvaluation fit_xi0(const ModelSpec& model, const QuoteSurface& surface, CalibrationConfig config) {
  config.a = model.spot.mean_reversion;
  SurfaceEngine engine(surface, config);
  std::vector<double> rhos;
  if (config.rho_mode == RhoMode::scalar) {
    rhos.push_back(model.spot.corr.values.at(0));
  } else {
    for (const auto& c : surface.contracts) rhos.push_back(model.spot.corr.at(c.t_opt));
  }
  return engine.fit(model.variance, rhos);
}

struct CalibrationResult {
  Family family = Family::rbergomi;
  RhoMode rho_mode = RhoMode::scalar;
  std::vector<std::string> names;
  std::vector<double> x;
  VarianceModel model;  // carries the fitted term curve
  std::vector<double> rhos;
  SurfaceEvaluation evaluation;
  std::size_t evaluations = 0;
  std::size_t global_evaluations = 0;
  std::size_t local_evaluations = 0;
  bool timed_out = false;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;

  double parameter(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return x[i];
    throw InvalidParam("no parameter named '" + name + "'");
  }
};

namespace detail {

inline std::vector<double> split_rhos(Family f, const std::vector<double>& x) {
  const std::size_t n = variance_parameter_names(f).size();
  return std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
}

inline std::vector<double> split_variance(Family f, const std::vector<double>& x) {
  const std::size_t n = variance_parameter_names(f).size();
  return std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace detail

/// Nested calibration: every outer evaluation fits the term curve by
/// bisection, then scores the whole surface. Differential evolution runs first
/// within the global budget, Nelder-Mead refines the incumbent within the
/// local budget. All evaluations share the configured seed.
inline CalibrationResult calibrate(Family family, const QuoteSurface& surface, const CalibrationConfig& config) {
  const auto start = Clock::now();
  SurfaceEngine engine(surface, config);
  const auto names = parameter_names(family, config.rho_mode, surface.maturities());
  Box box;
  std::vector<double> x0;
  for (const auto& n : names) {
    const std::string key = n.rfind("rho_", 0) == 0 ? (config.bounds.count(n) ? n : "rho") : n;
    const auto r = config.bounds.count(key) ? config.bounds.at(key) : default_range(family, n);
    box.lo.push_back(r.lo);
    box.hi.push_back(r.hi);
    const std::string ikey = config.initial.count(n) ? n : key;
    x0.push_back(config.initial.count(ikey) ? config.initial.at(ikey) : default_start(family, n));
  }
  box.validate();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (!(x0[i] >= box.lo[i] && x0[i] <= box.hi[i]))
      throw InvalidParam("initial value of " + names[i] + " lies outside its bounds");

  const auto placeholder = engine.initial_curve();
  std::optional<SurfaceEvaluation> best_eval;
  std::vector<double> best_x;
  double best_f = std::numeric_limits<double>::infinity();
  const Objective objective = [&](const std::vector<double>& x) {
    SurfaceEvaluation e;
    try {
      e = engine.fit(make_variance(family, detail::split_variance(family, x), placeholder), detail::split_rhos(family, x));
    } catch (const InvalidParam&) {
      return std::numeric_limits<double>::infinity();  // rejected, never clipped
    }
    const double f = e.breakdown.total;
    if (!best_eval || f < best_f) {
      best_f = f;
      best_x = x;
      best_eval = std::move(e);
    }
    return f;
  };

  std::optional<Clock::time_point> deadline;
  if (config.time_limit > 0.0)
    deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config.time_limit));

  CalibrationResult r;
  r.family = family;
  r.rho_mode = config.rho_mode;
  r.names = names;
  r.seed = config.seed;
  const auto global = differential_evolution(objective, box, x0, config.global_budget,
                                             derive_seed(config.seed, static_cast<std::uint64_t>(Stream::optimizer)),
                                             deadline);
  r.global_evaluations = global.evaluations;
  r.timed_out = global.timed_out;
  if (config.local_budget > 0 && !r.timed_out && std::isfinite(best_f)) {
    const auto local = nelder_mead(objective, box, best_x, config.local_budget, deadline);
    r.local_evaluations = local.evaluations;
    r.timed_out = local.timed_out;
  }
  r.evaluations = r.global_evaluations + r.local_evaluations;
  if (!best_eval) throw InvalidParam("no admissible parameter vector inside the bounds");
  r.x = best_x;
  r.rhos = detail::split_rhos(family, best_x);
  r.model = make_variance(family, detail::split_variance(family, best_x), best_eval->curve);
  r.evaluation = std::move(*best_eval);
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

/// Calibration with one correlation per maturity.
inline CalibrationResult calibrate_rho_curve(Family family, const QuoteSurface& surface, CalibrationConfig config) {
  config.rho_mode = RhoMode::per_maturity;
  return calibrate(family, surface, config);
}

/// Re-prices the surface from a stored result; reproduces its loss exactly.
inline SurfaceEvaluation reprice(const CalibrationResult& r, const QuoteSurface& surface, CalibrationConfig config) {
  config.rho_mode = r.rho_mode;
  config.seed = r.seed;
  return SurfaceEngine(surface, config).price(r.model, r.rhos);
}

// --- JSON ------------------------------------------------------------------

inline nlohmann::json breakdown_json(const LossBreakdown& b) {
  return {{"total", b.total},
          {"per_maturity", b.per_maturity},
          {"weighted", b.weighted},
          {"abs_errors", b.abs_errors},
          {"penalties", b.penalties}};
}

inline nlohmann::json result_json(const CalibrationResult& r, const QuoteSurface& surface) {
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) params[r.names[i]] = r.x[i];
  nlohmann::json mats = nlohmann::json::array();
  for (std::size_t i = 0; i < r.evaluation.maturities.size(); ++i) {
    const auto& m = r.evaluation.maturities[i];
    mats.push_back({{"ticker", surface.contracts[i].ticker},
                    {"t_opt", surface.contracts[i].t_opt},
                    {"level", m.level},
                    {"loss", r.evaluation.breakdown.per_maturity[i]},
                    {"atm_market_vol", m.atm_market_vol},
                    {"atm_model_vol", m.atm_model_vol},
                    {"bisection_iterations", m.iterations},
                    {"converged", m.converged},
                    {"bracket_hit", m.bracket_hit}});
  }
  return {{"family", to_string(r.family)},
          {"rho_mode", to_string(r.rho_mode)},
          {"parameters", params},
          {"rho", r.rhos},
          {"curve", term_curve(r.model)},
          {"loss", breakdown_json(r.evaluation.breakdown)},
          {"maturities", mats},
          {"evaluations", {{"global", r.global_evaluations}, {"local", r.local_evaluations}, {"total", r.evaluations}}},
          {"timed_out", r.timed_out},
          {"seed", r.seed}};
}

}  // namespace roughfut
