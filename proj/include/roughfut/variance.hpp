#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "roughfut/errors.hpp"
#include "roughfut/matrix.hpp"
#include "roughfut/models.hpp"
#include "roughfut/parallel.hpp"
#include "roughfut/rng.hpp"
#include "roughfut/time_grid.hpp"
#include "roughfut/volterra.hpp"

namespace roughfut {

enum class RHestonBackend {
  hqe,    ///< moment-matched quadratic-exponential draw of the last interval
  euler,  ///< Gaussian Volterra-Euler step with full truncation
};

inline RHestonBackend parse_backend(const std::string& s) {
  if (s == "hqe") return RHestonBackend::hqe;
  if (s == "euler") return RHestonBackend::euler;
  throw InvalidParam("unknown rough Heston backend '" + s + "' (expected hqe or euler)");
}

struct VarianceOptions {
  unsigned threads = 0;
  RHestonBackend rheston_backend = RHestonBackend::hqe;
};

/// Simulated spot variance paths and the Brownian increments of the variance
/// driver, which the spot simulation correlates against.
struct VarianceBatch {
  TimeGrid grid;
  Matrix v;   // N x (K+1)
  Matrix dw;  // N x K
  std::uint64_t seed = 0;
  /// Fraction of (path, step) nodes where the scheme had to truncate at zero.
  double truncated_fraction = 0.0;

  std::size_t n_paths() const noexcept { return v.rows(); }
};

/// exp(eta W~_t - eta^2 t^{2H} / 2): rBergomi variance divided by xi0(t).
inline Matrix rbergomi_factor(double hurst, double eta, const Matrix& wtilde, const TimeGrid& grid) {
  if (wtilde.cols() != grid.nodes()) throw InvalidParam("Volterra paths do not match the grid");
  Matrix f(wtilde.rows(), wtilde.cols());
  std::vector<double> comp(grid.nodes());
  for (std::size_t k = 0; k < comp.size(); ++k) comp[k] = 0.5 * eta * eta * std::pow(grid.time(k), 2.0 * hurst);
  for (std::size_t j = 0; j < f.rows(); ++j)
    for (std::size_t k = 0; k < f.cols(); ++k) f(j, k) = std::exp(eta * wtilde(j, k) - comp[k]);
  return f;
}

/// v[j,k] = factor[j,k] * xi0(t_k).
inline Matrix scale_by_curve(const Matrix& factor, const ForwardVarianceCurve& xi0, const TimeGrid& grid) {
  Matrix v(factor.rows(), factor.cols());
  std::vector<double> level(factor.cols());
  for (std::size_t k = 0; k < level.size(); ++k) level[k] = xi0.eval(grid.time(k));
  for (std::size_t j = 0; j < v.rows(); ++j)
    for (std::size_t k = 0; k < v.cols(); ++k) v(j, k) = factor(j, k) * level[k];
  return v;
}

inline Matrix rbergomi_variance(const RBergomiParams& p, const Matrix& wtilde, const TimeGrid& grid) {
  validate(p);
  return scale_by_curve(rbergomi_factor(p.hurst, p.eta, wtilde, grid), p.xi0, grid);
}

inline VarianceBatch simulate_rbergomi(const RBergomiParams& p, const TimeGrid& grid, std::size_t n_paths,
                                       std::uint64_t seed, const VarianceOptions& opt = {}) {
  validate(p);
  auto vp = volterra_paths(p.hurst, grid, n_paths, seed, opt.threads);
  VarianceBatch b{grid, rbergomi_variance(p, vp.wtilde, grid), std::move(vp.dw), seed, 0.0};
  return b;
}

/// Exact Ornstein-Uhlenbeck driver of the one-factor Bergomi model, returned
/// as the lognormal factor exp(eta X_t - eta^2 Var(X_t) / 2). The per-step draw
/// pairs (dW, OU increment) the same way the hybrid scheme pairs its exact
/// interval, so kappa -> 0 couples pathwise with rBergomi at H = 1/2.
inline std::pair<Matrix, Matrix> bergomi_factor(double eta, double kappa, const TimeGrid& grid, std::size_t n_paths,
                                                std::uint64_t seed, unsigned threads = 0) {
  if (!(kappa > 0.0)) throw InvalidParam("kappa must be positive");
  const std::size_t K = grid.steps();
  const double dt = grid.dt();
  const double decay = std::exp(-kappa * dt);
  const double c12 = -std::expm1(-kappa * dt) / kappa;
  const double c22 = -std::expm1(-2.0 * kappa * dt) / (2.0 * kappa);
  const double l11 = std::sqrt(dt);
  const double l21 = c12 / l11;
  const double l22 = std::sqrt(std::max(c22 - l21 * l21, 0.0));
  std::vector<double> half_var(K + 1);
  for (std::size_t k = 0; k <= K; ++k)
    half_var[k] = 0.5 * eta * eta * (-std::expm1(-2.0 * kappa * grid.time(k)) / (2.0 * kappa));

  Matrix factor(n_paths, K + 1);
  Matrix dw(n_paths, K);
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      PathRng rng(seed, Stream::variance, j);
      double x = 0.0;
      factor(j, 0) = 1.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        dw(j, k) = l11 * z1;
        x = decay * x + l21 * z1 + l22 * z2;
        factor(j, k + 1) = std::exp(eta * x - half_var[k + 1]);
      }
    }
  });
  return {std::move(factor), std::move(dw)};
}

inline VarianceBatch simulate_bergomi(const BergomiParams& p, const TimeGrid& grid, std::size_t n_paths,
                                      std::uint64_t seed, const VarianceOptions& opt = {}) {
  validate(p);
  auto [factor, dw] = bergomi_factor(p.eta, p.kappa, grid, n_paths, seed, opt.threads);
  return VarianceBatch{grid, scale_by_curve(factor, p.xi0, grid), std::move(dw), seed, 0.0};
}

/// Full-truncation Euler scheme for Heston with a time-dependent long variance.
inline VarianceBatch simulate_heston(const HestonParams& p, const TimeGrid& grid, std::size_t n_paths,
                                     std::uint64_t seed, const VarianceOptions& opt = {}) {
  validate(p);
  const std::size_t K = grid.steps();
  const double dt = grid.dt();
  const double sdt = std::sqrt(dt);
  std::vector<double> vbar(K + 1);
  for (std::size_t k = 0; k <= K; ++k) vbar[k] = p.vbar.eval(grid.time(k));

  VarianceBatch b{grid, Matrix(n_paths, K + 1), Matrix(n_paths, K), seed, 0.0};
  std::vector<std::size_t> truncated(n_paths, 0);
  parallel_for(n_paths, opt.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      PathRng rng(seed, Stream::variance, j);
      double v = p.v0;
      b.v(j, 0) = v;
      for (std::size_t k = 0; k < K; ++k) {
        const double vp = std::max(v, 0.0);
        const double dW = sdt * rng.normal();
        b.dw(j, k) = dW;
        v += p.kappa * (vbar[k] - vp) * dt + p.eta * std::sqrt(vp) * dW;
        if (v < 0.0) ++truncated[j];
        b.v(j, k + 1) = std::max(v, 0.0);
      }
    }
  });
  std::size_t total = 0;
  for (auto t : truncated) total += t;
  b.truncated_fraction = K * n_paths > 0 ? static_cast<double>(total) / static_cast<double>(K * n_paths) : 0.0;
  return b;
}

namespace detail {

/// One draw with mean m > 0 and variance s2 via Andersen's quadratic-exponential
/// switch at psi = 1.5. z is standard normal; the uniform is Phi(z).
inline double qe_draw(double m, double s2, double z) {
  const double psi = s2 / (m * m);
  if (psi <= 1.5) {
    const double two_over = 2.0 / psi;
    const double b2 = two_over - 1.0 + std::sqrt(two_over) * std::sqrt(two_over - 1.0);
    const double a = m / (1.0 + b2);
    const double x = std::sqrt(b2) + z;
    return a * x * x;
  }
  const double p = (psi - 1.0) / (psi + 1.0);
  const double beta = (1.0 - p) / m;
  const double u = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return u <= p ? 0.0 : std::log((1.0 - p) / (1.0 - u)) / beta;
}

}  // namespace detail

/// Rough Heston driven by the initial forward-variance curve:
///
///   v_t = xi0(t) + 1/Gamma(H+1/2) int_0^t (t-s)^{H-1/2} [kappa (xi0(s) - v_s) ds + eta sqrt(v_s) dW_s]
///
/// which is the Volterra equation with V0 and the long variance eliminated
/// through the fractional equation that defines xi0. History terms use the
/// interval-averaged kernel; the newest interval is drawn per backend.
inline VarianceBatch simulate_rheston(const RHestonParams& p, const TimeGrid& grid, std::size_t n_paths,
                                      std::uint64_t seed, const VarianceOptions& opt = {}) {
  validate(p);
  const std::size_t K = grid.steps();
  const double dt = grid.dt();
  const double H = p.hurst;
  const double alpha = H + 0.5;
  const double gamma_a = std::tgamma(alpha);
  const double gamma_a1 = std::tgamma(alpha + 1.0);

  // weight[m]: kernel averaged over the interval at lag m (m >= 1).
  std::vector<double> weight(K + 1, 0.0);
  for (std::size_t m = 1; m <= K; ++m) {
    const double mm = static_cast<double>(m);
    weight[m] = std::pow(dt, alpha - 1.0) * (std::pow(mm, alpha) - std::pow(mm - 1.0, alpha)) / gamma_a1;
  }
  std::vector<double> xi(K + 1);
  for (std::size_t k = 0; k <= K; ++k) xi[k] = p.xi0.eval(grid.time(k));

  // Newest-interval moments per unit eta^2 v.
  const double var_x = std::pow(dt, 2.0 * H) / (2.0 * H * gamma_a * gamma_a);
  const double cov_xw = std::pow(dt, alpha) / gamma_a1;
  // Gaussian pair (dW, int (t-s)^{H-1/2} dW) for the Euler backend.
  const double l11 = std::sqrt(dt);
  const double l21 = cov_xw * gamma_a / l11;
  const double l22 = std::sqrt(std::max(std::pow(dt, 2.0 * H) / (2.0 * H) - l21 * l21, 0.0));

  VarianceBatch b{grid, Matrix(n_paths, K + 1), Matrix(n_paths, K), seed, 0.0};
  std::vector<std::size_t> truncated(n_paths, 0);
  const bool hqe = opt.rheston_backend == RHestonBackend::hqe;

  parallel_for(n_paths, opt.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> incr(K);  // completed-interval contributions: drift*dt + chi
    std::vector<double> vs(K + 1);
    for (std::size_t j = begin; j < end; ++j) {
      PathRng rng(seed, Stream::variance, j);
      vs[0] = xi[0];
      b.v(j, 0) = std::max(xi[0], 0.0);
      for (std::size_t k = 1; k <= K; ++k) {
        const double v_prev = vs[k - 1];
        const double vp = std::max(v_prev, 0.0);
        double hat = xi[k] + weight[1] * p.kappa * (xi[k - 1] - v_prev) * dt;
        for (std::size_t i = 0; i + 1 < k; ++i) hat += weight[k - i] * incr[i];

        const double z1 = rng.normal();
        const double z2 = rng.normal();
        double x = 0.0;
        double dW = 0.0;
        double chi = 0.0;
        if (hqe) {
          const double v_eff = (std::max(hat, 0.0) + 2.0 * H * vp) / (2.0 * H + 1.0);
          const double e2v = p.eta * p.eta * v_eff;
          const double s2 = e2v * var_x;
          double vk;
          if (hat <= 0.0) {
            vk = 0.0;
            ++truncated[j];
          } else if (s2 <= 0.0) {
            vk = hat;
          } else {
            vk = detail::qe_draw(hat, s2, z1);
          }
          x = vk - hat;
          if (e2v > 0.0) {
            const double var_chi = e2v * dt;
            const double beta = s2 > 0.0 ? e2v * cov_xw / s2 : 0.0;
            const double resid = std::max(var_chi - beta * beta * s2, 0.0);
            chi = beta * x + std::sqrt(resid) * z2;
            dW = chi / std::sqrt(e2v);
          } else {
            dW = std::sqrt(dt) * z2;
          }
        } else {
          const double sv = p.eta * std::sqrt(vp);
          dW = l11 * z1;
          x = sv * (l21 * z1 + l22 * z2) / gamma_a;
          chi = sv * dW;
        }
        vs[k] = hat + x;
        if (!hqe && vs[k] < 0.0) ++truncated[j];
        incr[k - 1] = p.kappa * (xi[k - 1] - v_prev) * dt + chi;
        b.dw(j, k - 1) = dW;
        b.v(j, k) = std::max(vs[k], 0.0);
      }
    }
  });
  std::size_t total = 0;
  for (auto t : truncated) total += t;
  b.truncated_fraction = K * n_paths > 0 ? static_cast<double>(total) / static_cast<double>(K * n_paths) : 0.0;
  return b;
}

inline VarianceBatch simulate_variance(const VarianceModel& model, const TimeGrid& grid, std::size_t n_paths,
                                       std::uint64_t seed, const VarianceOptions& opt = {}) {
  return std::visit(
      [&](const auto& p) -> VarianceBatch {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RBergomiParams>) return simulate_rbergomi(p, grid, n_paths, seed, opt);
        else if constexpr (std::is_same_v<P, RHestonParams>) return simulate_rheston(p, grid, n_paths, seed, opt);
        else if constexpr (std::is_same_v<P, BergomiParams>) return simulate_bergomi(p, grid, n_paths, seed, opt);
        else return simulate_heston(p, grid, n_paths, seed, opt);
      },
      model);
}

}  // namespace roughfut
