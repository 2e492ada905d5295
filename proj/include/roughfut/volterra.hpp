#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "roughfut/errors.hpp"
#include "roughfut/matrix.hpp"
#include "roughfut/parallel.hpp"
#include "roughfut/rng.hpp"
#include "roughfut/time_grid.hpp"

namespace roughfut {

/// Volterra driver W~_t = sqrt(2H) int_0^t (t-s)^{H-1/2} dW_s together with the
/// Brownian increments that produced it.
struct VolterraPaths {
  Matrix wtilde;  // N x (K+1), column 0 is zero
  Matrix dw;      // N x K, increment over (t_{k}, t_{k+1}]
};

/// Riemann weights of the hybrid scheme with one exact interval:
/// g_m = (b_m dt)^alpha for m >= 2, with b_m the optimal evaluation points.
inline std::vector<double> hybrid_weights(double hurst, double dt, std::size_t steps) {
  const double alpha = hurst - 0.5;
  std::vector<double> g(steps + 1, 0.0);
  for (std::size_t m = 2; m <= steps; ++m) {
    if (alpha == 0.0) {
      g[m] = 1.0;
      continue;
    }
    const double k = static_cast<double>(m);
    const double b = std::pow((std::pow(k, alpha + 1.0) - std::pow(k - 1.0, alpha + 1.0)) / (alpha + 1.0), 1.0 / alpha);
    g[m] = std::pow(b * dt, alpha);
  }
  return g;
}

/// Hybrid-scheme simulation of the Volterra process. Path j draws from its own
/// substream, so the output is independent of the thread count and a prefix
/// grid reproduces the leading columns exactly.
inline VolterraPaths volterra_paths(double hurst, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                    unsigned threads = 0) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw InvalidParam("Hurst parameter must lie in (0, 1)");
  const std::size_t K = grid.steps();
  const double dt = grid.dt();
  const double alpha = hurst - 0.5;

  // Covariance of (dW, int_{t_k}^{t_{k+1}} (t_{k+1}-s)^alpha dW_s).
  const double c11 = dt;
  const double c12 = std::pow(dt, alpha + 1.0) / (alpha + 1.0);
  const double c22 = std::pow(dt, 2.0 * alpha + 1.0) / (2.0 * alpha + 1.0);
  const double l11 = std::sqrt(c11);
  const double l21 = c12 / l11;
  const double l22 = std::sqrt(std::max(c22 - l21 * l21, 0.0));
  const double scale = std::sqrt(2.0 * hurst);
  const auto g = hybrid_weights(hurst, dt, K);

  VolterraPaths out{Matrix(n_paths, K + 1), Matrix(n_paths, K)};
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> exact(K);
    for (std::size_t j = begin; j < end; ++j) {
      PathRng rng(seed, Stream::variance, j);
      auto dw = out.dw.row(j);
      for (std::size_t k = 0; k < K; ++k) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        dw[k] = l11 * z1;
        exact[k] = l21 * z1 + l22 * z2;
      }
      auto w = out.wtilde.row(j);
      w[0] = 0.0;
      for (std::size_t k = 1; k <= K; ++k) {
        double acc = exact[k - 1];
        for (std::size_t m = 2; m <= k; ++m) acc += g[m] * dw[k - m];
        w[k] = scale * acc;
      }
    }
  });
  return out;
}

}  // namespace roughfut
