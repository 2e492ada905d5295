#pragma once

// Independent reference computations used by the test and self-test suites.
// Nothing in the library's simulation or pricing path includes this header.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "roughfut/fv_curve.hpp"

namespace roughfut::oracle {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      const double dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        break;
      }
    }
  }
}

inline double integrate(const std::function<double(double)>& f, double a, double b, int panels = 64,
                        int order = 20) {
  std::vector<double> x, w;
  gauss_legendre(order, x, w);
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (int i = 0; i < order; ++i) total += 0.5 * h * w[i] * f(lo + 0.5 * h * (x[i] + 1.0));
  }
  return total;
}

/// Cov(W~_s, W~_t) = 2H int_0^s (s-u)^{H-1/2} (t-u)^{H-1/2} du for s <= t.
/// With y = (s-u)^{2H} the integrand becomes ((t-u)/(s-u))^{H-1/2}, which is
/// bounded on the whole range.
inline double volterra_covariance(double hurst, double s, double t) {
  if (s > t) std::swap(s, t);
  const double a = hurst - 0.5;
  const auto f = [&](double y) {
    const double r = std::pow(y, 1.0 / (2.0 * hurst));
    return r > 0.0 ? std::pow((t - s + r) / r, a) : (t > s ? 0.0 : 1.0);
  };
  return integrate(f, 0.0, std::pow(s, 2.0 * hurst), 256, 24);
}

/// Exact fractional Gaussian noise by the Durbin-Levinson (Hosking) recursion;
/// returns the fBm path B_0 = 0, B_1, ..., B_n with unit-variance increments.
inline std::vector<double> fbm_path(double hurst, std::size_t n, std::uint64_t seed) {
  const auto gamma = [&](double k) {
    return 0.5 * (std::pow(std::abs(k + 1.0), 2 * hurst) - 2 * std::pow(std::abs(k), 2 * hurst) +
                  std::pow(std::abs(k - 1.0), 2 * hurst));
  };
  std::vector<double> g(n + 1);
  for (std::size_t k = 0; k <= n; ++k) g[k] = gamma(static_cast<double>(k));
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n), phi(n), prev(n);
  double v = 1.0;
  x[0] = z(gen);
  for (std::size_t i = 1; i < n; ++i) {
    double num = g[i];
    for (std::size_t j = 0; j + 1 < i; ++j) num -= prev[j] * g[i - 1 - j];
    const double phi_ii = num / v;
    for (std::size_t j = 0; j + 1 < i; ++j) phi[j] = prev[j] - phi_ii * prev[i - 2 - j];
    phi[i - 1] = phi_ii;
    v *= (1.0 - phi_ii * phi_ii);
    double mean = 0.0;
    for (std::size_t j = 0; j < i; ++j) mean += phi[j] * x[i - 1 - j];
    x[i] = mean + std::sqrt(v) * z(gen);
    std::copy(phi.begin(), phi.begin() + i, prev.begin());
  }
  std::vector<double> path(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) path[i + 1] = path[i] + x[i];
  return path;
}

/// Product-trapezoidal solution on a uniform grid of step h of
///   xi(u) = V0 + kappa / Gamma(H+1/2) int_0^u (u-s)^{H-1/2} (vbar(s) - xi(s)) ds.
inline std::vector<double> rheston_forward_variance(double v0, const std::function<double(double)>& vbar,
                                                    double kappa, double hurst, double horizon, std::size_t steps) {
  const double al = hurst + 0.5;
  const double h = horizon / static_cast<double>(steps);
  const double c = kappa / std::tgamma(al);
  const double scale = std::pow(h, al) / (al * (al + 1.0));
  std::vector<double> xi(steps + 1), f(steps + 1), vb(steps + 1);
  for (std::size_t n = 0; n <= steps; ++n) vb[n] = vbar(n * h);
  xi[0] = v0;
  f[0] = vb[0] - xi[0];
  for (std::size_t n = 1; n <= steps; ++n) {
    const double nn = static_cast<double>(n);
    double acc = scale * (std::pow(nn - 1.0, al + 1.0) - (nn - al - 1.0) * std::pow(nn, al)) * f[0];
    for (std::size_t j = 1; j < n; ++j) {
      const double m = static_cast<double>(n - j);
      acc += scale * (std::pow(m + 1.0, al + 1.0) - 2.0 * std::pow(m, al + 1.0) + std::pow(m - 1.0, al + 1.0)) * f[j];
    }
    const double ann = scale;
    xi[n] = (v0 + c * (acc + ann * vb[n])) / (1.0 + c * ann);
    f[n] = vb[n] - xi[n];
  }
  return xi;
}

/// The oracle solution for constant vbar as a piecewise-linear curve on a
/// 1000-step grid.
inline ForwardVarianceCurve rheston_xi0_curve(double v0, double vbar, double kappa, double hurst, double horizon) {
  const std::size_t steps = 1000;
  const auto xi = rheston_forward_variance(v0, [&](double) { return vbar; }, kappa, hurst, horizon, steps);
  std::vector<double> knots, levels;
  for (std::size_t n = 1; n <= steps; ++n) {
    knots.push_back(horizon * static_cast<double>(n) / static_cast<double>(steps));
    levels.push_back(xi[n]);
  }
  return ForwardVarianceCurve(knots, levels, LeftAnchor::fixed, xi[0]);
}

}  // namespace roughfut::oracle
