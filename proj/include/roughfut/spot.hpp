#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "roughfut/errors.hpp"
#include "roughfut/matrix.hpp"
#include "roughfut/models.hpp"
#include "roughfut/parallel.hpp"
#include "roughfut/rng.hpp"
#include "roughfut/time_grid.hpp"
#include "roughfut/variance.hpp"

namespace roughfut {

/// Normalised fictitious spot s_t and spot variance v_t on a grid.
struct PathBatch {
  TimeGrid grid;
  Matrix s;  // N x (K+1), s[., 0] = 1
  Matrix v;  // N x (K+1)
  std::uint64_t seed = 0;
  double truncated_fraction = 0.0;

  std::size_t n_paths() const noexcept { return s.rows(); }
};

namespace detail {

/// One Euler step of the normalised spot, floored at zero.
inline double spot_step(double x, double a, double dt, double v, double rho, double rho_perp, double dw,
                        double dperp) {
  const double dW1 = rho * dw + rho_perp * dperp;
  x += a * (1.0 - x) * dt + std::sqrt(std::max(v, 0.0)) * x * dW1;
  return x < 0.0 ? 0.0 : x;
}

}  // namespace detail

/// Orthogonal spot increments sqrt(dt) Z, drawn from the spot substream of
/// `seed` in path order.
inline Matrix spot_increments(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed, unsigned threads = 0) {
  const std::size_t K = grid.steps();
  const double sdt = std::sqrt(grid.dt());
  Matrix d(n_paths, K);
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      PathRng rng(seed, Stream::spot, j);
      for (std::size_t k = 0; k < K; ++k) d(j, k) = sdt * rng.normal();
    }
  });
  return d;
}

/// Euler-Maruyama for ds = a (1 - s) dt + sqrt(v) s dW^1 with
/// dW^1 = rho dW^2 + sqrt(1 - rho^2) dW^perp, floored at zero. The orthogonal
/// increments come from the spot substream of `seed`, so two calls with the
/// same seed share them regardless of the correlation.
inline Matrix spot_paths(const SpotParams& spot, const Matrix& v, const Matrix& dw, const TimeGrid& grid,
                         std::uint64_t seed, unsigned threads = 0) {
  validate(spot);
  const std::size_t K = grid.steps();
  if (v.cols() < K + 1 || dw.cols() < K || v.rows() != dw.rows())
    throw InvalidParam("variance paths do not match the grid");
  const std::size_t n = v.rows();
  const double dt = grid.dt();
  const double sdt = std::sqrt(dt);
  const double a = spot.mean_reversion;
  std::vector<double> rho(K), rho_perp(K);
  for (std::size_t k = 0; k < K; ++k) {
    rho[k] = spot.corr.at(grid.time(k));
    rho_perp[k] = std::sqrt(std::max(0.0, 1.0 - rho[k] * rho[k]));
  }

  Matrix s(n, K + 1);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      PathRng rng(seed, Stream::spot, j);
      double x = 1.0;
      s(j, 0) = x;
      for (std::size_t k = 0; k < K; ++k) {
        x = detail::spot_step(x, a, dt, v(j, k), rho[k], rho_perp[k], dw(j, k), sdt * rng.normal());
        s(j, k + 1) = x;
      }
    }
  });
  return s;
}

struct SimOptions {
  unsigned threads = 0;
  RHestonBackend rheston_backend = RHestonBackend::hqe;
};

inline PathBatch simulate_paths(const ModelSpec& model, const TimeGrid& grid, std::size_t n_paths,
                                std::uint64_t seed, const SimOptions& opt = {}) {
  validate(model);
  if (n_paths == 0) throw InvalidParam("number of paths must be positive");
  auto vb = simulate_variance(model.variance, grid, n_paths, seed, {opt.threads, opt.rheston_backend});
  auto s = spot_paths(model.spot, vb.v, vb.dw, grid, seed, opt.threads);
  return PathBatch{grid, std::move(s), std::move(vb.v), seed, vb.truncated_fraction};
}

/// Seed used for one mesh of a plan; fine and coarse batches are independent.
inline std::uint64_t mesh_seed(std::uint64_t master, Mesh m) {
  switch (m) {
    case Mesh::single: return master;
    case Mesh::fine: return derive_seed(master, static_cast<std::uint64_t>(Stream::mesh_fine));
    case Mesh::coarse: return derive_seed(master, static_cast<std::uint64_t>(Stream::mesh_coarse));
  }
  return master;
}

/// One independent batch per mesh of the plan.
inline std::map<Mesh, PathBatch> simulate(const ModelSpec& model, const DualMeshPlan& plan, std::size_t n_paths,
                                          std::uint64_t seed, const SimOptions& opt = {}) {
  std::map<Mesh, PathBatch> out;
  if (plan.is_dual()) {
    out.emplace(Mesh::fine, simulate_paths(model, *plan.fine, n_paths, mesh_seed(seed, Mesh::fine), opt));
    out.emplace(Mesh::coarse, simulate_paths(model, plan.coarse, n_paths, mesh_seed(seed, Mesh::coarse), opt));
  } else {
    out.emplace(Mesh::single, simulate_paths(model, plan.coarse, n_paths, seed, opt));
  }
  return out;
}

inline std::map<Mesh, PathBatch> simulate(const ModelSpec& model, const TimeGrid& grid, std::size_t n_paths,
                                          std::uint64_t seed, const SimOptions& opt = {}) {
  std::map<Mesh, PathBatch> out;
  out.emplace(Mesh::single, simulate_paths(model, grid, n_paths, seed, opt));
  return out;
}

}  // namespace roughfut
