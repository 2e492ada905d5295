#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roughfut/errors.hpp"

namespace roughfut {

/// Uniform simulation grid on [0, horizon] with step horizon / ceil(horizon * n),
/// so the horizon is always a node and the step never exceeds 1/n.
class TimeGrid {
 public:
  TimeGrid() = default;

  TimeGrid(double horizon, int steps_per_year) : horizon_(horizon), steps_per_year_(steps_per_year) {
    if (!(horizon > 0.0)) throw InvalidParam("grid horizon must be positive");
    if (steps_per_year <= 0) throw InvalidParam("steps per year must be positive");
    steps_ = static_cast<std::size_t>(std::max(1.0, std::ceil(horizon * steps_per_year - 1e-9)));
    dt_ = horizon / static_cast<double>(steps_);
  }

  double horizon() const noexcept { return horizon_; }
  int steps_per_year() const noexcept { return steps_per_year_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t nodes() const noexcept { return steps_ + 1; }
  double dt() const noexcept { return dt_; }

  double time(std::size_t k) const noexcept { return k == steps_ ? horizon_ : static_cast<double>(k) * dt_; }

  std::vector<double> times() const {
    std::vector<double> t(nodes());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = time(k);
    return t;
  }

  /// Nearest node to t.
  std::size_t nearest(double t) const {
    if (t < 0.0 || t > horizon_ + 0.5 * dt_) throw GridMismatch("time " + std::to_string(t) + " outside grid");
    return std::min(steps_, static_cast<std::size_t>(std::llround(t / dt_)));
  }

  /// Node index of t; throws GridMismatch unless t is a node (to 1e-9).
  std::size_t node(double t, double tol = 1e-9) const {
    const std::size_t k = nearest(t);
    if (std::abs(time(k) - t) > tol) throw GridMismatch("time " + std::to_string(t) + " is not a grid node");
    return k;
  }

  /// Grid with the same step truncated after node k_end. Paths generated on
  /// the prefix agree with the leading columns of the full grid.
  TimeGrid prefix(std::size_t k_end) const {
    if (k_end == 0 || k_end > steps_) throw InvalidParam("prefix length out of range");
    TimeGrid g = *this;
    g.steps_ = k_end;
    g.horizon_ = time(k_end);
    return g;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_ = 0.0;
  int steps_per_year_ = 0;
  std::size_t steps_ = 0;
  double dt_ = 0.0;
};

enum class Mesh { single, fine, coarse };

inline std::string to_string(Mesh m) {
  switch (m) {
    case Mesh::single: return "single";
    case Mesh::fine: return "fine";
    case Mesh::coarse: return "coarse";
  }
  return "?";
}

/// Fine grid for the earliest maturity, coarse grid for the rest.
struct DualMeshPlan {
  std::optional<TimeGrid> fine;
  TimeGrid coarse;
  std::vector<double> maturities;
  std::vector<Mesh> assignment;

  /// One single-mesh grid covering every maturity.
  static DualMeshPlan single(std::vector<double> maturities, int n) {
    if (maturities.empty()) throw InvalidParam("mesh plan needs at least one maturity");
    std::sort(maturities.begin(), maturities.end());
    DualMeshPlan p;
    p.coarse = TimeGrid(maturities.back(), n);
    p.maturities = std::move(maturities);
    p.assignment.assign(p.maturities.size(), Mesh::single);
    return p;
  }

  /// Dual mesh: first maturity on the fine grid, others on the coarse grid.
  /// Falls back to a single fine grid when there is only one maturity.
  static DualMeshPlan dual(std::vector<double> maturities, int n_fine, int n_coarse) {
    if (maturities.empty()) throw InvalidParam("mesh plan needs at least one maturity");
    if (n_fine < n_coarse) throw InvalidParam("fine mesh must be at least as fine as the coarse mesh");
    std::sort(maturities.begin(), maturities.end());
    if (maturities.size() == 1) return single(std::move(maturities), n_fine);
    DualMeshPlan p;
    p.fine = TimeGrid(maturities.front(), n_fine);
    p.coarse = TimeGrid(maturities.back(), n_coarse);
    p.maturities = std::move(maturities);
    p.assignment.assign(p.maturities.size(), Mesh::coarse);
    p.assignment.front() = Mesh::fine;
    return p;
  }

  bool is_dual() const noexcept { return fine.has_value(); }

  const TimeGrid& grid(Mesh m) const { return m == Mesh::fine ? *fine : coarse; }

  Mesh mesh_for(double maturity) const {
    for (std::size_t i = 0; i < maturities.size(); ++i)
      if (std::abs(maturities[i] - maturity) <= 1e-12) return assignment[i];
    throw InvalidParam("maturity " + std::to_string(maturity) + " is not part of the mesh plan");
  }
};

}  // namespace roughfut
