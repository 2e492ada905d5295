#pragma once

// Bounded derivative-free minimisers used by the calibrator: differential
// evolution for the global stage and Nelder-Mead for local refinement. Both
// count objective evaluations against a fixed budget and never evaluate a
// point outside the box.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "roughfut/errors.hpp"

namespace roughfut {

using Objective = std::function<double(const std::vector<double>&)>;
using Clock = std::chrono::steady_clock;

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const noexcept { return lo.size(); }

  bool contains(const std::vector<double>& x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    return true;
  }

  void validate() const {
    if (lo.size() != hi.size() || lo.empty()) throw InvalidParam("search box needs matching, non-empty bounds");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw InvalidParam("search box bounds must satisfy lo < hi");
  }
};

struct OptimResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  bool timed_out = false;
};

namespace detail {

/// Counts evaluations, tracks the incumbent and enforces the deadline.
class Tracker {
 public:
  Tracker(const Objective& f, std::size_t budget, std::optional<Clock::time_point> deadline)
      : f_(f), budget_(budget), deadline_(deadline) {}

  bool exhausted() {
    if (used_ >= budget_) return true;
    if (deadline_ && Clock::now() >= *deadline_) {
      timed_out_ = true;
      return true;
    }
    return false;
  }

  double operator()(const std::vector<double>& x) {
    ++used_;
    double v = f_(x);
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    if (best_.x.empty() || v < best_.f) {
      best_.x = x;
      best_.f = v;
    }
    return v;
  }

  OptimResult result() const {
    OptimResult r = best_;
    r.evaluations = used_;
    r.timed_out = timed_out_;
    return r;
  }

 private:
  const Objective& f_;
  std::size_t budget_;
  std::optional<Clock::time_point> deadline_;
  std::size_t used_ = 0;
  bool timed_out_ = false;
  OptimResult best_;
};

}  // namespace detail

/// DE/rand/1/bin. The first population member is x0; mutant components that
/// leave the box are redrawn between the parent and the violated bound.
inline OptimResult differential_evolution(const Objective& f, const Box& box, const std::vector<double>& x0,
                                          std::size_t budget, std::uint64_t seed,
                                          std::optional<Clock::time_point> deadline = std::nullopt) {
  box.validate();
  if (!box.contains(x0)) throw InvalidParam("initial point outside the search box");
  detail::Tracker track(f, budget, deadline);
  const std::size_t d = box.dim();
  const std::size_t pop_size = std::max<std::size_t>(4, std::min<std::size_t>(10 * d, std::max<std::size_t>(5 * d, 8)));
  const double F = 0.7;
  const double CR = 0.9;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<std::vector<double>> pop;
  std::vector<double> fit;
  pop.push_back(x0);
  // Stratified initial sample: one draw per stratum and dimension.
  for (std::size_t i = 1; i < pop_size; ++i) pop.emplace_back(d);
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<std::size_t> perm(pop_size - 1);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    for (std::size_t i = 1; i < pop_size; ++i) {
      const double w = (static_cast<double>(perm[i - 1]) + u(gen)) / static_cast<double>(pop_size - 1);
      pop[i][c] = box.lo[c] + w * (box.hi[c] - box.lo[c]);
    }
  }
  for (auto& x : pop) {
    if (track.exhausted()) return track.result();
    fit.push_back(track(x));
  }

  std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
  std::uniform_int_distribution<std::size_t> pick_dim(0, d - 1);
  while (!track.exhausted()) {
    for (std::size_t i = 0; i < pop_size && !track.exhausted(); ++i) {
      std::size_t r1, r2, r3;
      do r1 = pick(gen); while (r1 == i);
      do r2 = pick(gen); while (r2 == i || r2 == r1);
      do r3 = pick(gen); while (r3 == i || r3 == r1 || r3 == r2);
      const std::size_t jrand = pick_dim(gen);
      std::vector<double> trial = pop[i];
      for (std::size_t c = 0; c < d; ++c) {
        if (c != jrand && u(gen) >= CR) continue;
        double m = pop[r1][c] + F * (pop[r2][c] - pop[r3][c]);
        if (m < box.lo[c]) m = box.lo[c] + u(gen) * (pop[i][c] - box.lo[c]);
        if (m > box.hi[c]) m = box.hi[c] - u(gen) * (box.hi[c] - pop[i][c]);
        trial[c] = m;
      }
      const double ft = track(trial);
      if (ft <= fit[i]) {
        pop[i] = std::move(trial);
        fit[i] = ft;
      }
    }
  }
  return track.result();
}

/// Nelder-Mead from x0 with an initial simplex of `step` box widths. Vertices
/// outside the box get an infinite value without being evaluated.
inline OptimResult nelder_mead(const Objective& f, const Box& box, const std::vector<double>& x0, std::size_t budget,
                               std::optional<Clock::time_point> deadline = std::nullopt, double step = 0.1,
                               double ftol = 1e-10) {
  box.validate();
  if (!box.contains(x0)) throw InvalidParam("initial point outside the search box");
  detail::Tracker track(f, budget, deadline);
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t d = box.dim();
  // Rejected vertices cost nothing, so cap total attempts to guarantee exit.
  std::size_t attempts = 0;
  const std::size_t max_attempts = 4 * budget + 16;
  auto eval = [&](const std::vector<double>& x) {
    ++attempts;
    return box.contains(x) ? track(x) : inf;
  };
  auto done = [&] { return track.exhausted() || attempts >= max_attempts; };

  std::vector<std::vector<double>> simplex{x0};
  std::vector<double> fv;
  for (std::size_t c = 0; c < d; ++c) {
    auto x = x0;
    const double h = step * (box.hi[c] - box.lo[c]);
    x[c] = x0[c] + h <= box.hi[c] ? x0[c] + h : x0[c] - h;
    simplex.push_back(std::move(x));
  }
  for (const auto& x : simplex) {
    if (done()) return track.result();
    fv.push_back(eval(x));
  }

  std::vector<std::size_t> order(d + 1);
  while (!done()) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];
    if (std::isfinite(fv[worst]) && fv[worst] - fv[best] <= ftol * (std::abs(fv[best]) + ftol)) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i <= d; ++i)
      if (i != worst)
        for (std::size_t c = 0; c < d; ++c) centroid[c] += simplex[i][c] / static_cast<double>(d);
    auto along = [&](double t) {
      std::vector<double> x(d);
      for (std::size_t c = 0; c < d; ++c) x[c] = centroid[c] + t * (simplex[worst][c] - centroid[c]);
      return x;
    };

    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      if (done()) break;
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    if (done()) break;
    const bool outside = fr < fv[worst];
    const auto xc = along(outside ? -0.5 : 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    // Shrink towards the best vertex.
    for (std::size_t i = 0; i <= d && !done(); ++i) {
      if (i == best) continue;
      for (std::size_t c = 0; c < d; ++c) simplex[i][c] = simplex[best][c] + 0.5 * (simplex[i][c] - simplex[best][c]);
      fv[i] = eval(simplex[i]);
    }
  }
  return track.result();
}

}  // namespace roughfut
