#pragma once

// Reference solver following the existence proof: Picard iteration of the
// mild map on a contraction partition, with the noise frozen per trajectory.
// Also the first variation along a solved path.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/parallel.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

/// Ensemble of grid paths: values[k][j] is trajectory j at times[k].
struct GridCurve {
  std::vector<double> times;
  std::vector<std::vector<ModeVector>> values;

  std::size_t ensemble() const { return values.empty() ? 0 : values.front().size(); }

  static GridCurve from_paths(const std::vector<double>& times, const std::vector<std::vector<ModeVector>>& paths) {
    GridCurve c;
    c.times = times;
    c.values.assign(times.size(), std::vector<ModeVector>(paths.size()));
    for (std::size_t j = 0; j < paths.size(); ++j) {
      detail::require(paths[j].size() == times.size(), "GridCurve: path length differs from the grid");
      for (std::size_t k = 0; k < times.size(); ++k) c.values[k][j] = paths[j][k];
    }
    return c;
  }
};

/// Ensemble root-mean-square of ||a_k - b_k|| at grid index k.
inline double rms_gap_at(const GridCurve& a, const GridCurve& b, std::size_t k) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.ensemble(); ++j) s += (a.values[k][j] - b.values[k][j]).squaredNorm();
  return std::sqrt(s / static_cast<double>(a.ensemble()));
}

/// max over the grid of sqrt(E ||a_t - b_t||^2), the discrete version of the
/// norm sup_t (E ||r_t||^2)^{1/2}.
inline double sup_rms_gap(const GridCurve& a, const GridCurve& b) {
  detail::require(a.times.size() == b.times.size() && a.ensemble() == b.ensemble(), "sup_rms_gap: shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.times.size(); ++k) m = std::max(m, rms_gap_at(a, b, k));
  return m;
}

struct ContractionPartition {
  std::vector<double> breakpoints;
  double epsilon = 0.5;
};

inline double contraction_f(double t) { return 12.0 * (t + 2.0); }

/// Greedy partition of [t0, T]: each interval [T_n, T_{n+1}] is the longest
/// one with f(T_{n+1} - T_n) (g(T_{n+1}) - g(T_n)) <= eps^2, found by
/// bisection.  With L == 0 the partition is the single interval.
inline ContractionPartition build_partition(const LipschitzProfile& l, double t0, double horizon, double epsilon = 0.5) {
  detail::require(epsilon > 0.0 && epsilon < 1.0, "build_partition: epsilon must lie in (0, 1)");
  detail::require(horizon > t0 && t0 >= 0.0, "build_partition: need 0 <= t0 < horizon");
  ContractionPartition part;
  part.epsilon = epsilon;
  part.breakpoints.push_back(t0);
  const double eps2 = epsilon * epsilon;
  auto ok = [&](double a, double b) { return contraction_f(b - a) * (l.g(b) - l.g(a)) <= eps2; };
  double a = t0;
  while (a < horizon) {
    if (ok(a, horizon)) {
      part.breakpoints.push_back(horizon);
      break;
    }
    double lo = a;
    double hi = horizon;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(a, mid) ? lo : hi) = mid;
    }
    detail::require(lo > a, "build_partition: no progress; L is not locally square integrable");
    part.breakpoints.push_back(lo);
    a = lo;
  }
  return part;
}

struct PicardOptions {
  std::size_t max_iters = 100;
  double tol = 1e-12;
  std::size_t threads = 1;
};

struct PicardResult {
  GridCurve curve;
  /// Grid indices of the partition intervals actually used.
  std::vector<std::size_t> interval_starts;
  std::vector<double> contraction_factors;
  std::vector<std::size_t> iterations;
  /// sup-grid gap of the last sweep of every interval.
  std::vector<double> final_gaps;
};

namespace detail {

/// One application of the mild map on grid steps [k0, k1) of one
/// trajectory, with the input path `r` and output `out` (out[k0] = r[k0]).
/// Drift and compensator use the exact kernel int S ds, the stochastic
/// integral the left-point kernel, jumps act at their exact times.
inline void mild_map(const SpdeProblem& p, std::span<const NoiseIncrement> noise, const std::vector<ModeVector>& r,
                     std::vector<ModeVector>& out, std::size_t k0, std::size_t k1, double dt) {
  const Eigen::VectorXd e_dt = semigroup_factors(p.generator, dt);
  const Eigen::VectorXd phi = semigroup_integral_factors(p.generator, dt);
  out[k0] = r[k0];
  for (std::size_t k = k0; k < k1; ++k) {
    const double t = p.t0 + static_cast<double>(k) * dt;
    const auto& inc = noise[k];
    ModeVector drift = p.drift(t, r[k]);
    if (p.has_jumps()) drift -= p.compensator(t, r[k]);
    ModeVector noise_term = ModeVector::Zero(p.dim());
    for (std::size_t i = 0; i < p.diffusion.size(); ++i)
      if (inc.brownian[i] != 0.0) noise_term += inc.brownian[i] * p.scaled_diffusion(i, t, r[k]);
    ModeVector next = e_dt.cwiseProduct(out[k] + noise_term) + phi.cwiseProduct(drift);
    if (p.has_jumps())
      for (const auto& j : inc.jumps)
        if (p.jumps.in_truncation(j.mark))
          next += semigroup_apply(p.generator, dt - j.offset, eval_jump(*p.jump, p.jumps, t, r[k], j.mark));
    out[k + 1] = std::move(next);
  }
}

}  // namespace detail

/// Picard iteration r^{k+1} = Lambda(r^k) interval by interval on the grid
/// t0 + k dt, with one frozen noise realization per trajectory.  The
/// observed contraction factor of an interval is the largest ratio of
/// successive sup-grid gaps.
inline PicardResult picard_solve(const SpdeProblem& p, const ContractionPartition& part,
                                 const std::vector<std::vector<NoiseIncrement>>& noise, std::size_t n_steps,
                                 const PicardOptions& opt = {}) {
  p.validate();
  detail::require(!p.delayed_drift, "picard_solve: delayed coefficients are not supported");
  detail::require(!noise.empty(), "picard_solve: empty ensemble");
  for (const auto& n : noise) detail::require(n.size() == n_steps, "picard_solve: noise length differs from the grid");
  const double dt = (p.horizon - p.t0) / static_cast<double>(n_steps);
  const std::size_t m = noise.size();

  std::vector<double> times(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) times[k] = p.t0 + static_cast<double>(k) * dt;
  std::vector<std::vector<ModeVector>> cur(m, std::vector<ModeVector>(n_steps + 1, p.r0));
  std::vector<std::vector<ModeVector>> next = cur;

  // Grid intervals from the partition: each at least one step long.
  std::vector<std::size_t> starts{0};
  for (std::size_t b = 1; b < part.breakpoints.size(); ++b) {
    auto k = static_cast<std::size_t>(std::floor((part.breakpoints[b] - p.t0) / dt + 1e-9));
    k = std::min(k, n_steps);
    if (k > starts.back()) starts.push_back(k);
  }
  if (starts.back() != n_steps) starts.push_back(n_steps);

  PicardResult res;
  for (std::size_t iv = 0; iv + 1 < starts.size(); ++iv) {
    const std::size_t k0 = starts[iv];
    const std::size_t k1 = starts[iv + 1];
    // Initial guess: constant continuation of the value at the interval start.
    for (auto& path : cur)
      for (std::size_t k = k0 + 1; k <= k1; ++k) path[k] = path[k0];
    double prev_gap = -1.0;
    double factor = 0.0;
    std::size_t it = 0;
    double gap = 0.0;
    for (;;) {
      if (it == opt.max_iters)
        throw NumericalGuardError("picard_solve: no convergence on interval " + std::to_string(iv) + " after " +
                                  std::to_string(opt.max_iters) + " iterations, last gap " + std::to_string(gap) +
                                  " (check the declared Lipschitz profile)");
      parallel_for(m, opt.threads, [&](std::size_t j) { detail::mild_map(p, noise[j], cur[j], next[j], k0, k1, dt); });
      ++it;
      gap = 0.0;
      for (std::size_t k = k0 + 1; k <= k1; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += (next[j][k] - cur[j][k]).squaredNorm();
        gap = std::max(gap, std::sqrt(s / static_cast<double>(m)));
      }
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = k0 + 1; k <= k1; ++k) cur[j][k] = next[j][k];
      if (prev_gap > 0.0) factor = std::max(factor, gap / prev_gap);
      prev_gap = gap;
      if (gap <= opt.tol) break;
    }
    res.interval_starts.push_back(k0);
    res.contraction_factors.push_back(factor);
    res.iterations.push_back(it);
    res.final_gaps.push_back(gap);
  }
  res.curve = GridCurve::from_paths(times, cur);
  return res;
}

/// Linearized Euler splitting along a solved path:
/// J+ = S_dt [ J + (D alpha(r) J - D comp(r) J) dt + sum_i D sigma~_i(r) J dbeta^i
///            + sum_jumps D gamma(r, x) J ].
inline std::vector<ModeVector> first_variation_solve(const SpdeProblem& p, std::span<const ModeVector> path,
                                                     std::span<const NoiseIncrement> noise, const ModeVector& w) {
  detail::require(path.size() == noise.size() + 1, "first_variation_solve: path and noise lengths differ");
  detail::require(w.size() == p.dim(), "first_variation_solve: direction has wrong dimension");
  std::vector<ModeVector> out;
  out.reserve(path.size());
  out.push_back(w);
  double t = p.t0;
  for (std::size_t k = 0; k < noise.size(); ++k) {
    const auto& inc = noise[k];
    const ModeVector& r = path[k];
    const ModeVector& j = out.back();
    ModeVector acc = j + inc.dt * p.drift.directional_derivative(t, r, j);
    for (std::size_t i = 0; i < p.diffusion.size(); ++i)
      if (inc.brownian[i] != 0.0)
        acc += inc.brownian[i] * std::sqrt(p.wiener.q_eigenvalues[i]) * p.diffusion[i].directional_derivative(t, r, j);
    if (p.has_jumps()) {
      const auto& gamma = *p.jump;
      acc -= inc.dt * p.jumps.integrate([&](double x) { return ModeVector(gamma.jacobian(t, r, x) * j); },
                                        static_cast<std::size_t>(p.dim()));
      for (const auto& jump : inc.jumps)
        if (p.jumps.in_truncation(jump.mark)) acc += gamma.jacobian(t, r, jump.mark) * j;
    }
    out.push_back(semigroup_apply(p.generator, inc.dt, acc));
    t += inc.dt;
  }
  return out;
}

}  // namespace mfspde
