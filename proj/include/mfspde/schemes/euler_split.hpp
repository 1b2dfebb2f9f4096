#pragma once

// Explicit-implicit Euler splitting: explicit in the coefficients, exact in
// the linear part.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

/// r+ = S_dt [ r + (alpha(r) + extra - comp(r)) dt + sum_i sigma~_i(r) dbeta^i
///             + sum_{jumps} gamma(r, x) ]
/// `extra` is an additional drift value (the delayed drift); pass an empty
/// vector when unused.
inline ModeVector euler_split_step(const SpdeProblem& p, double t, const ModeVector& r, const NoiseIncrement& inc,
                                   const ModeVector& extra = {}) {
  detail::require(inc.dt > 0.0, "euler_split_step: dt must be positive");
  detail::require(inc.brownian.size() == p.diffusion.size(), "euler_split_step: noise dimension mismatch");
  ModeVector acc = r + inc.dt * p.drift(t, r);
  if (extra.size() > 0) acc += inc.dt * extra;
  for (std::size_t i = 0; i < p.diffusion.size(); ++i)
    if (inc.brownian[i] != 0.0) acc += inc.brownian[i] * p.scaled_diffusion(i, t, r);
  if (p.has_jumps()) {
    acc -= inc.dt * p.compensator(t, r);
    for (const auto& j : inc.jumps)
      if (p.jumps.in_truncation(j.mark)) acc += eval_jump(*p.jump, p.jumps, t, r, j.mark);
  }
  ModeVector out = semigroup_apply(p.generator, inc.dt, acc);
  require_finite(out, "euler_split_step");
  return out;
}

/// Noise for one trajectory: n_steps increments of size dt on stream
/// (seed, trajectories + index).  Jumps are drawn from the untruncated
/// measure so that truncated solvers can share the realization.
inline std::vector<NoiseIncrement> sample_trajectory_noise(const SpdeProblem& p, std::uint64_t seed,
                                                           std::uint64_t index, std::size_t n_steps, double dt) {
  RngStream stream(seed, stream_namespace::trajectories + index);
  const JumpMeasureSpec full = p.has_jumps() ? p.jumps.truncated(std::nullopt) : JumpMeasureSpec{};
  std::vector<NoiseIncrement> out;
  out.reserve(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) out.push_back(sample_increment(stream, p.wiener, full, dt));
  return out;
}

/// Euler path on the grid t0 + k dt, k = 0..n; the step size is taken from
/// the increments.  The delayed drift, if present, reads the path computed so
/// far (the initial value is used before t0).
inline std::vector<ModeVector> euler_path(const SpdeProblem& p, std::span<const NoiseIncrement> noise) {
  std::vector<ModeVector> path;
  path.reserve(noise.size() + 1);
  path.push_back(p.r0);
  std::optional<PathHistory> history;
  if (p.delayed_drift) {
    history.emplace();
    history->push(0.0, p.r0);
    if (p.t0 > 0.0) history->push(p.t0, p.r0);
  }
  double t = p.t0;
  for (const auto& inc : noise) {
    ModeVector extra;
    if (history) extra = (*p.delayed_drift)(t, *history);
    path.push_back(euler_split_step(p, t, path.back(), inc, extra));
    t += inc.dt;
    if (history) history->push(t, path.back());
  }
  return path;
}

inline ModeVector euler_terminal(const SpdeProblem& p, std::span<const NoiseIncrement> noise) {
  return euler_path(p, noise).back();
}

}  // namespace mfspde
