#pragma once

// The moving frame: the SPDE becomes the SDE
//   dR = U_{-t} l alpha(pi U_t R) dt + U_{-t} l sigma(pi U_t R) dW + ...
// on the dilation space, and r = pi U_t R solves the original equation.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

/// Frame SDE built over a problem.  Holds references: frame and problem must
/// outlive it.
class FrameSde {
 public:
  FrameSde(const GroupFrame& frame, const SpdeProblem& base, double t0)
      : frame_(frame), base_(base), t0_(t0) {
    detail::require(t0 >= 0.0, "FrameSde: t0 must be nonnegative");
    detail::require(frame.dim() == base.generator.dim(), "FrameSde: frame and problem dimensions differ");
    const auto& a = frame.generator().eigenvalues();
    const auto& b = base.generator.eigenvalues();
    detail::require(a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() == 0.0,
                    "FrameSde: frame was built for a different generator");
  }

  const GroupFrame& frame() const { return frame_; }
  const SpdeProblem& base() const { return base_; }
  double t0() const { return t0_; }

  /// s with U^{t0}_t = U_s: t - t0 for t >= t0, 0 on (-t0, t0), t0 + t for t <= -t0.
  double clamp(double t) const {
    if (t >= t0_) return t - t0_;
    if (t <= -t0_) return t0_ + t;
    return 0.0;
  }

  /// U^{t0}_t R
  FrameVector apply(double t, const FrameVector& r) const {
    const double s = clamp(t);
    return s == 0.0 ? r : group_apply(frame_, s, r);
  }

  /// pi U^{t0}_t R
  ModeVector state(double t, const FrameVector& r) const { return project(frame_, apply(t, r)); }

  /// U^{t0}_{-t} l v
  FrameVector lift(double t, const ModeVector& v) const { return apply(-t, embed(frame_, v)); }

  FrameVector lifted_drift(double t, const FrameVector& r) const { return lift(t, base_.drift(t, state(t, r))); }

  FrameVector lifted_diffusion(std::size_t i, double t, const FrameVector& r) const {
    return lift(t, base_.scaled_diffusion(i, t, state(t, r)));
  }

  FrameVector lifted_jump(double t, const FrameVector& r, double x) const {
    detail::require(base_.jump.has_value(), "FrameSde: problem has no jump field");
    return lift(t, eval_jump(*base_.jump, base_.jumps, t, state(t, r), x));
  }

 private:
  const GroupFrame& frame_;
  const SpdeProblem& base_;
  double t0_;
};

/// Euler scheme for the frame SDE on the grid t0 + k dt.  The coefficient
/// values are evaluated once per step at r = pi U_t R and lifted together.
inline std::vector<FrameVector> frame_euler_path(const FrameSde& sde, std::span<const NoiseIncrement> noise) {
  const SpdeProblem& p = sde.base();
  detail::require(!p.delayed_drift, "frame_euler_path: delayed coefficients are not supported in the frame");
  std::vector<FrameVector> path;
  path.reserve(noise.size() + 1);
  path.push_back(embed(sde.frame(), p.r0));
  double t = p.t0;
  for (const auto& inc : noise) {
    const FrameVector& big_r = path.back();
    const ModeVector r = sde.state(t, big_r);
    ModeVector incr = inc.dt * p.drift(t, r);
    for (std::size_t i = 0; i < p.diffusion.size(); ++i)
      if (inc.brownian[i] != 0.0) incr += inc.brownian[i] * p.scaled_diffusion(i, t, r);
    if (p.has_jumps()) {
      incr -= inc.dt * p.compensator(t, r);
      for (const auto& j : inc.jumps)
        if (p.jumps.in_truncation(j.mark)) incr += eval_jump(*p.jump, p.jumps, t, r, j.mark);
    }
    path.push_back(big_r + sde.lift(t, incr));
    t += inc.dt;
  }
  return path;
}

/// r_t = pi U^{t0}_t R_t on the grid t0 + k dt.
inline std::vector<ModeVector> push_solution(const FrameSde& sde, std::span<const FrameVector> path, double dt) {
  std::vector<ModeVector> out;
  out.reserve(path.size());
  for (std::size_t k = 0; k < path.size(); ++k)
    out.push_back(sde.state(sde.base().t0 + static_cast<double>(k) * dt, path[k]));
  return out;
}

/// t -> ||l|| (1_{[0,t0)} + M^2 e^{2 omega (t - t0)} 1_{[t0,inf)}) ||pi|| L(t),
/// sampled at the left end of each piece of the union of L's breaks, t0 and
/// the uniform grid of spacing `resolution` on [0, until].
inline LipschitzProfile transform_lipschitz(const LipschitzProfile& l, const GroupFrame& frame, double t0,
                                            double until, double resolution) {
  detail::require(t0 >= 0.0 && until > 0.0 && resolution > 0.0, "transform_lipschitz: invalid grid");
  std::vector<double> breaks = l.breaks();
  breaks.push_back(t0);
  const auto n = static_cast<std::size_t>(std::ceil(until / resolution));
  for (std::size_t k = 1; k <= n; ++k) breaks.push_back(std::min(until, static_cast<double>(k) * resolution));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const double m = frame.growth_m();
  const double omega = frame.growth_omega();
  std::vector<double> values;
  values.reserve(breaks.size());
  for (double b : breaks) {
    const double factor = b < t0 ? 1.0 : m * m * std::exp(2.0 * omega * (b - t0));
    values.push_back(frame.embed_norm() * factor * frame.project_norm() * l(b));
  }
  return LipschitzProfile(std::move(breaks), std::move(values), l.radius());
}

}  // namespace mfspde
