#pragma once

// Grid residuals of the mild and weak solution identities along simulated
// paths.  Time integrals use the trapezoid rule, stochastic integrals the
// left point, jump integrals the exact jump times.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

namespace detail {

inline void require_ensemble(const std::vector<std::vector<ModeVector>>& paths,
                             const std::vector<std::vector<NoiseIncrement>>& noise) {
  require(!paths.empty() && paths.size() == noise.size(), "residual: ensemble sizes differ");
  for (std::size_t j = 0; j < paths.size(); ++j)
    require(paths[j].size() == noise[j].size() + 1, "residual: path and noise lengths differ");
}

inline double sup_rms(const std::vector<std::vector<double>>& sq) {
  double m = 0.0;
  for (std::size_t k = 0; k < sq.front().size(); ++k) {
    double s = 0.0;
    for (const auto& row : sq) s += row[k];
    m = std::max(m, std::sqrt(s / static_cast<double>(sq.size())));
  }
  return m;
}

}  // namespace detail

/// sup_k sqrt(E ||r_k - M_k||^2) with
/// M_k = S_{t_k} h + int S_{t_k - s} alpha(r_s) ds + int S_{t_k - s} sigma(r_s) dW_s + jump part.
inline double mild_residual(const SpdeProblem& p, const std::vector<std::vector<ModeVector>>& paths,
                            const std::vector<std::vector<NoiseIncrement>>& noise) {
  detail::require_ensemble(paths, noise);
  std::vector<std::vector<double>> sq(paths.size());
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const auto& r = paths[j];
    sq[j].assign(r.size(), 0.0);
    ModeVector m = p.r0;
    double t = p.t0;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
      const auto& inc = noise[j][k];
      const Eigen::VectorXd e = semigroup_factors(p.generator, inc.dt);
      ModeVector left = p.drift(t, r[k]);
      ModeVector right = p.drift(t + inc.dt, r[k + 1]);
      if (p.has_jumps()) {
        left -= p.compensator(t, r[k]);
        right -= p.compensator(t + inc.dt, r[k + 1]);
      }
      ModeVector stoch = ModeVector::Zero(p.dim());
      for (std::size_t i = 0; i < p.diffusion.size(); ++i) stoch += inc.brownian[i] * p.scaled_diffusion(i, t, r[k]);
      m = e.cwiseProduct(m + 0.5 * inc.dt * left + stoch) + 0.5 * inc.dt * right;
      if (p.has_jumps())
        for (const auto& jump : inc.jumps)
          if (p.jumps.in_truncation(jump.mark))
            m += semigroup_apply(p.generator, inc.dt - jump.offset, (*p.jump)(t, r[k], jump.mark));
      t += inc.dt;
      sq[j][k + 1] = (r[k + 1] - m).squaredNorm();
    }
  }
  return detail::sup_rms(sq);
}

/// sup_k sqrt(E |<e_mode, r_k> - W_k|^2) with
/// W_k = <e, h> + int (a <e, r_s> + <e, alpha(r_s)>) ds + int <e, sigma(r_s)> dW_s + jump part.
inline double weak_residual(const SpdeProblem& p, const std::vector<std::vector<ModeVector>>& paths,
                            const std::vector<std::vector<NoiseIncrement>>& noise, std::size_t mode) {
  detail::require_ensemble(paths, noise);
  detail::require(mode < p.generator.dim(), "weak_residual: mode out of range");
  const auto e = static_cast<Eigen::Index>(mode);
  const double a = p.generator.eigenvalue(mode);
  std::vector<std::vector<double>> sq(paths.size());
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const auto& r = paths[j];
    sq[j].assign(r.size(), 0.0);
    double w = p.r0[e];
    double t = p.t0;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
      const auto& inc = noise[j][k];
      double left = a * r[k][e] + p.drift(t, r[k])[e];
      double right = a * r[k + 1][e] + p.drift(t + inc.dt, r[k + 1])[e];
      if (p.has_jumps()) {
        left -= p.compensator(t, r[k])[e];
        right -= p.compensator(t + inc.dt, r[k + 1])[e];
      }
      w += 0.5 * inc.dt * (left + right);
      for (std::size_t i = 0; i < p.diffusion.size(); ++i) w += inc.brownian[i] * p.scaled_diffusion(i, t, r[k])[e];
      if (p.has_jumps())
        for (const auto& jump : inc.jumps)
          if (p.jumps.in_truncation(jump.mark)) w += (*p.jump)(t, r[k], jump.mark)[e];
      t += inc.dt;
      const double d = r[k + 1][e] - w;
      sq[j][k + 1] = d * d;
    }
  }
  return detail::sup_rms(sq);
}

}  // namespace mfspde
