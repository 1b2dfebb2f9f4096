#pragma once

// Jump-truncation stability: solutions driven by the jumps in B_n against
// the full solution on shared noise, compared with C_n^2.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/parallel.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/schemes/euler_split.hpp"

namespace mfspde {

struct StabilityLevel {
  int n = 0;
  /// E int_{t0}^T int_{E \ B_n} ||gamma(r_s, x)||^2 F(dx) ds along the reference path.
  double c_n_squared = 0.0;
  /// sup over the grid of E ||r_t - r^n_t||^2.
  double error = 0.0;
  /// error / C_n^2, or NaN when C_n^2 == 0.
  double ratio = 0.0;
};

struct StabilityReport {
  std::vector<StabilityLevel> levels;
  /// Fitted constant: the largest ratio over levels with C_n^2 > 0.
  double k = 0.0;
  /// Largest over smallest ratio.
  double spread = 1.0;
  /// True when every level with C_n^2 == 0 reproduced the reference exactly.
  bool exact_at_full_space = true;
  std::string note = "C_n is evaluated along the finest-grid Euler reference path, not the exact solution";
};

struct StabilityOptions {
  std::size_t trajectories = 2000;
  std::size_t steps = 64;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

inline StabilityReport stability_experiment(const SpdeProblem& base, const std::vector<int>& levels,
                                            const StabilityOptions& opt) {
  base.validate();
  detail::require(base.has_jumps(), "stability_experiment: the problem needs a jump field with positive intensity");
  detail::require(!levels.empty(), "stability_experiment: no truncation levels");
  detail::require(opt.trajectories >= 2 && opt.steps >= 1, "stability_experiment: need trajectories and steps");
  SpdeProblem full = base;
  full.jumps = base.jumps.truncated(std::nullopt);
  const double dt = (base.horizon - base.t0) / static_cast<double>(opt.steps);
  const std::size_t m = opt.trajectories;

  std::vector<std::vector<NoiseIncrement>> noise(m);
  std::vector<std::vector<ModeVector>> reference(m);
  parallel_for(m, opt.threads, [&](std::size_t j) {
    noise[j] = sample_trajectory_noise(full, opt.seed, j, opt.steps, dt);
    reference[j] = euler_path(full, noise[j]);
  });

  StabilityReport report;
  for (int n : levels) {
    SpdeProblem trunc = full;
    trunc.jumps = full.jumps.truncated(n);
    std::vector<std::vector<double>> sq(m, std::vector<double>(opt.steps + 1));
    std::vector<double> cn(m);
    parallel_for(m, opt.threads, [&](std::size_t j) {
      const auto path = euler_path(trunc, noise[j]);
      for (std::size_t k = 0; k <= opt.steps; ++k) sq[j][k] = (path[k] - reference[j][k]).squaredNorm();
      double acc = 0.0;
      for (std::size_t k = 0; k < opt.steps; ++k) {
        const double t = base.t0 + static_cast<double>(k) * dt;
        const ModeVector& r = reference[j][k];
        auto norm2 = [&](double x) { return Eigen::VectorXd::Constant(1, (*full.jump)(t, r, x).squaredNorm()); };
        acc += dt * (full.jumps.integrate(norm2, 1)[0] - trunc.jumps.integrate(norm2, 1)[0]);
      }
      cn[j] = acc;
    });
    StabilityLevel lvl;
    lvl.n = n;
    for (double c : cn) lvl.c_n_squared += c;
    lvl.c_n_squared = std::max(0.0, lvl.c_n_squared / static_cast<double>(m));
    for (std::size_t k = 0; k <= opt.steps; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += sq[j][k];
      lvl.error = std::max(lvl.error, s / static_cast<double>(m));
    }
    if (trunc.jumps.kept_mass() == 1.0) {
      lvl.c_n_squared = 0.0;
      if (lvl.error != 0.0) report.exact_at_full_space = false;
    }
    lvl.ratio = lvl.c_n_squared > 0.0 ? lvl.error / lvl.c_n_squared : std::numeric_limits<double>::quiet_NaN();
    report.levels.push_back(lvl);
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& l : report.levels)
    if (l.c_n_squared > 0.0) {
      lo = std::min(lo, l.ratio);
      hi = std::max(hi, l.ratio);
    }
  report.k = hi;
  report.spread = hi > 0.0 && lo > 0.0 ? hi / lo : 1.0;
  return report;
}

}  // namespace mfspde
