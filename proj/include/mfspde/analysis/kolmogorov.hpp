#pragma once

// Reference values E[g(X_T) | X_0 = x0] for scalar Ito SDEs
//   dX = b(X) dt + s(X) dB
// from the backward Kolmogorov equation u_t + b u_x + s^2/2 u_xx = 0,
// discretized by Crank-Nicolson on a uniform grid.

#include <cmath>
#include <functional>
#include <vector>

#include "mfspde/errors.hpp"

namespace mfspde {

struct KolmogorovGrid {
  /// Half width of the spatial domain around x0; u = g is imposed on its edges.
  double half_width = 8.0;
  std::size_t space_points = 4001;
  std::size_t time_steps = 2000;
};

inline double kolmogorov_expectation(const std::function<double(double)>& drift,
                                     const std::function<double(double)>& diffusion,
                                     const std::function<double(double)>& g, double x0, double horizon,
                                     const KolmogorovGrid& grid = {}) {
  detail::require(horizon > 0.0, "kolmogorov_expectation: horizon must be positive");
  detail::require(grid.space_points >= 5 && grid.space_points % 2 == 1 && grid.time_steps >= 1,
                  "kolmogorov_expectation: need an odd number of space points");
  const std::size_t n = grid.space_points;
  const double lo = x0 - grid.half_width;
  const double h = 2.0 * grid.half_width / static_cast<double>(n - 1);
  const double dt = horizon / static_cast<double>(grid.time_steps);
  std::vector<double> x(n), u(n), lower(n), diag(n), upper(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = lo + h * static_cast<double>(i);
    u[i] = g(x[i]);
  }
  // Operator L u_i = l_i u_{i-1} + d_i u_i + r_i u_{i+1}.
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double b = drift(x[i]);
    const double s = diffusion(x[i]);
    const double dd = 0.5 * s * s / (h * h);
    lower[i] = dd - 0.5 * b / h;
    upper[i] = dd + 0.5 * b / h;
    diag[i] = -2.0 * dd;
  }
  std::vector<double> rhs(n), cp(n), dp(n);
  for (std::size_t step = 0; step < grid.time_steps; ++step) {
    // (I - dt/2 L) u_new = (I + dt/2 L) u_old, stepping backwards in time.
    for (std::size_t i = 1; i + 1 < n; ++i)
      rhs[i] = u[i] + 0.5 * dt * (lower[i] * u[i - 1] + diag[i] * u[i] + upper[i] * u[i + 1]);
    rhs[0] = u[0];
    rhs[n - 1] = u[n - 1];
    // Thomas algorithm with Dirichlet rows at both ends.
    cp[0] = 0.0;
    dp[0] = rhs[0];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double a = -0.5 * dt * lower[i];
      const double bb = 1.0 - 0.5 * dt * diag[i];
      const double c = -0.5 * dt * upper[i];
      const double m = bb - a * cp[i - 1];
      cp[i] = c / m;
      dp[i] = (rhs[i] - a * dp[i - 1]) / m;
    }
    u[n - 1] = rhs[n - 1];
    for (std::size_t i = n - 1; i-- > 1;) u[i] = dp[i] - cp[i] * u[i + 1];
  }
  return u[(n - 1) / 2];
}

}  // namespace mfspde
