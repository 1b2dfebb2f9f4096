#pragma once

// Cubature on Wiener space: ODEs along the concatenated cubature paths and
// evaluation of the weighted branch tree.

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/parallel.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/schemes/cubature_formula.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

struct OdeOptions {
  int initial_substeps = 8;
  int max_substeps = 4096;
  /// Local error budget per cubature step is tol * dt^{(m+1)/2}.
  double tol = 1e-6;
};

namespace detail {

/// Lawson RK4 step for r' = A r + N(r) written without inverse exponentials.
template <class Nonlinear>
ModeVector lawson_rk4(const DiagonalGenerator& g, const ModeVector& r, double h, Nonlinear&& n) {
  const Eigen::VectorXd e_half = semigroup_factors(g, 0.5 * h);
  const Eigen::VectorXd e_full = semigroup_factors(g, h);
  const ModeVector k1 = n(r);
  const ModeVector a2 = e_half.cwiseProduct(r + 0.5 * h * k1);
  const ModeVector k2 = n(a2);
  const ModeVector a3 = e_half.cwiseProduct(r) + 0.5 * h * k2;
  const ModeVector k3 = n(a3);
  const ModeVector a4 = e_full.cwiseProduct(r) + h * e_half.cwiseProduct(k3);
  const ModeVector k4 = n(a4);
  return e_full.cwiseProduct(r) +
         (h / 6.0) * (e_full.cwiseProduct(k1) + 2.0 * e_half.cwiseProduct(k2 + k3) + k4);
}

}  // namespace detail

/// Integrates dr = (A r + alpha_strat(r)) dt + sum_i sigma~_i(r) dw^i along a
/// straight segment of duration tau with increment dw, in `substeps` steps.
inline ModeVector ode_segment(const SpdeProblem& p, double t, const ModeVector& start, double tau,
                              const Eigen::VectorXd& dw, int substeps) {
  if (tau == 0.0) return start;
  const double h = tau / substeps;
  ModeVector r = start;
  for (int s = 0; s < substeps; ++s) {
    const double ts = t + s * h;
    auto n = [&](const ModeVector& x) {
      ModeVector v = stratonovich_drift(p.drift, p.diffusion, p.wiener, ts, x);
      for (std::size_t i = 0; i < p.diffusion.size(); ++i)
        if (dw[static_cast<Eigen::Index>(i)] != 0.0)
          v += (dw[static_cast<Eigen::Index>(i)] / tau) * p.scaled_diffusion(i, ts, x);
      return v;
    };
    r = detail::lawson_rk4(p.generator, r, h, n);
  }
  return r;
}

/// Integrates along a piecewise-linear path (already rescaled to the step).
/// Each segment runs with doubling substeps until two successive
/// resolutions agree within the budget.
inline ModeVector ode_along_cubature_path(const SpdeProblem& p, double t, const ModeVector& start,
                                          const PiecewiseLinearPath& path, double budget, const OdeOptions& opt) {
  ModeVector r = start;
  for (std::size_t seg = 0; seg < path.segments(); ++seg) {
    const Eigen::VectorXd inc = path.segment_increment(seg);
    const double tau = inc[0];
    const Eigen::VectorXd dw = inc.tail(inc.size() - 1);
    const double ts = t + path.times[seg];
    int n = opt.initial_substeps;
    ModeVector coarse = ode_segment(p, ts, r, tau, dw, n);
    for (;;) {
      ModeVector fine = ode_segment(p, ts, r, tau, dw, 2 * n);
      const double err = (fine - coarse).norm();
      if (err <= budget) {
        r = std::move(fine);
        break;
      }
      n *= 2;
      if (2 * n > opt.max_substeps)
        throw NumericalGuardError("ode_along_cubature_path: RK4 error estimate " + std::to_string(err) +
                                  " above budget " + std::to_string(budget) + " at max_substeps");
      coarse = std::move(fine);
    }
    require_finite(r, "ode_along_cubature_path");
  }
  return r;
}

struct FullTree {};
struct MonteCarloBranches {
  std::size_t count = 10000;
};
using BranchPolicy = std::variant<FullTree, MonteCarloBranches>;

struct CubatureConfig {
  std::size_t steps = 4;
  BranchPolicy policy = FullTree{};
  double branch_budget = 1u << 24;
  OdeOptions ode;
  TestFunction g = TestFunction::quadratic();
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct CubatureResult {
  double estimate = 0.0;
  double branch_count = 0.0;
  /// Monte Carlo standard error; zero for the full tree.
  double stderr_mc = 0.0;
};

namespace detail {

struct CubatureContext {
  const SpdeProblem& problem;
  const CubatureFormula& formula;
  std::vector<PiecewiseLinearPath> scaled;
  double dt;
  double budget;
  const CubatureConfig& cfg;

  ModeVector advance(std::size_t step, const ModeVector& r, std::size_t l) const {
    return ode_along_cubature_path(problem, problem.t0 + static_cast<double>(step) * dt, r, scaled[l], budget,
                                   cfg.ode);
  }

  double subtree(std::size_t step, const ModeVector& r) const {
    if (step == cfg.steps) return cfg.g(r);
    double acc = 0.0;
    for (std::size_t l = 0; l < formula.size(); ++l) acc += formula.weights()[l] * subtree(step + 1, advance(step, r, l));
    return acc;
  }
};

}  // namespace detail

/// E[g(r_T)] by cubature on Wiener space over a uniform partition.
inline CubatureResult cubature_weak_value(const SpdeProblem& p, const CubatureFormula& f, const CubatureConfig& cfg) {
  p.validate();
  cfg.g.validate(p.dim());
  detail::require(f.certified(), "cubature_weak_value: formula is not certified; run certify() first");
  detail::require(static_cast<std::size_t>(f.d()) == p.wiener.d(),
                  "cubature_weak_value: formula dimension differs from the number of Brownian modes");
  detail::require(!p.has_jumps(), "cubature_weak_value: jump problems are not supported by the cubature scheme");
  detail::require(!p.delayed_drift, "cubature_weak_value: delayed coefficients are not supported by the cubature scheme");
  detail::require(cfg.steps >= 1, "cubature_weak_value: at least one step");
  const double dt = (p.horizon - p.t0) / static_cast<double>(cfg.steps);
  detail::CubatureContext ctx{p, f, {}, dt, cfg.ode.tol * std::pow(dt, 0.5 * (f.degree() + 1)), cfg};
  for (const auto& path : f.paths()) ctx.scaled.push_back(path.rescaled(dt));

  CubatureResult out;
  const double n = static_cast<double>(f.size());
  if (std::holds_alternative<FullTree>(cfg.policy)) {
    const double branches = std::pow(n, static_cast<double>(cfg.steps));
    if (branches > cfg.branch_budget)
      throw BudgetExceeded("cubature_weak_value: full tree has " + std::to_string(branches) +
                           " branches, above the budget " + std::to_string(cfg.branch_budget) +
                           "; use MonteCarloBranches instead");
    out.branch_count = branches;
    // Split at a fixed depth independent of the worker count, evaluate the
    // prefixes in parallel and sum in index order.
    std::size_t split = 0;
    std::size_t prefixes = 1;
    while (split < cfg.steps && prefixes < 64) {
      prefixes *= f.size();
      ++split;
    }
    std::vector<double> part(prefixes);
    parallel_for(prefixes, cfg.threads, [&](std::size_t idx) {
      ModeVector r = p.r0;
      double w = 1.0;
      std::size_t code = idx;
      std::vector<std::size_t> word(split);
      for (std::size_t s = split; s-- > 0;) {
        word[s] = code % f.size();
        code /= f.size();
      }
      for (std::size_t s = 0; s < split; ++s) {
        w *= f.weights()[word[s]];
        r = ctx.advance(s, r, word[s]);
      }
      part[idx] = w * ctx.subtree(split, r);
    });
    double acc = 0.0;
    for (double v : part) acc += v;
    out.estimate = acc;
    return out;
  }

  const auto count = std::get<MonteCarloBranches>(cfg.policy).count;
  detail::require(count >= 2, "cubature_weak_value: need at least two Monte Carlo branches");
  std::vector<double> values(count);
  std::vector<double> cumulative(f.size());
  double c = 0.0;
  for (std::size_t l = 0; l < f.size(); ++l) cumulative[l] = (c += f.weights()[l]);
  parallel_for(count, cfg.threads, [&](std::size_t b) {
    RngStream stream(cfg.seed, stream_namespace::cubature_branches + b);
    ModeVector r = p.r0;
    for (std::size_t s = 0; s < cfg.steps; ++s) {
      const double u = stream.uniform() * c;
      std::size_t l = 0;
      while (l + 1 < f.size() && u >= cumulative[l]) ++l;
      r = ctx.advance(s, r, l);
    }
    values[b] = cfg.g(r);
  });
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(count - 1);
  out.estimate = mean;
  out.branch_count = static_cast<double>(count);
  out.stderr_mc = std::sqrt(var / static_cast<double>(count));
  return out;
}

}  // namespace mfspde
