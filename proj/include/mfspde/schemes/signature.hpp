#pragma once

// Multi-indices, iterated integrals of piecewise-linear paths and expected
// iterated Stratonovich integrals of Brownian motion.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mfspde/errors.hpp"

namespace mfspde {

/// Word over {0, 1, ..., d}; index 0 is time.
using MultiIndex = std::vector<int>;

/// k plus the number of zero entries.
inline int deg(const MultiIndex& mi) {
  int zeros = 0;
  for (int i : mi) zeros += (i == 0);
  return static_cast<int>(mi.size()) + zeros;
}

inline std::string to_string(const MultiIndex& mi) {
  std::string s = "(";
  for (std::size_t k = 0; k < mi.size(); ++k) s += (k ? "," : "") + std::to_string(mi[k]);
  return s + ")";
}

/// All nonempty multi-indices over {0..d} with deg <= max_deg, in
/// length-then-lexicographic order.
inline std::vector<MultiIndex> enumerate_multi_indices(int d, int max_deg) {
  detail::require(d >= 1 && max_deg >= 1, "enumerate_multi_indices: need d >= 1 and max_deg >= 1");
  std::vector<MultiIndex> out;
  std::vector<MultiIndex> frontier{{}};
  while (!frontier.empty()) {
    std::vector<MultiIndex> next;
    for (const auto& w : frontier)
      for (int i = 0; i <= d; ++i) {
        MultiIndex v = w;
        v.push_back(i);
        if (deg(v) <= max_deg) next.push_back(std::move(v));
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

/// Continuous piecewise-linear path in R^d through (times[j], points.row(j)),
/// starting at time 0 in the origin.
struct PiecewiseLinearPath {
  std::vector<double> times;
  Eigen::MatrixXd points;  // (K+1) x d

  int d() const { return static_cast<int>(points.cols()); }
  double duration() const { return times.back(); }
  std::size_t segments() const { return times.size() - 1; }

  void validate() const {
    detail::require(times.size() >= 2 && static_cast<Eigen::Index>(times.size()) == points.rows(),
                    "PiecewiseLinearPath: need at least two breakpoints");
    detail::require(times.front() == 0.0, "PiecewiseLinearPath: path must start at time 0");
    detail::require(points.row(0).isZero(0.0), "PiecewiseLinearPath: path must start at the origin");
    for (std::size_t j = 1; j < times.size(); ++j)
      detail::require(times[j] > times[j - 1], "PiecewiseLinearPath: breakpoint times must increase");
    detail::require(points.allFinite(), "PiecewiseLinearPath: points must be finite");
  }

  /// Straight line from 0 to `end` over [0, t].
  static PiecewiseLinearPath straight(const Eigen::VectorXd& end, double t = 1.0) {
    PiecewiseLinearPath p;
    p.times = {0.0, t};
    p.points = Eigen::MatrixXd::Zero(2, end.size());
    p.points.row(1) = end.transpose();
    return p;
  }

  /// sqrt(t) * path(s / t) on [0, t] for a path given on [0, 1].
  PiecewiseLinearPath rescaled(double t) const {
    PiecewiseLinearPath p;
    const double scale = duration();
    p.times.resize(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) p.times[j] = times[j] * (t / scale);
    p.points = std::sqrt(t / scale) * points;
    return p;
  }

  /// Increment (Delta_0 = dt, Delta_1..d) of segment j.
  Eigen::VectorXd segment_increment(std::size_t j) const {
    Eigen::VectorXd inc(points.cols() + 1);
    inc[0] = times[j + 1] - times[j];
    inc.tail(points.cols()) = (points.row(static_cast<Eigen::Index>(j) + 1) - points.row(static_cast<Eigen::Index>(j))).transpose();
    return inc;
  }
};

/// Exact iterated integral int dw^{i_1} ... dw^{i_k} along the path with
/// w^0(s) = s, by Chen concatenation of straight segments.  A straight
/// segment with increment Delta contributes prod Delta_{i_l} / k! to a word.
inline double iterated_bv_integral(const MultiIndex& mi, const PiecewiseLinearPath& path) {
  const std::size_t k = mi.size();
  for (int i : mi) detail::require(i >= 0 && i <= path.d(), "iterated_bv_integral: index out of range");
  // s[j] = integral of the prefix word of length j.
  std::vector<double> s(k + 1, 0.0);
  s[0] = 1.0;
  std::vector<double> next(k + 1);
  for (std::size_t seg = 0; seg < path.segments(); ++seg) {
    const Eigen::VectorXd inc = path.segment_increment(seg);
    for (std::size_t j = 0; j <= k; ++j) {
      // sum over split points l: old[l] * segment(i_{l+1..j})
      double acc = 0.0;
      double piece = 1.0;  // prod of inc over i_{l+1..j} / (j-l)!
      for (std::size_t l = j + 1; l-- > 0;) {
        acc += s[l] * piece;
        if (l > 0) piece *= inc[mi[l - 1]] / static_cast<double>(j - l + 1);
      }
      next[j] = acc;
    }
    s.swap(next);
  }
  return s[k];
}

/// E[ W^{mi}_t ] for iterated Stratonovich integrals of a standard
/// d-dimensional Brownian motion with W^0_t = t.  Supported for deg <= 7.
inline double brownian_stratonovich_moment(const MultiIndex& mi, double t) {
  detail::require(t > 0.0, "brownian_stratonovich_moment: t must be positive");
  for (int i : mi) detail::require(i >= 0, "brownian_stratonovich_moment: negative index");
  if (deg(mi) > 7) throw ContractViolation("brownian_stratonovich_moment: deg " + std::to_string(deg(mi)) +
                                           " above the supported maximum 7");
  // Ito reduction on the last letter: a time letter integrates once, a
  // Brownian letter survives only through the bracket with an equal
  // preceding letter, contributing 1/2 ds.
  double coef = 1.0;
  int power = 0;
  std::size_t k = mi.size();
  while (k > 0) {
    const int j = mi[k - 1];
    if (j == 0) {
      k -= 1;
    } else {
      if (k < 2 || mi[k - 2] != j) return 0.0;
      coef *= 0.5;
      k -= 2;
    }
    // Every reduction step is an integral ds; powers accumulate from the inside.
    ++power;
  }
  // The nested ds integrals produce t^n / n!, with the halving factors kept in coef.
  double fact = 1.0;
  for (int i = 2; i <= power; ++i) fact *= i;
  return coef * std::pow(t, power) / fact;
}

}  // namespace mfspde
