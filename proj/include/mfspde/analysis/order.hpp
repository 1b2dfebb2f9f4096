#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "mfspde/errors.hpp"

namespace mfspde {

struct OrderEstimate {
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double intercept = 0.0;
  /// False when some error grew from one level to the next.
  bool monotone = true;
};

/// Least-squares slope of -log2(error) against the refinement level (each
/// level halves the step), with a 95% Student-t confidence interval.
inline OrderEstimate estimate_order(std::span<const double> errors) {
  detail::require(errors.size() >= 4, "estimate_order: at least 4 refinement levels required");
  const auto n = static_cast<double>(errors.size());
  std::vector<double> y(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] > 0.0) || !std::isfinite(errors[i]))
      throw ContractViolation("estimate_order: errors must be positive and finite");
    y[i] = -std::log2(errors[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mx += static_cast<double>(i);
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sxx += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
    sxy += (static_cast<double>(i) - mx) * (y[i] - my);
  }
  OrderEstimate r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - (r.intercept + r.slope * static_cast<double>(i));
    sse += e * e;
  }
  const double se = std::sqrt(sse / (n - 2.0) / sxx);
  const boost::math::students_t dist(n - 2.0);
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  r.ci_lo = r.slope - q * se;
  r.ci_hi = r.slope + q * se;
  for (std::size_t i = 1; i < errors.size(); ++i)
    if (errors[i] > errors[i - 1]) r.monotone = false;
  return r;
}

}  // namespace mfspde
