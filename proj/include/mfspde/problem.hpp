#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

/// dr = (A r + alpha(r)) dt + sum_i sqrt(lambda_i) sigma_i(r) d beta^i
///      + int gamma(r_-, x) (mu - F)(dt, dx),   r_{t0} = r0.
struct SpdeProblem {
  DiagonalGenerator generator{std::vector<double>{0.0}};
  VectorField drift;
  /// One column per retained Brownian mode, before the sqrt(lambda) scaling.
  std::vector<VectorField> diffusion;
  QWienerSpec wiener;
  std::optional<JumpField> jump;
  JumpMeasureSpec jumps{0.0, DiscreteMarks{{1.0}, {1.0}}, std::nullopt};
  /// Extra drift term reading the delayed path; added to drift.
  std::optional<DelayedField> delayed_drift;
  ModeVector r0;
  double t0 = 0.0;
  double horizon = 1.0;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(generator.dim()); }
  bool has_jumps() const { return jump.has_value() && jumps.total_intensity > 0.0; }

  void validate() const {
    const auto n = dim();
    detail::require(static_cast<bool>(drift) && drift.dim() == n, "SpdeProblem: drift missing or of wrong dimension");
    wiener.validate();
    detail::require(diffusion.size() == wiener.d(), "SpdeProblem: one diffusion column per Brownian mode required");
    for (const auto& s : diffusion)
      detail::require(static_cast<bool>(s) && s.dim() == n, "SpdeProblem: diffusion column of wrong dimension");
    jumps.validate();
    if (jump) detail::require(jump->dim() == n, "SpdeProblem: jump field of wrong dimension");
    detail::require(r0.size() == n, "SpdeProblem: r0 has wrong dimension");
    require_finite(r0, "SpdeProblem: r0");
    detail::require(t0 >= 0.0 && horizon > t0 && std::isfinite(horizon), "SpdeProblem: need 0 <= t0 < horizon");
  }

  /// sqrt(lambda_i) sigma_i(t, h)
  ModeVector scaled_diffusion(std::size_t i, double t, const ModeVector& h) const {
    return std::sqrt(wiener.q_eigenvalues[i]) * diffusion[i](t, h);
  }

  ModeVector compensator(double t, const ModeVector& h) const {
    if (!has_jumps()) return ModeVector::Zero(h.size());
    return compensator_drift(*jump, jumps, t, h);
  }
};

/// Moves a positive part omega of the spectrum into the drift:
/// A - omega I has a_k <= 0 and alpha + omega I compensates.
inline SpdeProblem drift_shifted(const SpdeProblem& p) {
  const double omega = p.generator.omega();
  if (omega == 0.0) return p;
  SpdeProblem out = p;
  std::vector<double> a(p.generator.dim());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = p.generator.eigenvalue(k) - omega;
  out.generator = DiagonalGenerator(std::move(a));
  out.drift = p.drift + VectorField::linear(omega * Eigen::MatrixXd::Identity(p.dim(), p.dim()));
  return out;
}

enum class TestFunctionKind { Constant, Linear, Quadratic, TanhLinear };

/// Whitelisted smooth functionals of the terminal state.
struct TestFunction {
  TestFunctionKind kind = TestFunctionKind::Quadratic;
  ModeVector zeta;

  static TestFunction constant_one() { return {TestFunctionKind::Constant, {}}; }
  static TestFunction linear(ModeVector z) { return {TestFunctionKind::Linear, std::move(z)}; }
  static TestFunction quadratic() { return {TestFunctionKind::Quadratic, {}}; }
  static TestFunction tanh_linear(ModeVector z) { return {TestFunctionKind::TanhLinear, std::move(z)}; }

  double operator()(const ModeVector& h) const {
    switch (kind) {
      case TestFunctionKind::Constant: return 1.0;
      case TestFunctionKind::Linear: return zeta.dot(h);
      case TestFunctionKind::Quadratic: return h.squaredNorm();
      case TestFunctionKind::TanhLinear: return std::tanh(zeta.dot(h));
    }
    return 0.0;
  }

  void validate(Eigen::Index n) const {
    if (kind == TestFunctionKind::Linear || kind == TestFunctionKind::TanhLinear)
      detail::require(zeta.size() == n, "TestFunction: zeta has wrong dimension");
  }
};

}  // namespace mfspde
