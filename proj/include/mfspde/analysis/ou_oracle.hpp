#pragma once

// Closed-form law of the additive Ornstein-Uhlenbeck case
//   dr = (A r + c) dt + sum_i sqrt(lambda_i) s_i dbeta^i
// and an exact sampler coupled to the Brownian increments.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

struct OuOracle {
  Eigen::VectorXd a;
  Eigen::VectorXd c;
  /// K x d, column i is the diffusion direction of Brownian mode i.
  Eigen::MatrixXd s;
  Eigen::VectorXd lambda;
  ModeVector r0;

  /// Requires constant drift and constant diffusion columns and no jumps.
  static OuOracle from_problem(const SpdeProblem& p) {
    detail::require(p.drift.kind() == FieldKind::Constant, "OuOracle: drift must be constant");
    detail::require(!p.has_jumps() && !p.delayed_drift, "OuOracle: additive Wiener case only");
    OuOracle o;
    o.a = p.generator.eigenvalues();
    const ModeVector zero = ModeVector::Zero(p.dim());
    o.c = p.drift(p.t0, zero);
    o.s.resize(p.dim(), static_cast<Eigen::Index>(p.diffusion.size()));
    for (std::size_t i = 0; i < p.diffusion.size(); ++i) {
      detail::require(p.diffusion[i].kind() == FieldKind::Constant, "OuOracle: diffusion must be additive");
      o.s.col(static_cast<Eigen::Index>(i)) = p.diffusion[i](p.t0, zero);
    }
    o.lambda = Eigen::Map<const Eigen::VectorXd>(p.wiener.q_eigenvalues.data(),
                                                 static_cast<Eigen::Index>(p.wiener.d()));
    o.r0 = p.r0;
    return o;
  }
};

struct OuMoments {
  ModeVector mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd covariance;
};

namespace detail {

/// (e^{x t} - 1) / x with the limit t at x = 0.
inline double expm1_over(double x, double t) {
  const double y = x * t;
  return std::abs(y) < 1e-8 ? t * (1.0 + 0.5 * y + y * y / 6.0) : std::expm1(y) / x;
}

}  // namespace detail

/// mean_k = e^{a_k t} r0_k + c_k (e^{a_k t} - 1)/a_k,
/// cov_kl = sum_i lambda_i s_ki s_li (e^{(a_k + a_l) t} - 1)/(a_k + a_l).
inline OuMoments ou_exact_moments(const OuOracle& o, double t) {
  detail::require(t >= 0.0, "ou_exact_moments: t must be nonnegative");
  const auto n = o.a.size();
  OuMoments m;
  m.mean.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) m.mean[k] = std::exp(o.a[k] * t) * o.r0[k] + o.c[k] * detail::expm1_over(o.a[k], t);
  const Eigen::MatrixXd q = o.s * o.lambda.asDiagonal() * o.s.transpose();
  m.covariance.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l) m.covariance(k, l) = q(k, l) * detail::expm1_over(o.a[k] + o.a[l], t);
  m.variance = m.covariance.diagonal();
  return m;
}

/// E[g(r_t)] for the whitelisted test functions.
inline double ou_expectation(const OuOracle& o, const TestFunction& g, double t) {
  const auto m = ou_exact_moments(o, t);
  switch (g.kind) {
    case TestFunctionKind::Constant: return 1.0;
    case TestFunctionKind::Linear: return g.zeta.dot(m.mean);
    case TestFunctionKind::Quadratic: return m.mean.squaredNorm() + m.variance.sum();
    case TestFunctionKind::TanhLinear: {
      const double mu = g.zeta.dot(m.mean);
      const double sd = std::sqrt(g.zeta.dot(m.covariance * g.zeta));
      if (sd == 0.0) return std::tanh(mu);
      auto f = [&](double z) { return std::tanh(mu + sd * z) * std::exp(-0.5 * z * z); };
      const double v =
          boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -12.0, 12.0, 15, 1e-13);
      return v / std::sqrt(2.0 * std::numbers::pi);
    }
  }
  return 0.0;
}

/// Exact OU transitions on a uniform fine grid, sampled jointly with the
/// Brownian increments that drive a numerical scheme.  Per Brownian mode i
/// the vector (dbeta^i, int e^{a_k (dt - u)} dbeta^i(u), k = 1..K) is
/// Gaussian with known covariance.
class CoupledOuSampler {
 public:
  CoupledOuSampler(OuOracle oracle, double dt) : o_(std::move(oracle)), dt_(dt) {
    detail::require(dt > 0.0, "CoupledOuSampler: dt must be positive");
    const auto n = o_.a.size();
    Eigen::MatrixXd cov(n + 1, n + 1);
    cov(0, 0) = dt;
    for (Eigen::Index k = 0; k < n; ++k) {
      cov(0, k + 1) = cov(k + 1, 0) = detail::expm1_over(o_.a[k], dt);
      for (Eigen::Index l = 0; l < n; ++l) cov(k + 1, l + 1) = detail::expm1_over(o_.a[k] + o_.a[l], dt);
    }
    // Semidefinite when modes coincide; LDLT handles the degenerate directions.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    factor_ = ldlt.transpositionsP().transpose() * Eigen::MatrixXd(ldlt.matrixL()) * d.asDiagonal();
    decay_ = (o_.a * dt).array().exp().matrix();
    shift_.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) shift_[k] = o_.c[k] * detail::expm1_over(o_.a[k], dt);
  }

  const OuOracle& oracle() const { return o_; }

  struct Sample {
    std::vector<NoiseIncrement> noise;
    ModeVector exact_terminal;
  };

  /// n_steps fine increments from stream (seed, trajectories + index) and
  /// the exact solution at the end of the grid.
  Sample sample(std::uint64_t seed, std::uint64_t index, std::size_t n_steps) const {
    RngStream stream(seed, stream_namespace::trajectories + index);
    const auto n = o_.a.size();
    const auto d = o_.lambda.size();
    Sample out;
    out.noise.resize(n_steps);
    ModeVector x = o_.r0;
    Eigen::VectorXd z(n + 1);
    for (auto& inc : out.noise) {
      inc.dt = dt_;
      inc.brownian.resize(static_cast<std::size_t>(d));
      ModeVector next = decay_.cwiseProduct(x) + shift_;
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j <= n; ++j) z[j] = stream.normal();
        const Eigen::VectorXd v = factor_ * z;
        inc.brownian[static_cast<std::size_t>(i)] = v[0];
        next += std::sqrt(o_.lambda[i]) * o_.s.col(i).cwiseProduct(v.tail(n));
      }
      x = std::move(next);
    }
    out.exact_terminal = std::move(x);
    return out;
  }

 private:
  OuOracle o_;
  double dt_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd decay_;
  Eigen::VectorXd shift_;
};

}  // namespace mfspde
