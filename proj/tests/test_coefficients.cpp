#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mfspde/coefficients.hpp"

using namespace mfspde;

namespace {

ModeVector e(Eigen::Index n, Eigen::Index k, double scale = 1.0) {
  ModeVector v = ModeVector::Zero(n);
  v[k] = scale;
  return v;
}

VectorField tanh_field(Eigen::Index n) {
  ModeVector xi = ModeVector::LinSpaced(n, 1.0, 0.5);
  ModeVector dir = ModeVector::LinSpaced(n, -0.3, 0.7);
  ModeVector xi2 = ModeVector::Ones(n) * 0.2;
  return VectorField::functional_form({{TanhProfile{1.5}, xi, dir},
                                       {CutoffPolynomialProfile{{0.1, -0.4, 0.3}, 2.0}, xi2, e(n, 0)}},
                                      n);
}

}  // namespace

TEST(VectorField, ConstantLinearFunctionalExamples) {
  const ModeVector c = ModeVector::LinSpaced(3, 1.0, 3.0);
  EXPECT_EQ(VectorField::constant(c)(0.0, ModeVector::Random(3)), c);
  const auto lin = VectorField::linear(0.5 * Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(lin(0.0, e(2, 0)), e(2, 0, 0.5));
  const ModeVector dir(ModeVector::LinSpaced(2, 1.0, -2.0));
  const auto ff = VectorField::functional_form({{TanhProfile{}, e(2, 0), dir}}, 2);
  const ModeVector out = ff(0.0, e(2, 0, 2.0));
  EXPECT_NEAR((out - std::tanh(2.0) * dir).norm(), 0.0, 1e-15);
}

TEST(VectorField, DimensionMismatchRejected) {
  const auto f = VectorField::zero(2);
  EXPECT_THROW(f(0.0, ModeVector::Zero(3)), ContractViolation);
  EXPECT_THROW(VectorField::linear(Eigen::MatrixXd::Zero(2, 3)), ContractViolation);
}

TEST(DirectionalDerivative, Examples) {
  const ModeVector h = ModeVector::Random(3), v = ModeVector::Random(3);
  EXPECT_EQ(VectorField::constant(ModeVector::Ones(3)).directional_derivative(0.0, h, v), ModeVector::Zero(3));
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(3, 3);
  const auto lin = VectorField::linear(b);
  EXPECT_LE((lin.directional_derivative(0.0, h, v) - b * v).norm(), 1e-15);
  EXPECT_LE((lin.directional_derivative(0.0, 5.0 * h, v) - b * v).norm(), 1e-15);
  // tanh ridge at h = 0: phi'(0) = 1 times the rank-one map dir xi^T.
  const ModeVector xi = ModeVector::Random(3), dir = ModeVector::Random(3);
  const auto ff = VectorField::functional_form({{TanhProfile{}, xi, dir}}, 3);
  EXPECT_LE((ff.directional_derivative(0.0, ModeVector::Zero(3), v) - dir * xi.dot(v)).norm(), 1e-15);
}

TEST(DirectionalDerivative, LinearInDirection) {
  const auto f = truncate_lipschitz(tanh_field(3), 1.0);
  const auto fd = VectorField::custom([f](double t, const ModeVector& h) { return f(t, h); }, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 20; ++rep) {
    ModeVector h(3), v(3), w(3);
    for (int k = 0; k < 3; ++k) {
      h[k] = n(rng);
      v[k] = n(rng);
      w[k] = n(rng);
    }
    const double a = n(rng), b = n(rng);
    for (const VectorField* g : {&f, &fd}) {
      const ModeVector lhs = g->directional_derivative(0.0, h, a * v + b * w);
      const ModeVector rhs = a * g->directional_derivative(0.0, h, v) + b * g->directional_derivative(0.0, h, w);
      EXPECT_LE((lhs - rhs).norm(), 1e-9 * (1.0 + rhs.norm()));
    }
  }
}

TEST(VectorField, AnalyticJacobianMatchesFiniteDifferences) {
  const auto f = tanh_field(4);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 30; ++rep) {
    ModeVector h(4);
    for (int k = 0; k < 4; ++k) h[k] = 1.5 * n(rng);
    const Eigen::MatrixXd a = f.jacobian(0.0, h);
    const Eigen::MatrixXd d = f.fd_jacobian(0.0, h);
    EXPECT_LE((a - d).norm(), 1e-6 * std::max(1.0, a.norm()));
  }
  const auto trunc = truncate_lipschitz(f, 0.8);
  for (double r : {0.3, 1.2, 1.7, 2.5}) {
    const ModeVector h = ModeVector::Ones(4) * (r / 2.0);
    EXPECT_LE((trunc.jacobian(0.0, h) - trunc.fd_jacobian(0.0, h)).norm(), 1e-6 * std::max(1.0, trunc.jacobian(0.0, h).norm()));
  }
}

TEST(VectorField, LipschitzBoundOnRadius) {
  // |tanh'| <= 1, so the ridge is Lipschitz with constant gain |dir| |xi|.
  const ModeVector xi = ModeVector::LinSpaced(3, 0.2, 1.0), dir = ModeVector::LinSpaced(3, 1.0, -0.5);
  const auto f = VectorField::functional_form({{TanhProfile{2.0}, xi, dir}}, 3);
  const double l = 2.0 * xi.norm() * dir.norm();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    ModeVector a(3), b(3);
    for (int k = 0; k < 3; ++k) {
      a[k] = u(rng);
      b[k] = u(rng);
    }
    EXPECT_LE((f(0.0, a) - f(0.0, b)).norm(), l * (a - b).norm() * (1.0 + 1e-9));
  }
}

TEST(StratonovichDrift, Examples) {
  const QWienerSpec w{{1.0}};
  const auto alpha = VectorField::constant(ModeVector::Constant(1, 0.3));
  std::vector<VectorField> constant{VectorField::constant(ModeVector::Constant(1, 2.0))};
  const ModeVector h = ModeVector::Constant(1, 2.0);
  EXPECT_EQ(stratonovich_drift(alpha, constant, w, 0.0, h), alpha(0.0, h));
  std::vector<VectorField> mult{VectorField::linear(Eigen::MatrixXd::Identity(1, 1))};
  EXPECT_NEAR(stratonovich_drift(alpha, mult, w, 0.0, h)[0], 0.3 - 1.0, 1e-15);
  // sqrt(lambda) scaling: the correction carries lambda.
  EXPECT_NEAR(stratonovich_drift(alpha, mult, QWienerSpec{{0.25}}, 0.0, h)[0], 0.3 - 0.25, 1e-15);
  std::vector<VectorField> custom{VectorField::custom([](double, const ModeVector& x) { return ModeVector(x); }, 1)};
  EXPECT_NEAR(stratonovich_drift(alpha, custom, w, 0.0, h)[0], 0.3 - 1.0, 1e-9);
}

TEST(TruncateLipschitz, Examples) {
  const auto f = tanh_field(2);
  const double c1 = 2.0;
  const auto g = truncate_lipschitz(f, c1);
  const ModeVector in = ModeVector::Constant(2, 1.0).normalized() * (c1 / 2.0);
  EXPECT_EQ(g(0.0, in), f(0.0, in));
  const ModeVector out = ModeVector::Constant(2, 1.0).normalized() * (c1 + 2.0);
  EXPECT_EQ(g(0.0, out), ModeVector::Zero(2));
  const ModeVector mid = ModeVector::Constant(2, 1.0).normalized() * (c1 + 0.5);
  // Quintic smooth step 10x^3 - 15x^4 + 6x^5 at x = 0.5 is 0.5.
  EXPECT_NEAR((g(0.0, mid) - 0.5 * f(0.0, mid)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(bump(c1 + 0.25, c1), 1.0 - (10 * 0.015625 - 15 * 0.00390625 + 6 * 0.0009765625), 1e-15);
  EXPECT_THROW(truncate_lipschitz(f, 0.0), ContractViolation);
}

TEST(TruncateLipschitz, GloballyBounded) {
  const auto f = VectorField::linear(Eigen::MatrixXd::Identity(2, 2) * 3.0);
  const auto g = truncate_lipschitz(f, 1.0);
  double sup_ball = 0.0, sup_all = 0.0;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> radius(0.0, 2.0);
  for (int rep = 0; rep < 2000; ++rep) {
    ModeVector h(2);
    h << n(rng), n(rng);
    const ModeVector hb = h.normalized() * radius(rng);
    sup_ball = std::max(sup_ball, g(0.0, hb).norm());
    sup_all = std::max(sup_all, g(0.0, 10.0 * h).norm());
  }
  // sup over the ball of radius c1 + 1 of |psi(|h|)| 3|h| is at most 6.
  EXPECT_LE(sup_all, 6.0);
  EXPECT_LE(sup_all, std::max(sup_ball, 6.0));
}

TEST(JumpField, EvalChecksMarkSpace) {
  const auto gamma = JumpField::mark_times(e(2, 0));
  const JumpMeasureSpec spec{1.0, DiscreteMarks{{1.0, 2.0}, {0.5, 0.5}}, std::nullopt};
  EXPECT_EQ(eval_jump(gamma, spec, 0.0, ModeVector::Zero(2), 2.0), e(2, 0, 2.0));
  EXPECT_THROW(eval_jump(gamma, spec, 0.0, ModeVector::Zero(2), 1.5), ContractViolation);
  const JumpMeasureSpec interval{1.0, UniformMarks{0.0, 1.0}, std::nullopt};
  EXPECT_THROW(eval_jump(gamma, interval, 0.0, ModeVector::Zero(2), 1.5), ContractViolation);
}

TEST(CompensatorDrift, Examples) {
  const ModeVector h = ModeVector::Random(2);
  const JumpMeasureSpec spec{2.0, DiscreteMarks{{1.0}, {1.0}}, std::nullopt};
  const JumpField zero([](double, const ModeVector&, double) { return ModeVector(ModeVector::Zero(2)); }, 2);
  EXPECT_EQ(compensator_drift(zero, spec, 0.0, h), ModeVector::Zero(2));
  const auto gamma = JumpField::mark_times(e(2, 0));
  EXPECT_EQ(compensator_drift(gamma, spec, 0.0, h), e(2, 0, 2.0));
  EXPECT_EQ(compensator_drift(gamma, spec.truncated(0), 0.0, h), ModeVector::Zero(2));
  const JumpMeasureSpec interval{3.0, UniformMarks{0.0, 2.0}, std::nullopt};
  EXPECT_NEAR((compensator_drift(gamma, interval, 0.0, h) - e(2, 0, 3.0)).norm(), 0.0, 1e-14);
}

TEST(JumpField, MarkScaledJacobian) {
  const auto f = tanh_field(2);
  const auto gamma = JumpField::mark_scaled(f);
  const ModeVector h = ModeVector::Constant(2, 0.4);
  EXPECT_LE((gamma.jacobian(0.0, h, 3.0) - 3.0 * f.jacobian(0.0, h)).norm(), 1e-15);
  const JumpField fd([f](double t, const ModeVector& x, double m) { return ModeVector(m * f(t, x)); }, 2);
  EXPECT_LE((fd.jacobian(0.0, h, 3.0) - 3.0 * f.jacobian(0.0, h)).norm(), 1e-6);
}

TEST(DelayedField, ReadsOnlyThePast) {
  PathHistory hist;
  hist.push(0.0, ModeVector::Constant(1, 1.0));
  hist.push(0.5, ModeVector::Constant(1, 2.0));
  hist.push(1.0, ModeVector::Constant(1, 3.0));
  EXPECT_EQ(hist.value_at(0.49)[0], 1.0);
  EXPECT_EQ(hist.value_at(0.5)[0], 2.0);
  EXPECT_EQ(hist.value_at(0.99)[0], 2.0);
  const DelayedField f(DelaySpec{{0.0, 0.5, 1.0}}, [](double, std::span<const ModeVector> s) {
    return ModeVector(s[0] + 10.0 * s[1] + 100.0 * s[2]);
  });
  EXPECT_EQ(f(1.0, hist)[0], 1.0 + 20.0 + 300.0);
  EXPECT_EQ(f(1.2, hist)[0], 1.0 + 20.0 + 300.0);
  EXPECT_THROW(f(0.9, hist), ContractViolation);
  EXPECT_THROW((DelaySpec{{0.5, 0.5}}.validate()), ContractViolation);
  EXPECT_THROW((DelaySpec{{0.0, 1.5}}.validate()), ContractViolation);
}

TEST(LipschitzProfile, ValuesAndIntegral) {
  const LipschitzProfile l({0.0, 1.0, 2.0}, {1.0, 2.0, 0.5});
  EXPECT_EQ(l(0.5), 1.0);
  EXPECT_EQ(l(1.0), 2.0);
  EXPECT_EQ(l(7.0), 0.5);
  EXPECT_DOUBLE_EQ(l.g(1.5), 1.0 + 4.0 * 0.5);
  EXPECT_DOUBLE_EQ(l.g(3.0), 1.0 + 4.0 + 0.25);
  EXPECT_TRUE(LipschitzProfile::constant(0.0).identically_zero());
  EXPECT_THROW(LipschitzProfile({0.0}, {-1.0}), ContractViolation);
  EXPECT_THROW(LipschitzProfile({0.5}, {1.0}), ContractViolation);
}
