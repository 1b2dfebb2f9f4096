#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mfspde/spectral_space.hpp"

using namespace mfspde;

namespace {

ModeVector vec(std::initializer_list<double> xs) {
  ModeVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(DiagonalGenerator, OmegaIsPositivePartOfTopEigenvalue) {
  EXPECT_EQ(DiagonalGenerator({-1.0, -3.0}).omega(), 0.0);
  EXPECT_EQ(DiagonalGenerator({-1.0, 2.5}).omega(), 2.5);
  EXPECT_THROW(DiagonalGenerator(std::vector<double>{}), ContractViolation);
  EXPECT_THROW(DiagonalGenerator({NAN}), ContractViolation);
}

TEST(DiagonalGenerator, HeatEigenvalues) {
  const auto g = DiagonalGenerator::heat(3);
  EXPECT_NEAR(g.eigenvalue(0), -std::numbers::pi * std::numbers::pi, 1e-12);
  EXPECT_NEAR(g.eigenvalue(2), -9.0 * std::numbers::pi * std::numbers::pi, 1e-12);
}

TEST(SemigroupApply, Examples) {
  const DiagonalGenerator g({-1.0});
  EXPECT_EQ(semigroup_apply(g, 0.0, vec({3.0}))[0], 3.0);
  EXPECT_NEAR(semigroup_apply(g, 1.0, vec({1.0}))[0], 0.36787944, 1e-8);
  const auto v = semigroup_apply(DiagonalGenerator({0.0, -2.0}), 0.5, vec({1.0, 1.0}));
  EXPECT_EQ(v[0], 1.0);
  EXPECT_NEAR(v[1], std::exp(-1.0), 1e-15);
}

TEST(SemigroupApply, NegativeTimeRejected) {
  EXPECT_THROW(semigroup_apply(DiagonalGenerator({-1.0}), -0.1, vec({1.0})), ContractViolation);
}

TEST(SemigroupApply, SemigroupLawAndGrowthBound) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  const DiagonalGenerator g({-3.0, -0.5, 0.7});
  const ModeVector v = vec({1.0, -2.0, 0.5});
  for (int rep = 0; rep < 50; ++rep) {
    const double t = u(rng), s = u(rng);
    const ModeVector lhs = semigroup_apply(g, t + s, v);
    const ModeVector rhs = semigroup_apply(g, t, semigroup_apply(g, s, v));
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * (1.0 + lhs.norm()));
    EXPECT_LE(lhs.norm(), std::exp(g.omega() * (t + s)) * v.norm() * (1.0 + 1e-12));
  }
}

TEST(SemigroupIntegralFactors, MatchesClosedFormAndZeroLimit) {
  const DiagonalGenerator g({-2.0, 0.0, 1e-12});
  const auto f = semigroup_integral_factors(g, 0.3);
  EXPECT_NEAR(f[0], (1.0 - std::exp(-0.6)) / 2.0, 1e-15);
  EXPECT_NEAR(f[1], 0.3, 1e-15);
  EXPECT_NEAR(f[2], 0.3, 1e-12);
}

TEST(GroupFrame, DirectInverseGroupProperty) {
  const auto f = GroupFrame::direct_inverse(DiagonalGenerator({-1.0}));
  const FrameVector r = embed(f, vec({2.5}));
  const FrameVector back = group_apply(f, 1.0, group_apply(f, -1.0, r));
  EXPECT_LE((back - r).norm(), 1e-12);
  EXPECT_EQ(f.dilation_dim(), 1u);
}

TEST(GroupFrame, DirectInverseOverflowGuard) {
  const auto f = GroupFrame::direct_inverse(DiagonalGenerator({-100.0}));
  const FrameVector r = embed(f, vec({1.0}));
  EXPECT_NO_THROW(group_apply(f, 0.5, r));
  EXPECT_THROW(group_apply(f, -0.7, r), NumericalGuardError);
}

TEST(GroupFrame, GroupLawBothKinds) {
  const DiagonalGenerator g({-1.0, -4.0});
  const auto direct = GroupFrame::direct_inverse(g);
  const auto cauchy = build_cauchy_dilation(g, 2001, 1.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const GroupFrame* f : {&direct, &cauchy}) {
    FrameVector r(static_cast<Eigen::Index>(f->dilation_dim()));
    for (Eigen::Index j = 0; j < r.size(); ++j) r[j] = {u(rng), u(rng)};
    for (int rep = 0; rep < 10; ++rep) {
      const double t = u(rng), s = u(rng);
      const FrameVector a = group_apply(*f, t + s, r);
      const FrameVector b = group_apply(*f, t, group_apply(*f, s, r));
      // Per coordinate, rounding of the phase x t grows with |x t|.
      double phase = 0.0;
      for (std::size_t j = 0; j < f->dilation_dim(); ++j)
        phase = std::max(phase, std::abs(f->coord_node(j)) * (std::abs(t) + std::abs(s)));
      EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + phase) * r.cwiseAbs().maxCoeff());
    }
  }
}

TEST(GroupFrame, ProjectEmbedIsIdentity) {
  const DiagonalGenerator g({-1.0, -2.0, 0.0});
  const ModeVector v = vec({0.3, -1.2, 4.0});
  const auto direct = GroupFrame::direct_inverse(g);
  EXPECT_EQ(project(direct, embed(direct, v)), v);
  const auto cauchy = build_cauchy_dilation(g, 2001, 1.0);
  EXPECT_LE((project(cauchy, embed(cauchy, v)) - v).norm(), 1e-12);
}

TEST(GroupFrame, CauchyEmbedIsConstantAcrossNodes) {
  const auto f = build_cauchy_dilation(DiagonalGenerator({-2.0}), 2001, 1.0);
  const FrameVector r = embed(f, vec({1.0}));
  for (Eigen::Index j = 0; j < r.size(); ++j) EXPECT_EQ(r[j], std::complex<double>(1.0, 0.0));
}

TEST(GroupFrame, CauchyProjectionReproducesSemigroup) {
  const auto f = build_cauchy_dilation(DiagonalGenerator({-2.0}), 2001, 1.0);
  const ModeVector out = project(f, group_apply(f, 1.0, embed(f, vec({1.0}))));
  EXPECT_NEAR(out[0], std::exp(-2.0), f.tolerances().dilation_tol);

  const auto g1 = build_cauchy_dilation(DiagonalGenerator({-1.0}), 2001, 1.0);
  const ModeVector out1 = project(g1, group_apply(g1, 0.7, embed(g1, vec({1.0}))));
  EXPECT_NEAR(out1[0], std::exp(-0.7), 1e-3);
}

TEST(GroupFrame, CauchyIsUnitary) {
  const auto f = build_cauchy_dilation(DiagonalGenerator({-1.0, -4.0}), 2001, 1.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  FrameVector r(static_cast<Eigen::Index>(f.dilation_dim()));
  for (Eigen::Index j = 0; j < r.size(); ++j) r[j] = {n(rng), n(rng)};
  for (double t : {-3.0, -0.2, 0.5, 10.0}) {
    EXPECT_NEAR(frame_norm(f, group_apply(f, t, r)), frame_norm(f, r), 1e-12 * frame_norm(f, r));
    EXPECT_NEAR(group_apply(f, t, r).norm(), r.norm(), 1e-12 * r.norm());
  }
}

TEST(GroupFrame, DilationConsistencyRandomized) {
  const DiagonalGenerator g({-1.0, -4.0, -0.3});
  const auto f = build_cauchy_dilation(g, 2001, 1.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 40; ++rep) {
    ModeVector v(3);
    for (Eigen::Index k = 0; k < 3; ++k) v[k] = n(rng);
    v.normalize();
    const double t = u(rng);
    const ModeVector diff = project(f, group_apply(f, t, embed(f, v))) - semigroup_apply(g, t, v);
    EXPECT_LE(diff.norm(), 1e-3);
  }
}

TEST(GroupFrame, ImaginaryResidualIsBreakdown) {
  const auto f = build_cauchy_dilation(DiagonalGenerator({-1.0}), 11, 1.0, {.dilation_tol = 0.5});
  FrameVector r = embed(f, vec({1.0}));
  r[0] = {1.0, 1.0};
  EXPECT_THROW(project(f, r), DilationBreakdown);
  const auto d = GroupFrame::direct_inverse(DiagonalGenerator({-1.0}));
  FrameVector q(1);
  q[0] = {1.0, 1e-3};
  EXPECT_THROW(project(d, q), DilationBreakdown);
}

TEST(BuildCauchyDilation, ExamplesAndSymmetry) {
  const auto f = build_cauchy_dilation(DiagonalGenerator({-1.0}), 2001, 1.0);
  const auto nodes = f.nodes(0);
  EXPECT_NEAR(dilation_characteristic(nodes, 1.0).real(), std::exp(-1.0), 1e-3);
  double total = 0.0;
  for (const auto& n : nodes) total += n.weight;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(dilation_characteristic(nodes, 0.0).real(), 1.0, 1e-12);
  for (double t : {0.1, 0.45, 0.9}) {
    const auto a = dilation_characteristic(nodes, t);
    const auto b = dilation_characteristic(nodes, -t);
    EXPECT_NEAR(a.real(), b.real(), 1e-12);
    EXPECT_NEAR(a.imag(), 0.0, 1e-12);
  }
}

TEST(BuildCauchyDilation, AccurateOnHorizonForBothRates) {
  const auto f = build_cauchy_dilation(DiagonalGenerator({-1.0, -4.0}), 2001, 1.0);
  for (std::size_t m = 0; m < 2; ++m) {
    const auto nodes = f.nodes(m);
    double worst = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double t = i / 1000.0;
      worst = std::max(worst, std::abs(dilation_characteristic(nodes, t).real() -
                                       std::exp(f.generator().eigenvalue(m) * t)));
    }
    EXPECT_LE(worst, 1e-3) << "mode " << m;
  }
}

TEST(BuildCauchyDilation, InverseCdfMidpointReportsWorstTime) {
  try {
    build_cauchy_dilation(DiagonalGenerator({-1.0}), 2001, 1.0, {}, DilationQuadrature::InverseCdfMidpoint);
    FAIL() << "expected a numerical guard";
  } catch (const NumericalGuardError& e) {
    EXPECT_NE(std::string(e.what()).find("at t="), std::string::npos);
  }
  // With a loose tolerance the midpoint rule is accepted and symmetric.
  const auto f = build_cauchy_dilation(DiagonalGenerator({-1.0}), 2001, 1.0, {.dilation_tol = 1e-2},
                                       DilationQuadrature::InverseCdfMidpoint);
  EXPECT_NEAR(dilation_characteristic(f.nodes(0), 1.0).real(), std::exp(-1.0), 1e-2);
}

TEST(BuildCauchyDilation, RejectsPositiveEigenvaluesAndHandlesZeroModes) {
  EXPECT_THROW(build_cauchy_dilation(DiagonalGenerator({-1.0, 0.5}), 101, 1.0), ContractViolation);
  const auto f = build_cauchy_dilation(DiagonalGenerator({0.0, -1.0}), 2001, 1.0);
  EXPECT_EQ(f.mode_end(0) - f.mode_begin(0), 1u);
  EXPECT_EQ(f.coord_node(0), 0.0);
}

TEST(BuildCauchyDilation, TooFewNodesFails) {
  EXPECT_THROW(build_cauchy_dilation(DiagonalGenerator({-4.0}), 5, 1.0), NumericalGuardError);
}

TEST(GroupFrame, GrowthConstants) {
  const DiagonalGenerator g({-1.0, -4.0});
  const auto d = GroupFrame::direct_inverse(g);
  EXPECT_EQ(d.growth_m(), 1.0);
  EXPECT_EQ(d.growth_omega(), 4.0);
  const FrameVector r = embed(d, vec({1.0, 1.0}));
  for (double t : {-1.0, 0.5})
    EXPECT_LE(group_apply(d, t, r).norm(), d.growth_m() * std::exp(d.growth_omega() * std::abs(t)) * r.norm());
  const auto c = build_cauchy_dilation(g, 2001, 1.0);
  EXPECT_EQ(c.growth_omega(), 0.0);
  EXPECT_EQ(c.embed_norm(), 1.0);
  EXPECT_EQ(c.project_norm(), 1.0);
}
