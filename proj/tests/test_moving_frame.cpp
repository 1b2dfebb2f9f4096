#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mfspde/moving_frame.hpp"
#include "mfspde/schemes/euler_split.hpp"

using namespace mfspde;

namespace {

SpdeProblem ou_problem(std::vector<double> a, double c, double s) {
  SpdeProblem p;
  p.generator = DiagonalGenerator(std::move(a));
  const auto n = p.dim();
  p.drift = VectorField::constant(ModeVector::Constant(n, c));
  p.diffusion = {VectorField::constant(ModeVector::Constant(n, s))};
  p.wiener = QWienerSpec{{1.0}};
  p.r0 = ModeVector::LinSpaced(n, 1.0, 0.5);
  return p;
}

}  // namespace

TEST(FrameSde, ClampBranches) {
  const auto p = ou_problem({-1.0}, 0.0, 0.0);
  const auto f = GroupFrame::direct_inverse(p.generator);
  const FrameSde sde(f, p, 0.5);
  EXPECT_EQ(sde.clamp(0.5), 0.0);
  EXPECT_EQ(sde.clamp(1.25), 0.75);
  EXPECT_EQ(sde.clamp(0.2), 0.0);
  EXPECT_EQ(sde.clamp(-0.2), 0.0);
  EXPECT_EQ(sde.clamp(-0.75), -0.25);
  EXPECT_THROW(FrameSde(f, p, -1.0), ContractViolation);
  const auto other = GroupFrame::direct_inverse(DiagonalGenerator({-2.0}));
  EXPECT_THROW(FrameSde(other, p, 0.0), ContractViolation);
}

TEST(FrameSde, LiftAtInitialTimeIsPlainEmbedding) {
  auto p = ou_problem({-1.0, -3.0}, 0.0, 0.0);
  p.drift = VectorField::linear(Eigen::MatrixXd::Random(2, 2));
  const auto f = GroupFrame::direct_inverse(p.generator);
  const FrameSde sde(f, p, 0.3);
  const FrameVector r = embed(f, ModeVector::Random(2));
  EXPECT_EQ(sde.lifted_drift(0.3, r), embed(f, p.drift(0.3, project(f, r))));
}

TEST(FrameSde, LiftedConstantDriftDecaysInverse) {
  const auto p = ou_problem({-1.0, -3.0}, 0.7, 0.0);
  const auto f = GroupFrame::direct_inverse(p.generator);
  const double t0 = 0.2, s = 0.4;
  const FrameSde sde(f, p, t0);
  const FrameVector lifted = sde.lifted_drift(t0 + s, embed(f, ModeVector::Zero(2)));
  EXPECT_NEAR(lifted[0].real(), std::exp(1.0 * s) * 0.7, 1e-14);
  EXPECT_NEAR(lifted[1].real(), std::exp(3.0 * s) * 0.7, 1e-13);
}

TEST(FrameSde, RoundTripReproducesBaseField) {
  auto p = ou_problem({-1.0, -2.0}, 0.0, 0.0);
  p.drift = VectorField::functional_form({{TanhProfile{}, ModeVector::Ones(2), ModeVector::LinSpaced(2, 1.0, 2.0)}}, 2);
  p.diffusion = {VectorField::linear(Eigen::MatrixXd::Identity(2, 2) * 0.3)};
  p.jump = JumpField::mark_times(ModeVector::Ones(2));
  p.jumps = JumpMeasureSpec{1.0, DiscreteMarks{{2.0}, {1.0}}, std::nullopt};
  const auto f = GroupFrame::direct_inverse(p.generator);
  const FrameSde sde(f, p, 0.0);
  const FrameVector big = embed(f, ModeVector::Random(2));
  for (double t : {0.0, 0.4, 1.0}) {
    const ModeVector r = sde.state(t, big);
    EXPECT_LE((sde.state(t, sde.lifted_drift(t, big)) - p.drift(t, r)).norm(), 1e-12);
    EXPECT_LE((sde.state(t, sde.lifted_diffusion(0, t, big)) - p.scaled_diffusion(0, t, r)).norm(), 1e-12);
    EXPECT_LE((sde.state(t, sde.lifted_jump(t, big, 2.0)) - (*p.jump)(t, r, 2.0)).norm(), 1e-12);
  }
  EXPECT_THROW(sde.lifted_jump(0.0, big, 3.0), ContractViolation);
}

TEST(PushSolution, ConstantFramePathGivesSemigroupOrbit) {
  const auto p = ou_problem({-1.0, -4.0}, 0.0, 0.0);
  for (const auto& f : {GroupFrame::direct_inverse(p.generator), build_cauchy_dilation(p.generator, 2001, 1.0)}) {
    const FrameSde sde(f, p, 0.0);
    const std::vector<FrameVector> big(11, embed(f, p.r0));
    const auto r = push_solution(sde, big, 0.1);
    EXPECT_LE((r[0] - p.r0).norm(), 1e-14);
    for (std::size_t k = 0; k < r.size(); ++k)
      EXPECT_LE((r[k] - semigroup_apply(p.generator, 0.1 * static_cast<double>(k), p.r0)).norm(),
                f.kind() == FrameKind::DirectInverse ? 1e-14 : 1e-3);
  }
}

TEST(PushSolution, DirectFrameEqualsMildSplitting) {
  auto p = ou_problem({-1.0, -2.5}, 0.3, 0.5);
  p.drift = p.drift + VectorField::functional_form({{TanhProfile{}, ModeVector::Ones(2), ModeVector::Constant(2, 0.2)}}, 2);
  p.jump = JumpField::mark_scaled(VectorField::linear(Eigen::MatrixXd::Identity(2, 2) * 0.1));
  p.jumps = JumpMeasureSpec{2.0, DiscreteMarks{{1.0, 2.0}, {0.5, 0.5}}, std::nullopt};
  const auto f = GroupFrame::direct_inverse(p.generator);
  const FrameSde sde(f, p, p.t0);
  const double dt = 1.0 / 64;
  for (std::uint64_t j = 0; j < 20; ++j) {
    const auto noise = sample_trajectory_noise(p, 4, j, 64, dt);
    const auto direct = euler_path(p, noise);
    const auto pushed = push_solution(sde, frame_euler_path(sde, noise), dt);
    for (std::size_t k = 0; k < direct.size(); ++k) EXPECT_LE((pushed[k] - direct[k]).norm(), 1e-10);
  }
}

TEST(TransformLipschitz, Examples) {
  const auto l = LipschitzProfile::constant(1.0);
  // omega = 0: unchanged.
  const auto cauchy = build_cauchy_dilation(DiagonalGenerator({-1.0}), 2001, 1.0);
  const auto same = transform_lipschitz(l, cauchy, 0.0, 2.0, 0.25);
  for (double t : {0.0, 0.6, 1.9}) EXPECT_EQ(same(t), 1.0);
  // omega = 1, M = 1, t0 = 0: e^2 at t = 1.
  const auto direct = GroupFrame::direct_inverse(DiagonalGenerator({-1.0}));
  ASSERT_EQ(direct.growth_omega(), 1.0);
  const auto grown = transform_lipschitz(l, direct, 0.0, 2.0, 0.25);
  EXPECT_NEAR(grown(1.0), std::exp(2.0), 1e-12);
  // Before t0 only the norms of embed and project enter.
  const auto late = transform_lipschitz(LipschitzProfile::constant(0.7), direct, 1.0, 2.0, 0.25);
  EXPECT_EQ(late(0.5), 0.7);
  EXPECT_EQ(late(1.0), 0.7);
  EXPECT_NEAR(late(1.5), 0.7 * std::exp(1.0), 1e-12);
}

TEST(TransformLipschitz, NormsAreOne) {
  const auto d = GroupFrame::direct_inverse(DiagonalGenerator({-1.0, -2.0}));
  const auto c = build_cauchy_dilation(DiagonalGenerator({-1.0, -2.0}), 2001, 1.0);
  const ModeVector v = ModeVector::LinSpaced(2, 3.0, -4.0);
  for (const GroupFrame* f : {&d, &c}) {
    EXPECT_NEAR(frame_norm(*f, embed(*f, v)), v.norm(), 1e-12);
    EXPECT_EQ(f->embed_norm(), 1.0);
    EXPECT_EQ(f->project_norm(), 1.0);
  }
}
