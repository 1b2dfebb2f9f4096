#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mfspde/schemes/cubature_formula.hpp"
#include "mfspde/schemes/signature.hpp"

using namespace mfspde;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Deg, Examples) {
  EXPECT_EQ(deg({1}), 1);
  EXPECT_EQ(deg({0}), 2);
  EXPECT_EQ(deg({0, 1, 0}), 5);
}

TEST(Deg, EnumerationIsCompleteAndBounded) {
  const auto all = enumerate_multi_indices(1, 3);
  // Words over {0,1} with deg <= 3: (0),(1),(0,1),(1,0),(1,1),(1,1,1).
  EXPECT_EQ(all.size(), 6u);
  for (const auto& mi : all) EXPECT_LE(deg(mi), 3);
  EXPECT_EQ(enumerate_multi_indices(2, 1).size(), 2u);
}

TEST(IteratedIntegral, Examples) {
  const auto p = PiecewiseLinearPath::straight(Eigen::VectorXd::Constant(1, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(iterated_bv_integral({0}, p), 1.0);
  for (double t : {0.5, 1.0, 3.0}) {
    const double c = 1.0 / std::sqrt(t);
    const auto q = PiecewiseLinearPath::straight(Eigen::VectorXd::Constant(1, c * t), t);
    EXPECT_NEAR(iterated_bv_integral({1, 1}, q), t / 2.0, 1e-15);
  }
  const auto f = degree3_formula(1);
  EXPECT_DOUBLE_EQ(iterated_bv_integral({1}, f.paths()[0]), -1.0);
}

TEST(IteratedIntegral, ChenMatchesFineQuadrature) {
  // A zigzag path against the Riemann-Stieltjes sum on a fine grid.
  PiecewiseLinearPath p;
  p.times = {0.0, 0.3, 0.7, 1.0};
  p.points.resize(4, 2);
  p.points << 0.0, 0.0, 0.5, -0.2, -0.4, 0.9, 0.1, 0.3;
  p.validate();
  const int n = 40000;
  auto at = [&](double s) {
    Eigen::VectorXd x(3);
    x[0] = s;
    std::size_t j = 0;
    while (j + 2 < p.times.size() && s > p.times[j + 1]) ++j;
    const double w = (s - p.times[j]) / (p.times[j + 1] - p.times[j]);
    x.tail(2) = ((1 - w) * p.points.row(static_cast<Eigen::Index>(j)) + w * p.points.row(static_cast<Eigen::Index>(j) + 1)).transpose();
    return x;
  };
  for (const MultiIndex& mi : {MultiIndex{1, 2}, MultiIndex{2, 0}, MultiIndex{1, 2, 1}}) {
    // Left-point Riemann-Stieltjes sums of the nested integrals, O(1/n).
    std::vector<double> level(mi.size() + 1, 0.0);
    level[0] = 1.0;
    Eigen::VectorXd prev = at(0.0);
    for (int i = 1; i <= n; ++i) {
      const Eigen::VectorXd cur = at(static_cast<double>(i) / n);
      const Eigen::VectorXd d = cur - prev;
      for (std::size_t k = mi.size(); k >= 1; --k) level[k] += level[k - 1] * d[mi[k - 1]];
      prev = cur;
    }
    EXPECT_NEAR(iterated_bv_integral(mi, p), level[mi.size()], 1e-3) << to_string(mi);
  }
}

TEST(StratonovichMoment, Examples) {
  EXPECT_EQ(brownian_stratonovich_moment({1}, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(brownian_stratonovich_moment({1, 1}, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(brownian_stratonovich_moment({0, 0}, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(brownian_stratonovich_moment({1, 1, 1, 1}, 2.0), 0.5);
  EXPECT_EQ(brownian_stratonovich_moment({1, 2}, 1.0), 0.0);
  EXPECT_THROW(brownian_stratonovich_moment({0, 0, 0, 0}, 1.0), ContractViolation);
}

TEST(StratonovichMoment, MonteCarloCrossCheck) {
  // E[int int o dW dW] = E[W_1^2 / 2] with 10^6 draws; the estimator has
  // standard deviation 1/sqrt(2) / 1000.
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n;
  const int m = 1000000;
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    const double w = n(rng);
    acc += 0.5 * w * w;
  }
  EXPECT_NEAR(acc / m, brownian_stratonovich_moment({1, 1}, 1.0), 4.0 * std::sqrt(0.5) / 1000.0);
}

TEST(VerifyCubature, DegreeThreeFormulasCertify) {
  for (int d : {1, 2, 3}) {
    auto f = degree3_formula(d);
    EXPECT_FALSE(f.certified());
    const auto r = f.certify();
    EXPECT_TRUE(r.certified) << "d=" << d << " worst " << to_string(r.worst_index);
    EXPECT_LE(r.worst_residual, 1e-10);
    EXPECT_TRUE(f.certified());
  }
}

TEST(VerifyCubature, DeclaredDegreeFiveFails) {
  const auto base = degree3_formula(1);
  CubatureFormula f(5, 1, base.paths(), base.weights());
  const auto r = f.certify();
  EXPECT_FALSE(r.certified);
  EXPECT_FALSE(f.certified());
  EXPECT_GE(deg(r.worst_index), 4);
  EXPECT_GT(r.worst_residual, 1e-3);
}

TEST(VerifyCubature, ScalingInvariance) {
  const auto f = degree3_formula(2);
  for (double t : {0.25, 1.0, 2.0})
    for (const auto& mi : enumerate_multi_indices(2, 3)) {
      double sum = 0.0;
      for (std::size_t l = 0; l < f.size(); ++l) sum += f.weights()[l] * iterated_bv_integral(mi, f.paths()[l].rescaled(t));
      EXPECT_NEAR(sum, brownian_stratonovich_moment(mi, t), 1e-12) << to_string(mi) << " t=" << t;
    }
}

TEST(CubatureFormula, ConstructionChecks) {
  const auto p = PiecewiseLinearPath::straight(Eigen::VectorXd::Ones(1));
  EXPECT_THROW(CubatureFormula(3, 1, {p, p}, {0.5, 0.4}), ContractViolation);
  EXPECT_THROW(CubatureFormula(1, 1, {p}, {1.0}), ContractViolation);
  auto bad = p;
  bad.points(0, 0) = 0.1;
  EXPECT_THROW(CubatureFormula(3, 1, {bad}, {1.0}), ContractViolation);
  EXPECT_THROW(CubatureFormula(3, 1, {PiecewiseLinearPath::straight(Eigen::VectorXd::Ones(1), 2.0)}, {1.0}),
               ContractViolation);
}

TEST(CubatureFile, RoundTripAndShippedFilesRegenerate) {
  for (int d : {1, 2}) {
    std::ostringstream out;
    write_cubature(out, degree3_formula(d));
    const std::string path = std::string(MFSPDE_SOURCE_DIR) + "/data/cubature/degree3_d" + std::to_string(d) + ".txt";
    EXPECT_EQ(out.str(), slurp(path)) << path;
    std::istringstream in(out.str());
    auto f = read_cubature(in);
    EXPECT_TRUE(f.certify().certified);
    EXPECT_EQ(f.size(), static_cast<std::size_t>(2 * d));
  }
}

TEST(CubatureFile, MalformedInputRejected) {
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(read_cubature(empty), ContractViolation);
  std::istringstream truncated("1 3 2\n0.5 2\n0 0\n1 1\n");
  EXPECT_THROW(read_cubature(truncated), ContractViolation);
  EXPECT_THROW(load_cubature_file("/nonexistent/formula.txt"), ContractViolation);
}
