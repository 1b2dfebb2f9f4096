#pragma once

// Finite truncation of the state space H on an orthonormal eigenbasis {e_k},
// the diagonal semigroup S_t = exp(tA), and group extensions (U_t, embed,
// project) on a dilation space with project(U_t(embed(v))) = S_t v.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mfspde/errors.hpp"

namespace mfspde {

/// State coordinates against the eigenbasis of the generator.
using ModeVector = Eigen::VectorXd;
/// Coordinates on the dilation space (complex for unitary dilations).
using FrameVector = Eigen::VectorXcd;

inline bool all_finite(const ModeVector& v) { return v.allFinite(); }

inline void require_finite(const ModeVector& v, const char* what) {
  if (!v.allFinite()) throw ContractViolation(std::string(what) + ": non-finite entry");
}

/// Diagonal generator A e_k = a_k e_k.  omega = max(0, max_k a_k) so that
/// ||S_t|| <= e^{omega t} holds exactly on the truncation.
class DiagonalGenerator {
 public:
  explicit DiagonalGenerator(std::vector<double> eigenvalues)
      : eig_(Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(),
                                               static_cast<Eigen::Index>(eigenvalues.size()))) {
    detail::require(!eigenvalues.empty(), "DiagonalGenerator: at least one mode required");
    detail::require(eig_.allFinite(), "DiagonalGenerator: eigenvalues must be finite");
    omega_ = std::max(0.0, eig_.maxCoeff());
  }

  /// Dirichlet heat equation on [0,1]: a_k = -diffusivity (pi k)^2, k = 1..modes.
  static DiagonalGenerator heat(std::size_t modes, double diffusivity = 1.0) {
    std::vector<double> a(modes);
    for (std::size_t k = 0; k < modes; ++k) {
      const double freq = std::numbers::pi * static_cast<double>(k + 1);
      a[k] = -diffusivity * freq * freq;
    }
    return DiagonalGenerator(std::move(a));
  }

  std::size_t dim() const { return static_cast<std::size_t>(eig_.size()); }
  double eigenvalue(std::size_t k) const { return eig_[static_cast<Eigen::Index>(k)]; }
  const Eigen::VectorXd& eigenvalues() const { return eig_; }
  double omega() const { return omega_; }
  double min_eigenvalue() const { return eig_.minCoeff(); }
  double max_eigenvalue() const { return eig_.maxCoeff(); }

 private:
  Eigen::VectorXd eig_;
  double omega_ = 0.0;
};

/// Per-mode factors e^{a_k t}.
inline Eigen::VectorXd semigroup_factors(const DiagonalGenerator& g, double t) {
  return (g.eigenvalues().array() * t).exp().matrix();
}

inline ModeVector semigroup_apply(const DiagonalGenerator& g, double t, const ModeVector& v) {
  if (!(t >= 0.0)) throw ContractViolation("semigroup_apply: t must be nonnegative");
  detail::require(static_cast<std::size_t>(v.size()) == g.dim(), "semigroup_apply: dimension mismatch");
  return semigroup_factors(g, t).cwiseProduct(v);
}

/// phi_1(a t) t = (e^{a t} - 1)/a per mode, i.e. the exact integral of S_s over [0, t].
inline Eigen::VectorXd semigroup_integral_factors(const DiagonalGenerator& g, double t) {
  Eigen::VectorXd out(g.eigenvalues().size());
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double a = g.eigenvalues()[k];
    const double x = a * t;
    out[k] = std::abs(x) < 1e-8 ? t * (1.0 + 0.5 * x + x * x / 6.0) : std::expm1(x) / a;
  }
  return out;
}

enum class FrameKind { DirectInverse, CauchyDilation };

/// How the dilation measure of each mode is discretized.
enum class DilationQuadrature {
  /// Cosine series of e^{-|a||t|} periodized over [-H, H]; exact on the horizon
  /// up to the truncated tail, whose mass sits on the two outermost nodes.
  PeriodizedCosine,
  /// Midpoint rule on the Cauchy quantile function, x_j = |a| tan(pi (u_j - 1/2)).
  InverseCdfMidpoint,
};

struct FrameTolerances {
  double dilation_tol = 1e-3;
  double proj_imag_tol = 1e-8;
  /// Largest |a_k t| a DirectInverse group action may exponentiate.
  double overflow_budget = 60.0;
};

struct DilationNode {
  double node = 0.0;
  double weight = 1.0;
};

/// Realization of a C0-group (U_t) on the dilation space with embedding and
/// projection.  The dilation space carries the weighted inner product
/// <R, S> = sum_j w_j R_j conj(S_j), so embed is an isometry, project is its
/// adjoint and U_t is unitary for CauchyDilation frames.
class GroupFrame {
 public:
  static GroupFrame direct_inverse(DiagonalGenerator g, FrameTolerances tol = {}) {
    GroupFrame f(FrameKind::DirectInverse, std::move(g), tol);
    const std::size_t k = f.generator_.dim();
    for (std::size_t m = 0; m < k; ++m) {
      f.offsets_.push_back(m);
      f.coord_mode_.push_back(m);
      f.coord_node_.push_back(0.0);
      f.coord_weight_.push_back(1.0);
    }
    f.offsets_.push_back(k);
    return f;
  }

  /// Assembles a dilation frame from per-mode node lists (weights must be
  /// positive and sum to one per mode).
  static GroupFrame dilation(DiagonalGenerator g, const std::vector<std::vector<DilationNode>>& nodes,
                             double horizon, FrameTolerances tol = {}) {
    detail::require(nodes.size() == g.dim(), "GroupFrame: one node list per mode required");
    GroupFrame f(FrameKind::CauchyDilation, std::move(g), tol);
    f.horizon_ = horizon;
    std::size_t offset = 0;
    for (std::size_t m = 0; m < nodes.size(); ++m) {
      detail::require(!nodes[m].empty(), "GroupFrame: empty node list");
      double sum = 0.0;
      f.offsets_.push_back(offset);
      for (const auto& n : nodes[m]) {
        detail::require(n.weight > 0.0 && std::isfinite(n.node), "GroupFrame: invalid dilation node");
        f.coord_mode_.push_back(m);
        f.coord_node_.push_back(n.node);
        f.coord_weight_.push_back(n.weight);
        sum += n.weight;
      }
      detail::require(std::abs(sum - 1.0) <= 1e-12, "GroupFrame: dilation weights must sum to 1");
      offset += nodes[m].size();
    }
    f.offsets_.push_back(offset);
    return f;
  }

  FrameKind kind() const { return kind_; }
  const DiagonalGenerator& generator() const { return generator_; }
  const FrameTolerances& tolerances() const { return tol_; }
  std::size_t dim() const { return generator_.dim(); }
  std::size_t dilation_dim() const { return coord_mode_.size(); }
  /// Horizon on which a dilation was certified (infinite for DirectInverse).
  double horizon() const { return horizon_; }

  std::size_t mode_begin(std::size_t mode) const { return offsets_[mode]; }
  std::size_t mode_end(std::size_t mode) const { return offsets_[mode + 1]; }
  std::size_t coord_mode(std::size_t j) const { return coord_mode_[j]; }
  double coord_node(std::size_t j) const { return coord_node_[j]; }
  double coord_weight(std::size_t j) const { return coord_weight_[j]; }

  std::vector<DilationNode> nodes(std::size_t mode) const {
    std::vector<DilationNode> out;
    for (std::size_t j = mode_begin(mode); j < mode_end(mode); ++j)
      out.push_back({coord_node_[j], coord_weight_[j]});
    return out;
  }

  /// Constants of ||U_t|| <= M e^{omega |t|}.
  double growth_m() const { return 1.0; }
  double growth_omega() const {
    if (kind_ == FrameKind::CauchyDilation) return 0.0;
    return generator_.eigenvalues().cwiseAbs().maxCoeff();
  }
  /// ||embed|| and ||project|| in the weighted dilation norm.
  double embed_norm() const { return 1.0; }
  double project_norm() const { return 1.0; }

 private:
  GroupFrame(FrameKind kind, DiagonalGenerator g, FrameTolerances tol)
      : kind_(kind), generator_(std::move(g)), tol_(tol) {}

  FrameKind kind_;
  DiagonalGenerator generator_;
  FrameTolerances tol_;
  double horizon_ = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> coord_mode_;
  std::vector<double> coord_node_;
  std::vector<double> coord_weight_;
};

/// Weighted norm of the dilation space.
inline double frame_norm(const GroupFrame& f, const FrameVector& r) {
  double s = 0.0;
  for (std::size_t j = 0; j < f.dilation_dim(); ++j) s += f.coord_weight(j) * std::norm(r[static_cast<Eigen::Index>(j)]);
  return std::sqrt(s);
}

/// Per-coordinate multipliers of U_t.
inline Eigen::VectorXcd group_factors(const GroupFrame& f, double t) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(f.dilation_dim()));
  if (f.kind() == FrameKind::DirectInverse) {
    const auto& a = f.generator().eigenvalues();
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      const double x = a[k] * t;
      if (std::abs(x) > f.tolerances().overflow_budget)
        throw NumericalGuardError("group_apply: |a_k t| = " + std::to_string(std::abs(x)) +
                                  " exceeds overflow budget " +
                                  std::to_string(f.tolerances().overflow_budget) + " (mode " +
                                  std::to_string(k) + ")");
      out[k] = std::exp(x);
    }
    return out;
  }
  for (std::size_t j = 0; j < f.dilation_dim(); ++j) {
    const double phase = f.coord_node(j) * t;
    out[static_cast<Eigen::Index>(j)] = {std::cos(phase), std::sin(phase)};
  }
  return out;
}

inline FrameVector group_apply(const GroupFrame& f, double t, const FrameVector& r) {
  detail::require(static_cast<std::size_t>(r.size()) == f.dilation_dim(), "group_apply: dimension mismatch");
  return group_factors(f, t).cwiseProduct(r);
}

inline FrameVector embed(const GroupFrame& f, const ModeVector& v) {
  detail::require(static_cast<std::size_t>(v.size()) == f.dim(), "embed: dimension mismatch");
  FrameVector out(static_cast<Eigen::Index>(f.dilation_dim()));
  for (std::size_t j = 0; j < f.dilation_dim(); ++j)
    out[static_cast<Eigen::Index>(j)] = v[static_cast<Eigen::Index>(f.coord_mode(j))];
  return out;
}

inline ModeVector project(const GroupFrame& f, const FrameVector& r) {
  detail::require(static_cast<std::size_t>(r.size()) == f.dilation_dim(), "project: dimension mismatch");
  ModeVector out = ModeVector::Zero(static_cast<Eigen::Index>(f.dim()));
  if (f.kind() == FrameKind::DirectInverse) {
    for (Eigen::Index k = 0; k < out.size(); ++k) {
      if (r[k].imag() != 0.0 && std::abs(r[k].imag()) > f.tolerances().proj_imag_tol)
        throw DilationBreakdown("project: imaginary residual on a DirectInverse frame");
      out[k] = r[k].real();
    }
    return out;
  }
  for (std::size_t m = 0; m < f.dim(); ++m) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = f.mode_begin(m); j < f.mode_end(m); ++j)
      acc += f.coord_weight(j) * r[static_cast<Eigen::Index>(j)];
    const double scale = std::max(1.0, std::abs(acc.real()));
    if (std::abs(acc.imag()) > f.tolerances().proj_imag_tol * scale)
      throw DilationBreakdown("project: imaginary residual " + std::to_string(acc.imag()) + " on mode " +
                              std::to_string(m) + " exceeds proj_imag_tol");
    out[static_cast<Eigen::Index>(m)] = acc.real();
  }
  return out;
}

/// Characteristic function sum_j w_j exp(i x_j t) of a node list.
inline std::complex<double> dilation_characteristic(std::span<const DilationNode> nodes, double t) {
  std::complex<double> acc = 0.0;
  for (const auto& n : nodes) acc += n.weight * std::complex<double>(std::cos(n.node * t), std::sin(n.node * t));
  return acc;
}

namespace detail {

inline std::vector<DilationNode> periodized_cosine_nodes(double rate, std::size_t count, double horizon) {
  // e^{-rate |t|} on [-H, H] extended 2H-periodically has Fourier coefficients
  // c_k = rate (1 - e^{-rate H} (-1)^k) / (rate^2 H + pi^2 k^2 / H) > 0.
  const std::size_t kmax = (count - 1) / 2;
  const double decay = std::exp(-rate * horizon);
  std::vector<double> c(kmax + 1);
  c[0] = -std::expm1(-rate * horizon) / (rate * horizon);
  double total = c[0];
  for (std::size_t k = 1; k <= kmax; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const double pk = std::numbers::pi * static_cast<double>(k);
    c[k] = rate * (1.0 - decay * sign) / (rate * rate * horizon + pk * pk / horizon);
    total += 2.0 * c[k];
  }
  std::vector<DilationNode> nodes;
  nodes.reserve(2 * kmax + 1);
  for (std::size_t i = kmax; i >= 1; --i)
    nodes.push_back({-std::numbers::pi * static_cast<double>(i) / horizon, c[i]});
  nodes.push_back({0.0, c[0]});
  for (std::size_t i = 1; i <= kmax; ++i) nodes.push_back({std::numbers::pi * static_cast<double>(i) / horizon, c[i]});
  if (kmax > 0) {
    const double tail = 1.0 - total;
    nodes.front().weight += 0.5 * tail;
    nodes.back().weight += 0.5 * tail;
  } else {
    nodes.front().weight = 1.0;
  }
  return nodes;
}

inline std::vector<DilationNode> inverse_cdf_nodes(double rate, std::size_t count) {
  std::vector<DilationNode> nodes(count);
  const double w = 1.0 / static_cast<double>(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double u = (static_cast<double>(j) + 0.5) * w;
    nodes[j] = {rate * std::tan(std::numbers::pi * (u - 0.5)), w};
  }
  // u_j and u_{n-1-j} are mirror images; force exact antisymmetry.
  for (std::size_t j = 0; j < count / 2; ++j) nodes[count - 1 - j].node = -nodes[j].node;
  if (count % 2 == 1) nodes[count / 2].node = 0.0;
  return nodes;
}

}  // namespace detail

/// Unitary dilation of a self-adjoint contraction semigroup (all a_k <= 0).
/// Each mode with a_k < 0 gets a discrete symmetric probability measure whose
/// characteristic function matches e^{a_k |t|} within dilation_tol for
/// |t| <= horizon; modes with a_k == 0 get the single node 0.  The accuracy
/// is checked on a dense grid and a failure names the worst t.
inline GroupFrame build_cauchy_dilation(const DiagonalGenerator& g, std::size_t nodes_per_mode, double horizon,
                                        FrameTolerances tol = {},
                                        DilationQuadrature quadrature = DilationQuadrature::PeriodizedCosine) {
  detail::require(nodes_per_mode >= 1, "build_cauchy_dilation: nodes_per_mode must be positive");
  detail::require(horizon > 0.0 && std::isfinite(horizon), "build_cauchy_dilation: horizon must be positive");
  if (g.max_eigenvalue() > 0.0)
    throw ContractViolation(
        "build_cauchy_dilation: generator has a positive eigenvalue; shift the drift first "
        "(see drift_shifted) so that all a_k <= 0");
  std::vector<std::vector<DilationNode>> all(g.dim());
  for (std::size_t m = 0; m < g.dim(); ++m) {
    const double a = g.eigenvalue(m);
    if (a == 0.0) {
      all[m] = {{0.0, 1.0}};
      continue;
    }
    const double rate = -a;
    all[m] = quadrature == DilationQuadrature::PeriodizedCosine
                 ? detail::periodized_cosine_nodes(rate, nodes_per_mode, horizon)
                 : detail::inverse_cdf_nodes(rate, nodes_per_mode);
    const std::size_t checks = 4 * nodes_per_mode + 1;
    double worst = 0.0;
    double worst_t = 0.0;
    for (std::size_t i = 0; i < checks; ++i) {
      const double t = horizon * static_cast<double>(i) / static_cast<double>(checks - 1);
      double re = 0.0;
      for (const auto& n : all[m]) re += n.weight * std::cos(n.node * t);
      const double err = std::abs(re - std::exp(a * t));
      if (err > worst) {
        worst = err;
        worst_t = t;
      }
    }
    if (worst > tol.dilation_tol)
      throw NumericalGuardError("build_cauchy_dilation: mode " + std::to_string(m) + " (a=" + std::to_string(a) +
                                ") misses dilation_tol at t=" + std::to_string(worst_t) +
                                " with error " + std::to_string(worst) + "; increase nodes_per_mode");
  }
  return GroupFrame::dilation(g, all, horizon, tol);
}

}  // namespace mfspde
