#pragma once

// Noise sources: truncated Q-Wiener process, finite-activity Poisson random
// measure on a concrete mark space, counter-derived RNG streams, and Monte
// Carlo validators for the Ito isometries and the stochastic Fubini identity.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mfspde/errors.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

/// Reserved stream-index namespaces so that different consumers of one master
/// seed draw from disjoint streams.
namespace stream_namespace {
inline constexpr std::uint64_t trajectories = 0;
inline constexpr std::uint64_t cubature_branches = std::uint64_t{1} << 60;
inline constexpr std::uint64_t validators = std::uint64_t{2} << 60;
}  // namespace stream_namespace

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic random stream identified by (master_seed, stream_index).
/// Equal identifiers reproduce equal draws independent of scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_seed_(master_seed), stream_index_(stream_index) {
    const std::uint64_t a = detail::splitmix64(master_seed);
    const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(stream_index + 0x632BE59BD9B4E019ull));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  double normal() { return normal_(engine_); }
  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Retained Brownian modes of a trace-class Q-Wiener process,
/// W = sum_j sqrt(lambda_j) beta^j e_j.
struct QWienerSpec {
  std::vector<double> q_eigenvalues;

  std::size_t d() const { return q_eigenvalues.size(); }
  void validate() const {
    for (double l : q_eigenvalues)
      detail::require(l > 0.0 && std::isfinite(l), "QWienerSpec: q eigenvalues must be positive");
  }
};

/// Marks uniform on [lo, hi].
struct UniformMarks {
  double lo = 0.0;
  double hi = 1.0;
};

/// Marks from a finite set with probabilities.
struct DiscreteMarks {
  std::vector<double> atoms;
  std::vector<double> weights;
};

using MarkDistribution = std::variant<UniformMarks, DiscreteMarks>;

/// Finite-activity compensator dt (x) F(dx) with F = total_intensity * mark law.
/// The truncation B_n = { x in E : |x| <= n } is applied when
/// truncation_level is set; B_n increases to E.
struct JumpMeasureSpec {
  double total_intensity = 0.0;
  MarkDistribution marks = DiscreteMarks{{1.0}, {1.0}};
  std::optional<int> truncation_level;

  void validate() const {
    detail::require(total_intensity >= 0.0 && std::isfinite(total_intensity),
                    "JumpMeasureSpec: intensity must be finite and nonnegative");
    if (const auto* u = std::get_if<UniformMarks>(&marks)) {
      detail::require(u->lo < u->hi && std::isfinite(u->lo) && std::isfinite(u->hi),
                      "JumpMeasureSpec: uniform marks need lo < hi");
    } else {
      const auto& d = std::get<DiscreteMarks>(marks);
      detail::require(!d.atoms.empty() && d.atoms.size() == d.weights.size(),
                      "JumpMeasureSpec: discrete marks need matching atoms and weights");
      double s = 0.0;
      for (double w : d.weights) {
        detail::require(w > 0.0, "JumpMeasureSpec: mark weights must be positive");
        s += w;
      }
      detail::require(std::abs(s - 1.0) <= 1e-12, "JumpMeasureSpec: mark weights must sum to 1");
    }
    if (truncation_level) detail::require(*truncation_level >= 0, "JumpMeasureSpec: truncation level must be >= 0");
  }

  JumpMeasureSpec truncated(std::optional<int> level) const {
    JumpMeasureSpec out = *this;
    out.truncation_level = level;
    return out;
  }

  bool in_space(double x) const {
    if (const auto* u = std::get_if<UniformMarks>(&marks)) return x >= u->lo && x <= u->hi;
    const auto& d = std::get<DiscreteMarks>(marks);
    return std::find(d.atoms.begin(), d.atoms.end(), x) != d.atoms.end();
  }

  bool in_truncation(double x) const {
    return in_space(x) && (!truncation_level || std::abs(x) <= static_cast<double>(*truncation_level));
  }

  /// Bounds of B_n for uniform marks (empty when lo > hi).
  std::pair<double, double> truncated_interval() const {
    const auto& u = std::get<UniformMarks>(marks);
    if (!truncation_level) return {u.lo, u.hi};
    const double n = static_cast<double>(*truncation_level);
    return {std::max(u.lo, -n), std::min(u.hi, n)};
  }

  /// Probability of B_n under the mark law.
  double kept_mass() const {
    if (const auto* u = std::get_if<UniformMarks>(&marks)) {
      const auto [lo, hi] = truncated_interval();
      return hi > lo ? (hi - lo) / (u->hi - u->lo) : 0.0;
    }
    const auto& d = std::get<DiscreteMarks>(marks);
    double s = 0.0;
    for (std::size_t i = 0; i < d.atoms.size(); ++i)
      if (in_truncation(d.atoms[i])) s += d.weights[i];
    return s;
  }

  /// F(B_n).
  double effective_intensity() const { return total_intensity * kept_mass(); }

  /// Draw from the mark law conditioned on B_n.
  double sample_mark(RngStream& s) const {
    if (std::holds_alternative<UniformMarks>(marks)) {
      const auto [lo, hi] = truncated_interval();
      return lo + (hi - lo) * s.uniform();
    }
    const auto& d = std::get<DiscreteMarks>(marks);
    const double u = s.uniform() * kept_mass();
    double acc = 0.0;
    std::optional<double> last;
    for (std::size_t i = 0; i < d.atoms.size(); ++i) {
      if (!in_truncation(d.atoms[i])) continue;
      acc += d.weights[i];
      last = d.atoms[i];
      if (u < acc) return d.atoms[i];
    }
    if (!last) throw ContractViolation("JumpMeasureSpec: sampling from an empty truncation");
    return *last;
  }

  /// Integral of a vector-valued f over B_n against F.  Discrete marks are
  /// summed exactly; interval marks use 61-point Gauss-Kronrod with the
  /// embedded 30-point Gauss rule as error estimate.
  template <class F>
  Eigen::VectorXd integrate(F&& f, std::size_t dim, double tol = 1e-9) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    if (total_intensity == 0.0) return out;
    if (const auto* u = std::get_if<UniformMarks>(&marks)) {
      const auto [lo, hi] = truncated_interval();
      if (!(hi > lo)) return out;
      using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
      const auto& x = GK::abscissa();
      const auto& wk = GK::weights();
      const auto& wg = boost::math::quadrature::gauss<double, 30>::weights();
      const double half = 0.5 * (hi - lo);
      const double mid = 0.5 * (hi + lo);
      Eigen::VectorXd gauss = Eigen::VectorXd::Zero(out.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (int sgn : {1, -1}) {
          if (i == 0 && sgn == -1) continue;
          const Eigen::VectorXd v = f(mid + sgn * half * x[i]);
          out += wk[i] * v;
          // Gauss nodes are the odd-indexed Kronrod abscissae.
          if (i % 2 == 1) gauss += wg[i / 2] * v;
        }
      }
      const double density = total_intensity / (u->hi - u->lo);
      out *= half * density;
      gauss *= half * density;
      const double err = (out - gauss).norm();
      if (err > tol * (1.0 + out.norm()))
        throw NumericalGuardError("JumpMeasureSpec::integrate: quadrature error estimate " + std::to_string(err) +
                                  " above tolerance");
      return out;
    }
    const auto& d = std::get<DiscreteMarks>(marks);
    for (std::size_t i = 0; i < d.atoms.size(); ++i)
      if (in_truncation(d.atoms[i])) out += total_intensity * d.weights[i] * Eigen::VectorXd(f(d.atoms[i]));
    return out;
  }
};

struct Jump {
  double offset = 0.0;  ///< time offset in (0, dt]
  double mark = 0.0;
};

/// Noise over one step: increments of beta^j and the jumps of the step.
struct NoiseIncrement {
  double dt = 0.0;
  std::vector<double> brownian;
  std::vector<Jump> jumps;
};

/// brownian[j] ~ N(0, dt) i.i.d.; Poisson(F(B_n) dt) jumps at sorted uniform
/// times in (0, dt] with marks from the law on B_n.
inline NoiseIncrement sample_increment(RngStream& stream, const QWienerSpec& w, const JumpMeasureSpec& j,
                                       double dt) {
  detail::require(dt > 0.0, "sample_increment: dt must be positive");
  NoiseIncrement inc;
  inc.dt = dt;
  inc.brownian.resize(w.d());
  const double sd = std::sqrt(dt);
  for (auto& b : inc.brownian) b = sd * stream.normal();
  const double rate = j.effective_intensity();
  if (rate > 0.0) {
    const std::uint64_t count = stream.poisson(rate * dt);
    inc.jumps.resize(count);
    for (auto& jump : inc.jumps) jump.offset = dt * (1.0 - stream.uniform());
    std::sort(inc.jumps.begin(), inc.jumps.end(), [](const Jump& a, const Jump& b) { return a.offset < b.offset; });
    for (auto& jump : inc.jumps) jump.mark = j.sample_mark(stream);
  }
  return inc;
}

/// Sums consecutive increments into one coarse increment.
inline NoiseIncrement merge_increments(std::span<const NoiseIncrement> fine) {
  detail::require(!fine.empty(), "merge_increments: empty input");
  NoiseIncrement out;
  out.brownian.assign(fine.front().brownian.size(), 0.0);
  double elapsed = 0.0;
  for (const auto& f : fine) {
    for (std::size_t i = 0; i < out.brownian.size(); ++i) out.brownian[i] += f.brownian[i];
    for (const auto& j : f.jumps) out.jumps.push_back({elapsed + j.offset, j.mark});
    elapsed += f.dt;
  }
  out.dt = elapsed;
  return out;
}

/// Coarsens a fine increment sequence by an integer factor.
inline std::vector<NoiseIncrement> coarsen(std::span<const NoiseIncrement> fine, std::size_t factor) {
  detail::require(factor >= 1 && fine.size() % factor == 0, "coarsen: factor must divide the step count");
  std::vector<NoiseIncrement> out;
  out.reserve(fine.size() / factor);
  for (std::size_t i = 0; i < fine.size(); i += factor) out.push_back(merge_increments(fine.subspan(i, factor)));
  return out;
}

// ---------------------------------------------------------------------------
// Ito isometry and stochastic Fubini validators

struct IsometryReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double stderr_lhs = 0.0;
  std::size_t samples = 0;

  double gap() const { return std::abs(lhs - rhs); }
  /// |lhs - rhs| in units of the Monte Carlo standard error (0 when both vanish).
  double gap_in_stderr() const {
    if (gap() == 0.0) return 0.0;
    return stderr_lhs > 0.0 ? gap() / stderr_lhs : std::numeric_limits<double>::infinity();
  }
};

/// Deterministic step integrand for the Wiener integral: values[m] is the
/// K x d matrix (Phi e_1, ..., Phi e_d) on [grid[m], grid[m+1]).
struct WienerStepIntegrand {
  std::vector<double> grid;
  std::vector<Eigen::MatrixXd> values;
};

/// Deterministic step integrand for the compensated Poisson integral:
/// values[m](x) on [grid[m], grid[m+1]) for mark x.
struct PoissonStepIntegrand {
  std::vector<double> grid;
  std::vector<std::function<Eigen::VectorXd(double)>> values;
  std::size_t dim = 1;
};

namespace detail {

inline void require_grid(const std::vector<double>& grid, std::size_t pieces) {
  require(grid.size() == pieces + 1 && pieces > 0, "step integrand: grid/value size mismatch");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) require(grid[i] < grid[i + 1], "step integrand: grid must increase");
}

inline IsometryReport summarize(const std::vector<double>& samples, double rhs) {
  IsometryReport r;
  r.rhs = rhs;
  r.samples = samples.size();
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= static_cast<double>(samples.size() - 1);
  r.lhs = mean;
  r.stderr_lhs = std::sqrt(var / static_cast<double>(samples.size()));
  return r;
}

}  // namespace detail

/// E||int Phi dW||^2 by Monte Carlo against int ||Phi||_{L_2^0}^2 dt.
inline IsometryReport ito_isometry_check(RngStream& stream, const QWienerSpec& w, const WienerStepIntegrand& phi,
                                         std::size_t n_mc) {
  detail::require(n_mc >= 100, "ito_isometry_check: at least 100 samples required");
  detail::require_grid(phi.grid, phi.values.size());
  w.validate();
  const Eigen::VectorXd sqrt_lambda =
      Eigen::Map<const Eigen::VectorXd>(w.q_eigenvalues.data(), static_cast<Eigen::Index>(w.d())).cwiseSqrt();
  double rhs = 0.0;
  for (std::size_t m = 0; m < phi.values.size(); ++m) {
    detail::require(phi.values[m].cols() == static_cast<Eigen::Index>(w.d()), "ito_isometry_check: Phi has d columns");
    rhs += (phi.grid[m + 1] - phi.grid[m]) * (phi.values[m] * sqrt_lambda.asDiagonal()).squaredNorm();
  }
  std::vector<double> samples(n_mc);
  const Eigen::Index k = phi.values.front().rows();
  for (auto& s : samples) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
    for (std::size_t m = 0; m < phi.values.size(); ++m) {
      const double sd = std::sqrt(phi.grid[m + 1] - phi.grid[m]);
      Eigen::VectorXd db(static_cast<Eigen::Index>(w.d()));
      for (Eigen::Index j = 0; j < db.size(); ++j) db[j] = sd * stream.normal() * sqrt_lambda[j];
      acc += phi.values[m] * db;
    }
    s = acc.squaredNorm();
  }
  return detail::summarize(samples, rhs);
}

/// E||int int Phi (mu - F dt)||^2 by Monte Carlo against int int ||Phi||^2 F(dx) dt.
inline IsometryReport ito_isometry_check(RngStream& stream, const JumpMeasureSpec& spec,
                                         const PoissonStepIntegrand& phi, std::size_t n_mc) {
  detail::require(n_mc >= 100, "ito_isometry_check: at least 100 samples required");
  detail::require_grid(phi.grid, phi.values.size());
  spec.validate();
  double rhs = 0.0;
  std::vector<Eigen::VectorXd> compensator;
  for (std::size_t m = 0; m < phi.values.size(); ++m) {
    const double dt = phi.grid[m + 1] - phi.grid[m];
    const auto& f = phi.values[m];
    rhs += dt * spec.integrate([&](double x) { return Eigen::VectorXd::Constant(1, f(x).squaredNorm()); }, 1)[0];
    compensator.push_back(dt * spec.integrate(f, phi.dim));
  }
  const double rate = spec.effective_intensity();
  std::vector<double> samples(n_mc);
  for (auto& s : samples) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(phi.dim));
    for (std::size_t m = 0; m < phi.values.size(); ++m) {
      const std::uint64_t count = stream.poisson(rate * (phi.grid[m + 1] - phi.grid[m]));
      for (std::uint64_t i = 0; i < count; ++i) acc += phi.values[m](spec.sample_mark(stream));
      acc -= compensator[m];
    }
    s = acc.squaredNorm();
  }
  return detail::summarize(samples, rhs);
}

/// Separable integrand Phi(t, x, s) = K(t, x) f(s) on [0, T] x E x [0, T],
/// K a step function in t: kernel[m](x) on [t_grid[m], t_grid[m+1]).
struct SeparableIntegrand {
  std::vector<double> t_grid;
  std::vector<std::function<double(double)>> kernel;
  std::function<double(double)> f;
  /// Exact int f ds over the grid span; when set, the right-hand side uses it
  /// instead of the shared quadrature, so the gap measures quadrature error.
  std::optional<double> f_integral;
};

struct FubiniReport {
  double max_pathwise_gap = 0.0;
  /// Largest |LHS| seen, for scale.
  double max_abs_value = 0.0;
  std::size_t paths = 0;
};

/// Both sides of the stochastic Fubini identity on shared jump realizations
/// with a midpoint s-quadrature with s_nodes nodes on [0, T]:
///   LHS = int_0^T ( int int Phi(t,x,s) (mu - F)(dt,dx) ) ds
///   RHS = int int ( int_0^T Phi(t,x,s) ds ) (mu - F)(dt,dx).
inline FubiniReport fubini_check(RngStream& stream, const JumpMeasureSpec& spec, const SeparableIntegrand& phi,
                                 std::size_t s_nodes, std::size_t n_paths) {
  detail::require_grid(phi.t_grid, phi.kernel.size());
  detail::require(s_nodes >= 1 && n_paths >= 1, "fubini_check: need nodes and paths");
  spec.validate();
  const double t_end = phi.t_grid.back();
  const double h = (t_end - phi.t_grid.front()) / static_cast<double>(s_nodes);
  std::vector<double> f_nodes(s_nodes);
  double f_integral = 0.0;
  for (std::size_t j = 0; j < s_nodes; ++j) {
    f_nodes[j] = phi.f(phi.t_grid.front() + (static_cast<double>(j) + 0.5) * h);
    f_integral += h * f_nodes[j];
  }
  if (phi.f_integral) f_integral = *phi.f_integral;
  // Compensator pieces: int int K F(dx) dt per t-interval.
  std::vector<double> kernel_mass(phi.kernel.size());
  for (std::size_t m = 0; m < phi.kernel.size(); ++m) {
    const auto& k = phi.kernel[m];
    kernel_mass[m] = (phi.t_grid[m + 1] - phi.t_grid[m]) *
                     spec.integrate([&](double x) { return Eigen::VectorXd::Constant(1, k(x)); }, 1)[0];
  }
  const double rate = spec.effective_intensity();
  FubiniReport report;
  report.paths = n_paths;
  for (std::size_t p = 0; p < n_paths; ++p) {
    // One jump realization: (interval, mark) pairs.
    std::vector<std::pair<std::size_t, double>> jumps;
    for (std::size_t m = 0; m < phi.kernel.size(); ++m) {
      const std::uint64_t count = stream.poisson(rate * (phi.t_grid[m + 1] - phi.t_grid[m]));
      for (std::uint64_t i = 0; i < count; ++i) jumps.emplace_back(m, spec.sample_mark(stream));
    }
    // Stochastic integral first, at every s node.
    double lhs = 0.0;
    for (std::size_t j = 0; j < s_nodes; ++j) {
      double phi_s = 0.0;
      for (const auto& [m, x] : jumps) phi_s += phi.kernel[m](x) * f_nodes[j];
      for (std::size_t m = 0; m < phi.kernel.size(); ++m) phi_s -= kernel_mass[m] * f_nodes[j];
      lhs += h * phi_s;
    }
    // s-integral first, inside the stochastic integral.
    double rhs = 0.0;
    for (const auto& [m, x] : jumps) rhs += phi.kernel[m](x) * f_integral;
    for (std::size_t m = 0; m < phi.kernel.size(); ++m) rhs -= kernel_mass[m] * f_integral;
    report.max_pathwise_gap = std::max(report.max_pathwise_gap, std::abs(lhs - rhs));
    report.max_abs_value = std::max(report.max_abs_value, std::abs(lhs));
  }
  return report;
}

}  // namespace mfspde
