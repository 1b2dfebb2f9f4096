#pragma once

// Coefficient fields alpha, sigma_i, gamma of the SPDE, delayed drift, Lipschitz
// profiles and the smooth bump truncation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde {

enum class FieldKind { Constant, Linear, FunctionalForm, Custom };

/// Quintic smooth step 0 -> 1 on [0, 1], C^2 at both ends.
inline double smoothstep5(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

inline double smoothstep5_derivative(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return 30.0 * x * x * (1.0 - x) * (1.0 - x);
}

/// Taper equal to 1 on [0, c1], 0 on [c1 + 1, inf).
inline double bump(double r, double c1) { return 1.0 - smoothstep5(r - c1); }
inline double bump_derivative(double r, double c1) { return -smoothstep5_derivative(r - c1); }

/// tanh(gain * u)
struct TanhProfile {
  double gain = 1.0;
};

/// (sum_k coeffs[k] u^k) * bump(|u|, radius): polynomial with compact support.
struct CutoffPolynomialProfile {
  std::vector<double> coeffs;
  double radius = 1.0;
};

using ScalarProfile = std::variant<TanhProfile, CutoffPolynomialProfile>;

inline std::pair<double, double> profile_value_and_slope(const ScalarProfile& p, double u) {
  if (const auto* t = std::get_if<TanhProfile>(&p)) {
    const double th = std::tanh(t->gain * u);
    return {th, t->gain * (1.0 - th * th)};
  }
  const auto& c = std::get<CutoffPolynomialProfile>(p);
  double poly = 0.0;
  double dpoly = 0.0;
  for (std::size_t k = c.coeffs.size(); k-- > 0;) {
    dpoly = dpoly * u + poly;
    poly = poly * u + c.coeffs[k];
  }
  const double a = std::abs(u);
  const double b = bump(a, c.radius);
  const double db = bump_derivative(a, c.radius) * (u < 0.0 ? -1.0 : 1.0);
  return {poly * b, dpoly * b + poly * db};
}

/// One ridge term profile(<xi, h>) * direction.
struct Ridge {
  ScalarProfile profile;
  ModeVector xi;
  ModeVector direction;
};

/// Vector field H -> H on the truncated mode space, possibly time dependent.
/// Jacobians are analytic for Constant, Linear and FunctionalForm fields and
/// central finite differences otherwise.
class VectorField {
 public:
  using Eval = std::function<ModeVector(double, const ModeVector&)>;
  using Jacobian = std::function<Eigen::MatrixXd(double, const ModeVector&)>;

  VectorField() = default;

  static VectorField constant(ModeVector c) {
    require_finite(c, "VectorField::constant");
    const auto n = c.size();
    VectorField f(FieldKind::Constant, n);
    f.eval_ = [c = std::move(c)](double, const ModeVector&) { return c; };
    f.jac_ = [n](double, const ModeVector&) { return Eigen::MatrixXd::Zero(n, n).eval(); };
    return f;
  }

  static VectorField zero(Eigen::Index n) { return constant(ModeVector::Zero(n)); }

  static VectorField linear(Eigen::MatrixXd b) {
    detail::require(b.rows() == b.cols(), "VectorField::linear: matrix must be square");
    detail::require(b.allFinite(), "VectorField::linear: matrix must be finite");
    VectorField f(FieldKind::Linear, b.rows());
    auto shared = std::make_shared<const Eigen::MatrixXd>(std::move(b));
    f.eval_ = [shared](double, const ModeVector& h) { return ModeVector(*shared * h); };
    f.jac_ = [shared](double, const ModeVector&) { return *shared; };
    return f;
  }

  static VectorField functional_form(std::vector<Ridge> ridges, Eigen::Index n) {
    for (const auto& r : ridges)
      detail::require(r.xi.size() == n && r.direction.size() == n,
                      "VectorField::functional_form: ridge vectors must match the mode dimension");
    VectorField f(FieldKind::FunctionalForm, n);
    auto shared = std::make_shared<const std::vector<Ridge>>(std::move(ridges));
    f.eval_ = [shared, n](double, const ModeVector& h) {
      ModeVector out = ModeVector::Zero(n);
      for (const auto& r : *shared) out += profile_value_and_slope(r.profile, r.xi.dot(h)).first * r.direction;
      return out;
    };
    f.jac_ = [shared, n](double, const ModeVector& h) {
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
      for (const auto& r : *shared)
        j += profile_value_and_slope(r.profile, r.xi.dot(h)).second * r.direction * r.xi.transpose();
      return j;
    };
    return f;
  }

  /// Arbitrary closure; the Jacobian may be omitted.
  static VectorField custom(Eval eval, Eigen::Index n, Jacobian jac = {}) {
    detail::require(static_cast<bool>(eval), "VectorField::custom: empty closure");
    VectorField f(FieldKind::Custom, n);
    f.eval_ = std::move(eval);
    f.jac_ = std::move(jac);
    return f;
  }

  FieldKind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }
  explicit operator bool() const { return static_cast<bool>(eval_); }

  ModeVector operator()(double t, const ModeVector& h) const {
    detail::require(h.size() == dim_, "VectorField: state dimension mismatch");
    return eval_(t, h);
  }

  Eigen::MatrixXd jacobian(double t, const ModeVector& h) const {
    if (jac_) return jac_(t, h);
    return fd_jacobian(t, h);
  }

  /// Central finite-difference Jacobian, step cbrt(eps) (1 + ||h||).
  Eigen::MatrixXd fd_jacobian(double t, const ModeVector& h) const {
    const double step = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + h.norm());
    Eigen::MatrixXd j(dim_, dim_);
    ModeVector hp = h;
    ModeVector hm = h;
    for (Eigen::Index k = 0; k < dim_; ++k) {
      hp[k] = h[k] + step;
      hm[k] = h[k] - step;
      j.col(k) = ((*this)(t, hp) - (*this)(t, hm)) / (2.0 * step);
      hp[k] = h[k];
      hm[k] = h[k];
    }
    return j;
  }

  /// D F(h) v
  ModeVector directional_derivative(double t, const ModeVector& h, const ModeVector& v) const {
    detail::require(v.size() == dim_, "VectorField: direction dimension mismatch");
    return jacobian(t, h) * v;
  }

  VectorField scaled(double s) const {
    VectorField f(kind_ == FieldKind::Custom ? FieldKind::Custom : kind_, dim_);
    f.eval_ = [e = eval_, s](double t, const ModeVector& h) { return ModeVector(s * e(t, h)); };
    if (jac_) f.jac_ = [j = jac_, s](double t, const ModeVector& h) { return Eigen::MatrixXd(s * j(t, h)); };
    else f.jac_ = [self = *this, s](double t, const ModeVector& h) { return Eigen::MatrixXd(s * self.fd_jacobian(t, h)); };
    return f;
  }

  friend VectorField operator+(const VectorField& a, const VectorField& b) {
    detail::require(a.dim_ == b.dim_, "VectorField: sum of fields of different dimension");
    VectorField f(a.kind_ == b.kind_ ? a.kind_ : FieldKind::Custom, a.dim_);
    f.eval_ = [ea = a.eval_, eb = b.eval_](double t, const ModeVector& h) { return ModeVector(ea(t, h) + eb(t, h)); };
    f.jac_ = [a, b](double t, const ModeVector& h) { return Eigen::MatrixXd(a.jacobian(t, h) + b.jacobian(t, h)); };
    return f;
  }

 private:
  VectorField(FieldKind kind, Eigen::Index n) : kind_(kind), dim_(n) {}

  FieldKind kind_ = FieldKind::Custom;
  Eigen::Index dim_ = 0;
  Eval eval_;
  Jacobian jac_;
};

/// h -> bump(||h||, c1) F(h): agrees with F on the ball of radius c1 and
/// vanishes outside radius c1 + 1.
inline VectorField truncate_lipschitz(const VectorField& field, double c1) {
  detail::require(c1 > 0.0 && std::isfinite(c1), "truncate_lipschitz: radius must be positive");
  const auto n = field.dim();
  return VectorField::custom(
      [field, c1](double t, const ModeVector& h) {
        const double psi = bump(h.norm(), c1);
        if (psi == 0.0) return ModeVector(ModeVector::Zero(h.size()));
        return ModeVector(psi * field(t, h));
      },
      n,
      [field, c1](double t, const ModeVector& h) {
        const double r = h.norm();
        const double psi = bump(r, c1);
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(h.size(), h.size());
        if (psi != 0.0) j += psi * field.jacobian(t, h);
        const double dpsi = bump_derivative(r, c1);
        if (dpsi != 0.0 && r > 0.0) j += dpsi * field(t, h) * (h / r).transpose();
        return j;
      });
}

/// Jump coefficient gamma(t, h, x).
class JumpField {
 public:
  using Eval = std::function<ModeVector(double, const ModeVector&, double)>;
  using Jacobian = std::function<Eigen::MatrixXd(double, const ModeVector&, double)>;

  JumpField() = default;
  JumpField(Eval eval, Eigen::Index n, Jacobian jac = {}) : dim_(n), eval_(std::move(eval)), jac_(std::move(jac)) {
    detail::require(static_cast<bool>(eval_), "JumpField: empty closure");
  }

  /// gamma(h, x) = x * direction
  static JumpField mark_times(ModeVector direction) {
    const auto n = direction.size();
    return JumpField([d = std::move(direction)](double, const ModeVector&, double x) { return ModeVector(x * d); }, n,
                     [n](double, const ModeVector&, double) { return Eigen::MatrixXd::Zero(n, n).eval(); });
  }

  /// gamma(h, x) = x * F(h)
  static JumpField mark_scaled(VectorField f) {
    const auto n = f.dim();
    return JumpField([f](double t, const ModeVector& h, double x) { return ModeVector(x * f(t, h)); }, n,
                     [f](double t, const ModeVector& h, double x) { return Eigen::MatrixXd(x * f.jacobian(t, h)); });
  }

  Eigen::Index dim() const { return dim_; }
  explicit operator bool() const { return static_cast<bool>(eval_); }

  ModeVector operator()(double t, const ModeVector& h, double x) const { return eval_(t, h, x); }

  Eigen::MatrixXd jacobian(double t, const ModeVector& h, double x) const {
    if (jac_) return jac_(t, h, x);
    const double step = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + h.norm());
    Eigen::MatrixXd j(dim_, dim_);
    ModeVector hp = h;
    ModeVector hm = h;
    for (Eigen::Index k = 0; k < dim_; ++k) {
      hp[k] = h[k] + step;
      hm[k] = h[k] - step;
      j.col(k) = (eval_(t, hp, x) - eval_(t, hm, x)) / (2.0 * step);
      hp[k] = h[k];
      hm[k] = h[k];
    }
    return j;
  }

 private:
  Eigen::Index dim_ = 0;
  Eval eval_;
  Jacobian jac_;
};

/// gamma(t, h, x) with the mark checked against E.
inline ModeVector eval_jump(const JumpField& gamma, const JumpMeasureSpec& spec, double t, const ModeVector& h,
                            double x) {
  detail::require(spec.in_space(x), "eval_jump: mark " + std::to_string(x) + " is outside the mark space");
  ModeVector out = gamma(t, h, x);
  require_finite(out, "eval_jump");
  return out;
}

/// int_{B_n} gamma(t, h, x) F(dx)
inline ModeVector compensator_drift(const JumpField& gamma, const JumpMeasureSpec& spec, double t,
                                    const ModeVector& h) {
  return spec.integrate([&](double x) { return gamma(t, h, x); }, static_cast<std::size_t>(h.size()));
}

/// alpha(h) - 1/2 sum_i D sigma~_i(h) sigma~_i(h) with sigma~_i = sqrt(lambda_i) sigma_i.
inline ModeVector stratonovich_drift(const VectorField& drift, std::span<const VectorField> diffusion,
                                     const QWienerSpec& wiener, double t, const ModeVector& h) {
  detail::require(diffusion.size() == wiener.d(), "stratonovich_drift: one diffusion column per Brownian mode");
  ModeVector out = drift(t, h);
  for (std::size_t i = 0; i < diffusion.size(); ++i) {
    if (diffusion[i].kind() == FieldKind::Constant) continue;
    out -= 0.5 * wiener.q_eigenvalues[i] * diffusion[i].directional_derivative(t, h, diffusion[i](t, h));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delayed coefficients

/// Delays 0 <= delta_1 < ... < delta_K <= 1; the coefficient sees r at
/// times delta_k * t.
struct DelaySpec {
  std::vector<double> delays;

  void validate() const {
    detail::require(!delays.empty(), "DelaySpec: at least one delay");
    for (std::size_t k = 0; k < delays.size(); ++k) {
      detail::require(delays[k] >= 0.0 && delays[k] <= 1.0, "DelaySpec: delays must lie in [0, 1]");
      if (k > 0) detail::require(delays[k - 1] < delays[k], "DelaySpec: delays must be strictly increasing");
    }
  }
};

/// Grid path with left-constant interpolation: value_at(s) is the value at the
/// last recorded time <= s.
class PathHistory {
 public:
  void push(double t, ModeVector v) {
    detail::require(times_.empty() || t > times_.back(), "PathHistory: times must increase");
    times_.push_back(t);
    values_.push_back(std::move(v));
  }

  std::size_t size() const { return times_.size(); }
  double last_time() const { return times_.back(); }

  const ModeVector& value_at(double s) const {
    detail::require(!times_.empty() && s >= times_.front(), "PathHistory: query before the first recorded time");
    const auto it = std::upper_bound(times_.begin(), times_.end(), s);
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
  }

 private:
  std::vector<double> times_;
  std::vector<ModeVector> values_;
};

/// alpha(t, r_{delta_1 t}, ..., r_{delta_K t})
class DelayedField {
 public:
  using Eval = std::function<ModeVector(double, std::span<const ModeVector>)>;

  DelayedField() = default;
  DelayedField(DelaySpec spec, Eval eval) : spec_(std::move(spec)), eval_(std::move(eval)) {
    spec_.validate();
    detail::require(static_cast<bool>(eval_), "DelayedField: empty closure");
  }

  const DelaySpec& spec() const { return spec_; }
  explicit operator bool() const { return static_cast<bool>(eval_); }

  /// Only path values at times <= t are read.
  ModeVector operator()(double t, const PathHistory& path) const {
    detail::require(path.size() > 0 && path.last_time() <= t, "DelayedField: history must end at or before t");
    std::vector<ModeVector> states;
    states.reserve(spec_.delays.size());
    for (double d : spec_.delays) states.push_back(path.value_at(d * t));
    return eval_(t, states);
  }

 private:
  DelaySpec spec_;
  Eval eval_;
};

// ---------------------------------------------------------------------------
// Lipschitz profiles

/// Piecewise-constant L(t) >= 0: value[i] on [breaks[i], breaks[i+1]), the
/// last value extending to infinity.  c1 is the truncation radius.
class LipschitzProfile {
 public:
  LipschitzProfile() : LipschitzProfile({0.0}, {0.0}) {}
  LipschitzProfile(std::vector<double> breaks, std::vector<double> values, double c1 = 1.0)
      : breaks_(std::move(breaks)), values_(std::move(values)), c1_(c1) {
    detail::require(!breaks_.empty() && breaks_.size() == values_.size(),
                    "LipschitzProfile: breaks and values must have equal nonzero length");
    detail::require(breaks_.front() == 0.0, "LipschitzProfile: first break must be 0");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      detail::require(values_[i] >= 0.0 && std::isfinite(values_[i]), "LipschitzProfile: L must be finite and >= 0");
      if (i > 0) detail::require(breaks_[i - 1] < breaks_[i], "LipschitzProfile: breaks must increase");
    }
    detail::require(c1_ > 0.0, "LipschitzProfile: radius must be positive");
  }

  static LipschitzProfile constant(double l, double c1 = 1.0) { return {{0.0}, {l}, c1}; }

  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }
  double radius() const { return c1_; }

  double operator()(double t) const {
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    if (it == breaks_.begin()) return values_.front();
    return values_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
  }

  /// g(t) = int_0^t L(s)^2 ds
  double g(double t) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < breaks_.size(); ++i) {
      const double lo = breaks_[i];
      if (t <= lo) break;
      const double hi = i + 1 < breaks_.size() ? std::min(t, breaks_[i + 1]) : t;
      acc += values_[i] * values_[i] * (hi - lo);
    }
    return acc;
  }

  bool identically_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  }

 private:
  std::vector<double> breaks_;
  std::vector<double> values_;
  double c1_;
};

}  // namespace mfspde
