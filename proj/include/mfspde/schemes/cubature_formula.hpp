#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfspde/errors.hpp"
#include "mfspde/schemes/signature.hpp"

namespace mfspde {

struct CubatureReport {
  bool certified = false;
  double worst_residual = 0.0;
  MultiIndex worst_index;
  std::size_t indices_checked = 0;
};

/// Weighted piecewise-linear paths on [0, 1].  `certified()` is only true
/// after certify() has verified every moment with deg <= degree.
class CubatureFormula {
 public:
  CubatureFormula(int degree, int d, std::vector<PiecewiseLinearPath> paths, std::vector<double> weights)
      : degree_(degree), d_(d), paths_(std::move(paths)), weights_(std::move(weights)) {
    detail::require(degree_ >= 2, "CubatureFormula: degree must be at least 2");
    detail::require(d_ >= 1, "CubatureFormula: d must be positive");
    detail::require(!paths_.empty() && paths_.size() == weights_.size(),
                    "CubatureFormula: need matching nonempty paths and weights");
    double s = 0.0;
    for (double w : weights_) {
      detail::require(w > 0.0 && std::isfinite(w), "CubatureFormula: weights must be positive");
      s += w;
    }
    detail::require(std::abs(s - 1.0) <= 1e-12, "CubatureFormula: weights must sum to 1");
    for (const auto& p : paths_) {
      p.validate();
      detail::require(p.d() == d_, "CubatureFormula: path dimension differs from d");
      detail::require(std::abs(p.duration() - 1.0) <= 1e-14, "CubatureFormula: paths must live on [0, 1]");
    }
  }

  int degree() const { return degree_; }
  int d() const { return d_; }
  std::size_t size() const { return paths_.size(); }
  const std::vector<PiecewiseLinearPath>& paths() const { return paths_; }
  const std::vector<double>& weights() const { return weights_; }
  bool certified() const { return certified_; }

  /// Runs verify_cubature and sets the certified flag on success.
  CubatureReport certify();

 private:
  int degree_;
  int d_;
  std::vector<PiecewiseLinearPath> paths_;
  std::vector<double> weights_;
  bool certified_ = false;
};

/// Compares sum_l lambda_l W^I(omega_l) with E[W^I_1] for all deg(I) <= m.
inline CubatureReport verify_cubature(const CubatureFormula& f, double tol = 1e-10) {
  CubatureReport r;
  for (const auto& mi : enumerate_multi_indices(f.d(), f.degree())) {
    double sum = 0.0;
    for (std::size_t l = 0; l < f.size(); ++l) sum += f.weights()[l] * iterated_bv_integral(mi, f.paths()[l]);
    const double residual = std::abs(sum - brownian_stratonovich_moment(mi, 1.0));
    ++r.indices_checked;
    if (r.worst_index.empty() || residual > r.worst_residual) {
      r.worst_residual = residual;
      r.worst_index = mi;
    }
  }
  r.certified = r.worst_residual <= tol;
  return r;
}

inline CubatureReport CubatureFormula::certify() {
  const auto r = verify_cubature(*this);
  certified_ = r.certified;
  return r;
}

/// Degree-3 formula with 2d straight paths -/+ sqrt(d) e_i and weights 1/(2d).
inline CubatureFormula degree3_formula(int d) {
  detail::require(d >= 1, "degree3_formula: d must be positive");
  std::vector<PiecewiseLinearPath> paths;
  std::vector<double> weights;
  const double r = std::sqrt(static_cast<double>(d));
  for (int i = 0; i < d; ++i)
    for (double sign : {-1.0, 1.0}) {
      Eigen::VectorXd end = Eigen::VectorXd::Zero(d);
      end[i] = sign * r;
      paths.push_back(PiecewiseLinearPath::straight(end));
      weights.push_back(1.0 / (2.0 * d));
    }
  return CubatureFormula(3, d, std::move(paths), std::move(weights));
}

// ---------------------------------------------------------------------------
// Text format
//
//   # comment lines start with '#'
//   d m N
//   weight K          (N times, followed by K breakpoint lines)
//   time w_1 ... w_d

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace detail

inline void write_cubature(std::ostream& out, const CubatureFormula& f) {
  out << "# cubature formula on Wiener space: d m N, then per path: weight K and K lines time w_1..w_d\n";
  out << f.d() << ' ' << f.degree() << ' ' << f.size() << '\n';
  for (std::size_t l = 0; l < f.size(); ++l) {
    const auto& p = f.paths()[l];
    out << detail::format_double(f.weights()[l]) << ' ' << p.times.size() << '\n';
    for (std::size_t j = 0; j < p.times.size(); ++j) {
      out << detail::format_double(p.times[j]);
      for (Eigen::Index i = 0; i < p.points.cols(); ++i)
        out << ' ' << detail::format_double(p.points(static_cast<Eigen::Index>(j), i));
      out << '\n';
    }
  }
}

/// Parses a formula; the result is not certified.
inline CubatureFormula read_cubature(std::istream& in) {
  std::string line;
  auto fail = [](const std::string& what) { return ContractViolation("read_cubature: " + what); };
  if (!detail::next_data_line(in, line)) throw fail("missing header");
  int d = 0, m = 0;
  long n = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> d >> m >> n) || d < 1 || m < 2 || n < 1) throw fail("malformed header '" + line + "'");
  }
  std::vector<PiecewiseLinearPath> paths;
  std::vector<double> weights;
  for (long l = 0; l < n; ++l) {
    if (!detail::next_data_line(in, line)) throw fail("unexpected end of file in path " + std::to_string(l));
    std::istringstream ps(line);
    double w = 0.0;
    long k = 0;
    if (!(ps >> w >> k) || k < 2) throw fail("malformed path header '" + line + "'");
    PiecewiseLinearPath p;
    p.times.resize(static_cast<std::size_t>(k));
    p.points.resize(k, d);
    for (long j = 0; j < k; ++j) {
      if (!detail::next_data_line(in, line)) throw fail("unexpected end of file in breakpoints");
      std::istringstream bs(line);
      if (!(bs >> p.times[static_cast<std::size_t>(j)])) throw fail("malformed breakpoint '" + line + "'");
      for (int i = 0; i < d; ++i)
        if (!(bs >> p.points(j, i))) throw fail("malformed breakpoint '" + line + "'");
    }
    paths.push_back(std::move(p));
    weights.push_back(w);
  }
  return CubatureFormula(m, d, std::move(paths), std::move(weights));
}

inline CubatureFormula load_cubature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("load_cubature_file: cannot open '" + path + "'");
  return read_cubature(in);
}

}  // namespace mfspde
