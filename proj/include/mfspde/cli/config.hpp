#pragma once

// Strict JSON configuration: every key must be consumed, unknown keys are
// rejected with their full path.

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/spectral_space.hpp"

namespace mfspde::cli {

using json = nlohmann::json;

class ConfigError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

/// Read-tracking view of a JSON object.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + ": expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_->contains(key); }

  template <class T>
  T get(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + ": required key is missing");
    return convert<T>(key);
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return convert<T>(key);
  }

  Reader child(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + ": required key is missing");
    used_.insert(key);
    return Reader((*j_)[key], where(key));
  }

  std::vector<Reader> children(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + ": required key is missing");
    used_.insert(key);
    const json& arr = (*j_)[key];
    if (!arr.is_array()) throw ConfigError(where(key) + ": expected an array");
    std::vector<Reader> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.emplace_back(arr[i], where(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  /// Raw JSON value, marked as consumed.
  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + ": required key is missing");
    used_.insert(key);
    return (*j_)[key];
  }

  void finish() const {
    for (const auto& item : j_->items())
      if (!used_.count(item.key())) throw ConfigError(where(item.key()) + ": unknown key");
  }

 private:
  std::string where() const { return path_.empty() ? std::string("config") : path_; }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  T convert(const std::string& key) {
    used_.insert(key);
    try {
      T v = (*j_)[key].template get<T>();
      check_finite(v, key);
      return v;
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  template <class T>
  void check_finite(const T& v, const std::string& key) const {
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(v)) throw ConfigError(where(key) + ": value must be finite");
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      for (double x : v)
        if (!std::isfinite(x)) throw ConfigError(where(key) + ": values must be finite");
    }
  }

  const json* j_;
  std::string path_;
  mutable std::set<std::string> used_;
};

inline ModeVector to_mode_vector(const std::vector<double>& v) {
  return Eigen::Map<const ModeVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void require_size(const std::vector<double>& v, Eigen::Index n, const std::string& what) {
  if (static_cast<Eigen::Index>(v.size()) != n)
    throw ConfigError(what + ": expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
}

/// Field kinds: constant {value}, diagonal {values}, linear {matrix},
/// functional_form {ridges: [{profile, gain | coeffs + radius, xi, direction}]},
/// sum {terms}.
inline VectorField parse_field(Reader r, Eigen::Index n) {
  const auto kind = r.get<std::string>("kind");
  VectorField f;
  if (kind == "constant") {
    const auto v = r.get<std::vector<double>>("value");
    require_size(v, n, r.path() + ".value");
    f = VectorField::constant(to_mode_vector(v));
  } else if (kind == "diagonal") {
    const auto v = r.get<std::vector<double>>("values");
    require_size(v, n, r.path() + ".values");
    f = VectorField::linear(to_mode_vector(v).asDiagonal().toDenseMatrix());
  } else if (kind == "linear") {
    const auto rows = r.get<std::vector<std::vector<double>>>("matrix");
    if (static_cast<Eigen::Index>(rows.size()) != n) throw ConfigError(r.path() + ".matrix: wrong number of rows");
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      require_size(rows[static_cast<std::size_t>(i)], n, r.path() + ".matrix row");
      for (Eigen::Index k = 0; k < n; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    f = VectorField::linear(std::move(m));
  } else if (kind == "functional_form") {
    std::vector<Ridge> ridges;
    for (auto rr : r.children("ridges")) {
      Ridge ridge;
      const auto profile = rr.get<std::string>("profile");
      if (profile == "tanh") {
        ridge.profile = TanhProfile{rr.get_or<double>("gain", 1.0)};
      } else if (profile == "cutoff_polynomial") {
        ridge.profile = CutoffPolynomialProfile{rr.get<std::vector<double>>("coeffs"), rr.get<double>("radius")};
      } else {
        throw ConfigError(rr.path() + ".profile: unknown profile '" + profile + "'");
      }
      const auto xi = rr.get<std::vector<double>>("xi");
      const auto dir = rr.get<std::vector<double>>("direction");
      require_size(xi, n, rr.path() + ".xi");
      require_size(dir, n, rr.path() + ".direction");
      ridge.xi = to_mode_vector(xi);
      ridge.direction = to_mode_vector(dir);
      rr.finish();
      ridges.push_back(std::move(ridge));
    }
    f = VectorField::functional_form(std::move(ridges), n);
  } else if (kind == "sum") {
    auto terms = r.children("terms");
    if (terms.empty()) throw ConfigError(r.path() + ".terms: at least one term");
    f = parse_field(terms.front(), n);
    for (std::size_t i = 1; i < terms.size(); ++i) f = f + parse_field(terms[i], n);
  } else {
    throw ConfigError(r.path() + ".kind: unknown field kind '" + kind + "'");
  }
  if (r.has("truncation_radius")) f = truncate_lipschitz(f, r.get<double>("truncation_radius"));
  r.finish();
  return f;
}

inline DiagonalGenerator parse_generator(Reader r) {
  const auto kind = r.get<std::string>("kind");
  DiagonalGenerator g{std::vector<double>{0.0}};
  if (kind == "diagonal") {
    g = DiagonalGenerator(r.get<std::vector<double>>("eigenvalues"));
  } else if (kind == "heat") {
    const auto modes = r.get<int>("modes");
    if (modes < 1) throw ConfigError(r.path() + ".modes: must be positive");
    g = DiagonalGenerator::heat(static_cast<std::size_t>(modes), r.get_or<double>("diffusivity", 1.0));
  } else {
    throw ConfigError(r.path() + ".kind: unknown generator kind '" + kind + "'");
  }
  r.finish();
  return g;
}

inline JumpMeasureSpec parse_jump_measure(Reader& r) {
  JumpMeasureSpec spec;
  spec.total_intensity = r.get<double>("intensity");
  auto m = r.child("marks");
  const auto kind = m.get<std::string>("kind");
  if (kind == "uniform") {
    spec.marks = UniformMarks{m.get<double>("lo"), m.get<double>("hi")};
  } else if (kind == "discrete") {
    spec.marks = DiscreteMarks{m.get<std::vector<double>>("atoms"), m.get<std::vector<double>>("weights")};
  } else {
    throw ConfigError(m.path() + ".kind: unknown mark distribution '" + kind + "'");
  }
  m.finish();
  if (r.has("truncation_level")) spec.truncation_level = r.get<int>("truncation_level");
  try {
    spec.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(r.path() + ": " + e.what());
  }
  return spec;
}

/// jump field kinds: mark_times {direction}, mark_scaled {field}.
inline JumpField parse_jump_field(Reader r, Eigen::Index n) {
  const auto kind = r.get<std::string>("kind");
  JumpField f;
  if (kind == "mark_times") {
    const auto d = r.get<std::vector<double>>("direction");
    require_size(d, n, r.path() + ".direction");
    f = JumpField::mark_times(to_mode_vector(d));
  } else if (kind == "mark_scaled") {
    f = JumpField::mark_scaled(parse_field(r.child("field"), n));
  } else {
    throw ConfigError(r.path() + ".kind: unknown jump field kind '" + kind + "'");
  }
  r.finish();
  return f;
}

inline TestFunction parse_test_function(Reader r, Eigen::Index n) {
  const auto kind = r.get<std::string>("kind");
  TestFunction g;
  if (kind == "constant") {
    g = TestFunction::constant_one();
  } else if (kind == "quadratic") {
    g = TestFunction::quadratic();
  } else if (kind == "linear" || kind == "tanh_linear") {
    const auto z = r.get<std::vector<double>>("zeta");
    require_size(z, n, r.path() + ".zeta");
    g = kind == "linear" ? TestFunction::linear(to_mode_vector(z)) : TestFunction::tanh_linear(to_mode_vector(z));
  } else {
    throw ConfigError(r.path() + ".kind: unknown test function '" + kind + "'");
  }
  r.finish();
  return g;
}

inline LipschitzProfile parse_lipschitz(Reader r) {
  auto breaks = r.get<std::vector<double>>("breaks");
  auto values = r.get<std::vector<double>>("values");
  const double radius = r.get_or<double>("radius", 1.0);
  r.finish();
  try {
    return LipschitzProfile(std::move(breaks), std::move(values), radius);
  } catch (const ContractViolation& e) {
    throw ConfigError(r.path() + ": " + e.what());
  }
}

struct ProblemConfig {
  SpdeProblem problem;
  std::optional<LipschitzProfile> lipschitz;
};

inline ProblemConfig parse_problem(Reader r) {
  ProblemConfig pc;
  SpdeProblem& p = pc.problem;
  p.generator = parse_generator(r.child("generator"));
  const auto n = p.dim();
  p.drift = parse_field(r.child("drift"), n);
  p.wiener.q_eigenvalues = r.get<std::vector<double>>("q_eigenvalues");
  for (auto d : r.children("diffusion")) p.diffusion.push_back(parse_field(d, n));
  if (r.has("jumps")) {
    auto j = r.child("jumps");
    p.jumps = parse_jump_measure(j);
    p.jump = parse_jump_field(j.child("field"), n);
    j.finish();
  }
  const auto r0 = r.get<std::vector<double>>("r0");
  require_size(r0, n, r.path() + ".r0");
  p.r0 = to_mode_vector(r0);
  p.t0 = r.get_or<double>("t0", 0.0);
  p.horizon = r.get<double>("horizon");
  if (r.has("lipschitz")) pc.lipschitz = parse_lipschitz(r.child("lipschitz"));
  r.finish();
  try {
    p.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(r.path() + ": " + e.what());
  }
  return pc;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

/// Applies "a.b.c=value"; the value is parsed as JSON, falling back to a string.
inline void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "': expected key.path=value");
  const std::string key = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + spec + "': empty key segment");
    if (!node->is_object()) throw ConfigError("override '" + spec + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace mfspde::cli
