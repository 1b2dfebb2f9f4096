#pragma once

// Experiment drivers behind the command line tool.  Each driver validates
// its whole configuration, computes everything in memory and returns a
// table; nothing is written until the caller decides to.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mfspde/analysis/kolmogorov.hpp"
#include "mfspde/analysis/order.hpp"
#include "mfspde/analysis/ou_oracle.hpp"
#include "mfspde/analysis/stability.hpp"
#include "mfspde/cli/config.hpp"
#include "mfspde/moving_frame.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/parallel.hpp"
#include "mfspde/picard.hpp"
#include "mfspde/schemes/cubature_formula.hpp"
#include "mfspde/schemes/cubature_scheme.hpp"
#include "mfspde/schemes/euler_split.hpp"

namespace mfspde::cli {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  std::string to_csv() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
  }
};

inline std::string num(double x) { return mfspde::detail::format_double(x); }
inline std::string num(std::size_t x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  /// Directory against which relative file names in the config resolve.
  std::string base_dir = ".";
};

struct ExperimentOutput {
  std::string name;
  Table table;
  /// Human-readable lines for stdout.
  std::vector<std::string> summary;
  /// gnuplot commands plotting the CSV; empty when there is nothing to plot.
  std::string plot;
};

struct SchemeConfig {
  enum class Kind { Euler, Cubature } kind = Kind::Euler;
  std::size_t steps = 8;
  std::size_t trajectories = 1000;
  BranchPolicy policy = FullTree{};
  double branch_budget = 1 << 24;
  std::string cubature_file = "degree3";
  OdeOptions ode;
  TestFunction g = TestFunction::quadratic();
};

inline SchemeConfig parse_scheme(Reader r, Eigen::Index n) {
  SchemeConfig s;
  const auto kind = r.get_or<std::string>("kind", "euler");
  if (kind == "euler") s.kind = SchemeConfig::Kind::Euler;
  else if (kind == "cubature") s.kind = SchemeConfig::Kind::Cubature;
  else throw ConfigError(r.path() + ".kind: unknown scheme '" + kind + "'");
  const auto steps = r.get_or<int>("steps", 8);
  const auto traj = r.get_or<int>("trajectories", 1000);
  if (steps < 1) throw ConfigError(r.path() + ".steps: must be positive");
  if (traj < 2) throw ConfigError(r.path() + ".trajectories: at least 2");
  s.steps = static_cast<std::size_t>(steps);
  s.trajectories = static_cast<std::size_t>(traj);
  const auto policy = r.get_or<std::string>("policy", "full_tree");
  if (policy == "full_tree") {
    s.policy = FullTree{};
  } else if (policy == "monte_carlo") {
    const auto b = r.get_or<int>("branches", 10000);
    if (b < 2) throw ConfigError(r.path() + ".branches: at least 2");
    s.policy = MonteCarloBranches{static_cast<std::size_t>(b)};
  } else {
    throw ConfigError(r.path() + ".policy: unknown branch policy '" + policy + "'");
  }
  s.branch_budget = r.get_or<double>("branch_budget", s.branch_budget);
  if (!(s.branch_budget >= 1.0)) throw ConfigError(r.path() + ".branch_budget: must be at least 1");
  s.cubature_file = r.get_or<std::string>("cubature_file", s.cubature_file);
  s.ode.initial_substeps = r.get_or<int>("ode_substeps", s.ode.initial_substeps);
  s.ode.tol = r.get_or<double>("ode_tol", s.ode.tol);
  if (s.ode.initial_substeps < 1 || !(s.ode.tol > 0.0)) throw ConfigError(r.path() + ": invalid ODE settings");
  if (r.has("test_function")) s.g = parse_test_function(r.child("test_function"), n);
  r.finish();
  return s;
}

/// "degree3" or "degree3:<d>" builds the shipped construction, anything else
/// is a file name.
inline CubatureFormula load_formula(const std::string& spec, int d, const std::string& base_dir) {
  if (spec == "degree3") return degree3_formula(d);
  if (spec.rfind("degree3:", 0) == 0) {
    try {
      return degree3_formula(std::stoi(spec.substr(8)));
    } catch (const std::logic_error&) {
      throw ConfigError("formula '" + spec + "': malformed dimension");
    }
  }
  std::filesystem::path p(spec);
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  if (!std::filesystem::exists(p)) throw ConfigError("cubature file '" + p.string() + "' does not exist");
  return load_cubature_file(p.string());
}

namespace detail {

inline std::string plot_script(const std::string& csv, const std::string& x, const std::string& y,
                               const std::string& using_cols, bool log) {
  std::ostringstream s;
  s << "set datafile separator ','\n";
  if (log) s << "set logscale xy\n";
  s << "set xlabel '" << x << "'\nset ylabel '" << y << "'\n";
  s << "plot '< grep -v ^summary " << csv << "' using " << using_cols << " every ::1 with linespoints title '" << y
    << "'\n";
  return s.str();
}

inline std::vector<std::string> summary_row(const OrderEstimate& o) {
  return {"summary", num(o.slope), num(o.ci_lo), num(o.ci_hi)};
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline ExperimentOutput run_simulate(const ProblemConfig& pc, const SchemeConfig& sc, Reader& ex,
                                     std::uint64_t seed, const RunOptions& opt) {
  const auto frame_kind = ex.get_or<std::string>("frame", "none");
  const auto nodes = ex.get_or<int>("nodes_per_mode", 2001);
  const auto record_every = ex.get_or<int>("record_every", 1);
  ex.finish();
  if (record_every < 1) throw ConfigError("experiment.record_every: must be positive");
  const SpdeProblem& p = pc.problem;
  const double dt = (p.horizon - p.t0) / static_cast<double>(sc.steps);
  std::optional<GroupFrame> frame;
  if (frame_kind == "direct") frame = GroupFrame::direct_inverse(p.generator);
  else if (frame_kind == "cauchy") {
    if (nodes < 1) throw ConfigError("experiment.nodes_per_mode: must be positive");
    frame = build_cauchy_dilation(p.generator, static_cast<std::size_t>(nodes), p.horizon);
  } else if (frame_kind != "none") {
    throw ConfigError("experiment.frame: expected none, direct or cauchy");
  }
  std::vector<std::vector<ModeVector>> paths(sc.trajectories);
  parallel_for(sc.trajectories, opt.threads, [&](std::size_t j) {
    const auto noise = sample_trajectory_noise(p, seed, j, sc.steps, dt);
    if (frame) {
      const FrameSde sde(*frame, p, p.t0);
      const auto big = frame_euler_path(sde, noise);
      paths[j] = push_solution(sde, big, dt);
    } else {
      paths[j] = euler_path(p, noise);
    }
  });
  ExperimentOutput out;
  out.name = "simulate";
  out.table.header = {"trajectory", "step", "time"};
  for (Eigen::Index k = 0; k < p.dim(); ++k) out.table.header.push_back("r_" + std::to_string(k));
  for (std::size_t j = 0; j < paths.size(); ++j)
    for (std::size_t k = 0; k <= sc.steps; k += static_cast<std::size_t>(record_every)) {
      std::vector<std::string> row{num(j), num(k), num(p.t0 + static_cast<double>(k) * dt)};
      for (Eigen::Index m = 0; m < p.dim(); ++m) row.push_back(num(paths[j][k][m]));
      out.table.add(std::move(row));
    }
  out.summary.push_back("simulated " + std::to_string(sc.trajectories) + " trajectories");
  out.plot = detail::plot_script("simulate.csv", "time", "r_0", "3:4", false);
  return out;
}

inline double converge_reference(const ProblemConfig& pc, const SchemeConfig& sc, Reader ref) {
  const SpdeProblem& p = pc.problem;
  const auto kind = ref.get<std::string>("kind");
  double value = 0.0;
  if (kind == "ou_exact") {
    ref.finish();
    value = ou_expectation(OuOracle::from_problem(p), sc.g, p.horizon - p.t0);
  } else if (kind == "kolmogorov") {
    KolmogorovGrid grid;
    grid.half_width = ref.get_or<double>("half_width", grid.half_width);
    grid.space_points = static_cast<std::size_t>(ref.get_or<int>("space_points", 4001));
    grid.time_steps = static_cast<std::size_t>(ref.get_or<int>("time_steps", 2000));
    ref.finish();
    if (p.dim() != 1 || p.wiener.d() != 1 || p.has_jumps())
      throw ConfigError("experiment.reference: kolmogorov needs a scalar problem without jumps");
    const double a = p.generator.eigenvalue(0);
    const double sl = std::sqrt(p.wiener.q_eigenvalues[0]);
    auto at = [](double x) { return ModeVector::Constant(1, x); };
    value = kolmogorov_expectation([&](double x) { return a * x + p.drift(0.0, at(x))[0]; },
                                   [&](double x) { return sl * p.diffusion[0](0.0, at(x))[0]; },
                                   [&](double x) { return sc.g(at(x)); }, p.r0[0], p.horizon - p.t0, grid);
  } else if (kind == "value") {
    value = ref.get<double>("value");
    ref.finish();
  } else {
    throw ConfigError("experiment.reference.kind: expected ou_exact, kolmogorov or value");
  }
  return value;
}

inline ExperimentOutput run_converge(const ProblemConfig& pc, const SchemeConfig& sc, Reader& ex, std::uint64_t seed,
                                     const RunOptions& opt) {
  const SpdeProblem& p = pc.problem;
  const auto levels = ex.get_or<int>("levels", 5);
  if (levels < 4 || levels > 16) throw ConfigError("experiment.levels: between 4 and 16");
  const double ref = converge_reference(pc, sc, ex.child("reference"));
  std::optional<ModeVector> cv_drift;
  if (ex.has("control_variate")) {
    auto cv = ex.child("control_variate");
    const auto c = cv.get<std::vector<double>>("constant_drift");
    cv.finish();
    require_size(c, p.dim(), "experiment.control_variate.constant_drift");
    cv_drift = to_mode_vector(c);
  }
  ex.finish();
  const auto nl = static_cast<std::size_t>(levels);
  std::vector<double> errors(nl), stderrs(nl), dts(nl);

  if (sc.kind == SchemeConfig::Kind::Cubature) {
    if (cv_drift) throw ConfigError("experiment.control_variate: only available for the euler scheme");
    auto f = load_formula(sc.cubature_file, static_cast<int>(p.wiener.d()), opt.base_dir);
    const auto rep = f.certify();
    if (!rep.certified)
      throw ConfigError("cubature formula fails certification at " + to_string(rep.worst_index) + " with residual " +
                        num(rep.worst_residual));
    for (std::size_t l = 0; l < nl; ++l) {
      CubatureConfig cfg;
      cfg.steps = sc.steps << l;
      cfg.policy = sc.policy;
      cfg.branch_budget = sc.branch_budget;
      cfg.ode = sc.ode;
      cfg.g = sc.g;
      cfg.seed = seed;
      cfg.threads = opt.threads;
      const auto res = cubature_weak_value(p, f, cfg);
      dts[l] = (p.horizon - p.t0) / static_cast<double>(cfg.steps);
      errors[l] = std::abs(res.estimate - ref);
      stderrs[l] = res.stderr_mc;
    }
  } else {
    const std::size_t finest = sc.steps << (nl - 1);
    const double fine_dt = (p.horizon - p.t0) / static_cast<double>(finest);
    std::optional<CoupledOuSampler> sampler;
    double cv_mean = 0.0;
    if (cv_drift) {
      SpdeProblem ou = p;
      ou.drift = VectorField::constant(*cv_drift);
      sampler.emplace(OuOracle::from_problem(ou), fine_dt);
      cv_mean = ou_expectation(sampler->oracle(), sc.g, p.horizon - p.t0);
    }
    const std::size_t m = sc.trajectories;
    std::vector<std::vector<double>> y(nl, std::vector<double>(m));
    parallel_for(m, opt.threads, [&](std::size_t j) {
      std::vector<NoiseIncrement> noise;
      double shift = 0.0;
      if (sampler) {
        auto s = sampler->sample(seed, j, finest);
        noise = std::move(s.noise);
        shift = cv_mean - sc.g(s.exact_terminal);
      } else {
        noise = sample_trajectory_noise(p, seed, j, finest, fine_dt);
      }
      for (std::size_t l = 0; l < nl; ++l) {
        const auto coarse = coarsen(noise, std::size_t{1} << (nl - 1 - l));
        y[l][j] = sc.g(euler_terminal(p, coarse)) + shift;
      }
    });
    for (std::size_t l = 0; l < nl; ++l) {
      double mean = 0.0;
      for (double v : y[l]) mean += v;
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (double v : y[l]) var += (v - mean) * (v - mean);
      var /= static_cast<double>(m - 1);
      dts[l] = (p.horizon - p.t0) / static_cast<double>(sc.steps << l);
      errors[l] = std::abs(mean - ref);
      stderrs[l] = std::sqrt(var / static_cast<double>(m));
    }
  }
  const auto order = estimate_order(errors);
  ExperimentOutput out;
  out.name = "converge";
  out.table.header = {"level", "dt", "abs_error", "stderr"};
  for (std::size_t l = 0; l < nl; ++l) out.table.add({num(l), num(dts[l]), num(errors[l]), num(stderrs[l])});
  out.table.add(detail::summary_row(order));
  out.summary.push_back("reference=" + num(ref));
  out.summary.push_back("slope=" + num(order.slope) + " ci=[" + num(order.ci_lo) + "," + num(order.ci_hi) + "]" +
                        (order.monotone ? "" : " (non-monotone errors)"));
  out.plot = detail::plot_script("converge.csv", "dt", "abs_error", "2:3", true);
  return out;
}

inline ExperimentOutput run_cubature_verify(const ProblemConfig* pc, Reader& ex, const RunOptions& opt) {
  const auto spec = ex.get_or<std::string>("formula", "degree3");
  const int d = ex.get_or<int>("d", pc ? static_cast<int>(pc->problem.wiener.d()) : 1);
  std::optional<int> declared;
  if (ex.has("declared_degree")) declared = ex.get<int>("declared_degree");
  ex.finish();
  auto f = load_formula(spec, d, opt.base_dir);
  if (declared) f = CubatureFormula(*declared, f.d(), f.paths(), f.weights());
  const auto rep = f.certify();
  ExperimentOutput out;
  out.name = "cubature-verify";
  out.table.header = {"multi_index", "deg", "weighted_sum", "expected", "residual"};
  for (const auto& mi : enumerate_multi_indices(f.d(), f.degree())) {
    double sum = 0.0;
    for (std::size_t l = 0; l < f.size(); ++l) sum += f.weights()[l] * iterated_bv_integral(mi, f.paths()[l]);
    const double e = brownian_stratonovich_moment(mi, 1.0);
    std::string label;
    for (std::size_t k = 0; k < mi.size(); ++k) label += (k ? " " : "") + std::to_string(mi[k]);
    out.table.add({label, num(deg(mi)), num(sum), num(e), num(std::abs(sum - e))});
  }
  out.table.add({"summary", rep.certified ? "certified=true" : "certified=false", "worst_residual",
                 num(rep.worst_residual), to_string(rep.worst_index)});
  out.summary.push_back(std::string("certified=") + (rep.certified ? "true" : "false") +
                        " worst_residual=" + num(rep.worst_residual) + " at " + to_string(rep.worst_index));
  return out;
}

inline ExperimentOutput run_stability(const ProblemConfig& pc, const SchemeConfig& sc, Reader& ex, std::uint64_t seed,
                                      const RunOptions& opt) {
  const auto levels = ex.get<std::vector<int>>("levels");
  ex.finish();
  if (levels.empty()) throw ConfigError("experiment.levels: at least one level");
  StabilityOptions so;
  so.trajectories = sc.trajectories;
  so.steps = sc.steps;
  so.seed = seed;
  so.threads = opt.threads;
  const auto rep = stability_experiment(pc.problem, levels, so);
  ExperimentOutput out;
  out.name = "stability";
  out.table.header = {"level", "kept_mass", "c_n_squared", "error", "ratio"};
  for (const auto& l : rep.levels)
    out.table.add({num(l.n), num(pc.problem.jumps.truncated(l.n).kept_mass()), num(l.c_n_squared), num(l.error),
                   l.c_n_squared > 0.0 ? num(l.ratio) : "nan"});
  out.table.add({"summary", "K", num(rep.k), "spread", num(rep.spread)});
  out.summary.push_back("K=" + num(rep.k) + " spread=" + num(rep.spread) +
                        " exact_at_full_space=" + (rep.exact_at_full_space ? "true" : "false"));
  out.summary.push_back(rep.note);
  out.plot = detail::plot_script("stability.csv", "c_n_squared", "error", "3:4", true);
  return out;
}

inline ExperimentOutput run_picard_validate(const ProblemConfig& pc, const SchemeConfig& sc, Reader& ex,
                                            std::uint64_t seed, const RunOptions& opt) {
  const auto levels = ex.get_or<int>("levels", 4);
  const double eps = ex.get_or<double>("epsilon", 0.5);
  PicardOptions po;
  po.max_iters = static_cast<std::size_t>(ex.get_or<int>("max_iters", 200));
  po.tol = ex.get_or<double>("tol", 1e-12);
  po.threads = opt.threads;
  ex.finish();
  if (levels < 4 || levels > 12) throw ConfigError("experiment.levels: between 4 and 12");
  if (!pc.lipschitz) throw ConfigError("problem.lipschitz: required for picard-validate");
  const SpdeProblem& p = pc.problem;
  const auto part = build_partition(*pc.lipschitz, p.t0, p.horizon, eps);
  const auto nl = static_cast<std::size_t>(levels);
  const std::size_t finest = sc.steps << (nl - 1);
  const double fine_dt = (p.horizon - p.t0) / static_cast<double>(finest);
  const std::size_t m = sc.trajectories;
  std::vector<std::vector<NoiseIncrement>> fine(m);
  parallel_for(m, opt.threads, [&](std::size_t j) { fine[j] = sample_trajectory_noise(p, seed, j, finest, fine_dt); });

  ExperimentOutput out;
  out.name = "picard-validate";
  out.table.header = {"level", "dt", "intervals", "max_contraction", "max_iterations", "rms_gap"};
  std::vector<double> gaps(nl);
  double worst_factor = 0.0;
  for (std::size_t l = 0; l < nl; ++l) {
    const std::size_t steps = sc.steps << l;
    std::vector<std::vector<NoiseIncrement>> noise(m);
    std::vector<std::vector<ModeVector>> euler(m);
    parallel_for(m, opt.threads, [&](std::size_t j) {
      noise[j] = coarsen(fine[j], finest / steps);
      euler[j] = euler_path(p, noise[j]);
    });
    const auto res = picard_solve(p, part, noise, steps, po);
    const auto e = GridCurve::from_paths(res.curve.times, euler);
    gaps[l] = sup_rms_gap(res.curve, e);
    double factor = 0.0;
    std::size_t iters = 0;
    for (std::size_t i = 0; i < res.contraction_factors.size(); ++i) {
      factor = std::max(factor, res.contraction_factors[i]);
      iters = std::max(iters, res.iterations[i]);
    }
    worst_factor = std::max(worst_factor, factor);
    out.table.add({num(l), num((p.horizon - p.t0) / static_cast<double>(steps)), num(res.contraction_factors.size()),
                   num(factor), num(iters), num(gaps[l])});
  }
  const auto order = estimate_order(gaps);
  out.table.add(detail::summary_row(order));
  out.summary.push_back("partition intervals=" + std::to_string(part.breakpoints.size() - 1) +
                        " max_contraction=" + num(worst_factor) + " epsilon=" + num(eps));
  out.summary.push_back("gap slope=" + num(order.slope) + " ci=[" + num(order.ci_lo) + "," + num(order.ci_hi) + "]");
  out.plot = detail::plot_script("picard-validate.csv", "dt", "rms_gap", "2:6", true);
  return out;
}

/// Finite-difference check of the first variation along the initial curve
/// c(eps) = r0 + eps v + eps^2 u on shared noise.
inline ExperimentOutput run_variation_check(const ProblemConfig& pc, const SchemeConfig& sc, Reader& ex,
                                            std::uint64_t seed, const RunOptions& opt) {
  const SpdeProblem& p = pc.problem;
  const auto v = ex.get<std::vector<double>>("direction");
  const auto u = ex.get_or<std::vector<double>>("curvature", std::vector<double>(static_cast<std::size_t>(p.dim()), 0.0));
  const auto eps = ex.get_or<std::vector<double>>("epsilons", {1e-1, 1e-2, 1e-3, 1e-4});
  ex.finish();
  require_size(v, p.dim(), "experiment.direction");
  require_size(u, p.dim(), "experiment.curvature");
  if (eps.size() < 4) throw ConfigError("experiment.epsilons: at least 4 values");
  for (double e : eps)
    if (!(e > 0.0)) throw ConfigError("experiment.epsilons: values must be positive");
  const ModeVector dir = to_mode_vector(v);
  const ModeVector curv = to_mode_vector(u);
  const double dt = (p.horizon - p.t0) / static_cast<double>(sc.steps);
  const std::size_t m = sc.trajectories;
  std::vector<std::vector<double>> sq(eps.size(), std::vector<double>(m));
  parallel_for(m, opt.threads, [&](std::size_t j) {
    const auto noise = sample_trajectory_noise(p, seed, j, sc.steps, dt);
    const auto base = euler_path(p, noise);
    const auto jac = first_variation_solve(p, base, noise, dir);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      SpdeProblem pe = p;
      pe.r0 = p.r0 + eps[e] * dir + eps[e] * eps[e] * curv;
      const auto pert = euler_path(pe, noise);
      double worst = 0.0;
      for (std::size_t k = 0; k < base.size(); ++k)
        worst = std::max(worst, ((pert[k] - base[k]) / eps[e] - jac[k]).squaredNorm());
      sq[e][j] = worst;
    }
  });
  std::vector<double> errs(eps.size());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    double s = 0.0;
    for (double x : sq[e]) s += x;
    errs[e] = std::sqrt(s / static_cast<double>(m));
  }
  // Slope in log10(eps) units: each level divides eps by eps[l]/eps[l+1].
  std::vector<double> x(eps.size()), y(eps.size());
  double mx = 0, my = 0;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    if (!(errs[e] > 0.0)) throw NumericalGuardError("variation-check: zero finite-difference error at eps=" + num(eps[e]));
    x[e] = std::log(eps[e]);
    y[e] = std::log(errs[e]);
    mx += x[e];
    my += y[e];
  }
  mx /= static_cast<double>(eps.size());
  my /= static_cast<double>(eps.size());
  double sxx = 0, sxy = 0;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    sxx += (x[e] - mx) * (x[e] - mx);
    sxy += (x[e] - mx) * (y[e] - my);
  }
  const double slope = sxy / sxx;
  ExperimentOutput out;
  out.name = "variation-check";
  out.table.header = {"epsilon", "fd_error"};
  for (std::size_t e = 0; e < eps.size(); ++e) out.table.add({num(eps[e]), num(errs[e])});
  out.table.add({"summary", num(slope)});
  out.summary.push_back("fd slope in epsilon=" + num(slope));
  out.plot = detail::plot_script("variation-check.csv", "epsilon", "fd_error", "1:2", true);
  return out;
}

inline ExperimentOutput run_noise_validate(const ProblemConfig& pc, Reader& ex, std::uint64_t seed,
                                           const RunOptions& opt) {
  const auto samples = static_cast<std::size_t>(ex.get_or<int>("samples", 100000));
  const auto integrands = static_cast<std::size_t>(ex.get_or<int>("integrands", 3));
  const auto fubini_paths = static_cast<std::size_t>(ex.get_or<int>("fubini_paths", 1000));
  const auto fubini_nodes = static_cast<std::size_t>(ex.get_or<int>("fubini_nodes", 10000));
  const auto pieces = static_cast<std::size_t>(ex.get_or<int>("pieces", 4));
  ex.finish();
  if (samples < 100) throw ConfigError("experiment.samples: at least 100");
  if (integrands < 1 || pieces < 1 || fubini_paths < 1 || fubini_nodes < 1)
    throw ConfigError("experiment: counts must be positive");
  const SpdeProblem& p = pc.problem;
  const double horizon = p.horizon - p.t0;
  ExperimentOutput out;
  out.name = "noise-validate";
  out.table.header = {"check", "lhs", "rhs", "stderr", "gap_in_stderr"};

  std::vector<double> grid(pieces + 1);
  for (std::size_t i = 0; i <= pieces; ++i) grid[i] = horizon * static_cast<double>(i) / static_cast<double>(pieces);
  // Integrand coefficients come from the validator stream namespace; each
  // check gets its own stream so results do not depend on the worker count.
  std::vector<IsometryReport> wiener(integrands), poisson(integrands);
  std::vector<FubiniReport> fubini(integrands);
  const auto dim = static_cast<Eigen::Index>(p.dim());
  const auto d = static_cast<Eigen::Index>(p.wiener.d());
  parallel_for(3 * integrands, opt.threads, [&](std::size_t task) {
    const std::size_t i = task % integrands;
    const std::size_t which = task / integrands;
    RngStream coef(seed, stream_namespace::validators + 2 * task);
    RngStream mc(seed, stream_namespace::validators + 2 * task + 1);
    auto u = [&] { return 2.0 * coef.uniform() - 1.0; };
    if (which == 0) {
      WienerStepIntegrand phi{grid, {}};
      for (std::size_t m = 0; m < pieces; ++m) {
        Eigen::MatrixXd v(dim, d);
        for (Eigen::Index a = 0; a < dim; ++a)
          for (Eigen::Index b = 0; b < d; ++b) v(a, b) = u();
        phi.values.push_back(std::move(v));
      }
      wiener[i] = ito_isometry_check(mc, p.wiener, phi, samples);
    } else if (which == 1) {
      PoissonStepIntegrand phi{grid, {}, static_cast<std::size_t>(dim)};
      for (std::size_t m = 0; m < pieces; ++m) {
        ModeVector c0(dim), c1(dim);
        for (Eigen::Index a = 0; a < dim; ++a) {
          c0[a] = u();
          c1[a] = u();
        }
        phi.values.push_back([c0, c1](double x) { return ModeVector(c0 + x * c1); });
      }
      poisson[i] = ito_isometry_check(mc, p.jumps, phi, samples);
    } else {
      SeparableIntegrand phi;
      phi.t_grid = grid;
      for (std::size_t m = 0; m < pieces; ++m) {
        const double c0 = u(), c1 = u();
        phi.kernel.push_back([c0, c1](double x) { return c0 + c1 * x; });
      }
      const double w = 1.0 + coef.uniform();
      phi.f = [w](double s) { return std::cos(w * s); };
      phi.f_integral = std::sin(w * horizon) / w;
      fubini[i] = fubini_check(mc, p.jumps, phi, fubini_nodes, fubini_paths);
    }
  });
  double worst_z = 0.0, worst_gap = 0.0;
  for (std::size_t i = 0; i < integrands; ++i) {
    out.table.add({"wiener_" + std::to_string(i), num(wiener[i].lhs), num(wiener[i].rhs), num(wiener[i].stderr_lhs),
                   num(wiener[i].gap_in_stderr())});
    worst_z = std::max(worst_z, wiener[i].gap_in_stderr());
  }
  for (std::size_t i = 0; i < integrands; ++i) {
    out.table.add({"poisson_" + std::to_string(i), num(poisson[i].lhs), num(poisson[i].rhs),
                   num(poisson[i].stderr_lhs), num(poisson[i].gap_in_stderr())});
    worst_z = std::max(worst_z, poisson[i].gap_in_stderr());
  }
  for (std::size_t i = 0; i < integrands; ++i) {
    out.table.add({"fubini_" + std::to_string(i), num(fubini[i].max_abs_value), "", "", num(fubini[i].max_pathwise_gap)});
    worst_gap = std::max(worst_gap, fubini[i].max_pathwise_gap);
  }
  out.summary.push_back("isometry worst gap in stderr=" + num(worst_z));
  out.summary.push_back("fubini worst pathwise gap=" + num(worst_gap));
  return out;
}

/// Validates and runs a configuration.
inline ExperimentOutput run_config(const json& root, const RunOptions& opt) {
  Reader r(root, "");
  const std::uint64_t seed = opt.seed ? *opt.seed : r.get_or<std::uint64_t>("seed", 0);
  auto ex = r.child("experiment");
  const auto kind = ex.get<std::string>("kind");
  std::optional<ProblemConfig> pc;
  if (r.has("problem")) pc = parse_problem(r.child("problem"));
  SchemeConfig sc;
  if (r.has("scheme")) sc = parse_scheme(r.child("scheme"), pc ? pc->problem.dim() : 1);
  r.finish();
  auto need_problem = [&]() -> const ProblemConfig& {
    if (!pc) throw ConfigError("problem: required for experiment '" + kind + "'");
    return *pc;
  };
  if (kind == "simulate") return run_simulate(need_problem(), sc, ex, seed, opt);
  if (kind == "converge") return run_converge(need_problem(), sc, ex, seed, opt);
  if (kind == "cubature-verify") return run_cubature_verify(pc ? &*pc : nullptr, ex, opt);
  if (kind == "stability") return run_stability(need_problem(), sc, ex, seed, opt);
  if (kind == "picard-validate") return run_picard_validate(need_problem(), sc, ex, seed, opt);
  if (kind == "variation-check") return run_variation_check(need_problem(), sc, ex, seed, opt);
  if (kind == "noise-validate") return run_noise_validate(need_problem(), ex, seed, opt);
  throw ConfigError("experiment.kind: unknown experiment '" + kind + "'");
}

}  // namespace mfspde::cli
