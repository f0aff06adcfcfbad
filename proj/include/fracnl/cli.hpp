#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracnl/config.hpp"
#include "fracnl/errors.hpp"
#include "fracnl/harness.hpp"
#include "fracnl/problem.hpp"
#include "fracnl/solver.hpp"
#include "fracnl/verify.hpp"

namespace fracnl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

/// Raw flag values; only flags given on the command line are applied.
struct FlagValues {
  std::map<std::string, std::string> values;
  std::string config_path;
};

inline void add_run_flags(CLI::App& cmd, FlagValues& flags) {
  const auto add = [&](const std::string& name, const std::string& key, const std::string& help) {
    cmd.add_option_function<std::string>(
        name, [&flags, key](const std::string& v) { flags.values[key] = v; }, help);
  };
  add("--problem", "problem", "problem id: ex1, ex2 or ex1-reaction");
  add("--alpha", "alpha", "comma-separated fractional orders in (0,1)");
  add("--levels", "levels", "refinement levels, e.g. 6..9 (Ms = N = 2^level)");
  add("--norms", "norms", "comma-separated norms: l2, h1, l2-time");
  add("--tol", "tol", "Newton tolerance on the residual sup-norm");
  add("--out", "out", "output directory");
  add("--forcing", "forcing", "forcing sampling: average or point");
  add("--load-degree", "load_degree", "quadrature degree for loads (1..7)");
  add("--error-degree", "error_degree", "quadrature degree for error norms (1..7)");
  add("--gradient-degree", "gradient_degree", "quadrature degree for the H1 seminorm (0 = error degree)");
  cmd.add_option("--config", flags.config_path, "key=value config file; flags override it");
}

inline RunConfig resolve_config(const FlagValues& flags, const std::string& section) {
  RunConfig cfg;
  if (!flags.config_path.empty()) apply_config(cfg, load_config_file(flags.config_path), section);
  for (const auto& [key, value] : flags.values) apply_setting(cfg, key, value);
  const auto& names = problem_names();
  if (std::find(names.begin(), names.end(), cfg.problem) == names.end()) {
    throw InvalidArgument("unknown problem '" + cfg.problem + "' (expected ex1, ex2 or ex1-reaction)");
  }
  cfg.validate();
  return cfg;
}

inline std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

inline void print_report(std::ostream& out, const ConvergenceReport& rep) {
  out << rep.problem << " alpha=" << format_double("%g", rep.alpha) << " norm=" << to_string(rep.norm)
      << '\n';
  out << "  Ms     N     err_u         rate_u        err_v         rate_v\n";
  for (const auto& row : rep.rows) {
    char line[160];
    if (row.failed()) {
      std::snprintf(line, sizeof line, "  %-6zu %-5zu failed: %s\n", row.ms, row.n, row.failure.c_str());
      out << line;
      continue;
    }
    std::snprintf(line, sizeof line, "  %-6zu %-5zu %-13.5e %-13s %-13.5e %-13s\n", row.ms, row.n,
                  row.err_u, row.rate_u ? format_double("%.9f", *row.rate_u).c_str() : "-",
                  row.err_v, row.rate_v ? format_double("%.9f", *row.rate_v).c_str() : "-");
    out << line;
  }
}

inline int run_study(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::filesystem::create_directories(cfg.out);
  const std::vector<ConvergenceReport> reports = study(cfg);
  bool failed = false;
  for (NormKind kind : cfg.norms) {
    std::vector<ConvergenceReport> selected;
    for (const auto& rep : reports) {
      if (rep.norm == kind) selected.push_back(rep);
    }
    const std::string path = join_path(cfg.out, cfg.problem + "_" + to_string(kind) + ".csv");
    emit_csv(selected, path);
    for (const auto& rep : selected) {
      print_report(out, rep);
      for (const auto& row : rep.rows) failed = failed || row.failed();
    }
    out << "wrote " << path << '\n';
  }
  if (failed) {
    err << "error: some runs failed; see the failed rows above\n";
    return kExitFailure;
  }
  return kExitOk;
}

inline int run_solve(const RunConfig& cfg, std::ostream& out) {
  std::filesystem::create_directories(cfg.out);
  const double alpha = cfg.alphas.front();
  const int level = cfg.levels.front();
  const ProblemSpec spec = make_problem(cfg.problem, alpha);
  const std::size_t ms = std::size_t{1} << level;
  const Mesh mesh = spec.dimension == 1 ? uniform_interval(ms) : uniform_triangulation(ms);
  SolverOptions opt;
  opt.tol = cfg.tol;
  opt.load_degree = cfg.load_degree;
  opt.forcing = cfg.forcing;
  const Trajectory traj = march(spec, mesh, ms, opt);
  const double t = traj.times.back();
  const std::string stem = cfg.problem + "_a" + format_double("%g", alpha) + "_ms" + std::to_string(ms);
  const auto& ue = *spec.u_exact;
  const auto& ve = *spec.v_exact;
  const std::string pu = join_path(cfg.out, stem + "_u.csv");
  const std::string pv = join_path(cfg.out, stem + "_v.csv");
  emit_field(mesh, traj.u_states.back(), [&](Point x, double s) { return ue.value(x, s); }, t, pu);
  emit_field(mesh, traj.v_states.back(), [&](Point x, double s) { return ve.value(x, s); }, t, pv);
  const ErrorNorms eu = error_norms(mesh, traj.u_states.back(), ue, t, cfg.error_degree, cfg.gradient_degree);
  const ErrorNorms ev = error_norms(mesh, traj.v_states.back(), ve, t, cfg.error_degree, cfg.gradient_degree);
  out << cfg.problem << " alpha=" << format_double("%g", alpha) << " Ms=N=" << ms << " t=" << format_double("%g", t)
      << '\n';
  out << "  L2 error u " << format_double("%.5e", eu.l2) << "  v " << format_double("%.5e", ev.l2) << '\n';
  out << "  H1 error u " << format_double("%.5e", eu.h1) << "  v " << format_double("%.5e", ev.h1) << '\n';
  out << "  max Newton iterations per step " << traj.max_newton_iters() << '\n';
  out << "wrote " << pu << '\n' << "wrote " << pv << '\n';
  return kExitOk;
}

inline int run_verify(std::ostream& out) {
  bool ok = true;
  for (const auto& check : verify_suite()) {
    out << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << '\n';
    ok = ok && check.passed;
  }
  out << (ok ? "all checks passed\n" : "some checks failed\n");
  return ok ? kExitOk : kExitFailure;
}

}  // namespace detail

/// Entry point of the command-line tool. Returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupled time-fractional nonlocal parabolic solver"};
  app.require_subcommand(1);
  detail::FlagValues solve_flags, study_flags, verify_flags;
  CLI::App* solve = app.add_subcommand("solve", "single run with nodal field dumps");
  CLI::App* stud = app.add_subcommand("study", "convergence tables as CSV");
  CLI::App* verify = app.add_subcommand("verify", "weight, truncation and Jacobian property checks");
  detail::add_run_flags(*solve, solve_flags);
  detail::add_run_flags(*stud, study_flags);
  detail::add_run_flags(*verify, verify_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (solve->parsed()) return detail::run_solve(detail::resolve_config(solve_flags, "solve"), out);
    if (stud->parsed()) return detail::run_study(detail::resolve_config(study_flags, "study"), out, err);
    detail::resolve_config(verify_flags, "verify");
    return detail::run_verify(out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace fracnl
