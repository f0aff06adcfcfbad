#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fracnl/assembly.hpp"
#include "fracnl/errors.hpp"
#include "fracnl/mesh.hpp"
#include "fracnl/problem.hpp"
#include "fracnl/solver.hpp"

namespace fracnl {

inline constexpr int kErrorDegree = 5;

struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;
};

/// L2 norm and H1_0 seminorm of (exact - U_h) at time t by element quadrature.
/// The seminorm uses `gradient_degree` when positive, otherwise `degree`.
template <class ExactFn, class ExactGradFn>
ErrorNorms error_norms(const Mesh& mesh, std::span<const double> uc, ExactFn&& exact,
                       ExactGradFn&& exact_gradient, double t, int degree = kErrorDegree,
                       int gradient_degree = 0) {
  detail::require_dof_vector(mesh, uc, "error_norms");
  const QuadratureRule rule = quadrature(mesh.dimension(), degree);
  const QuadratureRule grad_rule =
      gradient_degree > 0 ? quadrature(mesh.dimension(), gradient_degree) : rule;
  const double ref_scale = mesh.dimension() == 2 ? 2.0 : 1.0;
  double l2 = 0.0;
  double h1 = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto dofs = detail::element_dofs(mesh, e);
    const double jac = std::abs(mesh.signed_measure(e)) * ref_scale;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues b = eval_basis(mesh, e, rule.points[q]);
      const Point x = mesh.map_to_physical(e, rule.points[q]);
      const double diff = exact(x, t) - detail::interpolate(b, dofs, uc);
      l2 += rule.weights[q] * jac * diff * diff;
    }
    // Gradients of U_h are constant on each element.
    const BasisValues b = eval_basis(mesh, e, grad_rule.points[0]);
    Point grad_h{};
    for (std::size_t a = 0; a < b.count; ++a) {
      if (dofs[a] < 0) continue;
      const double c = uc[static_cast<std::size_t>(dofs[a])];
      grad_h.x += c * b.gradients[a].x;
      grad_h.y += c * b.gradients[a].y;
    }
    for (std::size_t q = 0; q < grad_rule.size(); ++q) {
      const Point g = exact_gradient(mesh.map_to_physical(e, grad_rule.points[q]), t);
      const double gx = g.x - grad_h.x;
      const double gy = g.y - grad_h.y;
      h1 += grad_rule.weights[q] * jac * (gx * gx + gy * gy);
    }
  }
  return {std::sqrt(l2), std::sqrt(h1)};
}

inline ErrorNorms error_norms(const Mesh& mesh, std::span<const double> uc,
                              const ManufacturedField& exact, double t, int degree = kErrorDegree,
                              int gradient_degree = 0) {
  return error_norms(
      mesh, uc, [&](Point x, double s) { return exact.value(x, s); },
      [&](Point x, double s) { return exact.gradient(x, s); }, t, degree, gradient_degree);
}

/// sqrt(U^T mass U): the L2 norm of an FE function.
inline double discrete_l2(const FemOperators& ops, std::span<const double> uc) {
  return std::sqrt(std::max(0.0, dot(uc, spmv(ops.mass, uc))));
}

enum class NormKind {
  l2_space,
  h1_space,
  /// Same L2 errors, labelled by the time refinement N.
  l2_time,
};

inline std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::l2_space:
      return "l2";
    case NormKind::h1_space:
      return "h1";
    case NormKind::l2_time:
      return "l2-time";
  }
  return "?";
}

inline NormKind parse_norm_kind(const std::string& s) {
  if (s == "l2") return NormKind::l2_space;
  if (s == "h1") return NormKind::h1_space;
  if (s == "l2-time") return NormKind::l2_time;
  throw InvalidArgument("unknown norm '" + s + "' (expected l2, h1 or l2-time)");
}

struct ReportRow {
  std::size_t ms = 0;
  std::size_t n = 0;
  double err_u = 0.0;
  double err_v = 0.0;
  std::optional<double> rate_u;
  std::optional<double> rate_v;
  /// Empty on success; otherwise the solver diagnostic for this run.
  std::string failure;
  int max_newton_iters = 0;
  /// max over n of ||U^n|| + ||V^n|| (discrete L2).
  double max_state_norm = 0.0;

  bool failed() const noexcept { return !failure.empty(); }
};

struct ConvergenceReport {
  std::string problem;
  double alpha = 0.0;
  NormKind norm = NormKind::l2_space;
  std::vector<ReportRow> rows;
};

/// Fills rate fields with log(err_i / err_{i+1}) / log(Ms_{i+1} / Ms_i); the last
/// row, and rows next to failures, stay empty.
inline void compute_rates(std::vector<ReportRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rate_u.reset();
    rows[i].rate_v.reset();
    if (i + 1 >= rows.size() || rows[i].failed() || rows[i + 1].failed()) continue;
    const double ratio = std::log(static_cast<double>(rows[i + 1].ms) / static_cast<double>(rows[i].ms));
    rows[i].rate_u = std::log(rows[i].err_u / rows[i + 1].err_u) / ratio;
    rows[i].rate_v = std::log(rows[i].err_v / rows[i + 1].err_v) / ratio;
  }
}

struct RunConfig {
  std::string problem = "ex1";
  std::vector<double> alphas{0.4, 0.7};
  std::vector<int> levels{6, 7, 8, 9};
  std::vector<NormKind> norms{NormKind::l2_space, NormKind::h1_space, NormKind::l2_time};
  double tol = 1e-7;
  std::string out = "out";
  int load_degree = kLoadDegree;
  int error_degree = kErrorDegree;
  /// Rule for the H1_0 seminorm; 0 means `error_degree`.
  int gradient_degree = 0;
  ForcingSample forcing = ForcingSample::shifted_average;

  void validate() const {
    if (alphas.empty()) throw InvalidArgument("config: no alpha values");
    for (double a : alphas) require_fractional_order(a, "config");
    if (levels.empty()) throw InvalidArgument("config: no levels");
    for (int l : levels) {
      if (l < 1 || l > 20) throw InvalidArgument("config: level " + std::to_string(l) + " out of range");
    }
    if (!(tol > 0.0)) throw InvalidArgument("config: tol must be positive");
    if (norms.empty()) throw InvalidArgument("config: no norms");
    const auto degree_ok = [](int d) { return d >= 1 && d <= 7; };
    if (!degree_ok(load_degree) || !degree_ok(error_degree) ||
        (gradient_degree != 0 && !degree_ok(gradient_degree))) {
      throw InvalidArgument("config: quadrature degrees must lie in 1..7");
    }
  }
};

/// Result of one (alpha, level) run, errors taken at the final time.
struct RunResult {
  std::size_t ms = 0;
  std::size_t n = 0;
  ErrorNorms u;
  ErrorNorms v;
  int max_newton_iters = 0;
  double max_state_norm = 0.0;
  std::string failure;
};

inline RunResult run_level(const ProblemSpec& spec, int level, const RunConfig& cfg) {
  RunResult r;
  r.ms = std::size_t{1} << level;
  r.n = r.ms;
  try {
    const Mesh mesh = spec.dimension == 1 ? uniform_interval(r.ms) : uniform_triangulation(r.ms);
    SolverOptions opt;
    opt.tol = cfg.tol;
    opt.load_degree = cfg.load_degree;
    opt.forcing = cfg.forcing;
    const Trajectory traj = march(spec, mesh, r.n, opt);
    const double t = traj.times.back();
    if (!spec.u_exact || !spec.v_exact) throw InvalidArgument("problem has no exact solution");
    r.u = error_norms(mesh, traj.u_states.back(), *spec.u_exact, t, cfg.error_degree,
                      cfg.gradient_degree);
    r.v = error_norms(mesh, traj.v_states.back(), *spec.v_exact, t, cfg.error_degree,
                      cfg.gradient_degree);
    r.max_newton_iters = traj.max_newton_iters();
    const FemOperators ops = build_operators(mesh);
    for (std::size_t k = 0; k < traj.u_states.size(); ++k) {
      r.max_state_norm = std::max(r.max_state_norm, discrete_l2(ops, traj.u_states[k]) +
                                                        discrete_l2(ops, traj.v_states[k]));
    }
  } catch (const Error& e) {
    r.failure = e.what();
  }
  return r;
}

/// Runs every (alpha, level) pair once with N = Ms = 2^level and returns one
/// report per (alpha, norm) in config order.
inline std::vector<ConvergenceReport> study(const RunConfig& cfg) {
  cfg.validate();
  std::vector<ConvergenceReport> reports;
  for (double alpha : cfg.alphas) {
    const ProblemSpec spec = make_problem(cfg.problem, alpha);
    std::vector<RunResult> runs;
    for (int level : cfg.levels) runs.push_back(run_level(spec, level, cfg));
    for (NormKind kind : cfg.norms) {
      ConvergenceReport rep{cfg.problem, alpha, kind, {}};
      for (const auto& run : runs) {
        ReportRow row;
        row.ms = run.ms;
        row.n = run.n;
        row.failure = run.failure;
        row.max_newton_iters = run.max_newton_iters;
        row.max_state_norm = run.max_state_norm;
        const bool h1 = kind == NormKind::h1_space;
        row.err_u = h1 ? run.u.h1 : run.u.l2;
        row.err_v = h1 ? run.v.h1 : run.v.l2;
        rep.rows.push_back(std::move(row));
      }
      compute_rates(rep.rows);
      reports.push_back(std::move(rep));
    }
  }
  return reports;
}

namespace detail {

inline std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

inline void close_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace detail

inline constexpr const char* kCsvHeader = "alpha,Ms,N,err_u,rate_u,err_v,rate_v";

/// CSV text of the reports: errors with 6 significant digits, rates with 9 decimals.
inline std::string format_csv(std::span<const ConvergenceReport> reports) {
  std::ostringstream s;
  s << kCsvHeader << '\n';
  const auto rate = [](const std::optional<double>& r) {
    return r ? detail::format_double("%.9f", *r) : std::string{};
  };
  for (const auto& rep : reports) {
    for (const auto& row : rep.rows) {
      s << detail::format_double("%g", rep.alpha) << ',' << row.ms << ',' << row.n << ',';
      if (row.failed()) {
        s << "failed,,failed,\n";
        continue;
      }
      s << detail::format_double("%.5e", row.err_u) << ',' << rate(row.rate_u) << ','
        << detail::format_double("%.5e", row.err_v) << ',' << rate(row.rate_v) << '\n';
    }
  }
  return s.str();
}

inline void emit_csv(std::span<const ConvergenceReport> reports, const std::string& path) {
  auto out = detail::open_output(path);
  out << format_csv(reports);
  detail::close_output(out, path);
}

inline void emit_csv(const ConvergenceReport& report, const std::string& path) {
  emit_csv(std::span<const ConvergenceReport>(&report, 1), path);
}

/// Nodal dump "x[,y],u_num,u_exact", nodes sorted by (x, y); boundary nodes carry 0.
template <class ExactFn>
std::string format_field(const Mesh& mesh, std::span<const double> uc, ExactFn&& exact, double t) {
  detail::require_dof_vector(mesh, uc, "emit_field");
  std::vector<std::size_t> order(mesh.num_nodes());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& nodes = mesh.nodes();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return nodes[a].x < nodes[b].x || (nodes[a].x == nodes[b].x && nodes[a].y < nodes[b].y);
  });
  std::ostringstream s;
  s << (mesh.dimension() == 2 ? "x,y,u_num,u_exact\n" : "x,u_num,u_exact\n");
  for (std::size_t node : order) {
    const Point p = nodes[node];
    const std::ptrdiff_t dof = mesh.dof_of_node(node);
    const double num = dof >= 0 ? uc[static_cast<std::size_t>(dof)] : 0.0;
    s << detail::format_double("%.10g", p.x) << ',';
    if (mesh.dimension() == 2) s << detail::format_double("%.10g", p.y) << ',';
    s << detail::format_double("%.10e", num) << ',' << detail::format_double("%.10e", exact(p, t))
      << '\n';
  }
  return s.str();
}

template <class ExactFn>
void emit_field(const Mesh& mesh, std::span<const double> uc, ExactFn&& exact, double t,
                const std::string& path) {
  auto out = detail::open_output(path);
  out << format_field(mesh, uc, std::forward<ExactFn>(exact), t);
  detail::close_output(out, path);
}

}  // namespace fracnl
