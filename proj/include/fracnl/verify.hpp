#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fracnl/assembly.hpp"
#include "fracnl/fracderiv.hpp"
#include "fracnl/harness.hpp"
#include "fracnl/mesh.hpp"
#include "fracnl/problem.hpp"
#include "fracnl/solver.hpp"

namespace fracnl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// b_k = (-1)^k Gamma(alpha + 1) / (Gamma(k + 1) Gamma(alpha - k + 1)).
inline double gamma_formula_weight(double alpha, std::size_t k) {
  const double kd = static_cast<double>(k);
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  return sign * std::tgamma(alpha + 1.0) / (std::tgamma(kd + 1.0) * std::tgamma(alpha - kd + 1.0));
}

struct WeightCheck {
  double max_rel_error = 0.0;
  bool signs_ok = true;
  bool partial_sums_ok = true;
};

/// Recurrence vs Gamma formula for k <= kmax, sign pattern and monotone positive
/// partial sums up to nmax.
inline WeightCheck weight_check(double alpha, std::size_t kmax = 64, std::size_t nmax = 4096) {
  WeightCheck out;
  const FractionalWeights w(alpha, std::max(kmax, nmax));
  for (std::size_t k = 0; k <= kmax; ++k) {
    const double ref = gamma_formula_weight(alpha, k);
    out.max_rel_error = std::max(out.max_rel_error, std::abs(w[k] - ref) / std::abs(ref));
  }
  if (w[0] != 1.0) out.signs_ok = false;
  double partial = w[0];
  for (std::size_t k = 1; k <= nmax; ++k) {
    if (!(w[k] < 0.0)) out.signs_ok = false;
    const double next = partial + w[k];
    if (!(next > 0.0 && next < partial)) out.partial_sums_ok = false;
    partial = next;
  }
  return out;
}

/// max_n |D_tau^alpha w^n - D^alpha w(t_{n - alpha/2})| for w = t^beta on [0, 1].
inline double truncation_error(double alpha, std::size_t n_steps, double beta = 3.0) {
  const double tau = 1.0 / static_cast<double>(n_steps);
  const FractionalWeights w(alpha, n_steps);
  HistoryBuffer h(1, tau);
  double err = 0.0;
  for (std::size_t n = 1; n <= n_steps; ++n) {
    const DenseVector current{std::pow(static_cast<double>(n) * tau, beta)};
    const double approx = discrete_caputo(w, h, current, n)[0];
    const double exact = caputo_power(alpha, beta, (static_cast<double>(n) - 0.5 * alpha) * tau);
    err = std::max(err, std::abs(approx - exact));
    h.append(current);
  }
  return err;
}

/// Observed orders log2(e_N / e_{2N}) over consecutive entries of `ns`.
inline std::vector<double> truncation_orders(double alpha, std::span<const std::size_t> ns,
                                             double beta = 3.0) {
  std::vector<double> errs;
  for (std::size_t n : ns) errs.push_back(truncation_error(alpha, n, beta));
  std::vector<double> orders;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    orders.push_back(std::log(errs[i] / errs[i + 1]) /
                     std::log(static_cast<double>(ns[i + 1]) / static_cast<double>(ns[i])));
  }
  return orders;
}

struct JacobianComparison {
  double max_rel_error = 0.0;
  std::size_t compared = 0;
};

/// Column-by-column central differences of `residual` against `jacobian`.
/// Entries with max(|J|, |FD|) <= floor are skipped.
inline JacobianComparison compare_jacobian_fd(const StepContext& ctx, const StepState& at,
                                              double step = 1e-6, double floor = 1e-12) {
  const std::size_t m = ctx.size();
  const std::size_t dim = 2 * m + 2;
  const std::vector<double> j = jacobian(ctx, at).to_dense();
  JacobianComparison out;
  for (std::size_t col = 0; col < dim; ++col) {
    StepState plus = at;
    StepState minus = at;
    const auto slot = [&](StepState& s) -> double& {
      if (col < m) return s.u[col];
      if (col < 2 * m) return s.v[col - m];
      return col == 2 * m ? s.d1 : s.d2;
    };
    const double h = step * std::max(1.0, std::abs(slot(plus)));
    slot(plus) += h;
    slot(minus) -= h;
    const DenseVector rp = residual(ctx, plus);
    const DenseVector rm = residual(ctx, minus);
    for (std::size_t row = 0; row < dim; ++row) {
      const double fd = (rp[row] - rm[row]) / (2.0 * h);
      const double an = j[row * dim + col];
      const double scale = std::max(std::abs(fd), std::abs(an));
      if (scale <= floor) continue;
      out.max_rel_error = std::max(out.max_rel_error, std::abs(fd - an) / scale);
      ++out.compared;
    }
  }
  return out;
}

/// Marches `spec` on Ms = N = `ms`, then compares Jacobian and finite differences
/// at `count` distinct random steps around perturbed converged states.
inline JacobianComparison jacobian_check(const ProblemSpec& spec, std::size_t ms, std::size_t count,
                                         std::uint64_t seed, double step = 1e-6,
                                         double floor = 1e-12) {
  const Mesh mesh = spec.dimension == 1 ? uniform_interval(ms) : uniform_triangulation(ms);
  const FemOperators ops = build_operators(mesh);
  const std::size_t n_steps = ms;
  const Trajectory traj = march(spec, mesh, n_steps);
  const double tau = traj.tau;
  const FractionalWeights w(spec.alpha, n_steps);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(1, n_steps);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  std::set<std::size_t> steps;
  while (steps.size() < std::min(count, n_steps)) steps.insert(pick(rng));

  JacobianComparison worst;
  for (std::size_t n : steps) {
    HistoryBuffer hu(mesh.num_dofs(), tau);
    HistoryBuffer hv(mesh.num_dofs(), tau);
    for (std::size_t j = 1; j < n; ++j) {
      hu.append(traj.u_states[j]);
      hv.append(traj.v_states[j]);
    }
    StepState prev{traj.u_states[n - 1], traj.v_states[n - 1]};
    const StepContext ctx(mesh, ops, spec, w, tau, n, prev, hu, hv);
    StepState at{traj.u_states[n], traj.v_states[n]};
    for (double& x : at.u) x += jitter(rng);
    for (double& x : at.v) x += jitter(rng);
    at.d1 = l_functional(ops, ctx.shifted(at.u, prev.u)) + jitter(rng);
    at.d2 = l_functional(ops, ctx.shifted(at.v, prev.v)) + jitter(rng);
    const JacobianComparison c = compare_jacobian_fd(ctx, at, step, floor);
    worst.max_rel_error = std::max(worst.max_rel_error, c.max_rel_error);
    worst.compared += c.compared;
  }
  return worst;
}

/// Max coefficient difference between bordered and dense Newton trajectories.
inline double formulation_gap(const ProblemSpec& spec, std::size_t ms, std::size_t n_steps,
                              double tol = 1e-7) {
  const Mesh mesh = spec.dimension == 1 ? uniform_interval(ms) : uniform_triangulation(ms);
  SolverOptions bordered;
  bordered.tol = tol;
  SolverOptions dense = bordered;
  dense.formulation = Formulation::dense;
  const Trajectory a = march(spec, mesh, n_steps, bordered);
  const Trajectory b = march(spec, mesh, n_steps, dense);
  double gap = 0.0;
  for (std::size_t n = 0; n < a.u_states.size(); ++n) {
    for (std::size_t i = 0; i < a.u_states[n].size(); ++i) {
      gap = std::max(gap, std::abs(a.u_states[n][i] - b.u_states[n][i]));
      gap = std::max(gap, std::abs(a.v_states[n][i] - b.v_states[n][i]));
    }
  }
  return gap;
}

namespace detail {

inline std::string sci(double v) { return format_double("%.3e", v); }

}  // namespace detail

inline constexpr double kWeightTolerance = 1e-12;
inline constexpr double kTruncationOrderMin = 1.9;
inline constexpr double kJacobianTolerance = 1e-5;
inline constexpr double kEquivalenceTolerance = 1e-8;
inline constexpr std::uint64_t kVerifySeed = 20240601;

inline CheckResult check_weights() {
  CheckResult r{"weights", true, {}};
  double worst = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const double alpha = 0.1 * i;
    const WeightCheck c = weight_check(alpha);
    worst = std::max(worst, c.max_rel_error);
    if (!(c.max_rel_error <= kWeightTolerance) || !c.signs_ok || !c.partial_sums_ok) {
      r.passed = false;
      r.detail += "alpha=" + detail::format_double("%.1f", alpha) + " failed; ";
    }
  }
  r.detail += "max rel diff vs Gamma formula " + detail::sci(worst) + " (k<=64, alpha=0.1..0.9)";
  return r;
}

inline CheckResult check_truncation() {
  CheckResult r{"truncation order", true, {}};
  const std::size_t ns[] = {64, 128, 256};
  for (double alpha : {0.4, 0.7}) {
    const auto orders = truncation_orders(alpha, ns);
    r.detail += "alpha=" + detail::format_double("%.1f", alpha) + " orders";
    for (double o : orders) {
      r.detail += " " + detail::format_double("%.4f", o);
      if (!(o >= kTruncationOrderMin)) r.passed = false;
    }
    r.detail += "; ";
  }
  return r;
}

inline CheckResult check_jacobian() {
  CheckResult r{"jacobian", true, {}};
  struct Case {
    const char* problem;
    double alpha;
    std::size_t ms;
  };
  for (const Case c : {Case{"ex1", 0.4, 8}, Case{"ex2", 0.5, 4}, Case{"ex1-reaction", 0.7, 8}}) {
    const JacobianComparison j = jacobian_check(make_problem(c.problem, c.alpha), c.ms, 3, kVerifySeed);
    if (!(j.max_rel_error <= kJacobianTolerance) || j.compared == 0) r.passed = false;
    r.detail += std::string(c.problem) + " max rel " + detail::sci(j.max_rel_error) + "; ";
  }
  return r;
}

inline CheckResult check_equivalence() {
  const double gap = formulation_gap(example1(0.4), 8, 8);
  return {"bordered vs dense", gap <= kEquivalenceTolerance,
          "ex1 Ms=N=8 max coefficient gap " + detail::sci(gap)};
}

inline std::vector<CheckResult> verify_suite() {
  return {check_weights(), check_truncation(), check_jacobian(), check_equivalence()};
}

}  // namespace fracnl
