#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracnl/assembly.hpp"
#include "fracnl/errors.hpp"
#include "fracnl/fracderiv.hpp"
#include "fracnl/linalg.hpp"
#include "fracnl/mesh.hpp"
#include "fracnl/problem.hpp"

namespace fracnl {

enum class Formulation {
  /// Sparse Newton system with the scalar unknowns d1 = l(U^{n,alpha}), d2 = l(V^{n,alpha}).
  bordered,
  /// Newton on the 2M unknowns directly; dense Jacobian, test-scale only.
  dense,
};

/// How the explicit forcing g_i enters step n.
enum class ForcingSample {
  /// (1 - alpha/2) g(t_n) + (alpha/2) g(t_{n-1}), the same shift as U^{n,alpha}.
  shifted_average,
  /// g(t_{n - alpha/2}).
  shifted_point,
};

struct SolverOptions {
  double tol = 1e-7;
  int max_iters = 50;
  int load_degree = kLoadDegree;
  Formulation formulation = Formulation::bordered;
  ForcingSample forcing = ForcingSample::shifted_average;
};

/// Iterate of one time step: interior coefficients of U^n, V^n and the border unknowns.
struct StepState {
  DenseVector u;
  DenseVector v;
  double d1 = 0.0;
  double d2 = 0.0;
  int newton_iters = 0;
  double residual_norm = 0.0;

  static StepState zero(std::size_t m) { return {DenseVector(m, 0.0), DenseVector(m, 0.0)}; }
};

/// Everything a single step n needs, with the history convolution and the
/// explicit forcing loads evaluated once.
class StepContext {
 public:
  StepContext(const Mesh& mesh, const FemOperators& ops, const ProblemSpec& spec,
              const FractionalWeights& weights, double tau, std::size_t n, const StepState& prev,
              const HistoryBuffer& hist_u, const HistoryBuffer& hist_v, int load_degree = kLoadDegree,
              ForcingSample forcing = ForcingSample::shifted_average)
      : mesh_(&mesh),
        ops_(&ops),
        spec_(&spec),
        alpha_(weights.alpha()),
        tau_(tau),
        n_(n),
        load_degree_(load_degree),
        prev_u_(prev.u),
        prev_v_(prev.v) {
    const std::size_t m = ops.size();
    if (n < 1) throw InvalidArgument("StepContext: step index must be >= 1");
    if (prev.u.size() != m || prev.v.size() != m || hist_u.length() != m || hist_v.length() != m ||
        mesh.num_dofs() != m) {
      throw DimensionMismatch("StepContext: inconsistent dimensions");
    }
    lead_ = std::pow(tau, -alpha_) * weights[0];
    hist_u_ = spmv(ops.mass, history_term(weights, hist_u, n));
    hist_v_ = spmv(ops.mass, history_term(weights, hist_v, n));
    load_u_ = forcing_load(spec.g1, forcing);
    load_v_ = forcing_load(spec.g2, forcing);
  }

  const Mesh& mesh() const noexcept { return *mesh_; }
  const FemOperators& ops() const noexcept { return *ops_; }
  const ProblemSpec& spec() const noexcept { return *spec_; }
  double alpha() const noexcept { return alpha_; }
  double tau() const noexcept { return tau_; }
  std::size_t step() const noexcept { return n_; }
  std::size_t size() const noexcept { return ops_->size(); }
  const DenseVector& prev_u() const noexcept { return prev_u_; }
  const DenseVector& prev_v() const noexcept { return prev_v_; }

  /// Weight of the new level in U^{n,alpha} = (1 - alpha/2) U^n + (alpha/2) U^{n-1}.
  double theta() const noexcept { return 1.0 - 0.5 * alpha_; }
  /// tau^{-alpha} b_0
  double lead() const noexcept { return lead_; }
  /// t_{n - alpha/2}, where the scheme samples the equation.
  double shifted_time() const noexcept { return (static_cast<double>(n_) - 0.5 * alpha_) * tau_; }

  DenseVector shifted(std::span<const double> current, std::span<const double> previous) const {
    DenseVector out(current.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = theta() * current[i] + 0.5 * alpha_ * previous[i];
    }
    return out;
  }

  /// mass * tau^{-alpha} sum_{j=1}^{n-1} b_{n-j} U^j, and the V counterpart.
  const DenseVector& history_u() const noexcept { return hist_u_; }
  const DenseVector& history_v() const noexcept { return hist_v_; }

  /// (g_i, psi_j) as sampled by the step's ForcingSample.
  const DenseVector& forcing_u() const noexcept { return load_u_; }
  const DenseVector& forcing_v() const noexcept { return load_v_; }

  /// Right-hand sides (f_i(U^{n,alpha}, V^{n,alpha}) + g_i^{n}, psi_j).
  std::pair<DenseVector, DenseVector> right_hand_sides(std::span<const double> ua,
                                                       std::span<const double> va) const {
    DenseVector fu = load_u_;
    DenseVector fv = load_v_;
    if (spec_->has_reaction()) {
      const DenseVector ru = nonlinear_load(*mesh_, spec_->f1, ua, va, load_degree_);
      const DenseVector rv = nonlinear_load(*mesh_, spec_->f2, ua, va, load_degree_);
      axpy(1.0, ru, fu);
      axpy(1.0, rv, fv);
    }
    return {std::move(fu), std::move(fv)};
  }

  /// (d f_i / d state (U^{n,alpha}, V^{n,alpha}) psi_k, psi_j); arg 0 = u, 1 = v.
  SparseMatrix reaction_mass(const Bivariate& f, int arg, std::span<const double> ua,
                             std::span<const double> va) const {
    const bool fallback = spec_->finite_difference_fallback;
    return weighted_mass(
        *mesh_, [&](Point, double u, double v) { return f.partial(arg, u, v, fallback); }, ua, va,
        load_degree_);
  }

 private:
  DenseVector forcing_load(const SpaceTimeFn& g, ForcingSample how) const {
    if (!g) return DenseVector(ops_->size(), 0.0);
    if (how == ForcingSample::shifted_point) return load_vector(*mesh_, g, shifted_time(), load_degree_);
    DenseVector now = load_vector(*mesh_, g, static_cast<double>(n_) * tau_, load_degree_);
    const DenseVector before = load_vector(*mesh_, g, static_cast<double>(n_ - 1) * tau_, load_degree_);
    for (std::size_t i = 0; i < now.size(); ++i) now[i] = theta() * now[i] + 0.5 * alpha_ * before[i];
    return now;
  }

  const Mesh* mesh_;
  const FemOperators* ops_;
  const ProblemSpec* spec_;
  double alpha_;
  double tau_;
  std::size_t n_;
  int load_degree_;
  double lead_ = 0.0;
  DenseVector prev_u_;
  DenseVector prev_v_;
  DenseVector hist_u_;
  DenseVector hist_v_;
  DenseVector load_u_;
  DenseVector load_v_;
};

namespace detail {

inline void require_candidate(const StepContext& ctx, const StepState& s) {
  if (s.u.size() != ctx.size() || s.v.size() != ctx.size()) {
    throw DimensionMismatch("candidate state has wrong length");
  }
}

inline void push_scaled(std::vector<Triplet>& out, const SparseMatrix& a, double scale,
                        std::size_t row0, std::size_t col0) {
  if (scale == 0.0) return;
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      out.push_back({row0 + r, col0 + cols[k], scale * vals[k]});
    }
  }
}

}  // namespace detail

/// Stacked residual [G_1..G_M, H_1..H_M, G_{M+1}, H_{M+1}] of the bordered system.
inline DenseVector residual(const StepContext& ctx, const StepState& cand) {
  detail::require_candidate(ctx, cand);
  const std::size_t m = ctx.size();
  const auto& ops = ctx.ops();
  const auto& spec = ctx.spec();
  const DenseVector ua = ctx.shifted(cand.u, ctx.prev_u());
  const DenseVector va = ctx.shifted(cand.v, ctx.prev_v());
  const DenseVector mu = spmv(ops.mass, cand.u);
  const DenseVector mv = spmv(ops.mass, cand.v);
  const DenseVector ku = spmv(ops.stiffness, ua);
  const DenseVector kv = spmv(ops.stiffness, va);
  const auto [fu, fv] = ctx.right_hand_sides(ua, va);
  const double m1 = spec.m1(cand.d1, cand.d2);
  const double m2 = spec.m2(cand.d1, cand.d2);

  DenseVector r(2 * m + 2);
  for (std::size_t i = 0; i < m; ++i) {
    r[i] = ctx.lead() * mu[i] + ctx.history_u()[i] + m1 * ku[i] - fu[i];
    r[m + i] = ctx.lead() * mv[i] + ctx.history_v()[i] + m2 * kv[i] - fv[i];
  }
  r[2 * m] = l_functional(ops, ua) - cand.d1;
  r[2 * m + 1] = l_functional(ops, va) - cand.d2;
  return r;
}

/// Sparse Jacobian of `residual` in the unknowns [U^n, V^n, d1, d2].
inline SparseMatrix jacobian(const StepContext& ctx, const StepState& cand) {
  detail::require_candidate(ctx, cand);
  const std::size_t m = ctx.size();
  const auto& ops = ctx.ops();
  const auto& spec = ctx.spec();
  const bool fallback = spec.finite_difference_fallback;
  const double theta = ctx.theta();
  const DenseVector ua = ctx.shifted(cand.u, ctx.prev_u());
  const DenseVector va = ctx.shifted(cand.v, ctx.prev_v());
  const DenseVector ku = spmv(ops.stiffness, ua);
  const DenseVector kv = spmv(ops.stiffness, va);
  const std::size_t du = 0, dv = m, d1 = 2 * m, d2 = 2 * m + 1;

  std::vector<Triplet> t;
  t.reserve(4 * ops.mass.nnz() + 4 * m + 2);
  // A1, B2: tau^{-alpha} b0 mass + theta M_i stiffness
  detail::push_scaled(t, ops.mass, ctx.lead(), du, du);
  detail::push_scaled(t, ops.stiffness, theta * spec.m1(cand.d1, cand.d2), du, du);
  detail::push_scaled(t, ops.mass, ctx.lead(), dv, dv);
  detail::push_scaled(t, ops.stiffness, theta * spec.m2(cand.d1, cand.d2), dv, dv);
  // Reaction blocks: A1, B1, A2, B2 contributions.
  if (!spec.f1.is_zero()) {
    detail::push_scaled(t, ctx.reaction_mass(spec.f1, 0, ua, va), -theta, du, du);
    detail::push_scaled(t, ctx.reaction_mass(spec.f1, 1, ua, va), -theta, du, dv);
  }
  if (!spec.f2.is_zero()) {
    detail::push_scaled(t, ctx.reaction_mass(spec.f2, 0, ua, va), -theta, dv, du);
    detail::push_scaled(t, ctx.reaction_mass(spec.f2, 1, ua, va), -theta, dv, dv);
  }
  // C1, D1, C2, D2: single columns dM_i/dd_r * (stiffness U^{n,alpha}).
  const double m1_d1 = spec.m1.partial(0, cand.d1, cand.d2, fallback);
  const double m1_d2 = spec.m1.partial(1, cand.d1, cand.d2, fallback);
  const double m2_d1 = spec.m2.partial(0, cand.d1, cand.d2, fallback);
  const double m2_d2 = spec.m2.partial(1, cand.d1, cand.d2, fallback);
  for (std::size_t i = 0; i < m; ++i) {
    if (m1_d1 != 0.0) t.push_back({du + i, d1, m1_d1 * ku[i]});
    if (m1_d2 != 0.0) t.push_back({du + i, d2, m1_d2 * ku[i]});
    if (m2_d1 != 0.0) t.push_back({dv + i, d1, m2_d1 * kv[i]});
    if (m2_d2 != 0.0) t.push_back({dv + i, d2, m2_d2 * kv[i]});
  }
  // Border rows A3, C3 and B4, D4.
  for (std::size_t k = 0; k < m; ++k) {
    t.push_back({d1, du + k, theta * ops.basis_integrals[k]});
    t.push_back({d2, dv + k, theta * ops.basis_integrals[k]});
  }
  t.push_back({d1, d1, -1.0});
  t.push_back({d2, d2, -1.0});
  return assemble_from_triplets(2 * m + 2, 2 * m + 2, std::move(t));
}

namespace detail {

inline void set_border_from_state(const StepContext& ctx, StepState& s) {
  s.d1 = l_functional(ctx.ops(), ctx.shifted(s.u, ctx.prev_u()));
  s.d2 = l_functional(ctx.ops(), ctx.shifted(s.v, ctx.prev_v()));
}

inline StepState initial_guess(const StepContext& ctx) {
  StepState s{ctx.prev_u(), ctx.prev_v()};
  set_border_from_state(ctx, s);
  return s;
}

inline StepState apply_update(const StepState& x, std::span<const double> delta, double scale) {
  const std::size_t m = x.u.size();
  StepState y = x;
  for (std::size_t i = 0; i < m; ++i) {
    y.u[i] -= scale * delta[i];
    y.v[i] -= scale * delta[m + i];
  }
  if (delta.size() == 2 * m + 2) {
    y.d1 -= scale * delta[2 * m];
    y.d2 -= scale * delta[2 * m + 1];
  }
  return y;
}

/// Newton driver shared by both formulations. `eval` returns the residual of a
/// state, `step` the Newton increment; `finish` fixes derived fields on exit.
template <class Eval, class Step, class Finish>
StepState newton_loop(StepState x, const SolverOptions& opt, Eval&& eval, Step&& step,
                      Finish&& finish) {
  DenseVector r = eval(x);
  double rn = norm_inf(r);
  for (int iter = 0;; ++iter) {
    if (!std::isfinite(rn)) {
      throw NonConvergence("Newton residual became non-finite", rn);
    }
    if (rn <= opt.tol) {
      x.newton_iters = iter;
      x.residual_norm = rn;
      finish(x);
      return x;
    }
    if (iter >= opt.max_iters) {
      throw NonConvergence("Newton did not converge in " + std::to_string(opt.max_iters) +
                               " iterations (residual " + std::to_string(rn) + ")",
                           rn);
    }
    const DenseVector delta = step(x, r);
    StepState trial = apply_update(x, delta, 1.0);
    DenseVector r_trial = eval(trial);
    double rn_trial = norm_inf(r_trial);
    if (!(rn_trial <= rn)) {
      StepState half = apply_update(x, delta, 0.5);
      DenseVector r_half = eval(half);
      const double rn_half = norm_inf(r_half);
      if (rn_half < rn_trial || !std::isfinite(rn_trial)) {
        trial = std::move(half);
        r_trial = std::move(r_half);
        rn_trial = rn_half;
      }
    }
    x = std::move(trial);
    r = std::move(r_trial);
    rn = rn_trial;
  }
}

}  // namespace detail

/// Newton's method on the bordered system, warm-started from step n-1.
/// Stops when the sup-norm of the stacked residual is <= opt.tol.
inline StepState newton_solve(const StepContext& ctx, const SolverOptions& opt = {}) {
  return detail::newton_loop(
      detail::initial_guess(ctx), opt, [&](const StepState& s) { return residual(ctx, s); },
      [&](const StepState& s, const DenseVector& r) { return linear_solve(jacobian(ctx, s), r); },
      [](StepState&) {});
}

/// Residual [G; H] of the unbordered system, with M_i evaluated at l(U^{n,alpha}), l(V^{n,alpha}).
inline DenseVector dense_residual(const StepContext& ctx, const StepState& cand) {
  detail::require_candidate(ctx, cand);
  StepState s = cand;
  detail::set_border_from_state(ctx, s);
  DenseVector full = residual(ctx, s);
  full.resize(2 * ctx.size());
  return full;
}

/// Dense Jacobian of `dense_residual`; the nonlocal coefficient couples every pair of DOFs.
inline Eigen::MatrixXd dense_jacobian(const StepContext& ctx, const StepState& cand) {
  detail::require_candidate(ctx, cand);
  const std::size_t m = ctx.size();
  const auto mi = static_cast<Eigen::Index>(m);
  const auto& ops = ctx.ops();
  const auto& spec = ctx.spec();
  const bool fallback = spec.finite_difference_fallback;
  const double theta = ctx.theta();
  const DenseVector ua = ctx.shifted(cand.u, ctx.prev_u());
  const DenseVector va = ctx.shifted(cand.v, ctx.prev_v());
  const double lu = l_functional(ops, ua);
  const double lv = l_functional(ops, va);
  const DenseVector ku = spmv(ops.stiffness, ua);
  const DenseVector kv = spmv(ops.stiffness, va);

  const auto to_dense = [](const SparseMatrix& a) {
    const std::vector<double> d = a.to_dense();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
               d.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()))
        .eval();
  };
  const Eigen::MatrixXd mass = to_dense(ops.mass);
  const Eigen::MatrixXd stiff = to_dense(ops.stiffness);
  const Eigen::Map<const Eigen::VectorXd> c(ops.basis_integrals.data(), mi);
  const Eigen::Map<const Eigen::VectorXd> kue(ku.data(), mi);
  const Eigen::Map<const Eigen::VectorXd> kve(kv.data(), mi);

  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * mi, 2 * mi);
  j.topLeftCorner(mi, mi) = ctx.lead() * mass + theta * spec.m1(lu, lv) * stiff +
                            theta * spec.m1.partial(0, lu, lv, fallback) * kue * c.transpose();
  j.topRightCorner(mi, mi) = theta * spec.m1.partial(1, lu, lv, fallback) * kue * c.transpose();
  j.bottomLeftCorner(mi, mi) = theta * spec.m2.partial(0, lu, lv, fallback) * kve * c.transpose();
  j.bottomRightCorner(mi, mi) = ctx.lead() * mass + theta * spec.m2(lu, lv) * stiff +
                                theta * spec.m2.partial(1, lu, lv, fallback) * kve * c.transpose();
  if (!spec.f1.is_zero()) {
    j.topLeftCorner(mi, mi) -= theta * to_dense(ctx.reaction_mass(spec.f1, 0, ua, va));
    j.topRightCorner(mi, mi) -= theta * to_dense(ctx.reaction_mass(spec.f1, 1, ua, va));
  }
  if (!spec.f2.is_zero()) {
    j.bottomLeftCorner(mi, mi) -= theta * to_dense(ctx.reaction_mass(spec.f2, 0, ua, va));
    j.bottomRightCorner(mi, mi) -= theta * to_dense(ctx.reaction_mass(spec.f2, 1, ua, va));
  }
  return j;
}

inline constexpr std::size_t kDenseFormulationMaxDofs = 200;

/// Newton on the unbordered 2M system with a dense Jacobian. Equivalence oracle
/// for `newton_solve`; refuses problems with more than 200 DOFs per field.
inline StepState dense_formulation_solve(const StepContext& ctx, const SolverOptions& opt = {}) {
  if (ctx.size() > kDenseFormulationMaxDofs) {
    throw InvalidArgument("dense_formulation_solve: " + std::to_string(ctx.size()) +
                          " DOFs exceeds the test-scale limit");
  }
  return detail::newton_loop(
      detail::initial_guess(ctx), opt, [&](const StepState& s) { return dense_residual(ctx, s); },
      [&](const StepState& s, const DenseVector& r) {
        const Eigen::MatrixXd j = dense_jacobian(ctx, s);
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(j);
        const Eigen::Map<const Eigen::VectorXd> rhs(r.data(), static_cast<Eigen::Index>(r.size()));
        const Eigen::VectorXd x = lu.solve(rhs);
        if (!x.allFinite() || (j * x - rhs).norm() > 1e-10 * (rhs.norm() + 1.0)) {
          throw SingularMatrix("dense_formulation_solve: Jacobian is singular");
        }
        return DenseVector(x.data(), x.data() + x.size());
      },
      [&](StepState& s) { detail::set_border_from_state(ctx, s); });
}

struct StepDiagnostics {
  int newton_iters = 0;
  double residual_norm = 0.0;
};

/// U^0..U^N and V^0..V^N on the uniform time grid t_n = n tau.
struct Trajectory {
  double tau = 0.0;
  std::vector<double> times;
  std::vector<DenseVector> u_states;
  std::vector<DenseVector> v_states;
  /// Entry n-1 describes step n.
  std::vector<StepDiagnostics> diagnostics;

  std::size_t steps() const noexcept { return diagnostics.size(); }

  int max_newton_iters() const noexcept {
    int m = 0;
    for (const auto& d : diagnostics) m = std::max(m, d.newton_iters);
    return m;
  }
};

/// Advances n = 1..N from zero initial data.
inline Trajectory march(const ProblemSpec& spec, const Mesh& mesh, std::size_t n_steps,
                        const SolverOptions& opt = {}) {
  if (n_steps < 1) throw InvalidArgument("march: need at least one time step");
  if (mesh.dimension() != spec.dimension) {
    throw InvalidArgument("march: mesh dimension does not match the problem");
  }
  const std::size_t m = mesh.num_dofs();
  const FemOperators ops = build_operators(mesh);
  const double tau = spec.final_time / static_cast<double>(n_steps);
  const FractionalWeights w(spec.alpha, n_steps);
  HistoryBuffer hist_u(m, tau);
  HistoryBuffer hist_v(m, tau);

  Trajectory traj;
  traj.tau = tau;
  traj.times.push_back(0.0);
  traj.u_states.emplace_back(m, 0.0);
  traj.v_states.emplace_back(m, 0.0);
  StepState prev = StepState::zero(m);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    StepState next;
    try {
      const StepContext ctx(mesh, ops, spec, w, tau, n, prev, hist_u, hist_v, opt.load_degree,
                            opt.forcing);
      next = opt.formulation == Formulation::bordered ? newton_solve(ctx, opt)
                                                      : dense_formulation_solve(ctx, opt);
    } catch (const Error& e) {
      throw StepFailure(n, e.what());
    }
    hist_u.append(next.u);
    hist_v.append(next.v);
    traj.times.push_back(static_cast<double>(n) * tau);
    traj.u_states.push_back(next.u);
    traj.v_states.push_back(next.v);
    traj.diagnostics.push_back({next.newton_iters, next.residual_norm});
    prev = std::move(next);
  }
  return traj;
}

}  // namespace fracnl
