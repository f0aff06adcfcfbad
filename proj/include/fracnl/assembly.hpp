#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fracnl/errors.hpp"
#include "fracnl/linalg.hpp"
#include "fracnl/mesh.hpp"

namespace fracnl {

inline constexpr int kAssemblyDegree = 3;
inline constexpr int kLoadDegree = 5;

/// Mass and stiffness matrices and basis integrals c_i over interior DOFs.
struct FemOperators {
  SparseMatrix mass;
  SparseMatrix stiffness;
  DenseVector basis_integrals;

  std::size_t size() const noexcept { return basis_integrals.size(); }
};

namespace detail {

inline std::array<std::ptrdiff_t, 3> element_dofs(const Mesh& mesh, std::size_t e) {
  const auto& el = mesh.element(e);
  std::array<std::ptrdiff_t, 3> dofs{-1, -1, -1};
  for (std::size_t a = 0; a < mesh.vertices_per_element(); ++a) dofs[a] = mesh.dof_of_node(el[a]);
  return dofs;
}

/// Value of the FE function with interior coefficients `coeffs` (zero on the boundary).
inline double interpolate(const BasisValues& basis, const std::array<std::ptrdiff_t, 3>& dofs,
                          std::span<const double> coeffs) {
  double v = 0.0;
  for (std::size_t a = 0; a < basis.count; ++a) {
    if (dofs[a] >= 0) v += basis.values[a] * coeffs[static_cast<std::size_t>(dofs[a])];
  }
  return v;
}

inline void require_dof_vector(const Mesh& mesh, std::span<const double> v, const char* where) {
  if (v.size() != mesh.num_dofs()) {
    throw DimensionMismatch(std::string(where) + ": expected " + std::to_string(mesh.num_dofs()) +
                            " coefficients, got " + std::to_string(v.size()));
  }
}

}  // namespace detail

inline FemOperators build_operators(const Mesh& mesh, int degree = kAssemblyDegree) {
  const std::size_t m = mesh.num_dofs();
  const QuadratureRule rule = quadrature(mesh.dimension(), degree);
  std::vector<Triplet> mass;
  std::vector<Triplet> stiff;
  DenseVector c(m, 0.0);

  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto dofs = detail::element_dofs(mesh, e);
    const double jac = std::abs(mesh.signed_measure(e)) * (mesh.dimension() == 2 ? 2.0 : 1.0);
    const std::size_t nv = mesh.vertices_per_element();
    std::array<std::array<double, 3>, 3> local_mass{};
    std::array<double, 3> local_c{};
    BasisValues basis;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      basis = eval_basis(mesh, e, rule.points[q]);
      const double wq = rule.weights[q] * jac;
      for (std::size_t a = 0; a < nv; ++a) {
        local_c[a] += wq * basis.values[a];
        for (std::size_t b = 0; b < nv; ++b) local_mass[a][b] += wq * basis.values[a] * basis.values[b];
      }
    }
    // Gradients are constant on each element.
    const double measure = std::abs(mesh.signed_measure(e));
    for (std::size_t a = 0; a < nv; ++a) {
      if (dofs[a] < 0) continue;
      const auto i = static_cast<std::size_t>(dofs[a]);
      c[i] += local_c[a];
      for (std::size_t b = 0; b < nv; ++b) {
        if (dofs[b] < 0) continue;
        const auto j = static_cast<std::size_t>(dofs[b]);
        const double k = measure * (basis.gradients[a].x * basis.gradients[b].x +
                                    basis.gradients[a].y * basis.gradients[b].y);
        mass.push_back({i, j, local_mass[a][b]});
        stiff.push_back({i, j, k});
      }
    }
  }
  return {assemble_from_triplets(m, m, std::move(mass)),
          assemble_from_triplets(m, m, std::move(stiff)), std::move(c)};
}

/// (F(x, U_h(x), V_h(x)), psi_i) for every interior DOF, where U_h and V_h are the
/// FE functions with coefficients `uc`, `vc` evaluated at quadrature points.
template <class Integrand>
DenseVector integrate_against_basis(const Mesh& mesh, Integrand&& f, std::span<const double> uc,
                                    std::span<const double> vc, int degree = kLoadDegree) {
  detail::require_dof_vector(mesh, uc, "integrate_against_basis");
  detail::require_dof_vector(mesh, vc, "integrate_against_basis");
  const QuadratureRule rule = quadrature(mesh.dimension(), degree);
  const double ref_scale = mesh.dimension() == 2 ? 2.0 : 1.0;
  DenseVector out(mesh.num_dofs(), 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto dofs = detail::element_dofs(mesh, e);
    const double jac = std::abs(mesh.signed_measure(e)) * ref_scale;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues basis = eval_basis(mesh, e, rule.points[q]);
      const Point x = mesh.map_to_physical(e, rule.points[q]);
      const double value = f(x, detail::interpolate(basis, dofs, uc), detail::interpolate(basis, dofs, vc));
      const double wq = rule.weights[q] * jac * value;
      for (std::size_t a = 0; a < basis.count; ++a) {
        if (dofs[a] >= 0) out[static_cast<std::size_t>(dofs[a])] += wq * basis.values[a];
      }
    }
  }
  return out;
}

/// (g(., t), psi_i) for a space-time function g(Point, t).
template <class SpaceTimeFn>
DenseVector load_vector(const Mesh& mesh, SpaceTimeFn&& g, double t, int degree = kLoadDegree) {
  const DenseVector zero(mesh.num_dofs(), 0.0);
  return integrate_against_basis(
      mesh, [&](Point x, double, double) { return g(x, t); }, zero, zero, degree);
}

/// (f(U_h, V_h), psi_i) for a pointwise state function f(u, v).
template <class StateFn>
DenseVector nonlinear_load(const Mesh& mesh, StateFn&& f, std::span<const double> uc,
                           std::span<const double> vc, int degree = kLoadDegree) {
  return integrate_against_basis(
      mesh, [&](Point, double u, double v) { return f(u, v); }, uc, vc, degree);
}

/// Matrix (w(x, U_h, V_h) psi_k, psi_i).
template <class Weight>
SparseMatrix weighted_mass(const Mesh& mesh, Weight&& w, std::span<const double> uc,
                           std::span<const double> vc, int degree = kLoadDegree) {
  detail::require_dof_vector(mesh, uc, "weighted_mass");
  detail::require_dof_vector(mesh, vc, "weighted_mass");
  const QuadratureRule rule = quadrature(mesh.dimension(), degree);
  const double ref_scale = mesh.dimension() == 2 ? 2.0 : 1.0;
  std::vector<Triplet> entries;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto dofs = detail::element_dofs(mesh, e);
    const double jac = std::abs(mesh.signed_measure(e)) * ref_scale;
    std::array<std::array<double, 3>, 3> local{};
    const std::size_t nv = mesh.vertices_per_element();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const BasisValues basis = eval_basis(mesh, e, rule.points[q]);
      const Point x = mesh.map_to_physical(e, rule.points[q]);
      const double wq = rule.weights[q] * jac *
                        w(x, detail::interpolate(basis, dofs, uc), detail::interpolate(basis, dofs, vc));
      for (std::size_t a = 0; a < nv; ++a) {
        for (std::size_t b = 0; b < nv; ++b) local[a][b] += wq * basis.values[a] * basis.values[b];
      }
    }
    for (std::size_t a = 0; a < nv; ++a) {
      for (std::size_t b = 0; b < nv; ++b) {
        if (dofs[a] >= 0 && dofs[b] >= 0) {
          entries.push_back({static_cast<std::size_t>(dofs[a]), static_cast<std::size_t>(dofs[b]), local[a][b]});
        }
      }
    }
  }
  return assemble_from_triplets(mesh.num_dofs(), mesh.num_dofs(), std::move(entries));
}

/// l(U_h) = integral of the FE function over the domain, i.e. c . Uc.
inline double l_functional(const FemOperators& ops, std::span<const double> uc) {
  if (uc.size() != ops.basis_integrals.size()) {
    throw DimensionMismatch("l_functional: coefficient length mismatch");
  }
  return dot(ops.basis_integrals, uc);
}

/// Coefficients of the nodal interpolant of g(., t) on interior nodes.
template <class SpaceTimeFn>
DenseVector interpolate_nodal(const Mesh& mesh, SpaceTimeFn&& g, double t) {
  DenseVector out(mesh.num_dofs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g(mesh.nodes()[mesh.node_of_dof(i)], t);
  return out;
}

}  // namespace fracnl
