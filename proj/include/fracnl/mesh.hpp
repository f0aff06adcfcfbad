#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "fracnl/errors.hpp"

namespace fracnl {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Uniform P1 mesh of (0,1) or (0,1)^2 with homogeneous Dirichlet boundary.
///
/// Node (i, j) of the 2D lattice has index j*(Ms+1) + i and coordinates
/// (i/Ms, j/Ms). Boundary nodes carry no degree of freedom.
class Mesh {
 public:
  using Element = std::array<std::size_t, 3>;

  int dimension() const noexcept { return dimension_; }
  std::size_t cells_per_side() const noexcept { return cells_per_side_; }
  double h() const noexcept { return h_; }
  std::size_t vertices_per_element() const noexcept { return static_cast<std::size_t>(dimension_) + 1; }

  const std::vector<Point>& nodes() const noexcept { return nodes_; }
  const std::vector<Element>& elements() const noexcept { return elements_; }
  const std::vector<bool>& boundary_flags() const noexcept { return boundary_; }

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_elements() const noexcept { return elements_.size(); }
  std::size_t num_dofs() const noexcept { return node_of_dof_.size(); }

  /// DOF index of a node, or -1 for boundary nodes.
  std::ptrdiff_t dof_of_node(std::size_t node) const { return dof_of_node_.at(node); }
  std::size_t node_of_dof(std::size_t dof) const { return node_of_dof_.at(dof); }

  const Element& element(std::size_t e) const {
    if (e >= elements_.size()) {
      throw IndexOutOfRange("Mesh: element " + std::to_string(e) + " out of range");
    }
    return elements_[e];
  }

  /// Signed length (1D) or signed area (2D) of an element.
  double signed_measure(std::size_t e) const {
    const auto& el = element(e);
    const Point& a = nodes_[el[0]];
    const Point& b = nodes_[el[1]];
    if (dimension_ == 1) return b.x - a.x;
    const Point& c = nodes_[el[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  }

  /// Physical location of a reference point (xi in [0,1], or (xi, eta) in the unit triangle).
  Point map_to_physical(std::size_t e, Point ref) const {
    const auto& el = element(e);
    const Point& a = nodes_[el[0]];
    const Point& b = nodes_[el[1]];
    if (dimension_ == 1) return {a.x + ref.x * (b.x - a.x), 0.0};
    const Point& c = nodes_[el[2]];
    return {a.x + ref.x * (b.x - a.x) + ref.y * (c.x - a.x),
            a.y + ref.x * (b.y - a.y) + ref.y * (c.y - a.y)};
  }

  friend Mesh uniform_interval(std::size_t cells);
  friend Mesh uniform_triangulation(std::size_t cells_per_side);

 private:
  void number_dofs() {
    dof_of_node_.assign(nodes_.size(), -1);
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      if (!boundary_[n]) {
        dof_of_node_[n] = static_cast<std::ptrdiff_t>(node_of_dof_.size());
        node_of_dof_.push_back(n);
      }
    }
  }

  int dimension_ = 1;
  std::size_t cells_per_side_ = 0;
  double h_ = 0.0;
  std::vector<Point> nodes_;
  std::vector<Element> elements_;
  std::vector<bool> boundary_;
  std::vector<std::ptrdiff_t> dof_of_node_;
  std::vector<std::size_t> node_of_dof_;
};

inline Mesh uniform_interval(std::size_t cells) {
  if (cells < 2) throw InvalidArgument("uniform_interval: need at least 2 cells");
  Mesh m;
  m.dimension_ = 1;
  m.cells_per_side_ = cells;
  m.h_ = 1.0 / static_cast<double>(cells);
  for (std::size_t i = 0; i <= cells; ++i) {
    m.nodes_.push_back({static_cast<double>(i) / static_cast<double>(cells), 0.0});
    m.boundary_.push_back(i == 0 || i == cells);
  }
  for (std::size_t i = 0; i < cells; ++i) m.elements_.push_back({i, i + 1, 0});
  m.number_dofs();
  return m;
}

/// Each lattice cell is split along its lower-left to upper-right diagonal.
inline Mesh uniform_triangulation(std::size_t cells_per_side) {
  if (cells_per_side < 2) throw InvalidArgument("uniform_triangulation: need at least 2 cells per side");
  const std::size_t n = cells_per_side;
  Mesh m;
  m.dimension_ = 2;
  m.cells_per_side_ = n;
  m.h_ = 1.0 / static_cast<double>(n);
  const auto id = [n](std::size_t i, std::size_t j) { return j * (n + 1) + i; };
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      m.nodes_.push_back({static_cast<double>(i) / static_cast<double>(n),
                          static_cast<double>(j) / static_cast<double>(n)});
      m.boundary_.push_back(i == 0 || j == 0 || i == n || j == n);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      m.elements_.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.elements_.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  m.number_dofs();
  return m;
}

/// Quadrature on the reference element: [0,1] in 1D, the unit triangle in 2D.
struct QuadratureRule {
  int dimension = 1;
  int degree = 0;
  std::vector<Point> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
};

namespace detail {

/// Gauss-Legendre nodes and weights on [0,1].
inline void gauss_legendre_unit(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        const double p2 = ((2.0 * kd - 1.0) * z * p1 - (kd - 1.0) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[n - 1 - i] = 0.5 * (1.0 + z);
    w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

inline void add_orbit3(QuadratureRule& r, double a, double w) {
  // (a, a, 1-2a) and permutations; barycentric (l0, l1, l2) -> reference (l1, l2).
  const double b = 1.0 - 2.0 * a;
  r.points.push_back({a, a});
  r.points.push_back({b, a});
  r.points.push_back({a, b});
  for (int k = 0; k < 3; ++k) r.weights.push_back(0.5 * w);
}

inline void add_orbit6(QuadratureRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  const double bary[6][3] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
  for (const auto& l : bary) {
    r.points.push_back({l[1], l[2]});
    r.weights.push_back(0.5 * w);
  }
}

}  // namespace detail

/// Gauss rule (1D) or symmetric triangle rule (2D) exact through `degree`.
/// Supported degrees: 1..7. Degree 1 is the midpoint (1D) or centroid (2D) rule.
inline QuadratureRule quadrature(int dimension, int degree) {
  if (dimension != 1 && dimension != 2) throw InvalidArgument("quadrature: dimension must be 1 or 2");
  if (degree < 1 || degree > 7) {
    throw InvalidArgument("quadrature: unsupported degree " + std::to_string(degree));
  }
  QuadratureRule r;
  r.dimension = dimension;
  r.degree = degree;
  if (dimension == 1) {
    std::vector<double> x, w;
    detail::gauss_legendre_unit(static_cast<std::size_t>(degree / 2 + 1), x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      r.points.push_back({x[i], 0.0});
      r.weights.push_back(w[i]);
    }
    return r;
  }
  // Weights below are normalised to sum to 1, then scaled by the triangle area 1/2.
  switch (degree) {
    case 1:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(0.5);
      break;
    case 2:
      detail::add_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 3:
    case 4:
      detail::add_orbit3(r, 0.445948490915965, 0.223381589678011);
      detail::add_orbit3(r, 0.091576213509771, 0.109951743655322);
      break;
    case 5:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(0.5 * 0.225);
      detail::add_orbit3(r, 0.470142064105115, 0.132394152788506);
      detail::add_orbit3(r, 0.101286507323456, 0.125939180544827);
      break;
    case 6:
      detail::add_orbit3(r, 0.249286745170910, 0.116786275726379);
      detail::add_orbit3(r, 0.063089014491502, 0.050844906370207);
      detail::add_orbit6(r, 0.053145049844817, 0.310352451033784, 0.082851075618374);
      break;
    default: {
      // Collapsed Gauss product rule, exact through degree 8.
      std::vector<double> x, w;
      detail::gauss_legendre_unit(5, x, w);
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) {
          r.points.push_back({x[i], x[j] * (1.0 - x[i])});
          r.weights.push_back(w[i] * w[j] * (1.0 - x[i]));
        }
      }
      break;
    }
  }
  return r;
}

/// P1 shape functions of one element evaluated at a reference point.
struct BasisValues {
  std::size_t count = 0;
  std::array<double, 3> values{};
  std::array<Point, 3> gradients{};
};

inline BasisValues eval_basis(const Mesh& mesh, std::size_t e, Point ref) {
  const auto& el = mesh.element(e);
  const auto& nodes = mesh.nodes();
  BasisValues out;
  if (mesh.dimension() == 1) {
    const double len = nodes[el[1]].x - nodes[el[0]].x;
    out.count = 2;
    out.values = {1.0 - ref.x, ref.x, 0.0};
    out.gradients[0] = {-1.0 / len, 0.0};
    out.gradients[1] = {1.0 / len, 0.0};
    return out;
  }
  const Point& a = nodes[el[0]];
  const Point& b = nodes[el[1]];
  const Point& c = nodes[el[2]];
  // Jacobian columns (b - a), (c - a); gradients are rows of J^{-T}.
  const double j11 = b.x - a.x, j12 = c.x - a.x;
  const double j21 = b.y - a.y, j22 = c.y - a.y;
  const double det = j11 * j22 - j12 * j21;
  const Point g1{j22 / det, -j12 / det};
  const Point g2{-j21 / det, j11 / det};
  out.count = 3;
  out.values = {1.0 - ref.x - ref.y, ref.x, ref.y};
  out.gradients = {Point{-g1.x - g2.x, -g1.y - g2.y}, g1, g2};
  return out;
}

}  // namespace fracnl
