#include <cmath>
#include <set>
#include <utility>

#include "catch_amalgamated.hpp"
#include "fracnl/mesh.hpp"

using namespace fracnl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double integrate_ref(const QuadratureRule& r, double (*f)(double, double)) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * f(r.points[q].x, r.points[q].y);
  return s;
}

// Integral of x^a y^b over the unit triangle: a! b! / (a + b + 2)!.
double triangle_monomial(int a, int b) {
  return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0);
}

}  // namespace

TEST_CASE("interval meshes", "[mesh]") {
  const Mesh m2 = uniform_interval(2);
  REQUIRE(m2.num_nodes() == 3);
  CHECK(m2.nodes()[1].x == 0.5);
  CHECK(m2.num_dofs() == 1);
  CHECK(m2.nodes()[m2.node_of_dof(0)].x == 0.5);
  CHECK(m2.dof_of_node(0) == -1);
  CHECK(m2.dof_of_node(2) == -1);

  const Mesh m4 = uniform_interval(4);
  CHECK(m4.h() == 0.25);
  CHECK(m4.num_dofs() == 3);
  CHECK(m4.num_elements() == 4);
  CHECK(uniform_interval(64).num_dofs() == 63);
  for (std::size_t e = 0; e < m4.num_elements(); ++e) CHECK(m4.signed_measure(e) == 0.25);
  CHECK_THROWS_AS(uniform_interval(1), InvalidArgument);
}

TEST_CASE("unit square triangulations", "[mesh]") {
  const Mesh m2 = uniform_triangulation(2);
  CHECK(m2.num_elements() == 8);
  REQUIRE(m2.num_dofs() == 1);
  const Point p = m2.nodes()[m2.node_of_dof(0)];
  CHECK(p.x == 0.5);
  CHECK(p.y == 0.5);
  CHECK(uniform_triangulation(8).num_dofs() == 49);
  CHECK_THROWS_AS(uniform_triangulation(1), InvalidArgument);

  const Mesh m = uniform_triangulation(5);
  double area = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const double a = m.signed_measure(e);
    CHECK_THAT(a, WithinRel(m.h() * m.h() / 2.0, 1e-12));
    area += a;
  }
  CHECK_THAT(area, WithinAbs(1.0, 1e-13));
  std::size_t boundary = 0;
  for (std::size_t n = 0; n < m.num_nodes(); ++n) {
    const Point q = m.nodes()[n];
    const bool on_edge = q.x == 0.0 || q.y == 0.0 || q.x == 1.0 || q.y == 1.0;
    CHECK(m.boundary_flags()[n] == on_edge);
    boundary += on_edge ? 1 : 0;
  }
  CHECK(boundary == 20);
  CHECK_THROWS_AS(m.element(m.num_elements()), IndexOutOfRange);
}

TEST_CASE("refinement nests nodes", "[mesh][property]") {
  for (int dim : {1, 2}) {
    const Mesh coarse = dim == 1 ? uniform_interval(4) : uniform_triangulation(4);
    const Mesh fine = dim == 1 ? uniform_interval(8) : uniform_triangulation(8);
    std::set<std::pair<double, double>> fine_nodes;
    for (const Point& p : fine.nodes()) fine_nodes.insert({p.x, p.y});
    for (const Point& p : coarse.nodes()) CHECK(fine_nodes.count({p.x, p.y}) == 1);
  }
}

TEST_CASE("1D Gauss rules are exact on monomials", "[mesh][quadrature]") {
  for (int degree = 1; degree <= 7; ++degree) {
    const QuadratureRule r = quadrature(1, degree);
    for (int k = 0; k <= degree; ++k) {
      double s = 0.0;
      for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.points[q].x, k);
      CHECK_THAT(s, WithinAbs(1.0 / (k + 1.0), 1e-14));
    }
  }
  const QuadratureRule r5 = quadrature(1, 5);
  CHECK_THAT(integrate_ref(r5, [](double x, double) { return std::pow(x, 5); }), WithinAbs(1.0 / 6.0, 1e-14));
}

TEST_CASE("triangle rules are exact on monomials", "[mesh][quadrature]") {
  for (int degree = 1; degree <= 7; ++degree) {
    const QuadratureRule r = quadrature(2, degree);
    for (double w : r.weights) CHECK(w > 0.0);
    for (const Point& p : r.points) {
      CHECK(p.x >= 0.0);
      CHECK(p.y >= 0.0);
      CHECK(p.x + p.y <= 1.0 + 1e-15);
    }
    for (int a = 0; a <= degree; ++a) {
      for (int b = 0; a + b <= degree; ++b) {
        double s = 0.0;
        for (std::size_t q = 0; q < r.size(); ++q) {
          s += r.weights[q] * std::pow(r.points[q].x, a) * std::pow(r.points[q].y, b);
        }
        CHECK_THAT(s, WithinAbs(triangle_monomial(a, b), 1e-14));
      }
    }
  }
  const QuadratureRule r5 = quadrature(2, 5);
  CHECK_THAT(integrate_ref(r5, [](double, double) { return 1.0; }), WithinAbs(0.5, 1e-15));
  CHECK_THAT(integrate_ref(r5, [](double x, double y) { return x * x * y * y; }), WithinAbs(1.0 / 180.0, 1e-15));
}

TEST_CASE("unsupported quadrature requests", "[mesh][quadrature]") {
  CHECK_THROWS_AS(quadrature(1, 0), InvalidArgument);
  CHECK_THROWS_AS(quadrature(2, 8), InvalidArgument);
  CHECK_THROWS_AS(quadrature(3, 2), InvalidArgument);
}

TEST_CASE("1D basis values and gradients", "[mesh][basis]") {
  const Mesh m = uniform_interval(4);
  const BasisValues b = eval_basis(m, 2, {0.3, 0.0});
  REQUIRE(b.count == 2);
  CHECK_THAT(b.values[0] + b.values[1], WithinAbs(1.0, 1e-15));
  CHECK_THAT(b.gradients[0].x, WithinAbs(-4.0, 1e-13));
  CHECK_THAT(b.gradients[1].x, WithinAbs(4.0, 1e-13));
  const BasisValues v0 = eval_basis(m, 2, {0.0, 0.0});
  CHECK(v0.values[0] == 1.0);
  CHECK(v0.values[1] == 0.0);
}

TEST_CASE("2D basis: partition of unity, vertices, gradients", "[mesh][basis][property]") {
  const Mesh m = uniform_triangulation(3);
  const QuadratureRule r = quadrature(2, 5);
  const Point corners[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    for (const Point& ref : r.points) {
      const BasisValues b = eval_basis(m, e, ref);
      CHECK_THAT(b.values[0] + b.values[1] + b.values[2], WithinAbs(1.0, 1e-14));
    }
    for (std::size_t a = 0; a < 3; ++a) {
      const BasisValues b = eval_basis(m, e, corners[a]);
      for (std::size_t c = 0; c < 3; ++c) CHECK_THAT(b.values[c], WithinAbs(a == c ? 1.0 : 0.0, 1e-15));
      const Point phys = m.map_to_physical(e, corners[a]);
      const Point node = m.nodes()[m.element(e)[a]];
      CHECK_THAT(phys.x, WithinAbs(node.x, 1e-15));
      CHECK_THAT(phys.y, WithinAbs(node.y, 1e-15));
    }
    // Finite differences in physical space through the affine map.
    const Point ref{0.2, 0.3};
    const double h = 1e-6;
    const Point x0 = m.map_to_physical(e, ref);
    const BasisValues b0 = eval_basis(m, e, ref);
    for (const Point step : {Point{h, 0.0}, Point{0.0, h}}) {
      const Point ref2{ref.x + step.x, ref.y + step.y};
      const Point x1 = m.map_to_physical(e, ref2);
      const BasisValues b1 = eval_basis(m, e, ref2);
      for (std::size_t a = 0; a < 3; ++a) {
        const double predicted = b0.gradients[a].x * (x1.x - x0.x) + b0.gradients[a].y * (x1.y - x0.y);
        CHECK_THAT(b1.values[a] - b0.values[a], WithinAbs(predicted, 1e-10));
      }
    }
  }
}
