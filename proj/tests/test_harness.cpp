#include <cmath>
#include <string>
#include <vector>

#include "catch_amalgamated.hpp"
#include "fracnl/harness.hpp"

using namespace fracnl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> interpolant(const Mesh& mesh, const ManufacturedField& f, double t) {
  std::vector<double> out(mesh.num_dofs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.value(mesh.nodes()[mesh.node_of_dof(i)], t);
  return out;
}

ManufacturedField field(int dim) {
  ManufacturedField f;
  f.dimension = dim;
  f.time_power = 2.0;
  f.waves = {1, 1};
  return f;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("error norms vanish for the exact interpolant of a P1 function", "[harness][norms]") {
  const Mesh mesh = uniform_triangulation(4);
  std::vector<double> zero(mesh.num_dofs(), 0.0);
  const auto e = error_norms(
      mesh, zero, [](Point, double) { return 0.0; }, [](Point, double) { return Point{}; }, 1.0);
  CHECK(e.l2 == 0.0);
  CHECK(e.h1 == 0.0);
}

TEST_CASE("error norms of the zero vector equal the field norms", "[harness][norms]") {
  // ||sin(pi x)||_L2 = 1/sqrt(2), |sin(pi x)|_H1 = pi/sqrt(2); squared in 2D.
  const Mesh m1 = uniform_interval(16);
  const auto e1 = error_norms(m1, std::vector<double>(m1.num_dofs(), 0.0), field(1), 1.0);
  CHECK_THAT(e1.l2, WithinRel(1.0 / std::sqrt(2.0), 1e-9));
  CHECK_THAT(e1.h1, WithinRel(std::numbers::pi / std::sqrt(2.0), 1e-7));
  const Mesh m2 = uniform_triangulation(16);
  const auto e2 = error_norms(m2, std::vector<double>(m2.num_dofs(), 0.0), field(2), 1.0);
  CHECK_THAT(e2.l2, WithinRel(0.5, 1e-7));
  CHECK_THAT(e2.h1, WithinRel(std::numbers::pi / std::sqrt(2.0), 1e-6));
}

TEST_CASE("interpolation errors converge at orders 2 and 1", "[harness][norms][property]") {
  for (int dim : {1, 2}) {
    const auto f = field(dim);
    std::vector<ErrorNorms> errs;
    for (std::size_t ms : {8, 16, 32}) {
      const Mesh mesh = dim == 1 ? uniform_interval(ms) : uniform_triangulation(ms);
      errs.push_back(error_norms(mesh, interpolant(mesh, f, 0.7), f, 0.7));
    }
    for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
      CHECK_THAT(std::log2(errs[i].l2 / errs[i + 1].l2), WithinAbs(2.0, 0.05));
      CHECK_THAT(std::log2(errs[i].h1 / errs[i + 1].h1), WithinAbs(1.0, 0.05));
    }
  }
}

TEST_CASE("error degree 5 agrees with degree 7", "[harness][norms]") {
  const auto f = field(2);
  const Mesh mesh = uniform_triangulation(8);
  const auto u = interpolant(mesh, f, 1.0);
  const auto a = error_norms(mesh, u, f, 1.0, 5);
  const auto b = error_norms(mesh, u, f, 1.0, 7);
  CHECK_THAT(a.l2, WithinRel(b.l2, 1e-3));
  CHECK_THAT(a.h1, WithinRel(b.h1, 1e-3));
}

TEST_CASE("gradient degree only changes the seminorm", "[harness][norms]") {
  const auto f = field(2);
  const Mesh mesh = uniform_triangulation(8);
  const auto u = interpolant(mesh, f, 1.0);
  const auto a = error_norms(mesh, u, f, 1.0, 5, 0);
  const auto b = error_norms(mesh, u, f, 1.0, 5, 1);
  CHECK(a.l2 == b.l2);
  CHECK(a.h1 != b.h1);
  CHECK(error_norms(mesh, u, f, 1.0, 5, 5).h1 == a.h1);
}

TEST_CASE("error norms reject wrong lengths", "[harness][norms]") {
  const Mesh mesh = uniform_interval(4);
  CHECK_THROWS_AS(error_norms(mesh, std::vector<double>(4, 0.0), field(1), 1.0), DimensionMismatch);
}

TEST_CASE("norm kinds round trip", "[harness]") {
  for (NormKind k : {NormKind::l2_space, NormKind::h1_space, NormKind::l2_time}) {
    CHECK(parse_norm_kind(to_string(k)) == k);
  }
  CHECK(to_string(NormKind::l2_time) == "l2-time");
  CHECK_THROWS_AS(parse_norm_kind("linf"), InvalidArgument);
}

TEST_CASE("rates use consecutive rows", "[harness][rates]") {
  std::vector<ReportRow> rows(3);
  rows[0].ms = 8;
  rows[1].ms = 16;
  rows[2].ms = 32;
  rows[0].err_u = 1.0;
  rows[1].err_u = 0.25;
  rows[2].err_u = 0.0625;
  rows[0].err_v = 1.0;
  rows[1].err_v = 0.5;
  rows[2].err_v = 0.25;
  compute_rates(rows);
  CHECK_THAT(*rows[0].rate_u, WithinAbs(2.0, 1e-14));
  CHECK_THAT(*rows[1].rate_u, WithinAbs(2.0, 1e-14));
  CHECK_THAT(*rows[0].rate_v, WithinAbs(1.0, 1e-14));
  CHECK_FALSE(rows[2].rate_u.has_value());
  rows[1].failure = "diverged";
  compute_rates(rows);
  CHECK_FALSE(rows[0].rate_u.has_value());
  CHECK_FALSE(rows[1].rate_u.has_value());
}

TEST_CASE("CSV layout", "[harness][csv]") {
  CHECK(format_csv({}) == "alpha,Ms,N,err_u,rate_u,err_v,rate_v\n");
  ConvergenceReport rep{"ex1", 0.4, NormKind::l2_space, {}};
  ReportRow a;
  a.ms = a.n = 64;
  a.err_u = 7.17e-4;
  a.err_v = 1.6e-4;
  ReportRow b = a;
  b.ms = b.n = 128;
  b.err_u = 7.17e-4 / 4;
  b.err_v = 1.6e-4 / 4;
  rep.rows = {a, b};
  compute_rates(rep.rows);
  const std::string csv = format_csv(std::span<const ConvergenceReport>(&rep, 1));
  CHECK(csv ==
        "alpha,Ms,N,err_u,rate_u,err_v,rate_v\n"
        "0.4,64,64,7.17000e-04,2.000000000,1.60000e-04,2.000000000\n"
        "0.4,128,128,1.79250e-04,,4.00000e-05,\n");
  CHECK(csv.find('\r') == std::string::npos);
  rep.rows[1].failure = "no convergence";
  compute_rates(rep.rows);
  const std::string failed = format_csv(std::span<const ConvergenceReport>(&rep, 1));
  CHECK(failed.find("0.4,128,128,failed,,failed,\n") != std::string::npos);
  CHECK(failed.find("7.17000e-04,,1.60000e-04,\n") != std::string::npos);
}

TEST_CASE("field dumps", "[harness][field]") {
  const auto f = field(1);
  const Mesh m1 = uniform_interval(4);
  const auto u1 = interpolant(m1, f, 1.0);
  const std::string s1 = format_field(m1, u1, [&](Point x, double t) { return f.value(x, t); }, 1.0);
  CHECK(count_lines(s1) == 6);
  CHECK(s1.rfind("x,u_num,u_exact\n0,0.0000000000e+00,", 0) == 0);
  CHECK(s1.find("\n0.5,1.0000000000e+00,1.0000000000e+00\n") != std::string::npos);

  const auto f2 = field(2);
  const Mesh m2 = uniform_triangulation(2);
  const std::vector<double> u2{0.75};
  const std::string s2 = format_field(m2, u2, [&](Point x, double t) { return f2.value(x, t); }, 1.0);
  CHECK(count_lines(s2) == 10);
  CHECK(s2.rfind("x,y,u_num,u_exact\n0,0,", 0) == 0);
  // Sorted by x then y: the fourth data row is (0.5, 0).
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t pos; (pos = s2.find('\n', start)) != std::string::npos; start = pos + 1) {
    lines.push_back(s2.substr(start, pos - start));
  }
  CHECK(lines[2].rfind("0,0.5,", 0) == 0);
  CHECK(lines[4].rfind("0.5,0,0.0000000000e+00,", 0) == 0);
  CHECK(lines[5].rfind("0.5,0.5,7.5000000000e-01,1.0000000000e+00", 0) == 0);
  CHECK(lines[9].rfind("1,1,0.0000000000e+00,", 0) == 0);
}

TEST_CASE("study reports", "[harness][study]") {
  RunConfig cfg;
  cfg.problem = "ex1";
  cfg.alphas = {0.4};
  cfg.levels = {4};
  const auto single = study(cfg);
  REQUIRE(single.size() == 3);
  for (const auto& rep : single) {
    REQUIRE(rep.rows.size() == 1);
    CHECK_FALSE(rep.rows[0].rate_u.has_value());
    CHECK(rep.rows[0].ms == 16);
  }

  cfg.alphas = {0.4, 0.7};
  cfg.levels = {4, 5, 6};
  const auto reps = study(cfg);
  REQUIRE(reps.size() == 6);
  for (std::size_t a = 0; a < 2; ++a) {
    const auto& l2 = reps[3 * a];
    const auto& h1 = reps[3 * a + 1];
    const auto& lt = reps[3 * a + 2];
    CHECK(l2.norm == NormKind::l2_space);
    CHECK(lt.norm == NormKind::l2_time);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(lt.rows[i].err_u == l2.rows[i].err_u);
      CHECK(lt.rows[i].err_v == l2.rows[i].err_v);
      CHECK(l2.rows[i].max_newton_iters <= 6);
      CHECK(h1.rows[i].err_u > l2.rows[i].err_u);
    }
    CHECK_THAT(*l2.rows[1].rate_u, WithinAbs(2.0, 0.1));
    CHECK_THAT(*h1.rows[1].rate_u, WithinAbs(1.0, 0.05));
  }
  const auto again = study(cfg);
  CHECK(format_csv(reps) == format_csv(again));
}

TEST_CASE("run configuration validation", "[harness][config]") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alphas = {1.0};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.levels = {};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.error_degree = 8;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.problem = "ex9";
  CHECK_THROWS_AS(study(cfg), InvalidArgument);
}

TEST_CASE("failed runs are recorded, not thrown", "[harness][study]") {
  RunConfig cfg;
  cfg.alphas = {0.5};
  cfg.levels = {3};
  cfg.tol = 1e-300;
  const auto reps = study(cfg);
  CHECK(reps[0].rows[0].failed());
  CHECK(format_csv(std::span(reps).subspan(0, 1)).find("failed,,failed,") != std::string::npos);
}
