#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracnl/errors.hpp"
#include "fracnl/fracderiv.hpp"
#include "fracnl/mesh.hpp"

namespace fracnl {

using BivariateFn = std::function<double(double, double)>;
using SpaceTimeFn = std::function<double(Point, double)>;

/// Central difference of f in one argument with relative step 1e-6.
inline double central_difference(const BivariateFn& f, int arg, double a, double b) {
  const double x = arg == 0 ? a : b;
  const double step = 1e-6 * std::max(1.0, std::abs(x));
  if (arg == 0) return (f(a + step, b) - f(a - step, b)) / (2.0 * step);
  return (f(a, b + step) - f(a, b - step)) / (2.0 * step);
}

/// A smooth function of two scalars with optional analytic partials.
///
/// Used both for the nonlocal coefficients M_i(d1, d2) and for the state-dependent
/// reactions f_i(u, v). An empty `value` means the function is identically zero.
struct Bivariate {
  BivariateFn value;
  BivariateFn d_first;
  BivariateFn d_second;

  bool is_zero() const noexcept { return !value; }

  double operator()(double a, double b) const { return value ? value(a, b) : 0.0; }

  /// Partial derivative in argument 0 or 1. Falls back to central differences
  /// when no analytic partial was supplied and `allow_fallback` is set.
  double partial(int arg, double a, double b, bool allow_fallback) const {
    if (!value) return 0.0;
    const BivariateFn& given = arg == 0 ? d_first : d_second;
    if (given) return given(a, b);
    if (!allow_fallback) {
      throw MissingDerivative("partial derivative in argument " + std::to_string(arg) +
                              " not supplied and finite-difference fallback disabled");
    }
    return central_difference(value, arg, a, b);
  }
};

/// t^p * prod_d sin(k_d pi x_d): the manufactured solutions used here.
struct ManufacturedField {
  int dimension = 1;
  double time_power = 2.0;
  std::array<int, 2> waves{1, 1};

  double spatial(Point x) const {
    double s = std::sin(waves[0] * std::numbers::pi * x.x);
    if (dimension == 2) s *= std::sin(waves[1] * std::numbers::pi * x.y);
    return s;
  }

  double time_factor(double t) const { return std::pow(t, time_power); }

  double value(Point x, double t) const { return time_factor(t) * spatial(x); }

  Point gradient(Point x, double t) const {
    const double pi = std::numbers::pi;
    const double kx = waves[0] * pi;
    const double sx = std::sin(kx * x.x);
    const double cx = std::cos(kx * x.x);
    if (dimension == 1) return {time_factor(t) * kx * cx, 0.0};
    const double ky = waves[1] * pi;
    const double sy = std::sin(ky * x.y);
    const double cy = std::cos(ky * x.y);
    return {time_factor(t) * kx * cx * sy, time_factor(t) * ky * sx * cy};
  }

  double laplacian(Point x, double t) const {
    double k2 = waves[0] * waves[0];
    if (dimension == 2) k2 += waves[1] * waves[1];
    return -std::numbers::pi * std::numbers::pi * k2 * value(x, t);
  }

  /// Closed-form integral over the unit interval / square.
  double integral(double t) const {
    const auto one = [](int k) {
      return (k % 2 == 0) ? 0.0 : 2.0 / (k * std::numbers::pi);
    };
    double s = one(waves[0]);
    if (dimension == 2) s *= one(waves[1]);
    return time_factor(t) * s;
  }

  double caputo(double alpha, Point x, double t) const {
    return caputo_power(alpha, time_power, t) * spatial(x);
  }
};

/// Data of the coupled problem
///   D^alpha u - M1(l(u), l(v)) Lap u = f1(u, v) + g1(x, t),
///   D^alpha v - M2(l(u), l(v)) Lap v = f2(u, v) + g2(x, t),
/// with homogeneous Dirichlet and initial data.
struct ProblemSpec {
  std::string name;
  double alpha = 0.5;
  double final_time = 1.0;
  int dimension = 1;
  Bivariate m1;
  Bivariate m2;
  Bivariate f1;
  Bivariate f2;
  SpaceTimeFn g1;
  SpaceTimeFn g2;
  std::optional<ManufacturedField> u_exact;
  std::optional<ManufacturedField> v_exact;
  bool finite_difference_fallback = true;

  bool has_reaction() const noexcept { return !f1.is_zero() || !f2.is_zero(); }
};

/// Forcing g_i that makes the manufactured pair an exact solution:
/// g_i = D^alpha u_i - M_i(l(u), l(v)) Lap u_i - f_i(u, v).
inline std::pair<SpaceTimeFn, SpaceTimeFn> build_forcing(const ProblemSpec& spec) {
  if (!spec.u_exact || !spec.v_exact) {
    throw InvalidArgument("build_forcing: unsupported exact-solution structure (missing exact pair)");
  }
  for (const auto* f : {&*spec.u_exact, &*spec.v_exact}) {
    if (f->dimension != spec.dimension || !(f->time_power == 0.0 || f->time_power >= 1.0)) {
      throw InvalidArgument("build_forcing: unsupported exact-solution structure");
    }
  }
  const ManufacturedField u = *spec.u_exact;
  const ManufacturedField v = *spec.v_exact;
  const double alpha = spec.alpha;
  const Bivariate m1 = spec.m1, m2 = spec.m2, f1 = spec.f1, f2 = spec.f2;
  SpaceTimeFn g1 = [=](Point x, double t) {
    return u.caputo(alpha, x, t) - m1(u.integral(t), v.integral(t)) * u.laplacian(x, t) -
           f1(u.value(x, t), v.value(x, t));
  };
  SpaceTimeFn g2 = [=](Point x, double t) {
    return v.caputo(alpha, x, t) - m2(u.integral(t), v.integral(t)) * v.laplacian(x, t) -
           f2(u.value(x, t), v.value(x, t));
  };
  return {std::move(g1), std::move(g2)};
}

namespace detail {

inline Bivariate example_m1() {
  return {[](double z, double w) { return 3.0 + std::sin(z) + std::cos(w); },
          [](double z, double) { return std::cos(z); },
          [](double, double w) { return -std::sin(w); }};
}

inline Bivariate example_m2() {
  return {[](double z, double w) { return 5.0 + std::cos(z) + std::sin(w); },
          [](double z, double) { return -std::sin(z); },
          [](double, double w) { return std::cos(w); }};
}

inline ProblemSpec finish(ProblemSpec spec) {
  auto [g1, g2] = build_forcing(spec);
  spec.g1 = std::move(g1);
  spec.g2 = std::move(g2);
  return spec;
}

}  // namespace detail

/// 1D: M1 = 3 + sin z + cos w, M2 = 5 + cos z + sin w,
/// u = t^{2+alpha} sin 2 pi x, v = t^{3-alpha} sin pi x.
inline ProblemSpec example1(double alpha) {
  require_fractional_order(alpha, "example1");
  ProblemSpec spec;
  spec.name = "ex1";
  spec.alpha = alpha;
  spec.dimension = 1;
  spec.m1 = detail::example_m1();
  spec.m2 = detail::example_m2();
  spec.u_exact = ManufacturedField{1, 2.0 + alpha, {2, 1}};
  spec.v_exact = ManufacturedField{1, 3.0 - alpha, {1, 1}};
  return detail::finish(std::move(spec));
}

/// 2D on the unit square: same M1, M2,
/// u = t^3 sin 2 pi x sin 2 pi y, v = t^4 sin pi x sin pi y.
inline ProblemSpec example2(double alpha) {
  require_fractional_order(alpha, "example2");
  ProblemSpec spec;
  spec.name = "ex2";
  spec.alpha = alpha;
  spec.dimension = 2;
  spec.m1 = detail::example_m1();
  spec.m2 = detail::example_m2();
  spec.u_exact = ManufacturedField{2, 3.0, {2, 2}};
  spec.v_exact = ManufacturedField{2, 4.0, {1, 1}};
  return detail::finish(std::move(spec));
}

/// Example 1 with reactions f1 = u + v, f2 = u - v and compensated forcing.
inline ProblemSpec example1_reaction(double alpha) {
  ProblemSpec spec = example1(alpha);
  spec.name = "ex1-reaction";
  spec.f1 = {[](double u, double v) { return u + v; }, [](double, double) { return 1.0; },
             [](double, double) { return 1.0; }};
  spec.f2 = {[](double u, double v) { return u - v; }, [](double, double) { return 1.0; },
             [](double, double) { return -1.0; }};
  return detail::finish(std::move(spec));
}

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"ex1", "ex2", "ex1-reaction"};
  return names;
}

inline ProblemSpec make_problem(const std::string& name, double alpha) {
  if (name == "ex1") return example1(alpha);
  if (name == "ex2") return example2(alpha);
  if (name == "ex1-reaction") return example1_reaction(alpha);
  throw InvalidArgument("unknown problem '" + name + "'");
}

/// Sampled checks of the boundedness and Lipschitz hypotheses on M_i and f_i.
struct HypothesisReport {
  std::array<double, 2> m_min{};
  std::array<double, 2> m_max{};
  /// [i][arg]: difference-quotient Lipschitz estimates of M_i in d1 / d2.
  std::array<std::array<double, 2>, 2> m_lipschitz{};
  /// [i][arg]: estimates of f_i in u / v.
  std::array<std::array<double, 2>, 2> f_lipschitz{};
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Samples on a `sample_count` x `sample_count` grid of [-box, box]^2.
inline HypothesisReport hypothesis_check(const ProblemSpec& spec, std::size_t sample_count,
                                         double box = 10.0) {
  HypothesisReport report;
  const std::size_t n = std::max<std::size_t>(sample_count, 2);
  const double step = 2.0 * box / static_cast<double>(n - 1);
  const auto coord = [&](std::size_t i) { return -box + step * static_cast<double>(i); };

  const auto lipschitz = [&](const Bivariate& f, int arg) {
    double est = 0.0;
    if (f.is_zero()) return est;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double a = coord(i), b = coord(j);
        const double fa = f(a, b);
        const double fb = arg == 0 ? f(a + step, b) : f(a, b + step);
        est = std::max(est, std::abs(fb - fa) / step);
      }
    }
    return est;
  };

  const std::array<const Bivariate*, 2> ms{&spec.m1, &spec.m2};
  const std::array<const Bivariate*, 2> fs{&spec.f1, &spec.f2};
  for (std::size_t k = 0; k < 2; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double val = (*ms[k])(coord(i), coord(j));
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
    }
    report.m_min[k] = lo;
    report.m_max[k] = hi;
    const std::string tag = "M" + std::to_string(k + 1);
    if (!(lo > 0.0)) report.violations.push_back(tag + " not bounded below by a positive constant");
    if (!std::isfinite(hi)) report.violations.push_back(tag + " not bounded above");
    for (int arg = 0; arg < 2; ++arg) {
      report.m_lipschitz[k][static_cast<std::size_t>(arg)] = lipschitz(*ms[k], arg);
      report.f_lipschitz[k][static_cast<std::size_t>(arg)] = lipschitz(*fs[k], arg);
      if (!std::isfinite(report.m_lipschitz[k][static_cast<std::size_t>(arg)])) {
        report.violations.push_back(tag + " Lipschitz estimate not finite");
      }
      if (!std::isfinite(report.f_lipschitz[k][static_cast<std::size_t>(arg)])) {
        report.violations.push_back("f" + std::to_string(k + 1) + " Lipschitz estimate not finite");
      }
    }
  }
  return report;
}

}  // namespace fracnl
