#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fracnl/errors.hpp"
#include "fracnl/linalg.hpp"

namespace fracnl {

inline void require_fractional_order(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidArgument(std::string(where) + ": alpha must lie in (0,1), got " +
                          std::to_string(alpha));
  }
}

/// Coefficients b_0..b_N of the fractional Crank-Nicolson operator,
/// b_k = (-1)^k binom(alpha, k).
class FractionalWeights {
 public:
  FractionalWeights(double alpha, std::size_t n) : alpha_(alpha) {
    require_fractional_order(alpha, "FractionalWeights");
    if (n < 1) throw InvalidArgument("FractionalWeights: N must be at least 1");
    b_.resize(n + 1);
    b_[0] = 1.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const double kd = static_cast<double>(k);
      b_[k] = b_[k - 1] * (kd - 1.0 - alpha) / kd;
    }
  }

  double alpha() const noexcept { return alpha_; }
  std::size_t size() const noexcept { return b_.size(); }
  double operator[](std::size_t k) const { return b_.at(k); }
  std::span<const double> values() const noexcept { return b_; }

 private:
  double alpha_;
  std::vector<double> b_;
};

inline FractionalWeights weights(double alpha, std::size_t n) { return FractionalWeights(alpha, n); }

/// Stored time levels W^0, W^1, ... on a uniform grid of step tau.
/// W^0 is the zero vector (homogeneous initial data).
class HistoryBuffer {
 public:
  HistoryBuffer(std::size_t length, double tau) : tau_(tau) {
    if (!(tau > 0.0)) throw InvalidArgument("HistoryBuffer: tau must be positive");
    states_.emplace_back(length, 0.0);
  }

  double tau() const noexcept { return tau_; }
  std::size_t size() const noexcept { return states_.size(); }
  std::size_t length() const noexcept { return states_.front().size(); }
  const DenseVector& operator[](std::size_t j) const { return states_.at(j); }

  void append(DenseVector state) {
    if (state.size() != length()) throw DimensionMismatch("HistoryBuffer::append: length mismatch");
    states_.push_back(std::move(state));
  }

 private:
  double tau_;
  std::vector<DenseVector> states_;
};

/// tau^{-alpha} * sum_{j=1}^{n-1} b_{n-j} W^j. Empty sum for n = 1.
inline DenseVector history_term(const FractionalWeights& w, const HistoryBuffer& h, std::size_t n) {
  if (n < 1 || n > h.size() || n >= w.size()) {
    throw IndexOutOfRange("history_term: step " + std::to_string(n) + " outside history of " +
                          std::to_string(h.size()) + " levels / " + std::to_string(w.size()) +
                          " weights");
  }
  DenseVector out(h.length(), 0.0);
  for (std::size_t j = 1; j < n; ++j) axpy(w[n - j], h[j], out);
  const double scale = std::pow(h.tau(), -w.alpha());
  for (double& v : out) v *= scale;
  return out;
}

/// D_tau^alpha W^n = tau^{-alpha} * sum_{j=0}^{n} b_{n-j} W^j, approximating the
/// Caputo derivative at t_{n - alpha/2}.
inline DenseVector discrete_caputo(const FractionalWeights& w, const HistoryBuffer& h,
                                   std::span<const double> current, std::size_t n) {
  if (current.size() != h.length()) throw DimensionMismatch("discrete_caputo: length mismatch");
  DenseVector out = history_term(w, h, n);
  // j = 0 term: W^0 = 0.
  axpy(w[0] * std::pow(h.tau(), -w.alpha()), current, out);
  return out;
}

/// Caputo derivative of order alpha of t^beta.
inline double caputo_power(double alpha, double beta, double t) {
  require_fractional_order(alpha, "caputo_power");
  if (beta == 0.0) return 0.0;
  if (beta < 1.0) throw InvalidArgument("caputo_power: exponent must be 0 or >= 1");
  if (t < 0.0) throw InvalidArgument("caputo_power: t must be nonnegative");
  if (t == 0.0) return 0.0;
  return std::tgamma(beta + 1.0) / std::tgamma(beta + 1.0 - alpha) * std::pow(t, beta - alpha);
}

}  // namespace fracnl
