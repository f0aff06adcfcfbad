#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "fracnl/errors.hpp"

namespace fracnl {

/// Coefficient vector. Entries are expected to stay finite.
using DenseVector = std::vector<double>;

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Immutable after construction.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Takes ownership of raw CSR arrays and validates them.
  SparseMatrix(std::size_t n_rows, std::size_t n_cols,
               std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> col_indices, std::vector<double> values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<std::size_t> offsets(n + 1);
    std::iota(offsets.begin(), offsets.end(), std::size_t{0});
    std::vector<std::size_t> cols(n);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    return SparseMatrix(n, n, std::move(offsets), std::move(cols),
                        std::vector<double>(n, 1.0));
  }

  std::size_t rows() const noexcept { return n_rows_; }
  std::size_t cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }

  std::size_t row_nnz(std::size_t r) const {
    return row_offsets_.at(r + 1) - row_offsets_[r];
  }

  /// Entry (r, c); zero when not stored.
  double at(std::size_t r, std::size_t c) const {
    if (r >= n_rows_ || c >= n_cols_) {
      throw IndexOutOfRange("SparseMatrix::at: index out of range");
    }
    const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r]);
    const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r + 1]);
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return 0.0;
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
  }

  /// Row-major dense copy; intended for small matrices and tests.
  std::vector<double> to_dense() const {
    std::vector<double> dense(n_rows_ * n_cols_, 0.0);
    for (std::size_t r = 0; r < n_rows_; ++r) {
      for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
        dense[r * n_cols_ + col_indices_[k]] = values_[k];
      }
    }
    return dense;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  void validate() const {
    if (row_offsets_.size() != n_rows_ + 1 || row_offsets_.front() != 0) {
      throw InvalidArgument("SparseMatrix: row_offsets must have n_rows+1 entries starting at 0");
    }
    for (std::size_t r = 0; r < n_rows_; ++r) {
      if (row_offsets_[r + 1] < row_offsets_[r]) {
        throw InvalidArgument("SparseMatrix: row_offsets must be nondecreasing");
      }
      for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
        if (col_indices_.at(k) >= n_cols_ ||
            (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1])) {
          throw InvalidArgument("SparseMatrix: column indices must be increasing and in range");
        }
      }
    }
    if (col_indices_.size() != row_offsets_.back() || values_.size() != col_indices_.size()) {
      throw InvalidArgument("SparseMatrix: array lengths disagree with row_offsets");
    }
  }

  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

/// Builds a CSR matrix, summing duplicate (row, col) contributions.
///
/// Triplets are sorted by (row, col, value) before summation so the result is
/// bit-identical for any permutation of the input list.
inline SparseMatrix assemble_from_triplets(std::size_t n_rows, std::size_t n_cols,
                                           std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= n_rows || t.col >= n_cols) {
      throw IndexOutOfRange("assemble_from_triplets: (" + std::to_string(t.row) + "," +
                            std::to_string(t.col) + ") outside " + std::to_string(n_rows) +
                            "x" + std::to_string(n_cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.row, a.col, a.value) < std::tie(b.row, b.col, b.value);
  });

  std::vector<std::size_t> offsets(n_rows + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (k > 0 && t.row == triplets[k - 1].row && t.col == triplets[k - 1].col) {
      vals.back() += t.value;
      continue;
    }
    cols.push_back(t.col);
    vals.push_back(t.value);
    ++offsets[t.row + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

inline SparseMatrix assemble_from_triplets(std::size_t n_rows, std::size_t n_cols,
                                           std::span<const Triplet> triplets) {
  return assemble_from_triplets(n_rows, n_cols,
                                std::vector<Triplet>(triplets.begin(), triplets.end()));
}

inline DenseVector spmv(const SparseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw DimensionMismatch("spmv: matrix has " + std::to_string(a.cols()) +
                            " columns, vector has " + std::to_string(x.size()) + " entries");
  }
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  DenseVector y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) sum += vals[k] * x[cols[k]];
    y[r] = sum;
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

/// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

namespace detail {

inline Eigen::SparseMatrix<double> to_eigen(const SparseMatrix& a) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(a.nnz());
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      entries.emplace_back(static_cast<int>(r), static_cast<int>(cols[k]), vals[k]);
    }
  }
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(a.rows()),
                                static_cast<Eigen::Index>(a.cols()));
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  return m;
}

}  // namespace detail

/// Solves A x = b by sparse LU with partial pivoting (COLAMD ordering).
///
/// A pivot below 1e-14 times the largest entry of A, a failed factorization,
/// or a final relative residual above 1e-10 (after up to two refinement sweeps)
/// raises SingularMatrix.
inline DenseVector linear_solve(const SparseMatrix& a, std::span<const double> b) {
  if (a.rows() != a.cols()) throw DimensionMismatch("linear_solve: matrix is not square");
  if (a.rows() != b.size()) throw DimensionMismatch("linear_solve: right-hand side length mismatch");
  if (!all_finite(a.values()) || !all_finite(b)) {
    throw InvalidArgument("linear_solve: non-finite input");
  }
  const std::size_t n = a.rows();
  if (n == 0) return {};
  const double scale = a.max_abs();
  if (scale == 0.0) throw SingularMatrix("linear_solve: zero matrix");

  const Eigen::SparseMatrix<double> m = detail::to_eigen(a);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(m);
  lu.factorize(m);
  if (lu.info() != Eigen::Success) {
    throw SingularMatrix("linear_solve: LU factorization failed (" + lu.lastErrorMessage() + ")");
  }
  // U's diagonal lives in the supernodal L storage.
  const auto& lstore = lu.matrixL().m_mapL;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double pivot = 0.0;
    for (typename std::decay_t<decltype(lstore)>::InnerIterator it(lstore, j); it; ++it) {
      if (it.index() == j) {
        pivot = it.value();
        break;
      }
    }
    if (std::abs(pivot) < 1e-14 * scale) {
      throw SingularMatrix("linear_solve: pivot " + std::to_string(pivot) + " below threshold");
    }
  }

  const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd x = lu.solve(rhs);
  const double bound = 1e-10 * (rhs.norm() + 1.0);
  Eigen::VectorXd r = rhs - m * x;
  for (int sweep = 0; sweep < 2 && r.norm() > 1e-2 * bound; ++sweep) {
    x += lu.solve(r);
    r = rhs - m * x;
  }
  if (!x.allFinite() || !(r.norm() <= bound)) {
    throw SingularMatrix("linear_solve: residual " + std::to_string(r.norm()) +
                         " exceeds bound " + std::to_string(bound));
  }
  return DenseVector(x.data(), x.data() + n);
}

}  // namespace fracnl
