#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lindt/error.hpp"

namespace lindt {

using NodeId = std::uint32_t;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Square sparse matrix in compressed-sparse-row form with real values.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> indptr;  // n + 1 entries
  std::vector<NodeId> indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return indices.size(); }

  /// Value at (i, j), zero when not stored. Column indices are sorted per row.
  double at(std::size_t i, std::size_t j) const {
    for (std::size_t p = indptr[i]; p < indptr[i + 1]; ++p) {
      if (indices[p] == j) return values[p];
    }
    return 0.0;
  }

  Matrix to_dense() const {
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = indptr[i]; p < indptr[i + 1]; ++p) d(i, indices[p]) = values[p];
    return d;
  }
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

/// C = A * B. Zero entries of A are skipped, which makes this cheap for sparse
/// bag-of-words feature matrices.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                          " vs " + std::to_string(b.rows()) + ")");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

/// C = A^T * B, skipping zero entries of A.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows(), "matmul_at_b: row counts differ");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto brow = b.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto out = c.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

/// C = A * B^T.
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_a_bt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

/// C = S * B for CSR S.
inline Matrix spmm(const SparseMatrix& s, const Matrix& b) {
  require_shape(s.n == b.rows(), "spmm: sparse matrix order " + std::to_string(s.n) + " vs " +
                                     std::to_string(b.rows()) + " dense rows");
  Matrix c(s.n, b.cols());
  for (std::size_t i = 0; i < s.n; ++i) {
    auto out = c.row(i);
    for (std::size_t p = s.indptr[i]; p < s.indptr[i + 1]; ++p) {
      const double v = s.values[p];
      auto brow = b.row(s.indices[p]);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += v * brow[j];
    }
  }
  return c;
}

}  // namespace lindt
