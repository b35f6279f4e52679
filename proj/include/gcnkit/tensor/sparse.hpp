#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/dense.hpp"

namespace gcnkit {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

enum class Duplicates { sum, keep_last };

/**
 * @brief Compressed sparse row matrix.
 *
 * Column indices are strictly increasing inside each row and there are no
 * repeated coordinates. All sparse inputs are converted to this at the
 * boundary; there is no other sparse format in the library.
 */
class SparseMatrix {
 public:
  SparseMatrix() : row_offsets_(1, 0) {}
  SparseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

  /// Takes ownership of raw CSR arrays and checks every structural invariant.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> col_indices, std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets,
                                    Duplicates policy = Duplicates::sum) {
    for (const auto& t : triplets) {
      if (t.row >= rows || t.col >= cols) {
        throw DimensionError("from_triplets: entry (" + std::to_string(t.row) + "," +
                             std::to_string(t.col) + ") outside " +
                             DenseMatrix::shape_string(rows, cols));
      }
    }
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m(rows, cols);
    m.col_indices_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      const auto& t = triplets[i];
      if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
        if (policy == Duplicates::sum) {
          m.values_.back() += t.value;
        } else {
          m.values_.back() = t.value;
        }
        continue;
      }
      m.col_indices_.push_back(t.col);
      m.values_.push_back(t.value);
      ++m.row_offsets_[t.row + 1];
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
    return m;
  }

  static SparseMatrix from_dense(const DenseMatrix& d) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j)
        if (d(i, j) != 0.0) t.push_back({i, j, d(i, j)});
    return from_triplets(d.rows(), d.cols(), std::move(t));
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }
  /// Values may be rewritten in place; the sparsity pattern may not.
  std::span<double> mutable_values() noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const noexcept {
    return {col_indices_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }
  std::size_t row_nnz(std::size_t r) const noexcept {
    return row_offsets_[r + 1] - row_offsets_[r];
  }

  /// Stored value at (r, c), or nullopt when the coordinate is structurally zero.
  std::optional<double> find(std::size_t r, std::size_t c) const {
    auto cols = row_cols(r);
    auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return std::nullopt;
    return values_[row_offsets_[r] + static_cast<std::size_t>(it - cols.begin())];
  }
  double at(std::size_t r, std::size_t c) const { return find(r, c).value_or(0.0); }

  bool same_pattern(const SparseMatrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_ && row_offsets_ == o.row_offsets_ &&
           col_indices_ == o.col_indices_;
  }

  std::string shape() const { return DenseMatrix::shape_string(rows_, cols_); }

  bool operator==(const SparseMatrix&) const = default;

  void validate() const {
    if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 ||
        row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size()) {
      throw ContractViolation("SparseMatrix: inconsistent CSR array lengths");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      if (row_offsets_[r] > row_offsets_[r + 1]) {
        throw ContractViolation("SparseMatrix: row offsets decrease at row " + std::to_string(r));
      }
      for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
        if (col_indices_[k] >= cols_) {
          throw ContractViolation("SparseMatrix: column index out of range in row " +
                                  std::to_string(r));
        }
        if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
          throw ContractViolation("SparseMatrix: columns not strictly increasing in row " +
                                  std::to_string(r));
        }
      }
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

inline DenseMatrix to_dense(const SparseMatrix& s) {
  DenseMatrix d(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) d(r, cols[k]) = vals[k];
  }
  return d;
}

inline SparseMatrix transpose(const SparseMatrix& s) {
  std::vector<Triplet> t;
  t.reserve(s.nnz());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) t.push_back({cols[k], r, vals[k]});
  }
  return SparseMatrix::from_triplets(s.cols(), s.rows(), std::move(t));
}

/// S * D. Each output row is accumulated in stored column order, so the result
/// is bit-reproducible for a given input.
inline DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.cols() != d.rows()) {
    throw DimensionError("spmm: sparse " + s.shape() + " * dense " + d.shape());
  }
  DenseMatrix out(s.rows(), d.cols());
  const std::size_t width = d.cols();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    auto orow = out.row(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double v = vals[k];
      auto drow = d.row(cols[k]);
      for (std::size_t j = 0; j < width; ++j) orow[j] += v * drow[j];
    }
  }
  return out;
}

/// S^T * G by scattering rows of G; used for gradients through spmm.
inline DenseMatrix spmm_transpose(const SparseMatrix& s, const DenseMatrix& g) {
  if (s.rows() != g.rows()) {
    throw DimensionError("spmm_transpose: sparse " + s.shape() + "^T * dense " + g.shape());
  }
  DenseMatrix out(s.cols(), g.cols());
  const std::size_t width = g.cols();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    auto grow = g.row(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double v = vals[k];
      auto orow = out.row(cols[k]);
      for (std::size_t j = 0; j < width; ++j) orow[j] += v * grow[j];
    }
  }
  return out;
}

/// Structural and numerical symmetry: (u,v) stored iff (v,u) stored, values within tol.
inline bool is_symmetric(const SparseMatrix& s, double tol = 0.0) {
  if (s.rows() != s.cols()) return false;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto mirror = s.find(cols[k], r);
      if (!mirror || std::abs(*mirror - vals[k]) > tol) return false;
    }
  }
  return true;
}

inline bool has_zero_diagonal(const SparseMatrix& s) {
  for (std::size_t r = 0; r < std::min(s.rows(), s.cols()); ++r) {
    if (s.find(r, r)) return false;
  }
  return true;
}

/// Divides each row by its sum; all-zero rows are left untouched.
inline SparseMatrix row_normalized(SparseMatrix s) {
  auto vals = s.mutable_values();
  auto offs = s.row_offsets();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = offs[r]; k < offs[r + 1]; ++k) sum += vals[k];
    if (sum == 0.0) continue;
    for (std::size_t k = offs[r]; k < offs[r + 1]; ++k) vals[k] /= sum;
  }
  return s;
}

}  // namespace gcnkit
