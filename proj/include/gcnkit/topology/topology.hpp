#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/sparse.hpp"

namespace gcnkit {

/// Which values are placed on the diagonal of A before normalization.
enum class DiagMode { identity, clustering_coefficients };

inline const char* to_string(DiagMode m) {
  return m == DiagMode::identity ? "identity" : "clustering_coefficients";
}

/**
 * @brief Local clustering coefficient of every node.
 *
 * CC_i = delta_i / (k_i (k_i - 1)) where delta_i counts ordered pairs of
 * adjacent neighbours of i (twice the triangles through i). Nodes of degree
 * below two get 0. Triangles are found by merging the sorted neighbour lists
 * of i and each neighbour j.
 */
inline std::vector<double> local_clustering_coefficients(const SparseMatrix& adjacency) {
  if (!is_symmetric(adjacency)) {
    throw ContractViolation("local_clustering_coefficients: adjacency must be symmetric");
  }
  if (!has_zero_diagonal(adjacency)) {
    throw ContractViolation("local_clustering_coefficients: adjacency must have zero diagonal");
  }
  const std::size_t n = adjacency.rows();
  std::vector<double> cc(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto ni = adjacency.row_cols(i);
    const std::size_t k = ni.size();
    if (k < 2) continue;
    std::size_t ordered_pairs = 0;
    for (std::size_t j : ni) {
      auto nj = adjacency.row_cols(j);
      // |N(i) ∩ N(j)| by merge; each common neighbour w gives the ordered pair (j, w).
      std::size_t a = 0, b = 0;
      while (a < ni.size() && b < nj.size()) {
        if (ni[a] < nj[b]) {
          ++a;
        } else if (nj[b] < ni[a]) {
          ++b;
        } else {
          ++ordered_pairs;
          ++a;
          ++b;
        }
      }
    }
    cc[i] = static_cast<double>(ordered_pairs) / static_cast<double>(k * (k - 1));
  }
  return cc;
}

/// Per-node values for the diagonal of A_tilde = A + diag(values).
inline std::vector<double> build_diagonal(DiagMode mode, std::size_t n,
                                          std::optional<std::span<const double>> cc = std::nullopt) {
  if (mode == DiagMode::identity) return std::vector<double>(n, 1.0);
  if (!cc) throw ConfigError("build_diagonal: clustering_coefficients mode needs a CC vector");
  if (cc->size() != n) {
    throw ConfigError("build_diagonal: CC vector has " + std::to_string(cc->size()) +
                      " entries for " + std::to_string(n) + " nodes");
  }
  return {cc->begin(), cc->end()};
}

/// The normalized propagator D^-1/2 (A + diag) D^-1/2 and the diagonal it was built with.
struct PropagatorMatrix {
  SparseMatrix matrix;
  DiagMode diag_mode = DiagMode::identity;
  /// Row sums of A + diag, kept for the eigenpair check and reweighting.
  std::vector<double> degrees;
};

/**
 * @brief Symmetric normalization of A + diag(diag).
 *
 * Zero diagonal values are not stored, so with CC diagonals the self-loop of a
 * node with CC 0 is absent. Rows whose augmented degree is zero (isolated
 * nodes with a zero diagonal) stay empty.
 */
inline PropagatorMatrix normalize_adjacency(const SparseMatrix& adjacency,
                                            std::span<const double> diag,
                                            DiagMode mode = DiagMode::identity) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw DimensionError("normalize_adjacency: adjacency " + adjacency.shape());
  if (diag.size() != n) throw DimensionError("normalize_adjacency: diagonal length mismatch");
  if (!is_symmetric(adjacency) || !has_zero_diagonal(adjacency)) {
    throw ContractViolation("normalize_adjacency: adjacency must be symmetric with zero diagonal");
  }
  for (double v : diag) {
    if (!(v >= 0.0)) throw ContractViolation("normalize_adjacency: negative diagonal value");
  }
  std::vector<Triplet> t;
  t.reserve(adjacency.nnz() + n);
  std::vector<double> degree(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto cols = adjacency.row_cols(r);
    auto vals = adjacency.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      t.push_back({r, cols[k], vals[k]});
      degree[r] += vals[k];
    }
    if (diag[r] != 0.0) {
      t.push_back({r, r, diag[r]});
      degree[r] += diag[r];
    }
  }
  SparseMatrix augmented = SparseMatrix::from_triplets(n, n, std::move(t));
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
  auto vals = augmented.mutable_values();
  auto offs = augmented.row_offsets();
  auto cols = augmented.col_indices();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = offs[r]; k < offs[r + 1]; ++k) {
      vals[k] *= inv_sqrt[r] * inv_sqrt[cols[k]];  // commutative product keeps P bit-symmetric
    }
  }
  return {std::move(augmented), mode, std::move(degree)};
}

/// Convenience: propagator for `mode`, computing CCs when needed.
inline PropagatorMatrix build_propagator(const SparseMatrix& adjacency, DiagMode mode) {
  std::vector<double> diag;
  if (mode == DiagMode::clustering_coefficients) {
    auto cc = local_clustering_coefficients(adjacency);
    diag = build_diagonal(mode, adjacency.rows(), std::span<const double>(cc));
  } else {
    diag = build_diagonal(mode, adjacency.rows());
  }
  return normalize_adjacency(adjacency, diag, mode);
}

/// Row-stochastic D^-1 (A + I); the mean-aggregation propagator.
inline SparseMatrix mean_aggregation_propagator(const SparseMatrix& adjacency) {
  std::vector<Triplet> t;
  const std::size_t n = adjacency.rows();
  for (std::size_t r = 0; r < n; ++r) {
    for (auto c : adjacency.row_cols(r)) t.push_back({r, c, 1.0});
    t.push_back({r, r, 1.0});
  }
  return row_normalized(SparseMatrix::from_triplets(n, n, std::move(t)));
}

}  // namespace gcnkit
