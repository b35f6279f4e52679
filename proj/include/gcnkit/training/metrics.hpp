#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/dense.hpp"

namespace gcnkit {

/// Row argmax; ties go to the lowest class index.
inline std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

/// Fraction of masked nodes whose argmax matches the label.
inline double accuracy(const DenseMatrix& logits, std::span<const int> labels,
                       std::span<const std::size_t> mask) {
  if (mask.empty()) throw ContractViolation("accuracy: empty mask");
  if (labels.size() != logits.rows()) throw DimensionError("accuracy: label count != logits rows");
  std::size_t hits = 0;
  for (auto v : mask) {
    if (labels[v] < 0) throw ContractViolation("accuracy: masked node " + std::to_string(v) + " unlabeled");
    if (argmax_row(logits.row(v)) == static_cast<std::size_t>(labels[v])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

/// Mean masked cross-entropy outside the tape (log-sum-exp).
inline double softmax_cross_entropy_value(const DenseMatrix& logits, std::span<const int> labels,
                                          std::span<const std::size_t> mask) {
  if (mask.empty()) throw ContractViolation("softmax_cross_entropy: empty mask");
  double total = 0.0;
  for (auto v : mask) {
    if (labels[v] < 0) throw ContractViolation("softmax_cross_entropy: masked node unlabeled");
    auto row = logits.row(v);
    const double mx = *std::max_element(row.begin(), row.end());
    double se = 0.0;
    for (double z : row) se += std::exp(z - mx);
    total += mx + std::log(se) - row[static_cast<std::size_t>(labels[v])];
  }
  return total / static_cast<double>(mask.size());
}

}  // namespace gcnkit
