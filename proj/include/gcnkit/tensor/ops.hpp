#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/rng.hpp"
#include "gcnkit/tensor/dense.hpp"
#include "gcnkit/tensor/sparse.hpp"
#include "gcnkit/tensor/tape.hpp"

// Differentiable operations recorded on a Tape.
namespace gcnkit::ops {

inline Var matmul(Tape& t, Var a, Var b) {
  DenseMatrix out = gcnkit::matmul(t.value(a), t.value(b));
  return t.push(OpKind::matmul, {a.id, b.id}, std::move(out),
                [a, b](Tape& tp, const DenseMatrix& g) {
                  if (tp.requires_grad(a)) tp.accumulate(a.id, matmul_transpose_right(g, tp.value(b)));
                  if (tp.requires_grad(b)) tp.accumulate(b.id, matmul_transpose_left(tp.value(a), g));
                });
}

/// S * D for a constant sparse S. The tape keeps S alive until it is destroyed.
inline Var spmm(Tape& t, std::shared_ptr<const SparseMatrix> s, Var d) {
  DenseMatrix out = gcnkit::spmm(*s, t.value(d));
  return t.push(OpKind::spmm, {d.id}, std::move(out),
                [s = std::move(s), d](Tape& tp, const DenseMatrix& g) {
                  tp.accumulate(d.id, spmm_transpose(*s, g));
                });
}

/// S * W where S is a constant sparse input (features) and W a node.
inline Var sparse_input_matmul(Tape& t, std::shared_ptr<const SparseMatrix> s, Var w) {
  return spmm(t, std::move(s), w);
}

inline Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "ops::add");
  DenseMatrix out = t.value(a);
  auto o = out.values();
  auto bv = t.value(b).values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return t.push(OpKind::add, {a.id, b.id}, std::move(out), [a, b](Tape& tp, const DenseMatrix& g) {
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, g);
  });
}

/// x + 1*bias, broadcasting the 1 x c row over every row of x.
inline Var add_row(Tape& t, Var x, Var bias) {
  const auto& xv = t.value(x);
  const auto& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw DimensionError("ops::add_row: bias " + bv.shape() + " for input " + xv.shape());
  }
  DenseMatrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
  }
  return t.push(OpKind::add_row, {x.id, bias.id}, std::move(out),
                [x, bias](Tape& tp, const DenseMatrix& g) {
                  tp.accumulate(x.id, g);
                  if (tp.requires_grad(bias)) {
                    DenseMatrix gb(1, g.cols());
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
                    tp.accumulate(bias.id, gb);
                  }
                });
}

inline Var scale(Tape& t, Var x, double s) {
  DenseMatrix out = t.value(x);
  for (auto& v : out.values()) v *= s;
  return t.push(OpKind::scale, {x.id}, std::move(out), [x, s](Tape& tp, const DenseMatrix& g) {
    DenseMatrix c = g;
    for (auto& v : c.values()) v *= s;
    tp.accumulate(x.id, c);
  });
}

inline Var sum(Tape& t, Var x) {
  double s = 0.0;
  for (double v : t.value(x).values()) s += v;
  return t.push(OpKind::sum, {x.id}, DenseMatrix(1, 1, s), [x](Tape& tp, const DenseMatrix& g) {
    const auto& xv = tp.value(x);
    tp.accumulate(x.id, DenseMatrix(xv.rows(), xv.cols(), g(0, 0)));
  });
}

inline Var square(Tape& t, Var x) {
  DenseMatrix out = t.value(x);
  for (auto& v : out.values()) v *= v;
  return t.push(OpKind::square, {x.id}, std::move(out), [x](Tape& tp, const DenseMatrix& g) {
    DenseMatrix c = g;
    auto xv = tp.value(x).values();
    auto cv = c.values();
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] *= 2.0 * xv[i];
    tp.accumulate(x.id, c);
  });
}

/// log(1 + exp(x)) + offset, computed without overflow.
inline Var softplus(Tape& t, Var x, double offset = 0.0) {
  DenseMatrix out = t.value(x);
  for (auto& v : out.values()) {
    v = (v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v))) + offset;
  }
  return t.push(OpKind::softplus, {x.id}, std::move(out), [x](Tape& tp, const DenseMatrix& g) {
    DenseMatrix c = g;
    auto xv = tp.value(x).values();
    auto cv = c.values();
    for (std::size_t i = 0; i < cv.size(); ++i) {
      const double e = std::exp(-std::abs(xv[i]));
      const double sigmoid = xv[i] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      cv[i] *= sigmoid;
    }
    tp.accumulate(x.id, c);
  });
}

/**
 * @brief Inverted dropout: identity when !training, otherwise each entry is
 * zeroed with probability `rate` and survivors are scaled by 1/(1-rate).
 */
inline Var dropout(Tape& t, Var x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractViolation("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  DenseMatrix mask(t.value(x).rows(), t.value(x).cols());
  for (auto& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  DenseMatrix out = t.value(x);
  auto o = out.values();
  auto mv = mask.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= mv[i];
  return t.push(OpKind::dropout, {x.id}, std::move(out),
                [x, mask = std::move(mask)](Tape& tp, const DenseMatrix& g) {
                  DenseMatrix c = g;
                  auto cv = c.values();
                  auto mv = mask.values();
                  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] *= mv[i];
                  tp.accumulate(x.id, c);
                });
}

/// Inverted dropout on the stored entries of a constant sparse matrix.
inline SparseMatrix sparse_dropout(const SparseMatrix& s, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractViolation("sparse_dropout: rate must be in [0,1)");
  SparseMatrix out = s;
  if (rate == 0.0) return out;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& v : out.mutable_values()) v = rng.uniform() < rate ? 0.0 : v * keep_scale;
  return out;
}

/**
 * @brief Mean over `mask` of -log softmax(logits)[label], via log-sum-exp.
 *
 * Labels are per node; every masked node must carry a label >= 0.
 */
inline Var softmax_cross_entropy(Tape& t, Var logits, std::span<const int> labels,
                                 std::span<const std::size_t> mask) {
  if (mask.empty()) throw ContractViolation("softmax_cross_entropy: empty mask");
  const auto& z = t.value(logits);
  if (labels.size() != z.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + z.shape());
  }
  const std::size_t m = z.cols();
  // Gradient of the mean loss w.r.t. logits, filled during the forward pass.
  DenseMatrix dz(z.rows(), m);
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(mask.size());
  for (std::size_t node : mask) {
    const int y = labels[node];
    if (y < 0 || static_cast<std::size_t>(y) >= m) {
      throw ContractViolation("softmax_cross_entropy: masked node " + std::to_string(node) +
                              " has no valid label");
    }
    auto row = z.row(node);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double se = 0.0;
    for (double v : row) se += std::exp(v - mx);
    const double lse = mx + std::log(se);
    total += lse - row[static_cast<std::size_t>(y)];
    auto drow = dz.row(node);
    for (std::size_t j = 0; j < m; ++j) drow[j] += std::exp(row[j] - lse) * inv;
    drow[static_cast<std::size_t>(y)] -= inv;
  }
  return t.push(OpKind::softmax_cross_entropy, {logits.id}, DenseMatrix(1, 1, total * inv),
                [logits, dz = std::move(dz)](Tape& tp, const DenseMatrix& g) {
                  DenseMatrix c = dz;
                  for (auto& v : c.values()) v *= g(0, 0);
                  tp.accumulate(logits.id, c);
                });
}

}  // namespace gcnkit::ops
