#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/layers/model.hpp"
#include "gcnkit/tensor/dense.hpp"
#include "gcnkit/tensor/ops.hpp"
#include "gcnkit/tensor/sparse.hpp"
#include "gcnkit/tensor/tape.hpp"

namespace gcnkit {

/// Added to softplus(raw) so precisions stay strictly positive.
inline constexpr double kPrecisionFloor = 1e-6;

/**
 * @brief Per-node label scores mu (n x m) and diagonal precisions.
 *
 * The precision (inverse variance) of entry (v, i) is
 * softplus(raw_precision(v, i)) + kPrecisionFloor.
 */
struct ConfidenceState {
  DenseMatrix mu;
  DenseMatrix raw_precision;

  bool operator==(const ConfidenceState&) const = default;
};

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Raw value whose mapped precision is `precision`.
inline double inverse_softplus(double precision) {
  const double y = precision - kPrecisionFloor;
  return y > 30.0 ? y : std::log(std::expm1(y));
}

/// mu = 0, every precision = 1.
inline ConfidenceState initial_confidence_state(std::size_t nodes, std::size_t classes) {
  return {DenseMatrix(nodes, classes), DenseMatrix(nodes, classes, inverse_softplus(1.0))};
}

inline DenseMatrix precision_of(const ConfidenceState& s) {
  DenseMatrix p = s.raw_precision;
  for (auto& v : p.values()) v = softplus(v) + kPrecisionFloor;
  return p;
}

/// sum_i (mu_u[i] - mu_v[i])^2 (prec_u[i] + prec_v[i]).
inline double mahalanobis(std::span<const double> mu_u, std::span<const double> mu_v,
                          std::span<const double> prec_u, std::span<const double> prec_v) {
  if (mu_u.size() != mu_v.size() || prec_u.size() != mu_u.size() || prec_v.size() != mu_u.size()) {
    throw DimensionError("mahalanobis: vector lengths differ");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < mu_u.size(); ++i) {
    if (!(prec_u[i] > 0.0) || !(prec_v[i] > 0.0)) {
      throw ContractViolation("mahalanobis: precisions must be > 0");
    }
    const double diff = mu_u[i] - mu_v[i];
    d += diff * diff * (prec_u[i] + prec_v[i]);
  }
  return d;
}

/// r = 1 / (d + epsilon).
inline double influence(double d, double epsilon = 1.0) {
  if (!(d >= 0.0)) throw ContractViolation("influence: distance must be >= 0");
  if (!(epsilon > 0.0)) throw ContractViolation("influence: epsilon must be > 0");
  return 1.0 / (d + epsilon);
}

/// Pattern of A + I with unit values.
inline SparseMatrix self_loop_support(const SparseMatrix& adjacency) {
  std::vector<Triplet> t;
  t.reserve(adjacency.nnz() + adjacency.rows());
  for (std::size_t r = 0; r < adjacency.rows(); ++r) {
    for (auto c : adjacency.row_cols(r)) t.push_back({r, c, 1.0});
    t.push_back({r, r, 1.0});
  }
  return SparseMatrix::from_triplets(adjacency.rows(), adjacency.cols(), std::move(t),
                                     Duplicates::keep_last);
}

/**
 * @brief Influence scores r_uv on the stored pattern of `support`.
 *
 * Values of `support` are ignored; only its pattern is used. With `normalize`
 * each row is divided by its sum.
 */
inline SparseMatrix build_influence_matrix(const SparseMatrix& support, const ConfidenceState& state,
                                           double epsilon = 1.0, bool normalize = false) {
  const std::size_t n = support.rows();
  if (state.mu.rows() != n || !state.mu.same_shape(state.raw_precision)) {
    throw DimensionError("build_influence_matrix: state " + state.mu.shape() + " for graph " +
                         support.shape());
  }
  const DenseMatrix prec = precision_of(state);
  SparseMatrix r = support;
  auto vals = r.mutable_values();
  auto offs = r.row_offsets();
  auto cols = r.col_indices();
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t k = offs[v]; k < offs[v + 1]; ++k) {
      const std::size_t u = cols[k];
      vals[k] = influence(mahalanobis(state.mu.row(u), state.mu.row(v), prec.row(u), prec.row(v)),
                          epsilon);
    }
  }
  return normalize ? row_normalized(std::move(r)) : r;
}

/**
 * @brief The operator a confidence graph layer aggregates with.
 *
 * - raw_influence: raw r_uv on A + I.
 * - adjacency support: r_uv on A + I, row-normalized when `normalize`.
 * - propagator support: P_uv r_uv; when `normalize`, each row is rescaled so
 *   its sum equals the row sum of P. A uniform state then reproduces P.
 */
inline SparseMatrix confidence_operator(const SparseMatrix& adjacency, const SparseMatrix& propagator,
                                        const ConfidenceState& state, const ConfidenceOptions& opt) {
  if (opt.raw_influence) return build_influence_matrix(self_loop_support(adjacency), state, opt.epsilon, false);
  if (opt.support == InfluenceSupport::adjacency) {
    return build_influence_matrix(self_loop_support(adjacency), state, opt.epsilon, opt.normalize);
  }
  SparseMatrix r = build_influence_matrix(propagator, state, opt.epsilon, false);
  auto rv = r.mutable_values();
  auto pv = propagator.values();
  auto offs = r.row_offsets();
  for (std::size_t v = 0; v < r.rows(); ++v) {
    double p_mass = 0.0;
    double weighted = 0.0;
    for (std::size_t k = offs[v]; k < offs[v + 1]; ++k) {
      rv[k] *= pv[k];
      p_mass += pv[k];
      weighted += rv[k];
    }
    if (!opt.normalize || weighted == 0.0) continue;
    const double rescale = p_mass / weighted;
    for (std::size_t k = offs[v]; k < offs[v + 1]; ++k) rv[k] *= rescale;
  }
  return r;
}

/// Undirected edge list (u < v) of a symmetric adjacency.
inline std::vector<std::pair<std::size_t, std::size_t>> undirected_edges(const SparseMatrix& adjacency) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  e.reserve(adjacency.nnz() / 2);
  for (std::size_t u = 0; u < adjacency.rows(); ++u)
    for (auto v : adjacency.row_cols(u))
      if (v > u) e.emplace_back(u, v);
  return e;
}

namespace ops {

/// sum over edges (u, v) of d_M(u, v) for mu and precision nodes.
inline Var mahalanobis_edges(Tape& t, Var mu, Var prec,
                             std::shared_ptr<const std::vector<std::pair<std::size_t, std::size_t>>> edges) {
  const auto& m = t.value(mu);
  const auto& p = t.value(prec);
  require_same_shape(m, p, "mahalanobis_edges");
  double total = 0.0;
  for (auto [u, v] : *edges) total += mahalanobis(m.row(u), m.row(v), p.row(u), p.row(v));
  return t.push(OpKind::mahalanobis_edges, {mu.id, prec.id}, DenseMatrix(1, 1, total),
                [mu, prec, edges = std::move(edges)](Tape& tp, const DenseMatrix& g) {
                  const auto& mv = tp.value(mu);
                  const auto& pv = tp.value(prec);
                  const double s = g(0, 0);
                  DenseMatrix dmu(mv.rows(), mv.cols());
                  DenseMatrix dprec(pv.rows(), pv.cols());
                  for (auto [u, v] : *edges) {
                    for (std::size_t i = 0; i < mv.cols(); ++i) {
                      const double diff = mv(u, i) - mv(v, i);
                      const double w = pv(u, i) + pv(v, i);
                      dmu(u, i) += s * 2.0 * diff * w;
                      dmu(v, i) -= s * 2.0 * diff * w;
                      dprec(u, i) += s * diff * diff;
                      dprec(v, i) += s * diff * diff;
                    }
                  }
                  tp.accumulate(mu.id, dmu);
                  tp.accumulate(prec.id, dprec);
                });
}

}  // namespace ops

struct ConfidenceLossTerms {
  Var label;
  Var smooth;
  Var reg;
  Var total;
};

/**
 * @brief L_label + lambda_smooth * L_smooth + lambda_reg * L_reg.
 *
 * L_label is the mean cross-entropy of softmax(mu) on `train_mask`, L_smooth
 * sums d_M over undirected edges and L_reg sums every precision entry.
 */
inline ConfidenceLossTerms confidence_loss(
    Tape& t, Var mu, Var raw_precision, std::span<const int> labels,
    std::span<const std::size_t> train_mask,
    std::shared_ptr<const std::vector<std::pair<std::size_t, std::size_t>>> edges,
    double lambda_smooth, double lambda_reg) {
  if (lambda_smooth < 0.0 || lambda_reg < 0.0) {
    throw ContractViolation("confidence_loss: lambdas must be >= 0");
  }
  ConfidenceLossTerms terms;
  Var prec = ops::softplus(t, raw_precision, kPrecisionFloor);
  terms.label = ops::softmax_cross_entropy(t, mu, labels, train_mask);
  terms.smooth = ops::mahalanobis_edges(t, mu, prec, std::move(edges));
  terms.reg = ops::sum(t, prec);
  terms.total = ops::add(t, terms.label,
                         ops::add(t, ops::scale(t, terms.smooth, lambda_smooth),
                                  ops::scale(t, terms.reg, lambda_reg)));
  return terms;
}

/// Tape-free confgcn layer: activation(R (H W + 1 b)).
inline DenseMatrix confgcn_layer_forward(const SparseMatrix& r, const DenseMatrix& h, const DenseMatrix& w,
                                         const DenseMatrix& b, const ActivationSpec& spec) {
  if (r.rows() != r.cols() || r.cols() != h.rows()) {
    throw ContractViolation("confgcn_layer_forward: operator " + r.shape() + " for input " + h.shape());
  }
  return apply_activation(spec, spmm(r, dense_affine(h, w, b)));
}

}  // namespace gcnkit
