#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/dense.hpp"

namespace gcnkit {

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::size_t id = 0;
  friend bool operator==(Var, Var) = default;
};

enum class OpKind {
  leaf,
  constant,
  matmul,
  spmm,
  add,
  add_row,
  scale,
  sum,
  square,
  activation,
  convex_activation,
  dropout,
  softmax_cross_entropy,
  softplus,
  mahalanobis_edges,
};

/**
 * @brief Append-only reverse-mode autodiff tape over DenseMatrix values.
 *
 * Nodes are pushed in evaluation order, so parents always carry smaller ids.
 * backward() walks ids in descending order and each node adds its
 * contribution into its parents' gradient slots; the fixed walk order makes the
 * accumulated sums bit-reproducible.
 *
 * A tape is built for one forward pass and then discarded.
 */
class Tape {
 public:
  /// Receives the node's upstream gradient; pushes contributions with accumulate().
  using BackwardFn = std::function<void(Tape&, const DenseMatrix& grad_out)>;

  Var leaf(DenseMatrix value) { return push(OpKind::leaf, {}, std::move(value), nullptr, true); }
  Var constant(DenseMatrix value) {
    return push(OpKind::constant, {}, std::move(value), nullptr, false);
  }

  /// Records a computed node. requires_grad is inherited from the parents.
  Var push(OpKind kind, std::vector<std::size_t> parents, DenseMatrix value, BackwardFn backward) {
    bool rg = false;
    for (auto p : parents) rg = rg || nodes_.at(p).requires_grad;
    return push(kind, std::move(parents), std::move(value), std::move(backward), rg);
  }

  const DenseMatrix& value(Var v) const { return nodes_.at(v.id).value; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  const std::vector<std::size_t>& parents(Var v) const { return nodes_.at(v.id).parents; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient of the last backward() loss w.r.t. v; zeros when v did not influence it.
  const DenseMatrix& grad(Var v) {
    auto& n = nodes_.at(v.id);
    if (!n.grad.same_shape(n.value)) n.grad = DenseMatrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void accumulate(std::size_t id, const DenseMatrix& contribution) {
    auto& n = nodes_.at(id);
    if (!n.requires_grad) return;
    require_same_shape(n.value, contribution, "Tape::accumulate");
    if (!n.grad.same_shape(n.value)) {
      n.grad = contribution;
      return;
    }
    auto g = n.grad.values();
    auto c = contribution.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c[i];
  }

  void backward(Var loss) {
    const auto& l = nodes_.at(loss.id).value;
    if (l.rows() != 1 || l.cols() != 1) {
      throw ContractViolation("backward: loss must be 1x1, got " + l.shape());
    }
    for (auto& n : nodes_) n.grad = DenseMatrix();
    nodes_[loss.id].grad = DenseMatrix(1, 1, 1.0);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (!n.requires_grad || !n.backward) continue;
      if (!n.grad.same_shape(n.value)) continue;  // not reachable from the loss
      // Copy: accumulate() into parents must not alias the slot being read.
      const DenseMatrix upstream = n.grad;
      n.backward(*this, upstream);
    }
  }

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> parents;
    DenseMatrix value;
    DenseMatrix grad;
    BackwardFn backward;
    bool requires_grad;
  };

  Var push(OpKind kind, std::vector<std::size_t> parents, DenseMatrix value, BackwardFn backward,
           bool requires_grad) {
    const std::size_t id = nodes_.size();
    for (auto p : parents) {
      if (p >= id) throw ContractViolation("Tape: parent id must precede node id");
    }
    nodes_.push_back(
        Node{kind, std::move(parents), std::move(value), DenseMatrix(), std::move(backward),
             requires_grad});
    return Var{id};
  }

  std::vector<Node> nodes_;
};

}  // namespace gcnkit
