#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/layers/activation.hpp"
#include "gcnkit/rng.hpp"
#include "gcnkit/tensor/dense.hpp"
#include "gcnkit/tensor/ops.hpp"
#include "gcnkit/tensor/sparse.hpp"
#include "gcnkit/tensor/tape.hpp"
#include "gcnkit/topology/topology.hpp"

namespace gcnkit {

enum class LayerKind { graph, dense };

/// Placeholder output width resolved to the dataset's class count by bind_dims().
inline constexpr std::size_t kClassesDim = 0;

struct LayerSpec {
  LayerKind kind = LayerKind::graph;
  std::size_t in_dim = 0;
  std::size_t out_dim = kClassesDim;
  ActivationSpec activation;
  /// Inverted-dropout rate applied to this layer's input during training.
  double dropout = 0.0;

  bool operator==(const LayerSpec&) const = default;
};

/// How the influence scores reweight the graph operator of a confidence layer.
enum class InfluenceSupport { propagator, adjacency };

struct ConfidenceOptions {
  double lambda_smooth = 1.0;
  double lambda_reg = 0.01;
  double epsilon = 1.0;
  bool normalize = true;
  InfluenceSupport support = InfluenceSupport::propagator;
  /// Raw r_uv on A + I, no normalization. Overrides normalize/support.
  bool raw_influence = false;

  bool operator==(const ConfidenceOptions&) const = default;
};

struct ModelConfig {
  std::string name;
  std::vector<LayerSpec> layers;
  DiagMode diag_mode = DiagMode::identity;
  bool confidence = false;
  ConfidenceOptions confidence_options;

  /// Dropout on the (sparse) input features; the first layer's input rate.
  double input_dropout() const { return layers.empty() ? 0.0 : layers.front().dropout; }

  bool operator==(const ModelConfig&) const = default;
};

/// Fills in_dim/out_dim chains for a dataset with `features` inputs and `classes` outputs.
inline ModelConfig bind_dims(ModelConfig cfg, std::size_t features, std::size_t classes) {
  if (cfg.layers.empty()) throw ConfigError("model '" + cfg.name + "' has no layers");
  std::size_t in = features;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    auto& l = cfg.layers[i];
    const bool last = i + 1 == cfg.layers.size();
    if (l.out_dim == kClassesDim) {
      if (!last) throw ConfigError("only the last layer may use the class count as width");
      l.out_dim = classes;
    }
    l.in_dim = in;
    in = l.out_dim;
  }
  return cfg;
}

/// Checks every ModelConfig invariant against a dataset's (d, m).
inline void validate_config(const ModelConfig& cfg, std::size_t features, std::size_t classes) {
  if (cfg.layers.empty()) throw ConfigError("model '" + cfg.name + "' has no layers");
  if (cfg.layers.front().in_dim != features) {
    throw ConfigError("first layer in_dim " + std::to_string(cfg.layers.front().in_dim) +
                      " != feature count " + std::to_string(features));
  }
  if (cfg.layers.back().out_dim != classes) {
    throw ConfigError("last layer out_dim " + std::to_string(cfg.layers.back().out_dim) +
                      " != class count " + std::to_string(classes));
  }
  bool any_graph = false;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& l = cfg.layers[i];
    if (l.in_dim == 0 || l.out_dim == 0) throw ConfigError("layer " + std::to_string(i) + " has a zero width");
    if (i > 0 && cfg.layers[i - 1].out_dim != l.in_dim) {
      throw ConfigError("layer " + std::to_string(i) + " in_dim does not chain");
    }
    if (!(l.dropout >= 0.0 && l.dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
    if (l.activation.is_convex()) {
      const auto& c = l.activation.convex();
      try {
        check_simplex(c.coefficients, c.members.size());
      } catch (const ContractViolation& e) {
        throw ConfigError(std::string("layer ") + std::to_string(i) + ": " + e.what());
      }
    }
    any_graph = any_graph || l.kind == LayerKind::graph;
  }
  if (cfg.confidence && !any_graph) throw ConfigError("confidence models need a graph layer");
  if (cfg.confidence && !(cfg.confidence_options.epsilon > 0.0)) {
    throw ConfigError("confidence epsilon must be > 0");
  }
  if (cfg.confidence &&
      (cfg.confidence_options.lambda_smooth < 0.0 || cfg.confidence_options.lambda_reg < 0.0)) {
    throw ConfigError("confidence lambdas must be >= 0");
  }
}

struct LayerParams {
  DenseMatrix weight;
  DenseMatrix bias;
  /// 1 x N coefficient row for convex activations, empty otherwise.
  DenseMatrix coefficients;

  bool operator==(const LayerParams&) const = default;
};

/// Glorot-uniform weights, zero biases, convex coefficients at their configured values.
inline std::vector<LayerParams> init_layer_params(const ModelConfig& cfg, Rng& rng) {
  std::vector<LayerParams> out;
  out.reserve(cfg.layers.size());
  for (const auto& l : cfg.layers) {
    LayerParams p;
    p.weight = DenseMatrix(l.in_dim, l.out_dim);
    const double range = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
    for (auto& w : p.weight.values()) w = rng.uniform(-range, range);
    p.bias = DenseMatrix(1, l.out_dim);
    if (l.activation.is_convex()) {
      const auto& c = l.activation.convex().coefficients;
      p.coefficients = DenseMatrix(1, c.size(), std::vector<double>(c.begin(), c.end()));
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Tape handles for one layer's parameters.
struct LayerVars {
  Var weight;
  Var bias;
  std::optional<Var> coefficients;
};

/// Registers parameters on `t`: leaves when `trainable`, constants otherwise.
/// Fixed convex coefficients are always constants.
inline std::vector<LayerVars> register_layer_params(Tape& t, const ModelConfig& cfg,
                                                    const std::vector<LayerParams>& params,
                                                    bool trainable) {
  if (params.size() != cfg.layers.size()) {
    throw ConfigError("parameter list has " + std::to_string(params.size()) + " layers, config " +
                      std::to_string(cfg.layers.size()));
  }
  std::vector<LayerVars> vars;
  vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& spec = cfg.layers[i];
    const auto& p = params[i];
    if (p.weight.rows() != spec.in_dim || p.weight.cols() != spec.out_dim ||
        p.bias.rows() != 1 || p.bias.cols() != spec.out_dim) {
      throw ConfigError("layer " + std::to_string(i) + " parameter shapes do not match config");
    }
    LayerVars v;
    v.weight = trainable ? t.leaf(p.weight) : t.constant(p.weight);
    v.bias = trainable ? t.leaf(p.bias) : t.constant(p.bias);
    if (spec.activation.is_convex()) {
      const bool learn = trainable && spec.activation.convex().learnable;
      v.coefficients = learn ? t.leaf(p.coefficients) : t.constant(p.coefficients);
    }
    vars.push_back(v);
  }
  return vars;
}

/// A layer input is either the constant sparse feature matrix or a node on the tape.
using LayerInput = std::variant<std::shared_ptr<const SparseMatrix>, Var>;

/// How graph layers aggregate.
enum class Aggregation {
  /// activation(P (H W) + b): bias added after propagation.
  propagate_then_bias,
  /// activation(R (H W + b)): bias inside the weighted neighbour sum.
  bias_then_propagate,
};

namespace layers_detail {

inline Var apply_spec(Tape& t, Var z, const ActivationSpec& spec, const LayerVars& vars) {
  if (!spec.is_convex()) return ops::activation(t, z, spec.base());
  return ops::convex_activation(t, z, *vars.coefficients, spec.convex().members);
}

/// dropout(H) * W for either input kind.
inline Var project_input(Tape& t, const LayerInput& in, Var weight, double rate, bool training,
                         Rng& rng) {
  if (const auto* sparse = std::get_if<std::shared_ptr<const SparseMatrix>>(&in)) {
    if (training && rate > 0.0) {
      auto dropped = std::make_shared<const SparseMatrix>(ops::sparse_dropout(**sparse, rate, rng));
      return ops::sparse_input_matmul(t, std::move(dropped), weight);
    }
    return ops::sparse_input_matmul(t, *sparse, weight);
  }
  Var h = ops::dropout(t, std::get<Var>(in), rate, training, rng);
  return ops::matmul(t, h, weight);
}

}  // namespace layers_detail

/**
 * @brief One graph convolution: activation(G (dropout(H) W) + b).
 *
 * `graph_op` is the propagator (or a confidence-reweighted operator). With
 * Aggregation::bias_then_propagate the bias is added before the operator.
 */
inline Var graph_layer(Tape& t, const LayerSpec& spec, const LayerVars& vars, const LayerInput& in,
                       const std::shared_ptr<const SparseMatrix>& graph_op, Aggregation agg,
                       bool training, Rng& rng) {
  Var xw = layers_detail::project_input(t, in, vars.weight, spec.dropout, training, rng);
  if (graph_op->cols() != t.value(xw).rows()) {
    throw DimensionError("graph_layer: operator " + graph_op->shape() + " for " +
                         t.value(xw).shape() + " rows");
  }
  Var z;
  if (agg == Aggregation::propagate_then_bias) {
    z = ops::add_row(t, ops::spmm(t, graph_op, xw), vars.bias);
  } else {
    z = ops::spmm(t, graph_op, ops::add_row(t, xw, vars.bias));
  }
  return layers_detail::apply_spec(t, z, spec.activation, vars);
}

/// Fully connected layer: activation(dropout(H) W + b), no propagation.
inline Var dense_layer(Tape& t, const LayerSpec& spec, const LayerVars& vars, const LayerInput& in,
                       bool training, Rng& rng) {
  Var xw = layers_detail::project_input(t, in, vars.weight, spec.dropout, training, rng);
  return layers_detail::apply_spec(t, ops::add_row(t, xw, vars.bias), spec.activation, vars);
}

/**
 * @brief Runs every layer in order and returns the logits node (n x m).
 *
 * Graph layers consume `graph_op`, dense layers ignore it. The last layer's
 * activation is whatever the config says (presets use none); softmax lives in
 * the loss.
 */
inline Var model_forward(Tape& t, const ModelConfig& cfg, const std::vector<LayerVars>& vars,
                         const std::shared_ptr<const SparseMatrix>& graph_op,
                         const std::shared_ptr<const SparseMatrix>& features, Aggregation agg,
                         bool training, Rng& rng) {
  if (vars.size() != cfg.layers.size()) throw ConfigError("model_forward: parameter/config mismatch");
  if (features->cols() != cfg.layers.front().in_dim) {
    throw ConfigError("model_forward: features have " + std::to_string(features->cols()) +
                      " columns, first layer expects " + std::to_string(cfg.layers.front().in_dim));
  }
  LayerInput h = features;
  Var out{};
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& spec = cfg.layers[i];
    out = spec.kind == LayerKind::graph ? graph_layer(t, spec, vars[i], h, graph_op, agg, training, rng)
                                        : dense_layer(t, spec, vars[i], h, training, rng);
    h = out;
  }
  return out;
}

// Tape-free single-layer helpers, used by evaluation code and tests.

inline DenseMatrix gcn_layer_forward(const SparseMatrix& p, const DenseMatrix& h, const DenseMatrix& w,
                                     const DenseMatrix& b, const ActivationSpec& spec) {
  if (p.rows() != p.cols() || p.cols() != h.rows()) {
    throw DimensionError("gcn_layer_forward: propagator " + p.shape() + " for input " + h.shape());
  }
  DenseMatrix z = spmm(p, matmul(h, w));
  if (b.rows() != 1 || b.cols() != z.cols()) throw DimensionError("gcn_layer_forward: bias " + b.shape());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += b(0, j);
  return apply_activation(spec, std::move(z));
}

inline DenseMatrix dense_layer_forward(const DenseMatrix& h, const DenseMatrix& w, const DenseMatrix& b,
                                       const ActivationSpec& spec) {
  return apply_activation(spec, dense_affine(h, w, b));
}

}  // namespace gcnkit
