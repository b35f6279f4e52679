#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gcnkit/config.hpp"
#include "gcnkit/confidence/confidence.hpp"
#include "gcnkit/error.hpp"
#include "gcnkit/graphio/dataset.hpp"
#include "gcnkit/layers/model.hpp"
#include "gcnkit/rng.hpp"
#include "gcnkit/tensor/ops.hpp"
#include "gcnkit/tensor/tape.hpp"
#include "gcnkit/topology/topology.hpp"
#include "gcnkit/training/adam.hpp"
#include "gcnkit/training/metrics.hpp"
#include "gcnkit/training/report.hpp"
#include "gcnkit/training/train_config.hpp"

namespace gcnkit {

struct ModelParams {
  std::vector<LayerParams> layers;
  std::optional<ConfidenceState> confidence;

  bool operator==(const ModelParams&) const = default;
};

/// Dataset-derived constants shared by every forward pass of a session.
struct GraphContext {
  const Dataset* dataset = nullptr;
  std::shared_ptr<const SparseMatrix> features;
  std::shared_ptr<const SparseMatrix> propagator;
  std::shared_ptr<const std::vector<std::pair<std::size_t, std::size_t>>> edges;
};

inline GraphContext make_context(const ModelConfig& cfg, const Dataset& d) {
  GraphContext ctx;
  ctx.dataset = &d;
  ctx.features = std::make_shared<const SparseMatrix>(d.features);
  ctx.propagator = std::make_shared<const SparseMatrix>(build_propagator(d.adjacency, cfg.diag_mode).matrix);
  ctx.edges = std::make_shared<const std::vector<std::pair<std::size_t, std::size_t>>>(
      undirected_edges(d.adjacency));
  return ctx;
}

inline ModelParams init_params(const ModelConfig& bound_cfg, const Dataset& d, std::uint64_t seed) {
  Rng rng(seed, "init");
  ModelParams p;
  p.layers = init_layer_params(bound_cfg, rng);
  if (bound_cfg.confidence) p.confidence = initial_confidence_state(d.num_nodes, d.num_classes);
  return p;
}

/// Every tensor Adam updates, in registration order.
inline std::vector<DenseMatrix*> trainable_tensors(ModelParams& p, const ModelConfig& cfg) {
  std::vector<DenseMatrix*> out;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    out.push_back(&p.layers[i].weight);
    out.push_back(&p.layers[i].bias);
    const auto& act = cfg.layers[i].activation;
    if (act.is_convex() && act.convex().learnable) out.push_back(&p.layers[i].coefficients);
  }
  if (p.confidence) {
    out.push_back(&p.confidence->mu);
    out.push_back(&p.confidence->raw_precision);
  }
  return out;
}

struct ForwardPass {
  Var logits;
  /// Training objective (cross-entropy + confidence terms + L2); set when requested.
  std::optional<Var> objective;
  /// Leaves in trainable_tensors() order; empty when not trainable.
  std::vector<Var> leaves;
};

/**
 * @brief Records one full forward pass on `t`.
 *
 * For confidence models the aggregation operator is rebuilt from the current
 * mu/precision values and enters the tape as a constant, so no gradient flows
 * through the influence scores; mu and precision learn through the confidence
 * loss terms only.
 */
inline ForwardPass forward_pass(Tape& t, const ModelConfig& cfg, const TrainConfig& tcfg,
                                const ModelParams& params, const GraphContext& ctx, bool training,
                                Rng& dropout_rng, bool with_objective) {
  const Dataset& d = *ctx.dataset;
  ForwardPass fp;
  auto vars = register_layer_params(t, cfg, params.layers, with_objective);
  std::optional<Var> mu, raw;
  if (cfg.confidence) {
    if (!params.confidence) throw ConfigError("confidence model without confidence state");
    mu = with_objective ? t.leaf(params.confidence->mu) : t.constant(params.confidence->mu);
    raw = with_objective ? t.leaf(params.confidence->raw_precision)
                         : t.constant(params.confidence->raw_precision);
  }
  if (with_objective) {
    for (std::size_t i = 0; i < vars.size(); ++i) {
      fp.leaves.push_back(vars[i].weight);
      fp.leaves.push_back(vars[i].bias);
      const auto& act = cfg.layers[i].activation;
      if (act.is_convex() && act.convex().learnable) fp.leaves.push_back(*vars[i].coefficients);
    }
    if (mu) {
      fp.leaves.push_back(*mu);
      fp.leaves.push_back(*raw);
    }
  }

  std::shared_ptr<const SparseMatrix> graph_op = ctx.propagator;
  Aggregation agg = Aggregation::propagate_then_bias;
  if (cfg.confidence) {
    graph_op = std::make_shared<const SparseMatrix>(
        confidence_operator(d.adjacency, *ctx.propagator, *params.confidence, cfg.confidence_options));
    agg = Aggregation::bias_then_propagate;
  }
  fp.logits = model_forward(t, cfg, vars, graph_op, ctx.features, agg, training, dropout_rng);

  if (with_objective) {
    // Both loss variants share this kernel.
    Var loss = ops::softmax_cross_entropy(t, fp.logits, d.labels, d.train_mask);
    if (tcfg.weight_decay > 0.0) {
      loss = ops::add(t, loss, ops::scale(t, ops::sum(t, ops::square(t, vars.front().weight)),
                                          0.5 * tcfg.weight_decay));
    }
    if (cfg.confidence) {
      const auto& o = cfg.confidence_options;
      auto terms = confidence_loss(t, *mu, *raw, d.labels, d.train_mask, ctx.edges, o.lambda_smooth,
                                   o.lambda_reg);
      loss = ops::add(t, loss, terms.total);
    }
    fp.objective = loss;
  }
  return fp;
}

/// Logits with dropout disabled.
inline DenseMatrix predict(const ModelConfig& cfg, const ModelParams& params, const GraphContext& ctx) {
  Tape t;
  Rng unused(0);
  auto fp = forward_pass(t, cfg, TrainConfig{}, params, ctx, false, unused, false);
  return t.value(fp.logits);
}

inline std::span<const std::size_t> split_mask(const Dataset& d, std::string_view split) {
  if (split == "train") return d.train_mask;
  if (split == "val") return d.val_mask;
  if (split == "test") return d.test_mask;
  throw ConfigError("unknown split '" + std::string(split) + "' (expected train, val or test)");
}

/// Accuracy on `split` ("train", "val" or "test") with dropout disabled.
inline double evaluate(const ModelConfig& cfg, const ModelParams& params, const Dataset& d,
                       std::string_view split) {
  auto mask = split_mask(d, split);
  ModelConfig bound = bind_dims(cfg, d.num_features(), d.num_classes);
  auto ctx = make_context(bound, d);
  return accuracy(predict(bound, params, ctx), d.labels, mask);
}

struct TrainResult {
  ModelParams params;
  RunReport report;
};

struct TrainOptions {
  std::string preset;
  /// Called after every epoch (logging); may be empty.
  std::function<void(const EpochRecord&)> on_epoch;
};

/**
 * @brief Full-batch training with Adam and validation-loss early stopping.
 *
 * Every epoch: one training forward/backward/update, then a dropout-free pass
 * for validation loss and accuracy. The parameters with the lowest validation
 * loss so far are snapshotted; training stops after `patience` epochs without
 * improvement and the snapshot is restored before the test accuracy is taken.
 */
inline TrainResult train(const ModelConfig& cfg_in, const TrainConfig& tcfg, const Dataset& d,
                         const TrainOptions& options = {}) {
  validate_train_config(tcfg);
  const std::string fingerprint = config_fingerprint({cfg_in, tcfg});
  ModelConfig cfg = bind_dims(cfg_in, d.num_features(), d.num_classes);
  validate_config(cfg, d.num_features(), d.num_classes);
  auto ctx = make_context(cfg, d);

  ModelParams params = init_params(cfg, d, tcfg.seed);
  ModelParams best = params;
  Rng dropout_rng(tcfg.seed, "dropout");
  AdamState adam;

  RunReport report;
  report.preset = options.preset.empty() ? cfg.name : options.preset;
  report.dataset = d.name;
  report.seed = tcfg.seed;
  report.config_fingerprint = fingerprint;
  report.best_val_loss = std::numeric_limits<double>::infinity();

  int since_best = 0;
  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double train_loss = 0.0;
    {
      Tape t;
      auto fp = forward_pass(t, cfg, tcfg, params, ctx, true, dropout_rng, true);
      train_loss = t.value(*fp.objective)(0, 0);
      if (!std::isfinite(train_loss)) throw DivergenceError(epoch, "training loss is not finite");
      t.backward(*fp.objective);
      auto tensors = trainable_tensors(params, cfg);
      std::vector<DenseMatrix> grads;
      grads.reserve(fp.leaves.size());
      for (auto v : fp.leaves) grads.push_back(t.grad(v));
      adam_step(tensors, grads, adam, tcfg.learning_rate);
    }
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
      const auto& act = cfg.layers[i].activation;
      if (!act.is_convex() || !act.convex().learnable) continue;
      auto& c = params.layers[i].coefficients;
      auto projected = simplex_project(c.values());
      std::copy(projected.begin(), projected.end(), c.values().begin());
    }
    const DenseMatrix logits = predict(cfg, params, ctx);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.val_loss = softmax_cross_entropy_value(logits, d.labels, d.val_mask);
    rec.val_accuracy = accuracy(logits, d.labels, d.val_mask);
    if (!std::isfinite(rec.val_loss)) throw DivergenceError(epoch, "validation loss is not finite");
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);
    report.epochs_run = epoch;
    if (options.on_epoch) options.on_epoch(rec);

    if (rec.val_loss < report.best_val_loss) {
      report.best_val_loss = rec.val_loss;
      report.best_val_accuracy = rec.val_accuracy;
      report.best_epoch = epoch;
      best = params;
      since_best = 0;
    } else if (++since_best >= tcfg.patience) {
      break;
    }
  }
  report.test_accuracy = accuracy(predict(cfg, best, ctx), d.labels, d.test_mask);
  return {std::move(best), std::move(report)};
}

}  // namespace gcnkit
