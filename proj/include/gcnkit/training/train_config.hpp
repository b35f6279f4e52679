#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gcnkit/error.hpp"

namespace gcnkit {

/// Both names select the same log-sum-exp softmax cross-entropy.
enum class LossVariant { softmax_ce, softmax_ce_v2 };

inline std::string_view to_string(LossVariant v) {
  return v == LossVariant::softmax_ce ? "softmax_ce" : "softmax_ce_v2";
}

inline LossVariant parse_loss_variant(std::string_view s) {
  if (s == "softmax_ce") return LossVariant::softmax_ce;
  if (s == "softmax_ce_v2") return LossVariant::softmax_ce_v2;
  throw ConfigError("unknown loss variant '" + std::string(s) + "'");
}

struct TrainConfig {
  double learning_rate = 0.01;
  /// L2 coefficient applied to the first layer's weight matrix only.
  double weight_decay = 5e-4;
  int max_epochs = 200;
  /// Epochs without a validation-loss improvement before stopping.
  int patience = 10;
  std::uint64_t seed = 0;
  LossVariant loss = LossVariant::softmax_ce_v2;

  bool operator==(const TrainConfig&) const = default;
};

inline void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (c.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (c.patience < 1) throw ConfigError("patience must be >= 1");
}

}  // namespace gcnkit
