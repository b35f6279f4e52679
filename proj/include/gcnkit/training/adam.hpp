#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/dense.hpp"

namespace gcnkit {

struct AdamState {
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/**
 * @brief One bias-corrected Adam update, in place.
 *
 * `decay[i]` (when given) adds decay[i] * param to that parameter's gradient
 * before the moments are updated. Moments are created lazily on the first call.
 */
inline void adam_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix> grads,
                      AdamState& state, double lr, std::span<const double> decay = {}) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: params/grads count differ");
  if (!decay.empty() && decay.size() != params.size()) throw DimensionError("adam_step: decay count");
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("adam_step: state count differs");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    require_same_shape(p, grads[i], "adam_step");
    require_same_shape(p, state.first_moment[i], "adam_step");
    auto pv = p.values();
    auto gv = grads[i].values();
    auto mv = state.first_moment[i].values();
    auto vv = state.second_moment[i].values();
    const double wd = decay.empty() ? 0.0 : decay[i];
    for (std::size_t k = 0; k < pv.size(); ++k) {
      const double g = gv[k] + wd * pv[k];
      mv[k] = state.beta1 * mv[k] + (1.0 - state.beta1) * g;
      vv[k] = state.beta2 * vv[k] + (1.0 - state.beta2) * g * g;
      const double mhat = mv[k] / c1;
      const double vhat = vv[k] / c2;
      pv[k] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace gcnkit
