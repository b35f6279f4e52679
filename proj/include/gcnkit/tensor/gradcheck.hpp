#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/dense.hpp"
#include "gcnkit/tensor/tape.hpp"

namespace gcnkit {

/// Builds a scalar loss on a fresh tape from the parameter leaf it is handed.
using ScalarGraph = std::function<Var(Tape&, Var)>;

inline double evaluate_scalar(const ScalarGraph& f, const DenseMatrix& p) {
  Tape t;
  Var leaf = t.leaf(p);
  return t.value(f(t, leaf))(0, 0);
}

/**
 * @brief Compares the tape gradient of f at p against central differences.
 *
 * Returns max over entries of |a - b| / max(|a|, |b|, 1e-8). Any non-finite
 * gradient or difference quotient is reported as +infinity.
 */
inline double finite_difference_check(const ScalarGraph& f, const DenseMatrix& p, double step) {
  if (!(step > 0.0)) throw ContractViolation("finite_difference_check: step must be > 0");
  DenseMatrix analytic;
  {
    Tape t;
    Var leaf = t.leaf(p);
    t.backward(f(t, leaf));
    analytic = t.grad(leaf);
  }
  double worst = 0.0;
  DenseMatrix probe = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = probe.values()[i];
    probe.values()[i] = orig + step;
    const double up = evaluate_scalar(f, probe);
    probe.values()[i] = orig - step;
    const double down = evaluate_scalar(f, probe);
    probe.values()[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.values()[i];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      return std::numeric_limits<double>::infinity();
    }
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace gcnkit
