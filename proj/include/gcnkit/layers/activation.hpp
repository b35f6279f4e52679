#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gcnkit/error.hpp"
#include "gcnkit/tensor/dense.hpp"
#include "gcnkit/tensor/tape.hpp"

namespace gcnkit {

enum class ActivationKind { none, relu, relu6, elu, selu };

inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluLambda = 1.0507009873554805;

inline std::string_view to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::none: return "none";
    case ActivationKind::relu: return "relu";
    case ActivationKind::relu6: return "relu6";
    case ActivationKind::elu: return "elu";
    case ActivationKind::selu: return "selu";
  }
  return "none";
}

inline ActivationKind parse_activation_kind(std::string_view s) {
  for (auto k : {ActivationKind::none, ActivationKind::relu, ActivationKind::relu6,
                 ActivationKind::elu, ActivationKind::selu}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline double activate(ActivationKind k, double x) {
  switch (k) {
    case ActivationKind::none: return x;
    case ActivationKind::relu: return x > 0.0 ? x : 0.0;
    case ActivationKind::relu6: return std::min(std::max(0.0, x), 6.0);
    case ActivationKind::elu: return x > 0.0 ? x : std::expm1(x);
    case ActivationKind::selu: return kSeluLambda * (x > 0.0 ? x : kSeluAlpha * std::expm1(x));
  }
  return x;
}

/// Derivative; kinks take the slope of the flat side.
inline double activate_derivative(ActivationKind k, double x) {
  switch (k) {
    case ActivationKind::none: return 1.0;
    case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::relu6: return (x > 0.0 && x < 6.0) ? 1.0 : 0.0;
    case ActivationKind::elu: return x > 0.0 ? 1.0 : std::exp(x);
    case ActivationKind::selu: return kSeluLambda * (x > 0.0 ? 1.0 : kSeluAlpha * std::exp(x));
  }
  return 1.0;
}

/// sum_i c_i f_i over a fixed member list, with c on the probability simplex.
struct ConvexActivation {
  std::vector<ActivationKind> members;
  std::vector<double> coefficients;
  bool learnable = true;

  bool operator==(const ConvexActivation&) const = default;
};

struct ActivationSpec {
  std::variant<ActivationKind, ConvexActivation> value = ActivationKind::none;

  ActivationSpec() = default;
  ActivationSpec(ActivationKind k) : value(k) {}  // NOLINT: implicit by intent
  ActivationSpec(ConvexActivation c) : value(std::move(c)) {}  // NOLINT

  bool is_convex() const noexcept { return std::holds_alternative<ConvexActivation>(value); }
  const ConvexActivation& convex() const { return std::get<ConvexActivation>(value); }
  ActivationKind base() const { return std::get<ActivationKind>(value); }

  bool operator==(const ActivationSpec&) const = default;
};

inline constexpr double kSimplexTolerance = 1e-9;

inline void check_simplex(std::span<const double> c, std::size_t members) {
  if (members < 2 || c.size() != members) {
    throw ContractViolation("convex activation: need >= 2 members and one coefficient each");
  }
  double s = 0.0;
  for (double v : c) {
    if (!(v >= 0.0)) throw ContractViolation("convex activation: negative coefficient");
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexTolerance) {
    throw ContractViolation("convex activation: coefficients sum to " + std::to_string(s));
  }
}

/**
 * @brief Euclidean projection onto {c : c_i >= 0, sum c_i = 1}.
 *
 * Sort-and-threshold: find the largest rho with u_rho > (sum_{j<=rho} u_j - 1)/rho
 * over the descending sort u, then clip c - theta at zero.
 */
inline std::vector<double> simplex_project(std::span<const double> c) {
  if (c.size() < 2) throw ContractViolation("simplex_project: need at least 2 entries");
  std::vector<double> u(c.begin(), c.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = std::max(c[i] - theta, 0.0);
  return out;
}

namespace activation_detail {

/// Members grouped by distinct kind with their summed coefficient, in first-seen order.
struct Group {
  ActivationKind kind;
  double weight;
  std::vector<std::size_t> member_indices;
};

inline std::vector<Group> group_members(const std::vector<ActivationKind>& members,
                                        std::span<const double> coefficients) {
  std::vector<Group> groups;
  for (std::size_t i = 0; i < members.size(); ++i) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.kind == members[i]; });
    if (it == groups.end()) {
      groups.push_back({members[i], coefficients[i], {i}});
    } else {
      it->weight += coefficients[i];
      it->member_indices.push_back(i);
    }
  }
  return groups;
}

}  // namespace activation_detail

/// Elementwise application outside the tape.
inline DenseMatrix apply_activation(ActivationKind k, DenseMatrix x) {
  for (auto& v : x.values()) v = activate(k, v);
  return x;
}

/**
 * @brief Elementwise application of `spec` outside the tape.
 *
 * A convex combination whose members are all the same function returns that
 * function's values directly; since the coefficients sum to one this is the
 * exact mathematical value, and it keeps the collapse bit-exact.
 */
inline DenseMatrix apply_activation(const ActivationSpec& spec, DenseMatrix x) {
  if (!spec.is_convex()) return apply_activation(spec.base(), std::move(x));
  const auto& cv = spec.convex();
  check_simplex(cv.coefficients, cv.members.size());
  auto groups = activation_detail::group_members(cv.members, cv.coefficients);
  if (groups.size() == 1) return apply_activation(groups.front().kind, std::move(x));
  for (auto& v : x.values()) {
    double s = 0.0;
    for (const auto& g : groups) s += g.weight * activate(g.kind, v);
    v = s;
  }
  return x;
}

namespace ops {

inline Var activation(Tape& t, Var x, ActivationKind k) {
  if (k == ActivationKind::none) return x;
  DenseMatrix out = apply_activation(k, t.value(x));
  return t.push(OpKind::activation, {x.id}, std::move(out), [x, k](Tape& tp, const DenseMatrix& g) {
    DenseMatrix c = g;
    auto xv = tp.value(x).values();
    auto cv = c.values();
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] *= activate_derivative(k, xv[i]);
    tp.accumulate(x.id, c);
  });
}

/**
 * @brief sum_i c_i f_i(x) with the coefficient row `coeffs` (1 x N) on the tape.
 *
 * d/dx = sum_i c_i f_i'(x); d/dc_i = sum over entries of g * f_i(x).
 */
inline Var convex_activation(Tape& t, Var x, Var coeffs, const std::vector<ActivationKind>& members) {
  const auto& cv = t.value(coeffs);
  if (cv.rows() != 1 || cv.cols() != members.size()) {
    throw DimensionError("convex_activation: coefficient row " + cv.shape() + " for " +
                         std::to_string(members.size()) + " members");
  }
  check_simplex(cv.values(), members.size());
  auto groups = activation_detail::group_members(members, cv.values());
  DenseMatrix out = t.value(x);
  if (groups.size() == 1) {
    out = apply_activation(groups.front().kind, std::move(out));
  } else {
    for (auto& v : out.values()) {
      double s = 0.0;
      for (const auto& g : groups) s += g.weight * activate(g.kind, v);
      v = s;
    }
  }
  return t.push(OpKind::convex_activation, {x.id, coeffs.id}, std::move(out),
                [x, coeffs, groups = std::move(groups), n = members.size()](Tape& tp,
                                                                           const DenseMatrix& g) {
                  auto xv = tp.value(x).values();
                  auto gv = g.values();
                  if (tp.requires_grad(x)) {
                    DenseMatrix dx(g.rows(), g.cols());
                    auto dv = dx.values();
                    for (std::size_t i = 0; i < dv.size(); ++i) {
                      double d = 0.0;
                      if (groups.size() == 1) {
                        d = activate_derivative(groups.front().kind, xv[i]);
                      } else {
                        for (const auto& grp : groups) d += grp.weight * activate_derivative(grp.kind, xv[i]);
                      }
                      dv[i] = gv[i] * d;
                    }
                    tp.accumulate(x.id, dx);
                  }
                  if (tp.requires_grad(coeffs)) {
                    DenseMatrix dc(1, n);
                    for (const auto& grp : groups) {
                      double s = 0.0;
                      for (std::size_t i = 0; i < gv.size(); ++i) s += gv[i] * activate(grp.kind, xv[i]);
                      for (auto m : grp.member_indices) dc(0, m) = s;
                    }
                    tp.accumulate(coeffs.id, dc);
                  }
                });
}

}  // namespace ops
}  // namespace gcnkit
