#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gcnkit/error.hpp"
#include "gcnkit/layers/model.hpp"
#include "gcnkit/training/train_config.hpp"

/**
 * @brief Structured-text run configuration.
 *
 * One `key = value` pair per line, `#` starts a comment. Layers are listed in
 * order with
 *
 *     layer = <graph|dense> <width|classes> <activation> [dropout=<p>] [learnable=<bool>]
 *
 * where <activation> is relu, relu6, elu, selu, none or a convex combination
 * `convex(relu6:0.8,relu6:0.2)`. Model keys: name, diag_mode, confidence,
 * lambda_smooth, lambda_reg, epsilon, normalize_influence, influence_support,
 * raw_influence. Training keys: learning_rate, weight_decay, max_epochs,
 * patience, loss, seed.
 */
namespace gcnkit {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    int depth = 0;
    while (j < s.size() && (depth > 0 || (s[j] != ' ' && s[j] != '\t'))) {
      if (s[j] == '(') ++depth;
      if (s[j] == ')') --depth;
      ++j;
    }
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct LineContext {
  std::string source;
  std::size_t line;
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source + ":" + std::to_string(line) + ": " + what);
  }
};

inline double to_double(std::string_view s, const LineContext& ctx) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) ctx.fail("expected a number, got '" + std::string(s) + "'");
  return v;
}

template <typename Int>
Int to_int(std::string_view s, const LineContext& ctx) {
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) ctx.fail("expected an integer, got '" + std::string(s) + "'");
  return v;
}

inline bool to_bool(std::string_view s, const LineContext& ctx) {
  if (s == "true") return true;
  if (s == "false") return false;
  ctx.fail("expected true or false, got '" + std::string(s) + "'");
}

inline ActivationSpec parse_activation(std::string_view s, const LineContext& ctx) {
  if (s.starts_with("convex(")) {
    if (!s.ends_with(")")) ctx.fail("unterminated convex(...)");
    ConvexActivation c;
    for (auto member : split(s.substr(7, s.size() - 8), ',')) {
      auto parts = split(member, ':');
      if (parts.size() != 2) ctx.fail("convex member must be kind:coefficient");
      try {
        c.members.push_back(parse_activation_kind(parts[0]));
      } catch (const ConfigError& e) {
        ctx.fail(e.what());
      }
      c.coefficients.push_back(to_double(parts[1], ctx));
    }
    if (c.members.size() < 2) ctx.fail("convex combination needs at least two members");
    return c;
  }
  try {
    return parse_activation_kind(s);
  } catch (const ConfigError& e) {
    ctx.fail(e.what());
  }
}

inline LayerSpec parse_layer(std::string_view value, const LineContext& ctx) {
  auto w = words(value);
  if (w.size() < 3) ctx.fail("layer needs: kind width activation");
  LayerSpec l;
  if (w[0] == "graph") {
    l.kind = LayerKind::graph;
  } else if (w[0] == "dense") {
    l.kind = LayerKind::dense;
  } else {
    ctx.fail("unknown layer kind '" + std::string(w[0]) + "'");
  }
  l.out_dim = w[1] == "classes" ? kClassesDim : to_int<std::size_t>(w[1], ctx);
  if (w[1] != "classes" && l.out_dim == 0) ctx.fail("layer width must be positive");
  l.activation = parse_activation(w[2], ctx);
  std::optional<bool> learnable;
  for (std::size_t i = 3; i < w.size(); ++i) {
    auto kv = split(w[i], '=');
    if (kv.size() != 2) ctx.fail("expected option=value, got '" + std::string(w[i]) + "'");
    if (kv[0] == "dropout") {
      l.dropout = to_double(kv[1], ctx);
    } else if (kv[0] == "learnable") {
      learnable = to_bool(kv[1], ctx);
    } else {
      ctx.fail("unknown layer option '" + std::string(kv[0]) + "'");
    }
  }
  if (learnable) {
    if (!l.activation.is_convex()) ctx.fail("learnable= only applies to convex activations");
    std::get<ConvexActivation>(l.activation.value).learnable = *learnable;
  }
  return l;
}

inline std::string activation_text(const ActivationSpec& a) {
  if (!a.is_convex()) return std::string(to_string(a.base()));
  std::string s = "convex(";
  const auto& c = a.convex();
  for (std::size_t i = 0; i < c.members.size(); ++i) {
    if (i) s += ',';
    s += fmt::format("{}:{}", to_string(c.members[i]), c.coefficients[i]);
  }
  return s + ")";
}

}  // namespace config_detail

inline RunConfig parse_run_config(std::string_view text, const std::string& source = "<config>") {
  using namespace config_detail;
  RunConfig rc;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? end : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    LineContext ctx{source, lineno};
    auto eq = line.find('=');
    if (eq == std::string_view::npos) ctx.fail("expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    auto& m = rc.model;
    auto& c = m.confidence_options;
    auto& t = rc.train;
    if (key == "name") {
      m.name = std::string(value);
    } else if (key == "layer") {
      m.layers.push_back(parse_layer(value, ctx));
    } else if (key == "diag_mode") {
      if (value == "identity") {
        m.diag_mode = DiagMode::identity;
      } else if (value == "clustering_coefficients" || value == "cc") {
        m.diag_mode = DiagMode::clustering_coefficients;
      } else {
        ctx.fail("unknown diag_mode '" + std::string(value) + "'");
      }
    } else if (key == "confidence") {
      m.confidence = to_bool(value, ctx);
    } else if (key == "lambda_smooth") {
      c.lambda_smooth = to_double(value, ctx);
    } else if (key == "lambda_reg") {
      c.lambda_reg = to_double(value, ctx);
    } else if (key == "epsilon") {
      c.epsilon = to_double(value, ctx);
    } else if (key == "normalize_influence") {
      c.normalize = to_bool(value, ctx);
    } else if (key == "influence_support") {
      if (value == "propagator") {
        c.support = InfluenceSupport::propagator;
      } else if (value == "adjacency") {
        c.support = InfluenceSupport::adjacency;
      } else {
        ctx.fail("unknown influence_support '" + std::string(value) + "'");
      }
    } else if (key == "raw_influence") {
      c.raw_influence = to_bool(value, ctx);
    } else if (key == "learning_rate") {
      t.learning_rate = to_double(value, ctx);
    } else if (key == "weight_decay") {
      t.weight_decay = to_double(value, ctx);
    } else if (key == "max_epochs") {
      t.max_epochs = to_int<int>(value, ctx);
    } else if (key == "patience") {
      t.patience = to_int<int>(value, ctx);
    } else if (key == "loss") {
      try {
        t.loss = parse_loss_variant(value);
      } catch (const ConfigError& e) {
        ctx.fail(e.what());
      }
    } else if (key == "seed") {
      t.seed = to_int<std::uint64_t>(value, ctx);
    } else {
      ctx.fail("unknown key '" + std::string(key) + "'");
    }
  }
  if (rc.model.layers.empty()) throw ConfigError(source + ": no layers defined");
  validate_train_config(rc.train);
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

/// Canonical text; parse_run_config(to_text(c)) == c for unbound configs.
inline std::string to_text(const RunConfig& rc) {
  const auto& m = rc.model;
  const auto& c = m.confidence_options;
  const auto& t = rc.train;
  std::string s;
  s += fmt::format("name = {}\n", m.name);
  s += fmt::format("diag_mode = {}\n", to_string(m.diag_mode));
  s += fmt::format("confidence = {}\n", m.confidence);
  if (m.confidence) {
    s += fmt::format("lambda_smooth = {}\nlambda_reg = {}\nepsilon = {}\n", c.lambda_smooth,
                     c.lambda_reg, c.epsilon);
    s += fmt::format("normalize_influence = {}\ninfluence_support = {}\nraw_influence = {}\n",
                     c.normalize,
                     c.support == InfluenceSupport::propagator ? "propagator" : "adjacency",
                     c.raw_influence);
  }
  for (const auto& l : m.layers) {
    s += fmt::format("layer = {} {} {} dropout={}", l.kind == LayerKind::graph ? "graph" : "dense",
                     l.out_dim == kClassesDim ? std::string("classes") : std::to_string(l.out_dim),
                     config_detail::activation_text(l.activation), l.dropout);
    if (l.activation.is_convex()) s += fmt::format(" learnable={}", l.activation.convex().learnable);
    s += '\n';
  }
  s += fmt::format("learning_rate = {}\nweight_decay = {}\nmax_epochs = {}\npatience = {}\n",
                   t.learning_rate, t.weight_decay, t.max_epochs, t.patience);
  s += fmt::format("loss = {}\nseed = {}\n", to_string(t.loss), t.seed);
  return s;
}

/// FNV-1a 64 of the canonical text, as 16 hex digits. The seed is excluded.
inline std::string config_fingerprint(RunConfig rc) {
  rc.train.seed = 0;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text(rc)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace gcnkit
