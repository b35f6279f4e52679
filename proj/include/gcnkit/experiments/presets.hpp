#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "gcnkit/config.hpp"
#include "gcnkit/error.hpp"

namespace gcnkit {

struct Preset {
  std::string_view name;
  std::string_view text;
};

namespace presets_detail {

inline constexpr std::string_view kGcn = R"(name = gcn
layer = graph 16 relu dropout=0.5
layer = graph classes none dropout=0.5
)";

// Pinned sweep cell (hidden 64, relu, softmax_ce_v2).
inline constexpr std::string_view kOpGcn = R"(name = opgcn
layer = graph 64 relu dropout=0.5
layer = graph classes none dropout=0.5
loss = softmax_ce_v2
)";

inline constexpr std::string_view kConvGcn = R"(name = convgcn
layer = graph 16 convex(relu6:0.8,relu6:0.2) dropout=0.5 learnable=true
layer = graph classes none dropout=0.5
)";

inline constexpr std::string_view kCcGcn = R"(name = ccgcn
diag_mode = clustering_coefficients
layer = graph 16 relu dropout=0.5
layer = graph classes none dropout=0.5
)";

inline constexpr std::string_view kDGcn = R"(name = dgcn
layer = graph 32 relu6 dropout=0.5
layer = dense 16 relu6 dropout=0.5
layer = dense 32 relu6 dropout=0.5
layer = graph 48 relu6 dropout=0.5
layer = graph classes none dropout=0.5
)";

inline constexpr std::string_view kConfGcn = R"(name = confgcn
confidence = true
layer = graph 16 relu dropout=0.5
layer = graph classes none dropout=0.5
)";

inline constexpr std::string_view kOpConfGcn = R"(name = opconfgcn
confidence = true
layer = graph 64 relu dropout=0.5
layer = graph classes none dropout=0.5
loss = softmax_ce_v2
)";

inline constexpr std::string_view kConvConfGcn = R"(name = convconfgcn
confidence = true
layer = graph 16 convex(relu6:0.8,relu6:0.2) dropout=0.5 learnable=true
layer = graph classes none dropout=0.5
)";

inline constexpr std::string_view kCcConfGcn = R"(name = ccconfgcn
confidence = true
diag_mode = clustering_coefficients
layer = graph 16 relu dropout=0.5
layer = graph classes none dropout=0.5
)";

inline constexpr std::string_view kDConfGcn = R"(name = dconfgcn
confidence = true
layer = graph 32 relu6 dropout=0.5
layer = dense 16 relu6 dropout=0.5
layer = dense 32 relu6 dropout=0.5
layer = graph 48 relu6 dropout=0.5
layer = graph classes none dropout=0.5
)";

}  // namespace presets_detail

inline constexpr std::array<Preset, 10> kPresets{{
    {"gcn", presets_detail::kGcn},
    {"opgcn", presets_detail::kOpGcn},
    {"convgcn", presets_detail::kConvGcn},
    {"ccgcn", presets_detail::kCcGcn},
    {"dgcn", presets_detail::kDGcn},
    {"confgcn", presets_detail::kConfGcn},
    {"opconfgcn", presets_detail::kOpConfGcn},
    {"convconfgcn", presets_detail::kConvConfGcn},
    {"ccconfgcn", presets_detail::kCcConfGcn},
    {"dconfgcn", presets_detail::kDConfGcn},
}};

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

inline std::string preset_list() {
  std::string s;
  for (const auto& p : kPresets) {
    if (!s.empty()) s += ", ";
    s += p.name;
  }
  return s;
}

inline bool is_confidence_preset(std::string_view name) {
  return name.find("conf") != std::string_view::npos;
}

/// Parsed preset; unknown names raise ConfigError listing every preset.
inline RunConfig preset_config(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return parse_run_config(p.text, "preset:" + std::string(name));
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (available: " + preset_list() + ")");
}

}  // namespace gcnkit
