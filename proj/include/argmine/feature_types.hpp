#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace argmine {

/// Ablation unit: every feature belongs to exactly one group.
enum class FeatureGroup {
  WldaLexical,
  WldaParse,
  WldaStructural,
  WldaContext,
  DlgSemanticDensity,
  DlgLexical,
  DlgSyntax,
};

inline constexpr std::array<FeatureGroup, 7> kFeatureGroups{
    FeatureGroup::WldaLexical,        FeatureGroup::WldaParse,  FeatureGroup::WldaStructural,
    FeatureGroup::WldaContext,        FeatureGroup::DlgSemanticDensity, FeatureGroup::DlgLexical,
    FeatureGroup::DlgSyntax};

constexpr std::string_view to_string(FeatureGroup g) noexcept {
  switch (g) {
    case FeatureGroup::WldaLexical: return "wlda_lexical";
    case FeatureGroup::WldaParse: return "wlda_parse";
    case FeatureGroup::WldaStructural: return "wlda_structural";
    case FeatureGroup::WldaContext: return "wlda_context";
    case FeatureGroup::DlgSemanticDensity: return "dlg_semantic_density";
    case FeatureGroup::DlgLexical: return "dlg_lexical";
    case FeatureGroup::DlgSyntax: return "dlg_syntax";
  }
  return "?";
}

inline std::optional<FeatureGroup> parse_feature_group(std::string_view s) noexcept {
  for (auto g : kFeatureGroups)
    if (to_string(g) == s) return g;
  return std::nullopt;
}

constexpr bool is_wlda(FeatureGroup g) noexcept {
  return g == FeatureGroup::WldaLexical || g == FeatureGroup::WldaParse || g == FeatureGroup::WldaStructural ||
         g == FeatureGroup::WldaContext;
}

struct NamedFeature {
  std::string name;
  double value = 0.0;
};

struct SparseEntry {
  std::size_t index = 0;
  double value = 0.0;

  bool operator==(const SparseEntry&) const = default;
};

/// Sparse vector with strictly increasing indices.
using SparseVector = std::vector<SparseEntry>;

/// One catalog row: name, group, definition and where the feature comes from.
struct FeatureInfo {
  std::string_view name;
  FeatureGroup group;
  std::string_view definition;
  std::string_view origin;
};

}  // namespace argmine
