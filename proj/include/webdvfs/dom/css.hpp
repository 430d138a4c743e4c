#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace webdvfs::dom {

struct StyleRule {
  std::vector<std::string> selectors;
  /// Lowercased property names in declaration order.
  std::vector<std::string> properties;
};

/// Style rules of a sheet, including rules nested in conditional at-rules
/// (@media, @supports). Other at-rule blocks are skipped.
std::vector<StyleRule> parse_stylesheet(std::string_view css);

inline constexpr std::array<std::string_view, 8> kSelectorPatterns = {
    "type", "class", "id", "descendant", "child", "pseudo", "attribute", "universal"};

/// Occurrence counts per selector pattern, indexed like kSelectorPatterns.
std::array<int, 8> classify_selector(std::string_view selector);

}  // namespace webdvfs::dom
