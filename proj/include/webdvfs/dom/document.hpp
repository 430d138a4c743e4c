#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace webdvfs::dom {

enum class NodeKind { Element, Text, Comment };

struct Node {
  NodeKind kind = NodeKind::Element;
  /// Lowercased tag name for elements, raw content for text and comments.
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
};

/// Parsed HTML page: an arena of nodes rooted at `root` plus gathered CSS.
class HtmlDocument {
 public:
  const std::vector<Node>& nodes() const { return nodes_; }
  std::optional<std::size_t> root() const { return root_; }
  const std::vector<std::string>& stylesheets() const { return stylesheets_; }
  double byte_size_kb() const { return byte_size_kb_; }

  std::size_t element_count() const;
  /// Elements on the longest root-to-leaf element path.
  std::size_t depth() const;

  /// Serializes the tree back to HTML with every element written explicitly.
  std::string serialize() const;

 private:
  friend class TreeBuilder;
  std::vector<Node> nodes_;
  std::optional<std::size_t> root_;
  std::vector<std::string> stylesheets_;
  double byte_size_kb_ = 0.0;
};

/// Loads the text of a linked stylesheet by href; nullopt when unavailable.
using StylesheetResolver = std::function<std::optional<std::string>(std::string_view href)>;

/// Resolves hrefs relative to a local directory; no network access.
StylesheetResolver directory_resolver(std::filesystem::path dir);

/// Best-effort HTML parse. Never fails on malformed markup.
HtmlDocument parse_document(std::string_view html_text,
                            const StylesheetResolver& resolver = {});

}  // namespace webdvfs::dom
