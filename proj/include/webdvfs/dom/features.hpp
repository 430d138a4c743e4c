#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "webdvfs/dom/document.hpp"

namespace webdvfs::dom {

/// Reserved vocabulary entry that absorbs names missing from the vocabulary.
inline constexpr const char* kOtherSlot = "__other__";

class FeatureManifest {
 public:
  FeatureManifest() = default;
  /// Validates vocabularies and appends the "other" slot where missing.
  FeatureManifest(std::vector<std::string> tags, std::vector<std::string> attributes,
                  std::vector<std::string> css_properties,
                  std::vector<std::string> selector_patterns, std::string version);

  static FeatureManifest load(const std::filesystem::path& path);
  static FeatureManifest from_json_text(const std::string& text);
  std::string to_json_text() const;

  const std::vector<std::string>& tags() const { return tags_; }
  const std::vector<std::string>& attributes() const { return attributes_; }
  const std::vector<std::string>& css_properties() const { return css_properties_; }
  const std::vector<std::string>& selector_patterns() const { return selector_patterns_; }
  const std::string& version() const { return version_; }

  bool empty() const { return tags_.empty() && attributes_.empty() && css_properties_.empty(); }
  std::size_t dimension() const;
  std::vector<std::string> feature_names() const;

  // Offsets of each block in the feature vector.
  static constexpr std::size_t kDomNodes = 0;
  static constexpr std::size_t kTreeDepth = 1;
  static constexpr std::size_t kCssRules = 2;
  std::size_t tag_offset() const { return 3; }
  std::size_t attr_offset() const { return tag_offset() + tags_.size(); }
  std::size_t css_offset() const { return attr_offset() + attributes_.size(); }
  std::size_t selector_offset() const { return css_offset() + css_properties_.size(); }
  std::size_t page_kb_index() const { return selector_offset() + selector_patterns_.size(); }

  /// Feature index of `tag.<name>`, falling back to the other slot.
  std::size_t tag_index(const std::string& tag) const;
  std::size_t attr_index(const std::string& attr) const;
  std::size_t css_index(const std::string& property) const;
  /// Index of a feature by its full name, or dimension() if absent.
  std::size_t feature_index(const std::string& name) const;

 private:
  void build_index();

  std::vector<std::string> tags_;
  std::vector<std::string> attributes_;
  std::vector<std::string> css_properties_;
  std::vector<std::string> selector_patterns_;
  std::string version_;
  std::unordered_map<std::string, std::size_t> tag_lookup_;
  std::unordered_map<std::string, std::size_t> attr_lookup_;
  std::unordered_map<std::string, std::size_t> css_lookup_;
  std::unordered_map<std::string, std::size_t> selector_lookup_;
};

struct RawFeatureVector {
  std::vector<double> values;
  std::string manifest_version;
};

RawFeatureVector extract_features(const HtmlDocument& doc, const FeatureManifest& manifest);

/// |nodes(new) - nodes(old)| / max(1, nodes(old)); directional, `old` is the base.
double dom_change_ratio(const HtmlDocument& old_doc, const HtmlDocument& new_doc);
double dom_change_ratio(std::size_t old_nodes, std::size_t new_nodes);

struct CorpusPage {
  std::string id;
  HtmlDocument document;
};

/// Parses every *.html file in `dir` (sorted by name), resolving linked CSS
/// from the same directory.
std::vector<CorpusPage> load_corpus(const std::filesystem::path& dir);

struct FeatureRow {
  std::string page_id;
  RawFeatureVector features;
};

std::string features_to_csv(const std::vector<FeatureRow>& rows, const FeatureManifest& manifest);
std::vector<FeatureRow> features_from_csv(const std::string& text);

}  // namespace webdvfs::dom
