#include "webdvfs/dom/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "webdvfs/common/text.hpp"
#include "webdvfs/dom/css.hpp"

namespace webdvfs::dom {
namespace {

void require_unique(const std::vector<std::string>& vocab, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& v : vocab) {
    if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty vocabulary entry");
    if (!seen.insert(v).second) {
      throw std::invalid_argument(std::string(what) + ": duplicate entry '" + v + "'");
    }
  }
}

void with_other_slot(std::vector<std::string>& vocab) {
  const auto it = std::find(vocab.begin(), vocab.end(), kOtherSlot);
  if (it != vocab.end()) vocab.erase(it);
  vocab.emplace_back(kOtherSlot);
}

std::vector<std::string> lowered(std::vector<std::string> v) {
  for (auto& s : v) {
    if (s != kOtherSlot) s = to_lower(s);
  }
  return v;
}

}  // namespace

FeatureManifest::FeatureManifest(std::vector<std::string> tags,
                                 std::vector<std::string> attributes,
                                 std::vector<std::string> css_properties,
                                 std::vector<std::string> selector_patterns,
                                 std::string version)
    : tags_(lowered(std::move(tags))),
      attributes_(lowered(std::move(attributes))),
      css_properties_(lowered(std::move(css_properties))),
      selector_patterns_(lowered(std::move(selector_patterns))),
      version_(std::move(version)) {
  require_unique(tags_, "tags");
  require_unique(attributes_, "attributes");
  require_unique(css_properties_, "css_properties");
  require_unique(selector_patterns_, "selector_patterns");
  for (const auto& p : selector_patterns_) {
    if (std::find(kSelectorPatterns.begin(), kSelectorPatterns.end(), p) == kSelectorPatterns.end()) {
      throw std::invalid_argument("selector_patterns: unknown category '" + p + "'");
    }
  }
  with_other_slot(tags_);
  with_other_slot(attributes_);
  with_other_slot(css_properties_);
  build_index();
}

void FeatureManifest::build_index() {
  tag_lookup_.clear();
  attr_lookup_.clear();
  css_lookup_.clear();
  selector_lookup_.clear();
  for (std::size_t i = 0; i < tags_.size(); ++i) tag_lookup_.emplace(tags_[i], tag_offset() + i);
  for (std::size_t i = 0; i < attributes_.size(); ++i) attr_lookup_.emplace(attributes_[i], attr_offset() + i);
  for (std::size_t i = 0; i < css_properties_.size(); ++i) css_lookup_.emplace(css_properties_[i], css_offset() + i);
  for (std::size_t i = 0; i < selector_patterns_.size(); ++i) {
    selector_lookup_.emplace(selector_patterns_[i], selector_offset() + i);
  }
}

FeatureManifest FeatureManifest::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  auto list = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) {
      throw std::invalid_argument(std::string("manifest: missing array '") + key + "'");
    }
    return j.at(key).get<std::vector<std::string>>();
  };
  return FeatureManifest(list("tags"), list("attributes"), list("css_properties"),
                         list("selector_patterns"), j.value("version", std::string("unversioned")));
}

FeatureManifest FeatureManifest::load(const std::filesystem::path& path) {
  return from_json_text(read_text_file(path));
}

std::string FeatureManifest::to_json_text() const {
  nlohmann::ordered_json j;
  j["version"] = version_;
  j["tags"] = tags_;
  j["attributes"] = attributes_;
  j["css_properties"] = css_properties_;
  j["selector_patterns"] = selector_patterns_;
  return j.dump(2) + "\n";
}

std::size_t FeatureManifest::dimension() const {
  if (tags_.empty() && attributes_.empty() && css_properties_.empty()) return 0;
  return page_kb_index() + 1;
}

std::vector<std::string> FeatureManifest::feature_names() const {
  std::vector<std::string> names{"dom_nodes", "tree_depth", "css_rules"};
  for (const auto& t : tags_) names.push_back("tag." + t);
  for (const auto& a : attributes_) names.push_back("attr." + a);
  for (const auto& c : css_properties_) names.push_back("css." + c);
  for (const auto& s : selector_patterns_) names.push_back("sel." + s);
  names.emplace_back("page_kb");
  return names;
}

std::size_t FeatureManifest::tag_index(const std::string& tag) const {
  const auto it = tag_lookup_.find(tag);
  return it != tag_lookup_.end() ? it->second : tag_lookup_.at(kOtherSlot);
}

std::size_t FeatureManifest::attr_index(const std::string& attr) const {
  const auto it = attr_lookup_.find(attr);
  return it != attr_lookup_.end() ? it->second : attr_lookup_.at(kOtherSlot);
}

std::size_t FeatureManifest::css_index(const std::string& property) const {
  const auto it = css_lookup_.find(property);
  return it != css_lookup_.end() ? it->second : css_lookup_.at(kOtherSlot);
}

std::size_t FeatureManifest::feature_index(const std::string& name) const {
  const auto names = feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  return static_cast<std::size_t>(it - names.begin());
}

RawFeatureVector extract_features(const HtmlDocument& doc, const FeatureManifest& manifest) {
  if (manifest.empty()) throw std::invalid_argument("extract_features: empty manifest");
  RawFeatureVector out;
  out.manifest_version = manifest.version();
  out.values.assign(manifest.dimension(), 0.0);
  auto& v = out.values;

  for (const Node& n : doc.nodes()) {
    if (n.kind != NodeKind::Element) continue;
    v[FeatureManifest::kDomNodes] += 1.0;
    v[manifest.tag_index(n.name)] += 1.0;
    for (const auto& attr : n.attributes) v[manifest.attr_index(attr.first)] += 1.0;
  }
  v[FeatureManifest::kTreeDepth] = static_cast<double>(doc.depth());

  std::vector<std::size_t> selector_slot(kSelectorPatterns.size(), manifest.dimension());
  for (std::size_t p = 0; p < kSelectorPatterns.size(); ++p) {
    const auto idx = manifest.feature_index("sel." + std::string(kSelectorPatterns[p]));
    if (idx < manifest.dimension()) selector_slot[p] = idx;
  }
  for (const auto& sheet : doc.stylesheets()) {
    for (const auto& rule : parse_stylesheet(sheet)) {
      v[FeatureManifest::kCssRules] += 1.0;
      for (const auto& prop : rule.properties) v[manifest.css_index(prop)] += 1.0;
      for (const auto& sel : rule.selectors) {
        const auto counts = classify_selector(sel);
        for (std::size_t p = 0; p < counts.size(); ++p) {
          if (selector_slot[p] < manifest.dimension()) v[selector_slot[p]] += counts[p];
        }
      }
    }
  }
  v[manifest.page_kb_index()] = doc.byte_size_kb();
  return out;
}

double dom_change_ratio(std::size_t old_nodes, std::size_t new_nodes) {
  const double diff = std::fabs(static_cast<double>(new_nodes) - static_cast<double>(old_nodes));
  return diff / std::max(1.0, static_cast<double>(old_nodes));
}

double dom_change_ratio(const HtmlDocument& old_doc, const HtmlDocument& new_doc) {
  return dom_change_ratio(old_doc.element_count(), new_doc.element_count());
}

std::vector<CorpusPage> load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("corpus directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".html") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  const auto resolver = directory_resolver(dir);
  std::vector<CorpusPage> pages;
  pages.reserve(files.size());
  for (const auto& f : files) {
    pages.push_back({f.stem().string(), parse_document(read_text_file(f), resolver)});
  }
  return pages;
}

std::string features_to_csv(const std::vector<FeatureRow>& rows, const FeatureManifest& manifest) {
  std::ostringstream out;
  out << "page_id,manifest_version";
  for (const auto& name : manifest.feature_names()) out << ',' << name;
  out << '\n';
  for (const auto& row : rows) {
    if (row.features.values.size() != manifest.dimension()) {
      throw std::invalid_argument("features_to_csv: row '" + row.page_id + "' has wrong dimension");
    }
    out << row.page_id << ',' << row.features.manifest_version;
    for (const double x : row.features.values) out << ',' << format_real(x);
    out << '\n';
  }
  return out.str();
}

std::vector<FeatureRow> features_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("feature CSV: missing header");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "page_id" || header[1] != "manifest_version") {
    throw std::invalid_argument("feature CSV: unexpected header");
  }
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw std::invalid_argument("feature CSV: row has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(header.size()));
    }
    FeatureRow row;
    row.page_id = cells[0];
    row.features.manifest_version = cells[1];
    for (std::size_t i = 2; i < cells.size(); ++i) row.features.values.push_back(parse_real(cells[i]));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace webdvfs::dom
