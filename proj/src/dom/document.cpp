#include "webdvfs/dom/document.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

#include "webdvfs/common/text.hpp"

namespace webdvfs::dom {
namespace {

const std::unordered_set<std::string> kVoidElements = {
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link",
    "meta", "param", "source", "track", "wbr", "keygen"};

const std::unordered_set<std::string> kRawTextElements = {
    "script", "style", "textarea", "title", "xmp", "plaintext"};

const std::unordered_set<std::string> kHeadElements = {
    "base", "link", "meta", "title", "style", "script", "noscript", "template"};

// Start tags that implicitly close an open <p>.
const std::unordered_set<std::string> kClosesParagraph = {
    "address", "article", "aside", "blockquote", "details", "div", "dl",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2",
    "h3", "h4", "h5", "h6", "header", "hgroup", "hr", "main", "menu",
    "nav", "ol", "p", "pre", "section", "table", "ul"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' ||
         c == ':' || c == '.';
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), is_space);
}

void validate_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      throw std::invalid_argument("input is not valid UTF-8 at byte " + std::to_string(i));
    }
    if (extra > 0 && i + extra >= text.size()) {
      throw std::invalid_argument("truncated UTF-8 sequence at byte " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        throw std::invalid_argument("input is not valid UTF-8 at byte " + std::to_string(i));
      }
    }
    i += extra + 1;
  }
}

std::string escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string escape_attr(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '"': out += "&quot;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

// Simplified HTML tree construction: implicit html/head/body, auto-closing of
// common optional-end-tag elements, stray end tags ignored.
class TreeBuilder {
 public:
  explicit TreeBuilder(const StylesheetResolver& resolver) : resolver_(resolver) {}

  HtmlDocument build(std::string_view text) {
    validate_utf8(text);
    doc_.byte_size_kb_ = static_cast<double>(text.size()) / 1024.0;
    src_ = text;
    pos_ = 0;
    while (pos_ < src_.size()) {
      if (src_[pos_] == '<') {
        consume_markup();
      } else {
        const auto next = src_.find('<', pos_);
        const auto end = next == std::string_view::npos ? src_.size() : next;
        on_text(src_.substr(pos_, end - pos_));
        pos_ = end;
      }
    }
    return std::move(doc_);
  }

 private:
  void consume_markup() {
    const std::string_view rest = src_.substr(pos_);
    if (rest.starts_with("<!--")) {
      const auto end = src_.find("-->", pos_ + 4);
      const auto stop = end == std::string_view::npos ? src_.size() : end;
      on_comment(src_.substr(pos_ + 4, stop - (pos_ + 4)));
      pos_ = end == std::string_view::npos ? src_.size() : end + 3;
      return;
    }
    if (rest.size() >= 2 && (rest[1] == '!' || rest[1] == '?')) {
      // doctype, CDATA, processing instructions
      const auto end = src_.find('>', pos_);
      pos_ = end == std::string_view::npos ? src_.size() : end + 1;
      return;
    }
    if (rest.size() >= 2 && rest[1] == '/') {
      std::size_t i = pos_ + 2;
      const std::size_t name_start = i;
      while (i < src_.size() && is_name_char(src_[i])) ++i;
      const std::string name = to_lower(src_.substr(name_start, i - name_start));
      const auto end = src_.find('>', i);
      pos_ = end == std::string_view::npos ? src_.size() : end + 1;
      if (!name.empty()) on_end_tag(name);
      return;
    }
    if (rest.size() >= 2 && std::isalpha(static_cast<unsigned char>(rest[1]))) {
      consume_start_tag();
      return;
    }
    on_text(src_.substr(pos_, 1));
    ++pos_;
  }

  void consume_start_tag() {
    std::size_t i = pos_ + 1;
    const std::size_t name_start = i;
    while (i < src_.size() && is_name_char(src_[i])) ++i;
    const std::string name = to_lower(src_.substr(name_start, i - name_start));
    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    while (i < src_.size()) {
      while (i < src_.size() && is_space(src_[i])) ++i;
      if (i >= src_.size()) break;
      if (src_[i] == '>') {
        ++i;
        break;
      }
      if (src_[i] == '/') {
        self_closing = true;
        ++i;
        continue;
      }
      const std::size_t an_start = i;
      while (i < src_.size() && !is_space(src_[i]) && src_[i] != '=' && src_[i] != '>' &&
             src_[i] != '/') {
        ++i;
      }
      std::string attr_name = to_lower(src_.substr(an_start, i - an_start));
      if (attr_name.empty()) {
        ++i;
        continue;
      }
      self_closing = false;
      while (i < src_.size() && is_space(src_[i])) ++i;
      std::string value;
      if (i < src_.size() && src_[i] == '=') {
        ++i;
        while (i < src_.size() && is_space(src_[i])) ++i;
        if (i < src_.size() && (src_[i] == '"' || src_[i] == '\'')) {
          const char q = src_[i++];
          const auto close = src_.find(q, i);
          const auto stop = close == std::string_view::npos ? src_.size() : close;
          value = std::string(src_.substr(i, stop - i));
          i = close == std::string_view::npos ? src_.size() : close + 1;
        } else {
          const std::size_t v_start = i;
          while (i < src_.size() && !is_space(src_[i]) && src_[i] != '>') ++i;
          value = std::string(src_.substr(v_start, i - v_start));
        }
      }
      const bool duplicate = std::any_of(attrs.begin(), attrs.end(),
                                         [&](const auto& a) { return a.first == attr_name; });
      if (!duplicate) attrs.emplace_back(std::move(attr_name), std::move(value));
    }
    pos_ = i;

    if (kRawTextElements.contains(name)) {
      const std::string closer = "</" + name;
      std::size_t j = pos_;
      std::size_t found = std::string_view::npos;
      while (j < src_.size()) {
        const auto lt = src_.find("</", j);
        if (lt == std::string_view::npos) break;
        if (to_lower(src_.substr(lt, closer.size())) == closer) {
          found = lt;
          break;
        }
        j = lt + 2;
      }
      const auto content_end = found == std::string_view::npos ? src_.size() : found;
      const std::string_view content = src_.substr(pos_, content_end - pos_);
      const std::size_t el = on_start_tag(name, std::move(attrs), false);
      if (!content.empty()) append_node(el, NodeKind::Text, std::string(content));
      if (name == "style") doc_.stylesheets_.emplace_back(content);
      close_element(el);
      if (found == std::string_view::npos) {
        pos_ = src_.size();
      } else {
        const auto gt = src_.find('>', found);
        pos_ = gt == std::string_view::npos ? src_.size() : gt + 1;
      }
      return;
    }
    on_start_tag(name, std::move(attrs), self_closing);
  }

  std::size_t append_node(std::optional<std::size_t> parent, NodeKind kind, std::string name) {
    Node node;
    node.kind = kind;
    node.name = std::move(name);
    node.parent = parent;
    doc_.nodes_.push_back(std::move(node));
    const std::size_t idx = doc_.nodes_.size() - 1;
    if (parent) doc_.nodes_[*parent].children.push_back(idx);
    return idx;
  }

  std::size_t current() const { return stack_.empty() ? *html_ : stack_.back(); }

  void ensure_html() {
    if (html_) return;
    html_ = append_node(std::nullopt, NodeKind::Element, "html");
    doc_.root_ = html_;
  }

  void ensure_head() {
    ensure_html();
    if (head_) return;
    head_ = append_node(*html_, NodeKind::Element, "head");
  }

  void ensure_body() {
    ensure_html();
    if (body_) return;
    if (!stack_.empty() && head_ && stack_.back() == *head_) stack_.pop_back();
    body_ = append_node(*html_, NodeKind::Element, "body");
    stack_.clear();
    stack_.push_back(*body_);
  }

  bool in_body_context() const { return body_.has_value(); }

  void merge_attributes(std::size_t el, std::vector<std::pair<std::string, std::string>> attrs) {
    auto& existing = doc_.nodes_[el].attributes;
    for (auto& a : attrs) {
      const bool dup = std::any_of(existing.begin(), existing.end(),
                                   [&](const auto& e) { return e.first == a.first; });
      if (!dup) existing.push_back(std::move(a));
    }
  }

  void close_element(std::size_t el) {
    const auto it = std::find(stack_.rbegin(), stack_.rend(), el);
    if (it != stack_.rend()) stack_.erase(std::next(it).base(), stack_.end());
  }

  bool stack_has(std::string_view tag) const {
    return std::any_of(stack_.begin(), stack_.end(),
                       [&](std::size_t i) { return doc_.nodes_[i].name == tag; });
  }

  // Pops up to and including the nearest `tag`, stopping at any of `barriers`.
  void close_nearest(std::string_view tag, std::initializer_list<std::string_view> barriers) {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
      const std::string& n = doc_.nodes_[*it].name;
      if (n == tag) {
        stack_.erase(std::next(it).base(), stack_.end());
        return;
      }
      if (std::find(barriers.begin(), barriers.end(), n) != barriers.end()) return;
    }
  }

  void apply_implied_end_tags(const std::string& name) {
    if (kClosesParagraph.contains(name)) {
      close_nearest("p", {"button", "table", "td", "th", "li", "dd", "dt"});
    }
    if (name == "li") close_nearest("li", {"ul", "ol", "menu"});
    if (name == "dt" || name == "dd") {
      close_nearest("dt", {"dl"});
      close_nearest("dd", {"dl"});
    }
    if (name == "option") close_nearest("option", {"select", "datalist"});
    if (name == "tr") close_nearest("tr", {"table"});
    if (name == "td" || name == "th") {
      close_nearest("td", {"tr", "table"});
      close_nearest("th", {"tr", "table"});
    }
    if (name == "thead" || name == "tbody" || name == "tfoot") {
      close_nearest("thead", {"table"});
      close_nearest("tbody", {"table"});
      close_nearest("tfoot", {"table"});
    }
  }

  std::size_t on_start_tag(const std::string& name,
                           std::vector<std::pair<std::string, std::string>> attrs,
                           bool self_closing) {
    if (name == "html") {
      ensure_html();
      merge_attributes(*html_, std::move(attrs));
      return *html_;
    }
    if (name == "head") {
      if (!head_ && !body_) {
        ensure_head();
        merge_attributes(*head_, std::move(attrs));
        stack_.clear();
        stack_.push_back(*head_);
        return *head_;
      }
      return head_ ? *head_ : current();
    }
    if (name == "body") {
      ensure_body();
      merge_attributes(*body_, std::move(attrs));
      return *body_;
    }
    if (!in_body_context()) {
      if (kHeadElements.contains(name)) {
        ensure_head();
        if (stack_.empty()) stack_.push_back(*head_);
      } else {
        ensure_body();
      }
    }
    apply_implied_end_tags(name);
    const std::size_t el = append_node(current(), NodeKind::Element, name);
    doc_.nodes_[el].attributes = std::move(attrs);
    if (name == "link") maybe_load_stylesheet(el);
    if (!kVoidElements.contains(name) && !self_closing) stack_.push_back(el);
    return el;
  }

  void on_end_tag(const std::string& name) {
    if (name == "html" || name == "body") return;
    if (name == "head") {
      if (head_ && !stack_.empty() && stack_.back() == *head_) stack_.pop_back();
      return;
    }
    if (name == "p" && !stack_has("p") && in_body_context()) {
      // Browsers materialize an empty paragraph for a stray </p>.
      append_node(current(), NodeKind::Element, "p");
      return;
    }
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
      const std::size_t idx = *it;
      if (doc_.nodes_[idx].name == name) {
        if (body_ && idx == *body_) return;
        stack_.erase(std::next(it).base(), stack_.end());
        return;
      }
    }
  }

  void on_text(std::string_view text) {
    if (text.empty()) return;
    if (!in_body_context()) {
      if (is_blank(text)) return;
      ensure_body();
    }
    const std::size_t parent = current();
    auto& siblings = doc_.nodes_[parent].children;
    if (!siblings.empty() && doc_.nodes_[siblings.back()].kind == NodeKind::Text) {
      doc_.nodes_[siblings.back()].name += text;
      return;
    }
    append_node(parent, NodeKind::Text, std::string(text));
  }

  void on_comment(std::string_view text) {
    if (!html_) return;  // comments before any content are dropped
    append_node(current(), NodeKind::Comment, std::string(text));
  }

  void maybe_load_stylesheet(std::size_t el) {
    if (!resolver_) return;
    std::string rel;
    std::string href;
    for (const auto& [k, v] : doc_.nodes_[el].attributes) {
      if (k == "rel") rel = to_lower(v);
      if (k == "href") href = v;
    }
    if (rel.find("stylesheet") == std::string::npos || href.empty()) return;
    if (auto css = resolver_(href)) {
      doc_.byte_size_kb_ += static_cast<double>(css->size()) / 1024.0;
      doc_.stylesheets_.push_back(std::move(*css));
    }
  }

  const StylesheetResolver& resolver_;
  HtmlDocument doc_;
  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<std::size_t> stack_;
  std::optional<std::size_t> html_;
  std::optional<std::size_t> head_;
  std::optional<std::size_t> body_;
};

std::size_t HtmlDocument::element_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [](const Node& n) { return n.kind == NodeKind::Element; }));
}

std::size_t HtmlDocument::depth() const {
  if (!root_) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> work{{*root_, 1}};
  while (!work.empty()) {
    const auto [idx, d] = work.back();
    work.pop_back();
    best = std::max(best, d);
    for (const std::size_t c : nodes_[idx].children) {
      if (nodes_[c].kind == NodeKind::Element) work.emplace_back(c, d + 1);
    }
  }
  return best;
}

std::string HtmlDocument::serialize() const {
  std::string out;
  if (!root_) return out;
  // Explicit stack of (node, closing?) to avoid recursion on deep trees.
  std::vector<std::pair<std::size_t, bool>> work{{*root_, false}};
  while (!work.empty()) {
    const auto [idx, closing] = work.back();
    work.pop_back();
    const Node& n = nodes_[idx];
    if (closing) {
      out += "</" + n.name + ">";
      continue;
    }
    if (n.kind == NodeKind::Text) {
      const bool raw = n.parent && kRawTextElements.contains(nodes_[*n.parent].name);
      out += raw ? n.name : escape_text(n.name);
      continue;
    }
    if (n.kind == NodeKind::Comment) {
      out += "<!--" + n.name + "-->";
      continue;
    }
    out += "<" + n.name;
    for (const auto& [k, v] : n.attributes) {
      out += " " + k + "=\"" + escape_attr(v) + "\"";
    }
    out += ">";
    if (kVoidElements.contains(n.name)) continue;
    work.emplace_back(idx, true);
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
      work.emplace_back(*it, false);
    }
  }
  return out;
}

StylesheetResolver directory_resolver(std::filesystem::path dir) {
  return [dir = std::move(dir)](std::string_view href) -> std::optional<std::string> {
    if (href.find("://") != std::string_view::npos || href.starts_with("//")) {
      return std::nullopt;
    }
    const std::filesystem::path rel(std::string(href.substr(0, href.find_first_of("?#"))));
    const auto path = dir / rel.relative_path();
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
    return read_text_file(path);
  };
}

HtmlDocument parse_document(std::string_view html_text, const StylesheetResolver& resolver) {
  TreeBuilder builder(resolver);
  return builder.build(html_text);
}

}  // namespace webdvfs::dom
