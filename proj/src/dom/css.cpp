#include "webdvfs/dom/css.hpp"

#include <cctype>

#include "webdvfs/common/text.hpp"

namespace webdvfs::dom {
namespace {

std::string strip_comments(std::string_view css) {
  std::string out;
  out.reserve(css.size());
  std::size_t i = 0;
  while (i < css.size()) {
    if (css.substr(i, 2) == "/*") {
      const auto end = css.find("*/", i + 2);
      if (end == std::string_view::npos) break;
      i = end + 2;
      out += ' ';
      continue;
    }
    out += css[i++];
  }
  return out;
}

// Index one past the '}' matching the '{' at `open`; honors strings and nesting.
std::size_t match_block(std::string_view s, std::size_t open) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return s.size();
}

std::vector<std::string> split_top_level(std::string_view s, char sep) {
  std::vector<std::string> out;
  int paren = 0;
  int bracket = 0;
  char quote = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    switch (c) {
      case '"':
      case '\'': quote = c; break;
      case '(': ++paren; break;
      case ')': --paren; break;
      case '[': ++bracket; break;
      case ']': --bracket; break;
      default:
        if (c == sep && paren <= 0 && bracket <= 0) {
          out.push_back(trim(s.substr(start, i - start)));
          start = i + 1;
        }
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

bool is_conditional_group(std::string_view keyword) {
  return keyword == "media" || keyword == "supports" || keyword == "document" ||
         keyword == "-moz-document" || keyword == "layer" || keyword == "container";
}

void parse_rules(std::string_view css, std::vector<StyleRule>& out) {
  std::size_t i = 0;
  while (i < css.size()) {
    while (i < css.size() && std::isspace(static_cast<unsigned char>(css[i]))) ++i;
    if (i >= css.size()) break;
    if (css[i] == '}' || css[i] == ';') {
      ++i;
      continue;
    }
    if (css[i] == '@') {
      std::size_t k = i + 1;
      while (k < css.size() && (std::isalnum(static_cast<unsigned char>(css[k])) || css[k] == '-')) ++k;
      const std::string keyword = to_lower(css.substr(i + 1, k - i - 1));
      const auto brace = css.find_first_of("{;", k);
      if (brace == std::string_view::npos) break;
      if (css[brace] == ';') {
        i = brace + 1;
        continue;
      }
      const std::size_t end = match_block(css, brace);
      if (is_conditional_group(keyword)) {
        const std::size_t inner_end = end > brace + 1 ? end - 1 : brace + 1;
        parse_rules(css.substr(brace + 1, inner_end - brace - 1), out);
      }
      i = end;
      continue;
    }
    const auto brace = css.find('{', i);
    if (brace == std::string_view::npos) break;
    const std::size_t end = match_block(css, brace);
    const std::string_view prelude = css.substr(i, brace - i);
    const std::size_t body_end = end > brace + 1 ? end - 1 : brace + 1;
    const std::string_view body = css.substr(brace + 1, body_end - brace - 1);
    StyleRule rule;
    for (auto& sel : split_top_level(prelude, ',')) {
      if (!sel.empty()) rule.selectors.push_back(std::move(sel));
    }
    for (const auto& decl : split_top_level(body, ';')) {
      const auto colon = decl.find(':');
      if (colon == std::string::npos) continue;
      std::string name = to_lower(trim(std::string_view(decl).substr(0, colon)));
      if (!name.empty()) rule.properties.push_back(std::move(name));
    }
    if (!rule.selectors.empty()) out.push_back(std::move(rule));
    i = end;
  }
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80 || c == '\\';
}

enum Pattern { kType, kClass, kId, kDescendant, kChild, kPseudo, kAttribute, kUniversal };

}  // namespace

std::vector<StyleRule> parse_stylesheet(std::string_view css) {
  std::vector<StyleRule> rules;
  const std::string clean = strip_comments(css);
  parse_rules(clean, rules);
  return rules;
}

std::array<int, 8> classify_selector(std::string_view selector) {
  std::array<int, 8> counts{};
  const std::string sel = trim(selector);
  std::size_t i = 0;
  bool compound_started = false;
  bool pending_space = false;
  auto skip_ident = [&] {
    while (i < sel.size() && is_ident_char(sel[i])) i += sel[i] == '\\' ? 2 : 1;
  };
  while (i < sel.size()) {
    const char c = sel[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = compound_started;
      ++i;
      continue;
    }
    if (c == '>' || c == '+' || c == '~') {
      if (c == '>') ++counts[kChild];
      pending_space = false;
      compound_started = false;
      ++i;
      continue;
    }
    if (pending_space) {
      ++counts[kDescendant];
      pending_space = false;
      compound_started = false;
    }
    if (c == '*') {
      ++counts[kUniversal];
      ++i;
    } else if (c == '#') {
      ++counts[kId];
      ++i;
      skip_ident();
    } else if (c == '.') {
      ++counts[kClass];
      ++i;
      skip_ident();
    } else if (c == '[') {
      ++counts[kAttribute];
      const auto end = sel.find(']', i);
      i = end == std::string::npos ? sel.size() : end + 1;
    } else if (c == ':') {
      ++counts[kPseudo];
      while (i < sel.size() && sel[i] == ':') ++i;
      skip_ident();
      if (i < sel.size() && sel[i] == '(') {
        int depth = 0;
        for (; i < sel.size(); ++i) {
          if (sel[i] == '(') ++depth;
          if (sel[i] == ')' && --depth == 0) {
            ++i;
            break;
          }
        }
      }
    } else if (is_ident_char(c)) {
      if (!compound_started) ++counts[kType];
      skip_ident();
    } else {
      ++i;
    }
    compound_started = true;
  }
  return counts;
}

}  // namespace webdvfs::dom
