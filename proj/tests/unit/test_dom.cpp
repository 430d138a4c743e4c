#include <doctest.h>

#include <numeric>
#include <random>
#include <string>

#include "webdvfs/common/text.hpp"
#include "webdvfs/dom/css.hpp"
#include "webdvfs/dom/document.hpp"
#include "webdvfs/dom/features.hpp"

using namespace webdvfs;
using namespace webdvfs::dom;

namespace {

FeatureManifest small_manifest() {
  return FeatureManifest({"html", "head", "body", "p", "div", "style"}, {"class", "id"},
                         {"color", "margin"},
                         {"type", "class", "id", "descendant", "child", "pseudo", "attribute",
                          "universal"},
                         "test-1");
}

FeatureManifest default_manifest() {
  return FeatureManifest::load(std::string(WEBDVFS_SOURCE_DIR) + "/data/manifest.json");
}

double feature(const RawFeatureVector& v, const FeatureManifest& m, const std::string& name) {
  const auto idx = m.feature_index(name);
  REQUIRE(idx < m.dimension());
  return v.values[idx];
}

// Random tag soup: unbalanced tags, stray end tags, comments, attributes.
std::string random_soup(std::mt19937_64& rng) {
  static const char* tags[] = {"div", "p", "span", "li", "ul", "table", "tr", "td", "a",
                               "img", "br", "section", "x-card", "b", "style", "html", "body"};
  std::uniform_int_distribution<int> pick(0, 16);
  std::uniform_int_distribution<int> kind(0, 9);
  std::string out;
  const int n = std::uniform_int_distribution<int>(0, 60)(rng);
  for (int i = 0; i < n; ++i) {
    const std::string t = tags[pick(rng)];
    switch (kind(rng)) {
      case 0:
      case 1:
      case 2:
      case 3:
        out += "<" + t + (kind(rng) < 4 ? " class=\"c\" id=k" : "") + ">";
        if (t == "style") out += "p{color:red} .a > b:hover{margin:0}</style>";
        break;
      case 4:
      case 5: out += "</" + t + ">"; break;
      case 6: out += "text & more "; break;
      case 7: out += "<!-- note -->"; break;
      case 8: out += "<" + t + "/>"; break;
      default: out += "<"; break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("empty input yields an empty document") {
  const auto doc = parse_document("");
  CHECK(doc.element_count() == 0);
  CHECK(doc.depth() == 0);
  CHECK(doc.stylesheets().empty());
  const auto m = small_manifest();
  const auto v = extract_features(doc, m);
  CHECK(v.values.size() == m.dimension());
  for (const double x : v.values) CHECK(x == 0.0);
}

TEST_CASE("element-only node counting and depth") {
  const auto doc = parse_document("<html><body><p>hi</p></body></html>");
  CHECK(doc.element_count() == 3);
  CHECK(doc.depth() == 3);
}

TEST_CASE("style block contributes one rule, one property, one type selector") {
  const auto doc = parse_document("<html><head><style>p{color:red}</style></head><body></body></html>");
  const auto m = small_manifest();
  const auto v = extract_features(doc, m);
  CHECK(v.values[FeatureManifest::kCssRules] == 1.0);
  CHECK(feature(v, m, "css.color") == 1.0);
  CHECK(feature(v, m, "sel.type") == 1.0);
  CHECK(feature(v, m, "sel.class") == 0.0);
}

TEST_CASE("unclosed paragraphs are siblings") {
  const auto doc = parse_document("<p><p><p>");
  const auto m = small_manifest();
  const auto v = extract_features(doc, m);
  CHECK(feature(v, m, "tag.p") == 3.0);
  // implicit html and body wrap the fragment
  CHECK(doc.depth() == 3);
}

TEST_CASE("empty document has only page size non-zero") {
  const auto doc = parse_document("   \n  ");
  const auto m = small_manifest();
  const auto v = extract_features(doc, m);
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    if (i == m.page_kb_index()) {
      CHECK(v.values[i] == doctest::Approx(6.0 / 1024.0));
    } else {
      CHECK(v.values[i] == 0.0);
    }
  }
}

TEST_CASE("unknown tags and attributes fall into the other slot") {
  const auto doc = parse_document("<div data-x=1 class=a><x-card>hi</x-card><marquee></marquee></div>");
  const auto m = small_manifest();
  const auto v = extract_features(doc, m);
  CHECK(feature(v, m, std::string("tag.") + kOtherSlot) == 2.0);
  CHECK(feature(v, m, std::string("attr.") + kOtherSlot) == 1.0);
  CHECK(feature(v, m, "attr.class") == 1.0);
  const auto& nodes = doc.nodes();
  const bool kept = std::any_of(nodes.begin(), nodes.end(), [](const Node& n) { return n.name == "x-card"; });
  CHECK(kept);
}

TEST_CASE("auto-close rules for list items and table cells") {
  const auto doc = parse_document("<ul><li>a<li>b<li>c</ul><table><tr><td>1<td>2<tr><td>3</table>");
  const auto m = FeatureManifest({"li", "td", "tr", "ul", "table"}, {}, {}, {}, "t");
  const auto v = extract_features(doc, m);
  CHECK(feature(v, m, "tag.li") == 3.0);
  CHECK(feature(v, m, "tag.td") == 3.0);
  CHECK(feature(v, m, "tag.tr") == 2.0);
  // html > body > table > tr > td
  CHECK(doc.depth() == 5);
}

TEST_CASE("raw text elements do not produce child elements") {
  const auto doc = parse_document("<script>if (a < b) { document.write('<div>'); }</script><p>x</p>");
  const auto m = small_manifest();
  const auto v = extract_features(doc, m);
  CHECK(feature(v, m, "tag.div") == 0.0);
  CHECK(feature(v, m, "tag.p") == 1.0);
}

TEST_CASE("invalid UTF-8 is the only fatal input") {
  CHECK_THROWS_AS(parse_document(std::string("<p>\xff\xfe</p>")), std::invalid_argument);
  CHECK_THROWS_AS(parse_document(std::string("<p>\xe2\x82")), std::invalid_argument);
  CHECK_NOTHROW(parse_document("<p>caf\xc3\xa9 \xe2\x82\xac</p>"));
  CHECK_NOTHROW(parse_document("<<<>>></></div><p attr='unterminated"));
}

TEST_CASE("linked stylesheets resolve from a local directory only") {
  const std::string dir = std::string(WEBDVFS_SOURCE_DIR) + "/tests/fixtures";
  const std::string html = read_text_file(dir + "/landing.html");
  const auto without = parse_document(html);
  const auto with = parse_document(html, directory_resolver(dir));
  CHECK(without.stylesheets().size() == 1);
  CHECK(with.stylesheets().size() == 2);
  CHECK(with.byte_size_kb() > without.byte_size_kb());
  const auto remote = parse_document("<link rel=stylesheet href=\"http://example.com/a.css\">",
                                     directory_resolver(dir));
  CHECK(remote.stylesheets().empty());
}

TEST_CASE("css parser handles at-rules, comments and custom properties") {
  const auto rules = parse_stylesheet(
      "/* c */ a{color:red;margin:0} @media screen{ .x{color:blue} } @font-face{src:url(a)}"
      " @import 'x.css'; b , i { --v: 1; content: '}' }");
  REQUIRE(rules.size() == 3);
  CHECK(rules[0].properties == std::vector<std::string>{"color", "margin"});
  CHECK(rules[1].selectors == std::vector<std::string>{".x"});
  CHECK(rules[2].selectors.size() == 2);
  CHECK(rules[2].properties == std::vector<std::string>{"--v", "content"});
}

TEST_CASE("selector pattern classification") {
  auto c = classify_selector("div.nav > li:hover a[href] *");
  // type: div, li, a; class: .nav; child: >; pseudo: :hover; descendant: 2; attribute; universal
  CHECK(c[0] == 3);
  CHECK(c[1] == 1);
  CHECK(c[2] == 0);
  CHECK(c[3] == 2);
  CHECK(c[4] == 1);
  CHECK(c[5] == 1);
  CHECK(c[6] == 1);
  CHECK(c[7] == 1);
  c = classify_selector("#top .nav a::before");
  CHECK(c[2] == 1);
  CHECK(c[1] == 1);
  CHECK(c[3] == 2);
  CHECK(c[5] == 1);
  CHECK(c[0] == 1);
}

TEST_CASE("dom_change_ratio is directional with the old tree as base") {
  const auto a = parse_document("<div><p>x</p></div>");
  CHECK(dom_change_ratio(a, a) == 0.0);
  CHECK(dom_change_ratio(100, 130) == doctest::Approx(0.30));
  CHECK(dom_change_ratio(100, 50) == doctest::Approx(0.50));
  CHECK(dom_change_ratio(130, 100) == doctest::Approx(30.0 / 130.0));
  CHECK(dom_change_ratio(0, 5) == doctest::Approx(5.0));
}

TEST_CASE("manifest validation") {
  CHECK_THROWS_AS(FeatureManifest({"p", "p"}, {}, {}, {}, "v"), std::invalid_argument);
  CHECK_THROWS_AS(FeatureManifest({"p"}, {}, {}, {"sibling"}, "v"), std::invalid_argument);
  const auto m = default_manifest();
  const std::size_t expected = 3 + m.tags().size() + m.attributes().size() +
                               m.css_properties().size() + m.selector_patterns().size() + 1;
  CHECK(m.dimension() == expected);
  CHECK(m.tags().back() == kOtherSlot);
  CHECK(m.selector_patterns().size() == 8);
  const auto again = FeatureManifest::from_json_text(m.to_json_text());
  CHECK(again.feature_names() == m.feature_names());
}

TEST_CASE("feature CSV round trip") {
  const auto m = small_manifest();
  std::vector<FeatureRow> rows;
  rows.push_back({"page-a", extract_features(parse_document("<div class=a><p>x</p></div>"), m)});
  rows.push_back({"page-b", extract_features(parse_document(""), m)});
  const auto csv = features_to_csv(rows, m);
  CHECK(csv.rfind("page_id,manifest_version,dom_nodes,tree_depth,css_rules,tag.html", 0) == 0);
  const auto back = features_from_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].features.values == rows[0].features.values);
  CHECK(back[1].features.manifest_version == "test-1");
}

TEST_CASE("property: malformed soup never throws; counts are consistent and stable") {
  std::mt19937_64 rng(20190411);
  const auto m = default_manifest();
  const std::size_t tag_begin = m.tag_offset();
  const std::size_t tag_end = m.attr_offset();
  for (int trial = 0; trial < 300; ++trial) {
    const std::string html = random_soup(rng);
    CAPTURE(html);
    HtmlDocument doc;
    REQUIRE_NOTHROW(doc = parse_document(html));
    const auto v1 = extract_features(doc, m);
    const auto v2 = extract_features(doc, m);
    CHECK(v1.values == v2.values);
    const double tag_sum = std::accumulate(v1.values.begin() + static_cast<std::ptrdiff_t>(tag_begin),
                                           v1.values.begin() + static_cast<std::ptrdiff_t>(tag_end), 0.0);
    CHECK(tag_sum == v1.values[FeatureManifest::kDomNodes]);
    for (const double x : v1.values) CHECK(x >= 0.0);

    // Serialize and re-parse: identical counts (page size excluded, it tracks bytes).
    const auto reparsed = parse_document(doc.serialize());
    auto v3 = extract_features(reparsed, m);
    auto v1c = v1.values;
    v1c[m.page_kb_index()] = 0.0;
    v3.values[m.page_kb_index()] = 0.0;
    CHECK(v3.values == v1c);
  }
}
