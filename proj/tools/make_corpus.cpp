// Generates the synthetic landing-page corpus: one .html and one sibling
// .css per page. Page structure is driven by a handful of latent traits
// (size, style weight, media weight, interactivity) so that raw features
// are correlated the way real landing pages are.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "webdvfs/common/random.hpp"
#include "webdvfs/common/text.hpp"

namespace {

using webdvfs::Rng;

struct Traits {
  std::string id;
  double sections = 10;   // content blocks in <main>
  double style = 1.0;     // CSS rules multiplier
  double media = 0.3;     // probability a block carries an image
  double interactive = 0.2;
  double text = 1.0;      // words per paragraph multiplier
  int nesting = 0;        // wrapper <div>s around the main grid
};

const std::vector<std::string> kWords = {
    "market", "update", "world", "sport", "travel", "weather", "video", "story", "live",
    "report", "analysis", "photo", "review", "local", "business", "science", "health",
    "culture", "opinion", "breaking", "today", "latest", "global", "city", "team"};

const std::vector<std::string> kProps = {
    "color", "margin", "padding", "display", "font-size", "font-weight", "line-height",
    "background-color", "width", "height", "border", "position", "top", "left", "flex",
    "align-items", "justify-content", "text-align", "overflow", "z-index", "opacity",
    "transition", "transform", "box-shadow", "border-radius", "max-width", "grid-template-columns",
    "cursor", "white-space", "text-decoration", "font-family", "margin-top", "padding-left"};

std::string words(Rng& rng, int n) {
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kWords[pick(rng)];
  }
  return out;
}

int poisson(Rng& rng, double mean) {
  if (mean <= 0) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

std::string selector(Rng& rng) {
  std::uniform_int_distribution<int> form(0, 11);
  std::uniform_int_distribution<int> n(0, 40);
  switch (form(rng)) {
    case 0: return "p";
    case 1: return ".c" + std::to_string(n(rng));
    case 2: return "#s" + std::to_string(n(rng));
    case 3: return ".c" + std::to_string(n(rng)) + " a";
    case 4: return "ul > li";
    case 5: return "a:hover";
    case 6: return "input[type=\"text\"]";
    case 7: return ".grid > .c" + std::to_string(n(rng));
    case 8: return "article h2";
    case 9: return "* ";
    case 10: return ".card .c" + std::to_string(n(rng)) + ":first-child";
    default: return "div.c" + std::to_string(n(rng));
  }
}

std::string css_rules(Rng& rng, int count) {
  std::uniform_int_distribution<std::size_t> prop(0, kProps.size() - 1);
  std::ostringstream out;
  for (int r = 0; r < count; ++r) {
    if (r > 0 && r % 40 == 0) out << "@media (max-width: 600px) {\n";
    out << selector(rng);
    if (chance(rng, 0.15)) out << ", " << selector(rng);
    out << " {";
    const int nprops = 1 + poisson(rng, 2.0);
    for (int k = 0; k < nprops; ++k) out << ' ' << kProps[prop(rng)] << ": " << (k + 1) * 4 << "px;";
    out << " }\n";
    if (r > 0 && r % 40 == 0) out << "}\n";
  }
  return out.str();
}

void block(std::ostringstream& h, Rng& rng, const Traits& t, int index) {
  const std::string cls = "c" + std::to_string(index % 41);
  const int layout = index % 4;
  if (layout == 3 && chance(rng, 0.5)) {
    h << "<table class=\"" << cls << "\"><tbody>";
    const int rows = 2 + poisson(rng, 3);
    for (int r = 0; r < rows; ++r) {
      h << "<tr>";
      for (int c = 0; c < 3; ++c) h << "<td>" << words(rng, 2) << "</td>";
      h << "</tr>";
    }
    h << "</tbody></table>\n";
    return;
  }
  h << "<article class=\"card " << cls << "\" id=\"s" << index << "\">";
  h << "<h2>" << words(rng, 3) << "</h2>";
  if (chance(rng, t.media)) {
    h << "<figure><img src=\"img/" << index << ".jpg\" alt=\"" << words(rng, 2)
      << "\" width=\"320\" height=\"180\" loading=\"lazy\">";
    if (chance(rng, 0.5)) h << "<figcaption>" << words(rng, 4) << "</figcaption>";
    h << "</figure>";
  }
  if (chance(rng, t.media * 0.4)) {
    h << "<picture><source srcset=\"img/" << index << ".webp\" type=\"image/webp\"><img src=\"img/"
      << index << "b.jpg\" alt=\"\"></picture>";
  }
  const int paras = 1 + poisson(rng, 1.5 * t.text);
  for (int p = 0; p < paras; ++p) {
    h << "<p>" << words(rng, 8 + poisson(rng, 25 * t.text));
    if (chance(rng, 0.4)) h << " <a href=\"/story/" << index << "-" << p << "\">" << words(rng, 2) << "</a>";
    if (chance(rng, 0.3)) h << " <span class=\"tag\">" << words(rng, 1) << "</span>";
    if (chance(rng, 0.2)) h << " <strong>" << words(rng, 1) << "</strong>";
    h << "</p>";
  }
  if (chance(rng, 0.5)) {
    h << "<ul class=\"links\">";
    const int links = 1 + poisson(rng, 3);
    for (int l = 0; l < links; ++l) {
      h << "<li><a href=\"/l/" << index << "/" << l << "\" class=\"more\">" << words(rng, 2) << "</a></li>";
    }
    h << "</ul>";
  }
  if (chance(rng, t.interactive)) {
    h << "<button type=\"button\" class=\"share\" aria-label=\"share\" onclick=\"share(" << index
      << ")\">Share</button>";
  }
  if (chance(rng, t.interactive * 0.3)) {
    h << "<form action=\"/subscribe\" method=\"post\"><label for=\"e" << index << "\">Email</label>"
      << "<input type=\"email\" id=\"e" << index << "\" name=\"email\" placeholder=\"you@example.com\" required>"
      << "<select name=\"freq\"><option value=\"d\">daily</option><option value=\"w\">weekly</option></select>"
      << "<button type=\"submit\">Go</button></form>";
  }
  if (chance(rng, t.media * 0.15)) {
    h << "<video src=\"v/" << index << ".mp4\" controls poster=\"v/" << index << ".jpg\" width=\"320\"></video>";
  }
  if (chance(rng, t.media * 0.1)) {
    h << "<iframe src=\"/embed/" << index << "\" width=\"300\" height=\"250\" loading=\"lazy\"></iframe>";
  }
  h << "</article>\n";
}

void write_page(const std::filesystem::path& dir, const Traits& t, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
    << "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n"
    << "<title>" << t.id << " - " << words(rng, 3) << "</title>\n"
    << "<link rel=\"stylesheet\" href=\"" << t.id << ".css\">\n";
  const int inline_rules = poisson(rng, 6 * t.style);
  if (inline_rules > 0) h << "<style>\n" << css_rules(rng, inline_rules) << "</style>\n";
  const int scripts = poisson(rng, 1 + 3 * t.interactive + t.sections / 25);
  for (int s = 0; s < scripts; ++s) h << "<script src=\"js/" << s << ".js\" async></script>\n";
  h << "</head>\n<body class=\"home\">\n";

  h << "<header id=\"top\"><a href=\"/\" class=\"logo\"><img src=\"logo.svg\" alt=\"logo\"></a><nav class=\"nav\"><ul>";
  const int nav = 3 + poisson(rng, 2 + t.sections / 8);
  for (int i = 0; i < nav; ++i) h << "<li><a href=\"/section/" << i << "\">" << words(rng, 1) << "</a></li>";
  h << "</ul></nav></header>\n";
  for (int w = 0; w < t.nesting; ++w) h << "<div class=\"wrap" << w << "\">";
  h << "<main class=\"grid\">\n";
  const int sections = std::max(1, poisson(rng, t.sections));
  for (int i = 0; i < sections; ++i) {
    if (i % 6 == 0) h << "<section class=\"c" << i % 41 << "\">\n";
    block(h, rng, t, i);
    if (i % 6 == 5 || i + 1 == sections) h << "</section>\n";
  }
  h << "</main>";
  for (int w = 0; w < t.nesting; ++w) h << "</div>";
  h << "\n<footer><p>" << words(rng, 6) << "</p><div class=\"links\">";
  const int foot = 2 + poisson(rng, 4);
  for (int i = 0; i < foot; ++i) h << "<a href=\"/f/" << i << "\">" << words(rng, 1) << "</a> ";
  h << "</div></footer>\n";
  if (chance(rng, t.interactive)) h << "<script>window.ready = true;</script>\n";
  h << "</body>\n</html>\n";

  const int sheet_rules = std::max(1, poisson(rng, 40 * t.style + t.sections * 1.5));
  webdvfs::write_text_file(dir / (t.id + ".html"), h.str());
  webdvfs::write_text_file(dir / (t.id + ".css"), "/* " + t.id + " */\n" + css_rules(rng, sheet_rules));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic landing-page corpus"};
  std::string out = "corpus";
  std::uint64_t seed = 2019;
  int pages = 100;
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--pages", pages, "number of pages (including the news anchor page)")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  std::lognormal_distribution<double> size(std::log(14.0), 0.85);
  std::lognormal_distribution<double> style(0.0, 0.6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Traits> all;
  // Heavy news landing page used to calibrate the platform oracles.
  all.push_back({"cnn-like", 55, 2.5, 0.8, 0.4, 1.2, 4});
  for (int i = 1; i < pages; ++i) {
    Traits t;
    t.id = "site-" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i);
    t.sections = std::clamp(size(rng), 1.0, 90.0);
    t.style = std::clamp(style(rng), 0.2, 4.0);
    t.media = 0.1 + 0.8 * unit(rng);
    t.interactive = 0.05 + 0.6 * unit(rng);
    t.text = 0.4 + 1.2 * unit(rng);
    t.nesting = static_cast<int>(unit(rng) * 7.0);
    all.push_back(t);
  }
  for (const auto& t : all) write_page(dir, t, webdvfs::mix_seed(seed, webdvfs::fnv1a(t.id)));
  std::cout << "wrote " << all.size() << " pages to " << dir << "\n";
  return 0;
}
