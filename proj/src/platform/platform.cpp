#include "webdvfs/platform/platform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "webdvfs/common/random.hpp"
#include "webdvfs/common/text.hpp"

namespace webdvfs::platform {
namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw std::invalid_argument("platform spec: " + path + ": " + what);
}

const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  if (!obj.contains(key)) schema_error(path + "." + key, "missing required field");
  return obj.at(key);
}

double number(const json& obj, const std::string& path, const char* key) {
  const auto& v = field(obj, path, key);
  if (!v.is_number()) schema_error(path + "." + key, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  return obj.contains(key) ? number(obj, path, key) : fallback;
}

std::string text(const json& obj, const std::string& path, const char* key) {
  const auto& v = field(obj, path, key);
  if (!v.is_string()) schema_error(path + "." + key, "expected a string");
  return v.get<std::string>();
}

void validate_cluster(const ClusterSpec& c, const std::string& path) {
  if (c.frequencies.empty()) schema_error(path + ".frequencies_ghz", "empty ladder");
  for (std::size_t i = 0; i < c.frequencies.size(); ++i) {
    if (!(c.frequencies[i] > 0.0)) {
      schema_error(path + ".frequencies_ghz[" + std::to_string(i) + "]", "frequency must be positive");
    }
    if (i > 0 && !(c.frequencies[i] > c.frequencies[i - 1])) {
      schema_error(path + ".frequencies_ghz[" + std::to_string(i) + "]", "ladder must be strictly increasing");
    }
  }
  if (!(c.ipc_factor > 0.0)) schema_error(path + ".ipc_factor", "must be > 0");
  if (!(c.static_power_w >= 0.0)) schema_error(path + ".static_power_w", "must be >= 0");
  if (!(c.dyn_coeff_w_per_ghz3 > 0.0)) schema_error(path + ".dyn_coeff_w_per_ghz3", "must be > 0");
}

ClusterSpec parse_cluster(const json& j, const std::string& path) {
  ClusterSpec c;
  c.name = text(j, path, "name");
  const std::string kind = text(j, path, "kind");
  try {
    c.kind = parse_cluster_kind(kind);
  } catch (const std::invalid_argument& e) {
    schema_error(path + ".kind", e.what());
  }
  const auto& freqs = field(j, path, "frequencies_ghz");
  if (!freqs.is_array() || freqs.empty()) schema_error(path + ".frequencies_ghz", "expected a non-empty array");
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (!freqs[i].is_number()) schema_error(path + ".frequencies_ghz[" + std::to_string(i) + "]", "expected a number");
    c.frequencies.push_back(freqs[i].get<double>());
  }
  c.ipc_factor = number(j, path, "ipc_factor");
  c.static_power_w = number(j, path, "static_power_w");
  c.dyn_coeff_w_per_ghz3 = number(j, path, "dyn_coeff_w_per_ghz3");
  validate_cluster(c, path);
  return c;
}

json cluster_json(const ClusterSpec& c) {
  json j;
  j["name"] = c.name;
  j["kind"] = to_string(c.kind);
  j["frequencies_ghz"] = c.frequencies;
  j["ipc_factor"] = c.ipc_factor;
  j["static_power_w"] = c.static_power_w;
  j["dyn_coeff_w_per_ghz3"] = c.dyn_coeff_w_per_ghz3;
  return j;
}

}  // namespace

std::string to_string(ClusterKind k) { return k == ClusterKind::Big ? "big" : "little"; }

ClusterKind parse_cluster_kind(const std::string& s) {
  if (s == "big") return ClusterKind::Big;
  if (s == "little") return ClusterKind::Little;
  throw std::invalid_argument("unknown cluster kind '" + s + "'");
}

bool ClusterSpec::has_frequency(double f) const {
  return std::find(frequencies.begin(), frequencies.end(), f) != frequencies.end();
}

std::string describe(const ProcessorSetting& s) {
  return to_string(s.render_cluster) + "@" + format_real(s.render_freq) + "/" + format_real(s.other_freq);
}

void PlatformSpec::validate() const {
  validate_cluster(big, "clusters[big]");
  validate_cluster(little, "clusters[little]");
  if (big.kind != ClusterKind::Big || little.kind != ClusterKind::Little) {
    schema_error("clusters", "need exactly one big and one little cluster");
  }
  if (!(big.ipc_factor > little.ipc_factor)) schema_error("clusters", "big ipc_factor must exceed little's");
  if (!(fps_cap > 0.0)) schema_error("fps_cap", "must be > 0");
  if (!(reconfiguration_overhead_ms >= 0.0)) schema_error("reconfiguration_overhead_ms", "must be >= 0");
  if (!(background_utilization >= 0.0 && background_utilization <= 1.0)) {
    schema_error("background_utilization", "must lie in [0, 1]");
  }
  if (setting_table.size() < 2) schema_error("setting_table", "needs at least two settings");
  for (std::size_t i = 0; i < setting_table.size(); ++i) {
    const auto& s = setting_table[i];
    const std::string path = "setting_table[" + std::to_string(i) + "]";
    if (!cluster(s.render_cluster).has_frequency(s.render_freq)) {
      schema_error(path + ".render_freq_ghz", "not on the " + to_string(s.render_cluster) + " ladder");
    }
    if (!other_cluster(s.render_cluster).has_frequency(s.other_freq)) {
      schema_error(path + ".other_freq_ghz", "not on the other cluster's ladder");
    }
  }
  if (!(oracle.a0_ms > 0.0 && oracle.a1_complexity > 0.0 && oracle.a2_rate > 0.0)) {
    schema_error("oracle", "coefficients a0_ms, a1_complexity, a2_rate must be > 0");
  }
  if (!(oracle.noise_sigma >= 0.0)) schema_error("oracle.noise_sigma", "must be >= 0");
  if (!(oracle.scroll_factor > 0.0 && oracle.pinch_factor > 0.0)) schema_error("oracle.gesture_factor", "must be > 0");
}

ProcessorSetting PlatformSpec::highest_setting() const {
  ProcessorSetting best{ClusterKind::Big, big.max_freq(), little.min_freq()};
  for (const auto& s : setting_table) {
    if (s.render_cluster == ClusterKind::Big && s.render_freq == big.max_freq()) return s;
  }
  return best;
}

std::vector<ProcessorSetting> default_setting_table(const ClusterSpec& big, const ClusterSpec& little) {
  std::vector<ProcessorSetting> table;
  for (const double f : big.frequencies) table.push_back({ClusterKind::Big, f, little.min_freq()});
  for (const double f : little.frequencies) table.push_back({ClusterKind::Little, f, big.min_freq()});
  return table;
}

PlatformSpec platform_spec_from_json_text(const std::string& content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("platform spec: invalid JSON: ") + e.what());
  }
  PlatformSpec p;
  p.name = text(j, "$", "name");
  p.fps_cap = number_or(j, "$", "fps_cap", 60.0);
  p.reconfiguration_overhead_ms = number_or(j, "$", "reconfiguration_overhead_ms", 10.0);
  p.background_utilization = number_or(j, "$", "background_utilization", 0.2);

  const auto& clusters = field(j, "$", "clusters");
  if (!clusters.is_array() || clusters.size() != 2) schema_error("$.clusters", "expected an array of two clusters");
  bool have_big = false;
  bool have_little = false;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    auto c = parse_cluster(clusters[i], "$.clusters[" + std::to_string(i) + "]");
    if (c.kind == ClusterKind::Big) {
      if (have_big) schema_error("$.clusters[" + std::to_string(i) + "].kind", "duplicate big cluster");
      p.big = std::move(c);
      have_big = true;
    } else {
      if (have_little) schema_error("$.clusters[" + std::to_string(i) + "].kind", "duplicate little cluster");
      p.little = std::move(c);
      have_little = true;
    }
  }
  validate_cluster(p.big, "$.clusters[big]");
  validate_cluster(p.little, "$.clusters[little]");

  if (j.contains("setting_table")) {
    const auto& table = j.at("setting_table");
    if (!table.is_array()) schema_error("$.setting_table", "expected an array");
    for (std::size_t i = 0; i < table.size(); ++i) {
      const std::string path = "$.setting_table[" + std::to_string(i) + "]";
      ProcessorSetting s;
      const std::string kind = text(table[i], path, "render_cluster");
      try {
        s.render_cluster = parse_cluster_kind(kind);
      } catch (const std::invalid_argument& e) {
        schema_error(path + ".render_cluster", e.what());
      }
      s.render_freq = number(table[i], path, "render_freq_ghz");
      s.other_freq = number(table[i], path, "other_freq_ghz");
      p.setting_table.push_back(s);
    }
  } else {
    p.setting_table = default_setting_table(p.big, p.little);
  }

  const auto& o = field(j, "$", "oracle");
  p.oracle.a0_ms = number(o, "$.oracle", "a0_ms");
  p.oracle.a1_complexity = number(o, "$.oracle", "a1_complexity");
  p.oracle.a2_rate = number(o, "$.oracle", "a2_rate");
  p.oracle.noise_sigma = number_or(o, "$.oracle", "noise_sigma", 1.0);
  if (o.contains("gesture_factor")) {
    const auto& gf = o.at("gesture_factor");
    p.oracle.scroll_factor = number_or(gf, "$.oracle.gesture_factor", "scroll", 1.0);
    p.oracle.pinch_factor = number_or(gf, "$.oracle.gesture_factor", "pinch", 1.25);
  }
  if (j.contains("workload")) {
    const auto& w = j.at("workload");
    const std::string path = "$.workload";
    p.workload.nodes = number_or(w, path, "nodes", p.workload.nodes);
    p.workload.kb = number_or(w, path, "kb", p.workload.kb);
    p.workload.css_rules = number_or(w, path, "css_rules", p.workload.css_rules);
    p.workload.img = number_or(w, path, "img", p.workload.img);
    p.workload.nodes_scale = number_or(w, path, "nodes_scale", p.workload.nodes_scale);
    p.workload.kb_scale = number_or(w, path, "kb_scale", p.workload.kb_scale);
    p.workload.css_rules_scale = number_or(w, path, "css_rules_scale", p.workload.css_rules_scale);
    p.workload.img_scale = number_or(w, path, "img_scale", p.workload.img_scale);
  }
  p.validate();
  return p;
}

PlatformSpec load_platform_spec(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("platform spec not found: " + path.string());
  return platform_spec_from_json_text(read_text_file(path));
}

std::string platform_spec_to_json_text(const PlatformSpec& p) {
  json j;
  j["name"] = p.name;
  j["fps_cap"] = p.fps_cap;
  j["reconfiguration_overhead_ms"] = p.reconfiguration_overhead_ms;
  j["background_utilization"] = p.background_utilization;
  j["clusters"] = json::array({cluster_json(p.big), cluster_json(p.little)});
  json table = json::array();
  for (const auto& s : p.setting_table) {
    table.push_back({{"render_cluster", to_string(s.render_cluster)},
                     {"render_freq_ghz", s.render_freq},
                     {"other_freq_ghz", s.other_freq}});
  }
  j["setting_table"] = table;
  j["oracle"] = {{"a0_ms", p.oracle.a0_ms},
                 {"a1_complexity", p.oracle.a1_complexity},
                 {"a2_rate", p.oracle.a2_rate},
                 {"noise_sigma", p.oracle.noise_sigma},
                 {"gesture_factor", {{"scroll", p.oracle.scroll_factor}, {"pinch", p.oracle.pinch_factor}}}};
  j["workload"] = {{"nodes", p.workload.nodes},
                   {"kb", p.workload.kb},
                   {"css_rules", p.workload.css_rules},
                   {"img", p.workload.img},
                   {"nodes_scale", p.workload.nodes_scale},
                   {"kb_scale", p.workload.kb_scale},
                   {"css_rules_scale", p.workload.css_rules_scale},
                   {"img_scale", p.workload.img_scale}};
  return j.dump(2) + "\n";
}

PageWorkload workload_from_features(const std::string& id, const dom::RawFeatureVector& raw,
                                    const dom::FeatureManifest& manifest, const ComplexityWeights& w) {
  if (raw.values.size() != manifest.dimension()) {
    throw std::invalid_argument("workload_from_features: feature vector does not match manifest");
  }
  const double total = w.nodes + w.kb + w.css_rules + w.img;
  if (!(total > 0.0)) throw std::invalid_argument("workload_from_features: weights sum to zero");
  const auto img = manifest.feature_index("tag.img");
  const double img_count = img < manifest.dimension() ? raw.values[img] : 0.0;
  const double c = w.nodes * raw.values[dom::FeatureManifest::kDomNodes] / w.nodes_scale +
                   w.kb * raw.values[manifest.page_kb_index()] / w.kb_scale +
                   w.css_rules * raw.values[dom::FeatureManifest::kCssRules] / w.css_rules_scale +
                   w.img * img_count / w.img_scale;
  return {id, c / total};
}

double frame_time_ms(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                     const PlatformSpec& p, Gesture g) {
  if (event_rate < 0.0) throw std::invalid_argument("frame_time_ms: negative event rate");
  const auto& o = p.oracle;
  const double work = (o.a0_ms + o.a1_complexity * page.complexity + o.a2_rate * event_rate) * o.gesture_factor(g);
  return work / (p.cluster(s.render_cluster).ipc_factor * s.render_freq);
}

double noiseless_fps(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                     const PlatformSpec& p, Gesture g) {
  return std::min(p.fps_cap, 1000.0 / frame_time_ms(page, event_rate, s, p, g));
}

double measurement_noise(const PlatformSpec& p, std::uint64_t seed) {
  if (p.oracle.noise_sigma == 0.0) return 0.0;
  Rng rng(seed);
  return std::normal_distribution<double>(0.0, p.oracle.noise_sigma)(rng);
}

double true_fps(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                const PlatformSpec& p, Gesture g, std::uint64_t seed) {
  const double fps = noiseless_fps(page, event_rate, s, p, g) + measurement_noise(p, seed);
  return std::clamp(fps, 0.0, p.fps_cap);
}

double render_utilization(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                          const PlatformSpec& p, Gesture g) {
  return std::min(1.0, frame_time_ms(page, event_rate, s, p, g) * p.fps_cap / 1000.0);
}

double cluster_power(const ClusterSpec& c, double freq, double utilization) {
  return c.static_power_w + utilization * c.dyn_coeff_w_per_ghz3 * freq * freq * freq;
}

double power_draw(const ProcessorSetting& s, const PlatformSpec& p, double utilization) {
  if (utilization < 0.0 || utilization > 1.0) throw std::invalid_argument("power_draw: utilization outside [0, 1]");
  return cluster_power(p.cluster(s.render_cluster), s.render_freq, utilization) +
         cluster_power(p.other_cluster(s.render_cluster), s.other_freq, p.background_utilization);
}

std::vector<double> default_event_rates() {
  std::vector<double> rates;
  for (int i = 0; i < 8; ++i) rates.push_back(125.0 * static_cast<double>(1 << i));
  return rates;
}

std::uint64_t grid_noise_seed(std::uint64_t seed, const std::string& page_id, std::size_t rate_index,
                              std::size_t setting_index) {
  return mix_seed(mix_seed(mix_seed(seed, fnv1a(page_id)), rate_index), setting_index);
}

std::vector<GridSample> generate_training_grid(const std::vector<PageWorkload>& pages,
                                               const std::vector<double>& rates, const PlatformSpec& p,
                                               Gesture g, std::uint64_t seed) {
  if (pages.empty() || rates.empty()) throw std::invalid_argument("generate_training_grid: empty pages or rates");
  std::vector<GridSample> out;
  out.reserve(pages.size() * rates.size() * p.setting_table.size());
  for (const auto& page : pages) {
    for (std::size_t r = 0; r < rates.size(); ++r) {
      for (std::size_t s = 0; s < p.setting_table.size(); ++s) {
        const auto& setting = p.setting_table[s];
        const double fps = true_fps(page, rates[r], setting, p, g, grid_noise_seed(seed, page.id, r, s));
        out.push_back({page.id, rates[r], setting.cluster_label(), setting.render_freq, fps, g});
      }
    }
  }
  return out;
}

}  // namespace webdvfs::platform
