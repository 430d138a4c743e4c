#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "webdvfs/common/gesture.hpp"
#include "webdvfs/dom/features.hpp"

namespace webdvfs::platform {

enum class ClusterKind { Little = 0, Big = 1 };

std::string to_string(ClusterKind k);
ClusterKind parse_cluster_kind(const std::string& s);

struct ClusterSpec {
  std::string name;
  ClusterKind kind = ClusterKind::Little;
  std::vector<double> frequencies;  // GHz, strictly increasing
  double ipc_factor = 1.0;
  double static_power_w = 0.0;
  double dyn_coeff_w_per_ghz3 = 1.0;

  double min_freq() const { return frequencies.front(); }
  double max_freq() const { return frequencies.back(); }
  bool has_frequency(double f) const;
};

struct ProcessorSetting {
  ClusterKind render_cluster = ClusterKind::Big;
  double render_freq = 0.0;
  double other_freq = 0.0;

  int cluster_label() const { return static_cast<int>(render_cluster); }
  bool operator==(const ProcessorSetting& o) const {
    return render_cluster == o.render_cluster && render_freq == o.render_freq && other_freq == o.other_freq;
  }
  bool operator!=(const ProcessorSetting& o) const { return !(*this == o); }
};

/// "big@2.0/0.4" style label used in reports.
std::string describe(const ProcessorSetting& s);

struct OracleCoefficients {
  double a0_ms = 8.0;           // base frame work, ms at 1 GHz with ipc 1
  double a1_complexity = 7.0;   // ms per unit of page complexity
  double a2_rate = 0.0015;      // ms per px/s of event rate
  double noise_sigma = 1.0;     // FPS
  double scroll_factor = 1.0;
  double pinch_factor = 1.25;

  double gesture_factor(Gesture g) const { return g == Gesture::Scroll ? scroll_factor : pinch_factor; }
};

/// Complexity = sum of weight_i * feature_i / scale_i with weights normalized to sum 1.
struct ComplexityWeights {
  double nodes = 1.0;
  double kb = 0.5;
  double css_rules = 0.3;
  double img = 2.0;
  double nodes_scale = 1000.0;
  double kb_scale = 100.0;
  double css_rules_scale = 100.0;
  double img_scale = 10.0;
};

struct PlatformSpec {
  std::string name;
  ClusterSpec big;
  ClusterSpec little;
  double fps_cap = 60.0;
  double reconfiguration_overhead_ms = 10.0;
  double background_utilization = 0.2;
  std::vector<ProcessorSetting> setting_table;
  OracleCoefficients oracle;
  ComplexityWeights workload;

  const ClusterSpec& cluster(ClusterKind k) const { return k == ClusterKind::Big ? big : little; }
  const ClusterSpec& other_cluster(ClusterKind k) const { return k == ClusterKind::Big ? little : big; }
  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  /// Highest render frequency on the big cluster; the fallback when nothing is feasible.
  ProcessorSetting highest_setting() const;
};

PlatformSpec load_platform_spec(const std::filesystem::path& path);
PlatformSpec platform_spec_from_json_text(const std::string& text);
std::string platform_spec_to_json_text(const PlatformSpec& spec);

/// Default 8 + 6 table: every big frequency, then every little one, other cluster at its minimum.
std::vector<ProcessorSetting> default_setting_table(const ClusterSpec& big, const ClusterSpec& little);

struct PageWorkload {
  std::string id;
  double complexity = 0.0;
};

PageWorkload workload_from_features(const std::string& id, const dom::RawFeatureVector& raw,
                                    const dom::FeatureManifest& manifest, const ComplexityWeights& w);

/// Noise-free frame time in ms.
double frame_time_ms(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                     const PlatformSpec& p, Gesture g);

/// min(fps_cap, 1000 / frame_time) with no noise.
double noiseless_fps(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                     const PlatformSpec& p, Gesture g);

/// Gaussian(0, noise_sigma) draw for a given seed; shared by every setting measured under that seed.
double measurement_noise(const PlatformSpec& p, std::uint64_t seed);

/// noiseless_fps + measurement_noise(seed), clamped to [0, fps_cap].
double true_fps(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                const PlatformSpec& p, Gesture g, std::uint64_t seed);

/// Render-cluster utilization: min(1, frame_time * fps_cap / 1000).
double render_utilization(const PageWorkload& page, double event_rate, const ProcessorSetting& s,
                          const PlatformSpec& p, Gesture g);

/// Watts with the render cluster at `utilization` and the other cluster at background load.
double power_draw(const ProcessorSetting& s, const PlatformSpec& p, double utilization);

/// Watts for explicit per-cluster frequencies and utilizations.
double cluster_power(const ClusterSpec& c, double freq, double utilization);

/// 125 * 2^i px/s for i = 0..7.
std::vector<double> default_event_rates();

struct GridSample {
  std::string page_id;
  double event_rate = 0.0;
  int cluster = 0;
  double freq_ghz = 0.0;
  double fps = 0.0;
  Gesture gesture = Gesture::Scroll;
};

/// One sample per (page, rate, setting), in that nesting order.
std::vector<GridSample> generate_training_grid(const std::vector<PageWorkload>& pages,
                                               const std::vector<double>& rates, const PlatformSpec& p,
                                               Gesture g, std::uint64_t seed);

/// Seed used for the grid measurement of one (page, rate index, setting index) cell.
std::uint64_t grid_noise_seed(std::uint64_t seed, const std::string& page_id, std::size_t rate_index,
                              std::size_t setting_index);

}  // namespace webdvfs::platform
