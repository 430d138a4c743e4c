#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "webdvfs/common/gesture.hpp"
#include "webdvfs/model/mlp.hpp"
#include "webdvfs/platform/platform.hpp"
#include "webdvfs/search/search.hpp"

namespace webdvfs::sched {

using platform::ProcessorSetting;

struct TraceSample {
  double timestamp_ms = 0.0;
  double rate_px_s = 0.0;
};

struct DomSwap {
  double timestamp_ms = 0.0;
  std::string page_id;
};

struct EventTrace {
  std::string id;
  std::string page_id;
  Gesture gesture = Gesture::Scroll;
  std::vector<TraceSample> samples;
  std::vector<DomSwap> swaps;
  /// Duration credited to the final sample.
  double tick_ms = 10.0;
  /// Root of the per-window measurement noise; shared by every governor replaying this trace.
  std::uint64_t noise_seed = 0;

  void validate() const;
  /// Samples (and swaps) with timestamp in [from_ms, to_ms).
  EventTrace slice(double from_ms, double to_ms) const;
};

/// JSON lines: a header object, then one {"t":..,"rate":..} or {"t":..,"swap":..} object per line.
std::string trace_to_jsonl(const EventTrace& trace);
EventTrace trace_from_jsonl(const std::string& text);

struct TraceShape {
  double duration_ms = 2000.0;
  double tick_ms = 10.0;
  double ramp_ms = 40.0;
  /// Relative standard deviation of the per-sample rate jitter.
  double jitter = 0.03;
};

/// Constant nominal rate with a linear ramp-in and seeded multiplicative jitter.
EventTrace generate_trace(const std::string& id, const std::string& page_id, Gesture g, double nominal_rate,
                          std::uint64_t seed, const TraceShape& shape = {});

enum class GovernorKind { Ml, Interactive, Ondemand, Ebrowser, Oracle };

std::string to_string(GovernorKind k);
GovernorKind parse_governor(const std::string& s);
std::vector<GovernorKind> all_governors();

enum class QosMode { Magnitude, Count };

std::string to_string(QosMode m);
QosMode parse_qos_mode(const std::string& s);

/// Acceptable event rate for a user: px_per_fps * fps_min + offset.
struct RateModel {
  double px_per_fps = 60.0;
  double offset = 0.0;
  double max_sleep_fraction = 0.5;

  double acceptable_rate(double fps_min) const { return px_per_fps * fps_min + offset; }
};

/// Least squares line through (fps_min, acceptable rate) observations.
RateModel fit_rate_model(const std::vector<double>& fps_min, const std::vector<double>& acceptable_rate);

struct SessionConfig {
  double fps_min = 30.0;
  double sampling_window_ms = 200.0;
  double dom_change_threshold = 0.30;
  GovernorKind governor = GovernorKind::Ml;
  search::SearchMode search_mode = search::SearchMode::MinFeasible;
  QosMode qos_mode = QosMode::Magnitude;
  RateModel rate_model;

  void validate() const;
};

struct CatalogEntry {
  std::string id;
  std::size_t element_count = 0;
  std::vector<double> raw_features;
  platform::PageWorkload workload;
};

class PageCatalog {
 public:
  void add(CatalogEntry entry);
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }
  const CatalogEntry& get(const std::string& id) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, CatalogEntry> entries_;
};

/// interactive / ondemand governor state for the render cluster ladder.
struct BuiltinState {
  std::size_t freq_index = 0;
  /// Time left before the next utilization sample is taken.
  double ms_until_sample = 80.0;
  double util_accum = 0.0;
  double accum_ms = 0.0;
};

struct BuiltinParams {
  double sample_ms = 80.0;
  double hold_ms = 20.0;
  double interactive_up = 0.85;
  double ondemand_up = 0.80;
};

/// Advances the governor by `elapsed_ms` of running at `utilization` and returns the new frequency index.
std::size_t builtin_governor_step(GovernorKind kind, BuiltinState& state, double utilization, double elapsed_ms,
                                  const std::vector<double>& ladder, const BuiltinParams& params = {});

struct SleepDecision {
  double sleep_ms = 0.0;
  std::size_t dropped = 0;
  std::size_t processed = 0;
};

/// Sleep at the start of a window sized by how far the measured rate exceeds the user's acceptable rate.
/// Events arriving before the sleep ends are dropped.
SleepDecision ebrowser_step(double window_start_ms, double window_ms, const std::vector<double>& event_times,
                            double measured_rate, double fps_min, const RateModel& model);

/// Carried between consecutive sub-sessions so a split trace replays exactly like the whole.
struct SessionState {
  ProcessorSetting setting;
  BuiltinState builtin;
  std::optional<double> last_window_rate;
  std::string page_id;
  /// Page whose features the ml governor is currently using.
  std::string feature_page_id;
};

struct WindowRecord {
  std::size_t index = 0;
  double start_ms = 0.0;
  double duration_ms = 0.0;
  double measured_rate = 0.0;
  double fps = 0.0;
  double energy_j = 0.0;
  ProcessorSetting setting;  // setting at the end of the window
  double sleep_ms = 0.0;
  std::size_t dropped_events = 0;
};

struct SessionEvent {
  double timestamp_ms = 0.0;
  std::string kind;  // "reextract" or "swap-ignored"
  std::string page_id;
  double change_ratio = 0.0;
};

struct SessionReport {
  std::string trace_id;
  std::string page_id;
  GovernorKind governor = GovernorKind::Ml;
  double fps_min = 0.0;
  double total_energy_j = 0.0;
  std::vector<WindowRecord> windows;
  double qos_violation = 0.0;
  std::map<std::string, std::size_t> setting_histogram;
  std::size_t reconfigurations = 0;
  double overhead_ms = 0.0;
  std::vector<SessionEvent> events;
  bool infeasible_windows = false;
  SessionState final_state;

  std::string to_json_text() const;
};

double qos_violation(const std::vector<double>& window_fps, double fps_min, QosMode mode);

struct Metrics {
  double energy_reduction = 0.0;
  double qos_violation = 0.0;
};

/// Energy reduction relative to the baseline (normally the interactive governor on the same trace).
Metrics compute_metrics(const SessionReport& report, const SessionReport& baseline);

struct SessionInputs {
  const platform::PlatformSpec* platform = nullptr;
  const PageCatalog* catalog = nullptr;
  /// Needed for the ml governor only.
  const model::ModelRegistry* registry = nullptr;
  /// Overrides the transform embedded in the model when set.
  const pipeline::FeatureTransform* transform = nullptr;
};

/// The state every governor starts from: render on the big cluster at its highest clock.
SessionState initial_state(const EventTrace& trace, const platform::PlatformSpec& p);

SessionReport run_session(const EventTrace& trace, const SessionConfig& cfg, const SessionInputs& in,
                          std::optional<SessionState> start = std::nullopt);

}  // namespace webdvfs::sched
