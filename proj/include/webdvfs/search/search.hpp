#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "webdvfs/platform/platform.hpp"

namespace webdvfs::search {

using platform::ProcessorSetting;

using Predictor = std::function<double(const ProcessorSetting&)>;
/// Cost of running a setting given its predicted FPS (watts, lower is better).
using CostFn = std::function<double(const ProcessorSetting&, double predicted_fps)>;

enum class SearchMode { Literal, MinFeasible };

std::string to_string(SearchMode m);
SearchMode parse_search_mode(const std::string& s);

class SettingTable {
 public:
  /// Settings must be sorted by render frequency, ascending.
  SettingTable(std::vector<ProcessorSetting> settings, Predictor predictor, CostFn cost = {});

  std::size_t size() const { return settings_.size(); }
  const ProcessorSetting& at(std::size_t i) const { return settings_.at(i); }
  const std::vector<ProcessorSetting>& settings() const { return settings_; }
  double predict(std::size_t i) const { return predictor_(settings_.at(i)); }
  double cost(std::size_t i, double predicted_fps) const;
  bool has_cost() const { return static_cast<bool>(cost_); }
  /// Index of the highest render frequency, preferring the big cluster on ties.
  std::size_t highest_index() const;

 private:
  std::vector<ProcessorSetting> settings_;
  Predictor predictor_;
  CostFn cost_;
};

/// Stable sort by (render frequency, cluster label): the order the literal search expects.
std::vector<ProcessorSetting> sorted_by_frequency(std::vector<ProcessorSetting> settings);

struct SearchStep {
  long low = 0;
  long high = 0;
  long mid = 0;
  double predicted = 0.0;
};

struct SearchResult {
  std::size_t index = 0;
  ProcessorSetting setting;
  double predicted_fps = 0.0;
  /// False when no setting's prediction reaches fps_min (the fallback was used).
  bool feasible = true;
  std::vector<SearchStep> trace;

  std::string trace_json() const;
};

/// Single sorted-list binary search with index clamps added.
SearchResult search_literal(const SettingTable& table, double fps_min);

/// Lowest feasible frequency per cluster (binary search), then the cheaper candidate; ties go to little.
SearchResult search_min_feasible(const SettingTable& table, double fps_min);

/// Linear scan for the cheapest setting meeting fps_min; the table's predictor should be the true oracle.
SearchResult exhaustive_oracle(const SettingTable& table, double fps_min);

SearchResult run_search(const SettingTable& table, double fps_min, SearchMode mode);

/// Power at the utilization implied by a predicted FPS: min(1, fps_cap / predicted).
double estimated_power(const platform::PlatformSpec& p, const ProcessorSetting& s, double predicted_fps);

}  // namespace webdvfs::search
