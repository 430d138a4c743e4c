#include "webdvfs/search/search.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace webdvfs::search {
namespace {

void require_fps_min(double fps_min) {
  if (!(fps_min > 0.0)) throw std::invalid_argument("search: fps_min must be > 0");
}

bool cheaper(double cost_a, const ProcessorSetting& a, double cost_b, const ProcessorSetting& b) {
  const double tol = 1e-12 * std::max(std::fabs(cost_a), std::fabs(cost_b));
  if (std::fabs(cost_a - cost_b) > tol) return cost_a < cost_b;
  return a.render_cluster == platform::ClusterKind::Little && b.render_cluster == platform::ClusterKind::Big;
}

SearchResult make_result(const SettingTable& table, std::size_t index, double predicted, bool feasible) {
  SearchResult r;
  r.index = index;
  r.setting = table.at(index);
  r.predicted_fps = predicted;
  r.feasible = feasible;
  return r;
}

}  // namespace

std::string to_string(SearchMode m) { return m == SearchMode::Literal ? "literal" : "min-feasible"; }

SearchMode parse_search_mode(const std::string& s) {
  if (s == "literal") return SearchMode::Literal;
  if (s == "min-feasible") return SearchMode::MinFeasible;
  throw std::invalid_argument("unknown search mode '" + s + "'");
}

SettingTable::SettingTable(std::vector<ProcessorSetting> settings, Predictor predictor, CostFn cost)
    : settings_(std::move(settings)), predictor_(std::move(predictor)), cost_(std::move(cost)) {
  if (settings_.empty()) throw std::invalid_argument("SettingTable: empty table");
  if (settings_.size() < 2) throw std::invalid_argument("SettingTable: needs at least two settings");
  if (!predictor_) throw std::invalid_argument("SettingTable: missing predictor");
  for (std::size_t i = 1; i < settings_.size(); ++i) {
    if (settings_[i].render_freq < settings_[i - 1].render_freq) {
      throw std::invalid_argument("SettingTable: settings not sorted by render frequency at index " +
                                  std::to_string(i));
    }
  }
}

double SettingTable::cost(std::size_t i, double predicted_fps) const {
  return cost_ ? cost_(settings_.at(i), predicted_fps) : 0.0;
}

std::size_t SettingTable::highest_index() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < settings_.size(); ++i) {
    const auto& s = settings_[i];
    const auto& b = settings_[best];
    if (s.render_freq > b.render_freq ||
        (s.render_freq == b.render_freq && s.render_cluster == platform::ClusterKind::Big)) {
      best = i;
    }
  }
  return best;
}

std::vector<ProcessorSetting> sorted_by_frequency(std::vector<ProcessorSetting> settings) {
  std::stable_sort(settings.begin(), settings.end(), [](const ProcessorSetting& a, const ProcessorSetting& b) {
    if (a.render_freq != b.render_freq) return a.render_freq < b.render_freq;
    return a.cluster_label() < b.cluster_label();
  });
  return settings;
}

std::string SearchResult::trace_json() const {
  nlohmann::ordered_json j;
  j["index"] = index;
  j["setting"] = platform::describe(setting);
  j["predicted_fps"] = predicted_fps;
  j["feasible"] = feasible;
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& s : trace) {
    nlohmann::ordered_json step;
    step["low"] = s.low;
    step["high"] = s.high;
    step["mid"] = s.mid;
    step["predicted"] = s.predicted;
    steps.push_back(step);
  }
  j["steps"] = steps;
  return j.dump();
}

SearchResult search_literal(const SettingTable& table, double fps_min) {
  require_fps_min(fps_min);
  const long n = static_cast<long>(table.size());
  auto clamp = [n](long i) { return static_cast<std::size_t>(std::clamp(i, 0L, n - 1)); };
  std::vector<SearchStep> trace;
  long low = 0;
  long high = n - 1;
  while (low <= high) {
    const long mid = (low + high) / 2;
    const double pred = table.predict(static_cast<std::size_t>(mid));
    trace.push_back({low, high, mid, pred});
    if (pred > fps_min) {
      high = mid - 1;
    } else if (pred < fps_min) {
      low = mid + 1;
    } else {
      auto r = make_result(table, static_cast<std::size_t>(mid), pred, true);
      r.trace = std::move(trace);
      return r;
    }
  }
  if (low >= n) {
    // Nothing reaches fps_min: fall back to the highest clock.
    const auto top = table.highest_index();
    auto r = make_result(table, top, table.predict(top), false);
    r.trace = std::move(trace);
    return r;
  }
  const double fps_low = table.predict(clamp(low));
  const double fps_high = table.predict(clamp(high));
  const std::size_t pick = (fps_low - fps_min) < (fps_min - fps_high) ? clamp(low + 1) : clamp(high);
  const double pred = table.predict(pick);
  auto r = make_result(table, pick, pred, pred >= fps_min);
  r.trace = std::move(trace);
  return r;
}

SearchResult search_min_feasible(const SettingTable& table, double fps_min) {
  require_fps_min(fps_min);
  std::vector<SearchStep> trace;
  bool found = false;
  std::size_t best = 0;
  double best_pred = 0.0;
  double best_cost = 0.0;
  for (const auto kind : {platform::ClusterKind::Little, platform::ClusterKind::Big}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table.at(i).render_cluster == kind) idx.push_back(i);
    }
    if (idx.empty()) continue;
    // First position whose prediction reaches fps_min (predictions rise with frequency).
    long lo = 0;
    long hi = static_cast<long>(idx.size());
    double hit_pred = 0.0;
    while (lo < hi) {
      const long mid = (lo + hi) / 2;
      const double pred = table.predict(idx[static_cast<std::size_t>(mid)]);
      trace.push_back({lo, hi, static_cast<long>(idx[static_cast<std::size_t>(mid)]), pred});
      if (pred >= fps_min) {
        hi = mid;
        hit_pred = pred;
      } else {
        lo = mid + 1;
      }
    }
    if (lo == static_cast<long>(idx.size())) continue;
    const std::size_t candidate = idx[static_cast<std::size_t>(lo)];
    const double c = table.cost(candidate, hit_pred);
    if (!found || cheaper(c, table.at(candidate), best_cost, table.at(best))) {
      found = true;
      best = candidate;
      best_pred = hit_pred;
      best_cost = c;
    }
  }
  SearchResult r;
  if (found) {
    r = make_result(table, best, best_pred, true);
  } else {
    const auto top = table.highest_index();
    r = make_result(table, top, table.predict(top), false);
  }
  r.trace = std::move(trace);
  return r;
}

SearchResult exhaustive_oracle(const SettingTable& table, double fps_min) {
  require_fps_min(fps_min);
  bool found = false;
  std::size_t best = 0;
  double best_pred = 0.0;
  double best_cost = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double pred = table.predict(i);
    if (pred < fps_min) continue;
    const double c = table.cost(i, pred);
    if (!found || cheaper(c, table.at(i), best_cost, table.at(best))) {
      found = true;
      best = i;
      best_pred = pred;
      best_cost = c;
    }
  }
  if (!found) {
    const auto top = table.highest_index();
    return make_result(table, top, table.predict(top), false);
  }
  return make_result(table, best, best_pred, true);
}

SearchResult run_search(const SettingTable& table, double fps_min, SearchMode mode) {
  return mode == SearchMode::Literal ? search_literal(table, fps_min) : search_min_feasible(table, fps_min);
}

double estimated_power(const platform::PlatformSpec& p, const ProcessorSetting& s, double predicted_fps) {
  const double util = predicted_fps > 0.0 ? std::min(1.0, p.fps_cap / predicted_fps) : 1.0;
  return platform::power_draw(s, p, util);
}

}  // namespace webdvfs::search
