#include "webdvfs/sched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "webdvfs/common/random.hpp"
#include "webdvfs/common/text.hpp"
#include "webdvfs/dom/features.hpp"

namespace webdvfs::sched {

using nlohmann::ordered_json;
using platform::ClusterKind;

void EventTrace::validate() const {
  if (!(tick_ms > 0.0)) throw std::invalid_argument("trace " + id + ": tick_ms must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.timestamp_ms) || !std::isfinite(s.rate_px_s))
      throw std::invalid_argument("trace " + id + ": non-finite sample " + std::to_string(i));
    if (s.rate_px_s < 0.0) throw std::invalid_argument("trace " + id + ": negative rate at sample " + std::to_string(i));
    if (i > 0 && !(s.timestamp_ms > samples[i - 1].timestamp_ms))
      throw std::invalid_argument("trace " + id + ": timestamps must be strictly increasing at sample " +
                                  std::to_string(i));
  }
  for (std::size_t i = 1; i < swaps.size(); ++i) {
    if (swaps[i].timestamp_ms < swaps[i - 1].timestamp_ms)
      throw std::invalid_argument("trace " + id + ": swaps out of order");
  }
}

EventTrace EventTrace::slice(double from_ms, double to_ms) const {
  EventTrace out = *this;
  out.samples.clear();
  out.swaps.clear();
  for (const auto& s : samples)
    if (s.timestamp_ms >= from_ms && s.timestamp_ms < to_ms) out.samples.push_back(s);
  for (const auto& s : swaps)
    if (s.timestamp_ms >= from_ms && s.timestamp_ms < to_ms) out.swaps.push_back(s);
  return out;
}

std::string trace_to_jsonl(const EventTrace& trace) {
  std::ostringstream out;
  ordered_json header;
  header["id"] = trace.id;
  header["page_id"] = trace.page_id;
  header["gesture"] = to_string(trace.gesture);
  header["tick_ms"] = trace.tick_ms;
  header["noise_seed"] = trace.noise_seed;
  out << header.dump() << '\n';
  std::size_t w = 0;
  for (const auto& s : trace.samples) {
    while (w < trace.swaps.size() && trace.swaps[w].timestamp_ms <= s.timestamp_ms) {
      ordered_json j;
      j["t"] = trace.swaps[w].timestamp_ms;
      j["swap"] = trace.swaps[w].page_id;
      out << j.dump() << '\n';
      ++w;
    }
    ordered_json j;
    j["t"] = s.timestamp_ms;
    j["rate"] = s.rate_px_s;
    out << j.dump() << '\n';
  }
  for (; w < trace.swaps.size(); ++w) {
    ordered_json j;
    j["t"] = trace.swaps[w].timestamp_ms;
    j["swap"] = trace.swaps[w].page_id;
    out << j.dump() << '\n';
  }
  return out.str();
}

EventTrace trace_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  EventTrace trace;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (!have_header) {
        trace.id = j.at("id").get<std::string>();
        trace.page_id = j.at("page_id").get<std::string>();
        trace.gesture = parse_gesture(j.at("gesture").get<std::string>());
        trace.tick_ms = j.value("tick_ms", 10.0);
        trace.noise_seed = j.value("noise_seed", std::uint64_t{0});
        have_header = true;
      } else if (j.contains("swap")) {
        trace.swaps.push_back({j.at("t").get<double>(), j.at("swap").get<std::string>()});
      } else {
        trace.samples.push_back({j.at("t").get<double>(), j.at("rate").get<double>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw std::invalid_argument("trace: missing header line");
  trace.validate();
  return trace;
}

EventTrace generate_trace(const std::string& id, const std::string& page_id, Gesture g, double nominal_rate,
                          std::uint64_t seed, const TraceShape& shape) {
  if (!(shape.tick_ms > 0.0) || shape.duration_ms < 0.0 || nominal_rate < 0.0 || shape.jitter < 0.0)
    throw std::invalid_argument("generate_trace: invalid shape or rate");
  EventTrace t;
  t.id = id;
  t.page_id = page_id;
  t.gesture = g;
  t.tick_ms = shape.tick_ms;
  t.noise_seed = substream(seed, "noise");
  Rng rng(substream(seed, "jitter"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<std::size_t>(std::llround(shape.duration_ms / shape.tick_ms));
  for (std::size_t k = 0; k < n; ++k) {
    const double ts = static_cast<double>(k) * shape.tick_ms;
    const double ramp = shape.ramp_ms > 0.0 ? std::min(1.0, (ts + shape.tick_ms) / shape.ramp_ms) : 1.0;
    const double jitter = shape.jitter > 0.0 ? 1.0 + shape.jitter * normal(rng) : 1.0;
    t.samples.push_back({ts, std::max(0.0, nominal_rate * ramp * jitter)});
  }
  return t;
}

std::string to_string(GovernorKind k) {
  switch (k) {
    case GovernorKind::Ml: return "ml";
    case GovernorKind::Interactive: return "interactive";
    case GovernorKind::Ondemand: return "ondemand";
    case GovernorKind::Ebrowser: return "ebrowser";
    case GovernorKind::Oracle: return "oracle";
  }
  return "?";
}

GovernorKind parse_governor(const std::string& s) {
  for (const auto k : all_governors())
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown governor '" + s + "'");
}

std::vector<GovernorKind> all_governors() {
  return {GovernorKind::Ml, GovernorKind::Interactive, GovernorKind::Ondemand, GovernorKind::Ebrowser,
          GovernorKind::Oracle};
}

std::string to_string(QosMode m) { return m == QosMode::Magnitude ? "magnitude" : "count"; }

QosMode parse_qos_mode(const std::string& s) {
  if (s == "magnitude") return QosMode::Magnitude;
  if (s == "count") return QosMode::Count;
  throw std::invalid_argument("unknown qos mode '" + s + "'");
}

RateModel fit_rate_model(const std::vector<double>& fps_min, const std::vector<double>& acceptable_rate) {
  if (fps_min.size() != acceptable_rate.size() || fps_min.size() < 2)
    throw std::invalid_argument("fit_rate_model: need at least two paired observations");
  const double n = static_cast<double>(fps_min.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fps_min.size(); ++i) {
    mx += fps_min[i];
    my += acceptable_rate[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < fps_min.size(); ++i) {
    sxx += (fps_min[i] - mx) * (fps_min[i] - mx);
    sxy += (fps_min[i] - mx) * (acceptable_rate[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_rate_model: fps_min values are all equal");
  RateModel m;
  m.px_per_fps = sxy / sxx;
  m.offset = my - m.px_per_fps * mx;
  return m;
}

void SessionConfig::validate() const {
  if (!(fps_min > 0.0)) throw std::invalid_argument("session config: fps_min must be positive");
  if (!(sampling_window_ms > 0.0)) throw std::invalid_argument("session config: sampling window must be positive");
  if (dom_change_threshold < 0.0) throw std::invalid_argument("session config: negative DOM change threshold");
  if (rate_model.max_sleep_fraction < 0.0 || rate_model.max_sleep_fraction > 1.0)
    throw std::invalid_argument("session config: max sleep fraction must lie in [0, 1]");
}

void PageCatalog::add(CatalogEntry entry) {
  const std::string id = entry.id;
  if (!entries_.emplace(id, std::move(entry)).second) throw std::invalid_argument("duplicate catalog page " + id);
}

const CatalogEntry& PageCatalog::get(const std::string& id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw std::invalid_argument("page '" + id + "' is not in the catalog");
  return it->second;
}

std::size_t builtin_governor_step(GovernorKind kind, BuiltinState& state, double utilization, double elapsed_ms,
                                  const std::vector<double>& ladder, const BuiltinParams& params) {
  if (kind != GovernorKind::Interactive && kind != GovernorKind::Ondemand)
    throw std::invalid_argument("builtin_governor_step: not a builtin governor");
  if (ladder.empty()) throw std::invalid_argument("builtin_governor_step: empty ladder");
  if (utilization < 0.0 || utilization > 1.0)
    throw std::invalid_argument("builtin_governor_step: utilization outside [0, 1]");
  const std::size_t top = ladder.size() - 1;
  state.freq_index = std::min(state.freq_index, top);
  state.util_accum += utilization * elapsed_ms;
  state.accum_ms += elapsed_ms;
  state.ms_until_sample -= elapsed_ms;
  if (state.ms_until_sample > 1e-9) return state.freq_index;

  const double load = state.accum_ms > 0.0 ? state.util_accum / state.accum_ms : utilization;
  state.util_accum = 0.0;
  state.accum_ms = 0.0;
  std::size_t& i = state.freq_index;
  if (kind == GovernorKind::Interactive) {
    if (load > params.interactive_up && i < top) {
      ++i;
      state.ms_until_sample = params.hold_ms;
      return i;
    }
    if (i > 0 && load < params.interactive_up * ladder[i - 1] / ladder[i]) --i;
  } else {
    if (load > params.ondemand_up)
      i = top;
    else if (i > 0)
      --i;
  }
  state.ms_until_sample = params.sample_ms;
  return i;
}

SleepDecision ebrowser_step(double window_start_ms, double window_ms, const std::vector<double>& event_times,
                            double measured_rate, double fps_min, const RateModel& model) {
  SleepDecision d;
  if (measured_rate > 0.0) {
    const double s = std::clamp(1.0 - model.acceptable_rate(fps_min) / measured_rate, 0.0, model.max_sleep_fraction);
    d.sleep_ms = s * window_ms;
  }
  const double wake = window_start_ms + d.sleep_ms;
  for (const double t : event_times) {
    if (d.sleep_ms > 0.0 && t < wake)
      ++d.dropped;
    else
      ++d.processed;
  }
  return d;
}

double qos_violation(const std::vector<double>& window_fps, double fps_min, QosMode mode) {
  if (window_fps.empty()) return 0.0;
  double sum = 0.0;
  for (const double f : window_fps) {
    if (mode == QosMode::Magnitude)
      sum += std::max(0.0, fps_min - f) / fps_min;
    else
      sum += f < fps_min ? 1.0 : 0.0;
  }
  return sum / static_cast<double>(window_fps.size());
}

Metrics compute_metrics(const SessionReport& report, const SessionReport& baseline) {
  if (report.trace_id != baseline.trace_id)
    throw std::invalid_argument("compute_metrics: reports come from different traces");
  if (!(baseline.total_energy_j > 0.0)) throw std::invalid_argument("compute_metrics: baseline energy is zero");
  return {1.0 - report.total_energy_j / baseline.total_energy_j, report.qos_violation};
}

std::string SessionReport::to_json_text() const {
  ordered_json j;
  j["trace_id"] = trace_id;
  j["page_id"] = page_id;
  j["governor"] = to_string(governor);
  j["fps_min"] = fps_min;
  j["total_energy_j"] = total_energy_j;
  j["qos_violation"] = qos_violation;
  j["reconfigurations"] = reconfigurations;
  j["overhead_ms"] = overhead_ms;
  j["infeasible_windows"] = infeasible_windows;
  ordered_json fps = ordered_json::array();
  ordered_json energy = ordered_json::array();
  ordered_json settings = ordered_json::array();
  for (const auto& w : windows) {
    fps.push_back(w.fps);
    energy.push_back(w.energy_j);
    settings.push_back(platform::describe(w.setting));
  }
  j["window_fps"] = fps;
  j["window_energy_j"] = energy;
  j["window_settings"] = settings;
  ordered_json hist = ordered_json::object();
  for (const auto& [k, v] : setting_histogram) hist[k] = v;
  j["setting_histogram"] = hist;
  ordered_json events_json = ordered_json::array();
  for (const auto& e : events) {
    ordered_json ej;
    ej["t"] = e.timestamp_ms;
    ej["kind"] = e.kind;
    ej["page_id"] = e.page_id;
    ej["change_ratio"] = e.change_ratio;
    events_json.push_back(ej);
  }
  j["events"] = events_json;
  return j.dump();
}

namespace {

std::size_t ladder_index(const std::vector<double>& ladder, double f) {
  const auto it = std::lower_bound(ladder.begin(), ladder.end(), f);
  if (it == ladder.end()) return ladder.size() - 1;
  return static_cast<std::size_t>(it - ladder.begin());
}

struct Tick {
  double t = 0.0;
  double dt = 0.0;
  double rate = 0.0;
  const platform::PageWorkload* page = nullptr;
};

// Energy (J) and frames of one window at a fixed setting; the first `overhead_ms` run at full load.
struct WindowCost {
  double energy_j = 0.0;
  double frames = 0.0;
};

WindowCost fixed_setting_cost(const std::vector<Tick>& ticks, double start_ms, double overhead_ms,
                              const ProcessorSetting& s, const platform::PlatformSpec& p, Gesture g,
                              std::uint64_t seed) {
  WindowCost c;
  const double busy = platform::power_draw(s, p, 1.0);
  for (const auto& tk : ticks) {
    const double util = platform::render_utilization(*tk.page, tk.rate, s, p, g);
    const double overlap = std::max(0.0, std::min(tk.t + tk.dt, start_ms + overhead_ms) - std::max(tk.t, start_ms));
    c.energy_j += (busy * overlap + platform::power_draw(s, p, util) * (tk.dt - overlap)) / 1000.0;
    c.frames += platform::true_fps(*tk.page, tk.rate, s, p, g, seed) * tk.dt;
  }
  return c;
}

class MlPredictor {
 public:
  MlPredictor(const model::MlpModel& m, const pipeline::FeatureTransform& t, const PageCatalog& catalog)
      : model_(m), transform_(t), catalog_(catalog) {}

  std::vector<double> predict_all(const std::string& page_id, double rate,
                                  const std::vector<ProcessorSetting>& settings) {
    auto it = pcs_.find(page_id);
    if (it == pcs_.end()) it = pcs_.emplace(page_id, transform_.apply(catalog_.get(page_id).raw_features)).first;
    model::Matrix inputs(model_.input_dim(), static_cast<Eigen::Index>(settings.size()));
    for (std::size_t i = 0; i < settings.size(); ++i) {
      inputs.col(static_cast<Eigen::Index>(i)) =
          model_.encode(it->second, rate, settings[i].cluster_label(), settings[i].render_freq);
    }
    const model::Vector out = model_.forward(inputs);
    std::vector<double> fps(settings.size());
    for (std::size_t i = 0; i < settings.size(); ++i) fps[i] = std::max(0.0, out(static_cast<Eigen::Index>(i)));
    return fps;
  }

 private:
  const model::MlpModel& model_;
  const pipeline::FeatureTransform& transform_;
  const PageCatalog& catalog_;
  std::map<std::string, model::Vector> pcs_;
};

}  // namespace

SessionState initial_state(const EventTrace& trace, const platform::PlatformSpec& p) {
  SessionState s;
  s.setting = p.highest_setting();
  s.builtin.freq_index = ladder_index(p.big.frequencies, s.setting.render_freq);
  s.page_id = trace.page_id;
  s.feature_page_id = trace.page_id;
  return s;
}

SessionReport run_session(const EventTrace& trace, const SessionConfig& cfg, const SessionInputs& in,
                          std::optional<SessionState> start) {
  cfg.validate();
  trace.validate();
  if (in.platform == nullptr || in.catalog == nullptr)
    throw std::invalid_argument("run_session: platform and catalog are required");
  const auto& p = *in.platform;
  const auto& catalog = *in.catalog;
  if (!catalog.contains(trace.page_id))
    throw std::invalid_argument("run_session: trace " + trace.id + " refers to unknown page " + trace.page_id);
  for (const auto& s : trace.swaps)
    if (!catalog.contains(s.page_id))
      throw std::invalid_argument("run_session: trace " + trace.id + " swaps to unknown page " + s.page_id);

  std::optional<MlPredictor> predictor;
  if (cfg.governor == GovernorKind::Ml) {
    if (in.registry == nullptr || !in.registry->contains(trace.gesture))
      throw std::runtime_error("run_session: no model registered for gesture " + to_string(trace.gesture));
    const auto& m = in.registry->get(trace.gesture);
    const pipeline::FeatureTransform* t = in.transform != nullptr ? in.transform : (m.transform ? &*m.transform : nullptr);
    if (t == nullptr) throw std::runtime_error("run_session: the ml governor needs a feature transform");
    predictor.emplace(m, *t, catalog);
  }

  SessionState state = start ? *start : initial_state(trace, p);
  SessionReport report;
  report.trace_id = trace.id;
  report.page_id = trace.page_id;
  report.governor = cfg.governor;
  report.fps_min = cfg.fps_min;

  const auto table = search::sorted_by_frequency(p.setting_table);
  const auto& ladder = p.big.frequencies;
  const double little_floor = p.little.min_freq();
  const double window_ms = cfg.sampling_window_ms;
  const bool charges_overhead = cfg.governor == GovernorKind::Ml || cfg.governor == GovernorKind::Oracle;

  std::size_t next_swap = 0;
  std::size_t i = 0;
  std::vector<double> window_fps;
  while (i < trace.samples.size()) {
    const auto window_index = static_cast<std::size_t>(std::floor(trace.samples[i].timestamp_ms / window_ms));
    const double w_start = static_cast<double>(window_index) * window_ms;
    const double w_end = w_start + window_ms;
    const std::uint64_t seed = mix_seed(trace.noise_seed, window_index);

    // Ticks of this window with the page shown at each; swap bookkeeping happens here.
    std::vector<Tick> ticks;
    std::vector<double> event_times;
    double rate_time = 0.0;
    double span = 0.0;
    for (; i < trace.samples.size() && trace.samples[i].timestamp_ms < w_end; ++i) {
      const auto& smp = trace.samples[i];
      while (next_swap < trace.swaps.size() && trace.swaps[next_swap].timestamp_ms <= smp.timestamp_ms) {
        const auto& sw = trace.swaps[next_swap++];
        const double ratio = dom::dom_change_ratio(catalog.get(state.feature_page_id).element_count,
                                                   catalog.get(sw.page_id).element_count);
        state.page_id = sw.page_id;
        if (cfg.governor != GovernorKind::Ml) {
          state.feature_page_id = sw.page_id;
        } else if (ratio >= cfg.dom_change_threshold) {
          state.feature_page_id = sw.page_id;
          report.events.push_back({sw.timestamp_ms, "reextract", sw.page_id, ratio});
        } else {
          report.events.push_back({sw.timestamp_ms, "swap-ignored", sw.page_id, ratio});
        }
      }
      const double next_t = i + 1 < trace.samples.size() ? trace.samples[i + 1].timestamp_ms : smp.timestamp_ms + trace.tick_ms;
      Tick tk;
      tk.t = smp.timestamp_ms;
      tk.dt = next_t - smp.timestamp_ms;
      tk.rate = smp.rate_px_s;
      tk.page = &catalog.get(state.page_id).workload;
      ticks.push_back(tk);
      event_times.push_back(smp.timestamp_ms);
      rate_time += tk.rate * tk.dt;
      span += tk.dt;
    }

    WindowRecord rec;
    rec.index = window_index;
    rec.start_ms = w_start;
    rec.duration_ms = span;
    rec.measured_rate = span > 0.0 ? rate_time / span : 0.0;

    // Decision at the window boundary.
    bool reconfigured = false;
    auto switch_to = [&](const ProcessorSetting& s) {
      if (s != state.setting) {
        state.setting = s;
        reconfigured = true;
        ++report.reconfigurations;
      }
    };
    double sleep_ms = 0.0;
    switch (cfg.governor) {
      case GovernorKind::Ml:
        if (state.last_window_rate) {
          const auto fps = predictor->predict_all(state.feature_page_id, *state.last_window_rate, table);
          const search::SettingTable st(
              table,
              [&](const ProcessorSetting& s) {
                for (std::size_t k = 0; k < table.size(); ++k)
                  if (table[k] == s) return fps[k];
                return 0.0;
              },
              [&](const ProcessorSetting& s, double pred) { return search::estimated_power(p, s, pred); });
          const auto result = search::run_search(st, cfg.fps_min, cfg.search_mode);
          report.infeasible_windows = report.infeasible_windows || !result.feasible;
          switch_to(result.setting);
        }
        break;
      case GovernorKind::Oracle: {
        std::optional<std::size_t> best;
        double best_energy = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < table.size(); ++k) {
          const double ovh = table[k] != state.setting ? p.reconfiguration_overhead_ms : 0.0;
          const auto c = fixed_setting_cost(ticks, w_start, ovh, table[k], p, trace.gesture, seed);
          if (span > 0.0 && c.frames / span < cfg.fps_min) continue;
          if (c.energy_j < best_energy) {
            best_energy = c.energy_j;
            best = k;
          }
        }
        if (!best) report.infeasible_windows = true;
        switch_to(best ? table[*best] : p.highest_setting());
        break;
      }
      case GovernorKind::Ebrowser: {
        const auto d = ebrowser_step(w_start, window_ms, event_times, state.last_window_rate.value_or(0.0),
                                     cfg.fps_min, cfg.rate_model);
        sleep_ms = d.sleep_ms;
        rec.dropped_events = d.dropped;
        break;
      }
      default:
        break;
    }
    const double overhead = reconfigured && charges_overhead ? p.reconfiguration_overhead_ms : 0.0;
    report.overhead_ms += overhead;
    rec.sleep_ms = sleep_ms;

    const bool builtin = cfg.governor == GovernorKind::Interactive || cfg.governor == GovernorKind::Ondemand ||
                         cfg.governor == GovernorKind::Ebrowser;
    const GovernorKind freq_policy = cfg.governor == GovernorKind::Ondemand ? GovernorKind::Ondemand
                                                                            : GovernorKind::Interactive;
    double frames = 0.0;
    for (const auto& tk : ticks) {
      const auto& s = state.setting;
      const bool asleep = sleep_ms > 0.0 && tk.t < w_start + sleep_ms;
      const double util = asleep ? 0.0 : platform::render_utilization(*tk.page, tk.rate, s, p, trace.gesture);
      const double overlap =
          std::max(0.0, std::min(tk.t + tk.dt, w_start + overhead) - std::max(tk.t, w_start));
      rec.energy_j += (platform::power_draw(s, p, 1.0) * overlap + platform::power_draw(s, p, util) * (tk.dt - overlap)) /
                      1000.0;
      if (!asleep) frames += platform::true_fps(*tk.page, tk.rate, s, p, trace.gesture, seed) * tk.dt;
      if (builtin) {
        const auto idx = builtin_governor_step(freq_policy, state.builtin, util, tk.dt, ladder);
        const ProcessorSetting next{ClusterKind::Big, ladder[idx], little_floor};
        if (next != state.setting) {
          state.setting = next;
          ++report.reconfigurations;
        }
      }
    }
    rec.fps = span > 0.0 ? frames / span : 0.0;
    rec.setting = state.setting;
    state.last_window_rate = rec.measured_rate;

    report.total_energy_j += rec.energy_j;
    ++report.setting_histogram[platform::describe(rec.setting)];
    window_fps.push_back(rec.fps);
    report.windows.push_back(rec);
  }
  report.qos_violation = qos_violation(window_fps, cfg.fps_min, cfg.qos_mode);
  report.final_state = state;
  return report;
}

}  // namespace webdvfs::sched
