#include "webdvfs/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "webdvfs/common/random.hpp"
#include "webdvfs/common/text.hpp"

namespace webdvfs::harness {

using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  if (!fs::is_directory(corpus_dir)) throw std::invalid_argument("corpus directory not found: " + corpus_dir.string());
  if (!fs::is_regular_file(platform_path))
    throw std::invalid_argument("platform spec not found: " + platform_path.string());
  if (!fs::is_regular_file(manifest_path))
    throw std::invalid_argument("feature manifest not found: " + manifest_path.string());
  if (gestures.empty()) throw std::invalid_argument("gesture list is empty");
  if (event_rates.empty()) throw std::invalid_argument("event-rate list is empty");
  for (const double r : event_rates)
    if (!(r > 0.0)) throw std::invalid_argument("event rates must be positive");
  for (const double f : fps_min)
    if (!(f > 0.0)) throw std::invalid_argument("fps_min values must be positive");
  if (governors.empty()) throw std::invalid_argument("governor list is empty");
  if (folds < 2) throw std::invalid_argument("at least two folds are needed");
  model.validate();
}

std::string ExperimentConfig::to_json_text() const {
  ordered_json j;
  j["corpus_dir"] = corpus_dir.generic_string();
  j["platform"] = platform_path.generic_string();
  j["manifest"] = manifest_path.generic_string();
  ordered_json g = ordered_json::array();
  for (const auto x : gestures) g.push_back(to_string(x));
  j["gestures"] = g;
  j["event_rates"] = event_rates;
  j["fps_min"] = fps_min;
  ordered_json m;
  m["hidden_layers"] = model.hidden_layers;
  m["hidden_width"] = model.hidden_width;
  m["activation"] = model::to_string(model.activation);
  m["learning_rate"] = model.learning_rate;
  m["beta1"] = model.beta1;
  m["beta2"] = model.beta2;
  m["epsilon"] = model.epsilon;
  m["epochs"] = model.epochs;
  m["batch_size"] = model.batch_size;
  m["seed"] = model.seed;
  j["model"] = m;
  j["search_mode"] = search::to_string(search_mode);
  j["qos_mode"] = sched::to_string(qos_mode);
  ordered_json gov = ordered_json::array();
  for (const auto x : governors) gov.push_back(sched::to_string(x));
  j["governors"] = gov;
  j["seed"] = seed;
  j["folds"] = folds;
  j["page_limit"] = page_limit;
  return j.dump();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json_text()); }

fs::path resolve_corpus_dir(const std::string& flag_value, const fs::path& fallback) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("WEBDVFS_CORPUS"); env != nullptr && *env != '\0') return env;
  return fallback;
}

CorpusData load_corpus_data(const ExperimentConfig& cfg, const platform::PlatformSpec& p) {
  CorpusData d;
  d.manifest = dom::FeatureManifest::load(cfg.manifest_path);
  auto pages = dom::load_corpus(cfg.corpus_dir);
  if (pages.empty()) throw std::invalid_argument("corpus has no pages: " + cfg.corpus_dir.string());
  if (cfg.page_limit > 0 && pages.size() > cfg.page_limit) pages.resize(cfg.page_limit);
  for (const auto& page : pages) {
    const auto raw = dom::extract_features(page.document, d.manifest);
    const auto w = platform::workload_from_features(page.id, raw, d.manifest, p.workload);
    d.pages.push_back({page.id, raw.values});
    d.workloads.push_back(w);
    d.catalog.add({page.id, page.document.element_count(), raw.values, w});
  }
  return d;
}

std::vector<double> synthetic_users(std::uint64_t seed, std::size_t count) {
  Rng rng(substream(seed, "users"));
  std::normal_distribution<double> around(30.0, 6.0);
  std::vector<double> users;
  for (std::size_t i = 0; i < count; ++i) users.push_back(std::clamp(around(rng), 20.0, 45.0));
  return users;
}

sched::RateModel user_rate_model(const std::vector<double>& users, std::uint64_t seed) {
  Rng rng(substream(seed, "rate-model"));
  std::normal_distribution<double> spread(0.0, 0.1);
  std::vector<double> comfort;
  for (const double f : users) comfort.push_back(60.0 * f * (1.0 + spread(rng)));
  return sched::fit_rate_model(users, comfort);
}

std::vector<platform::GridSample> training_grid(const CorpusData& data, const platform::PlatformSpec& p,
                                                Gesture g, const std::vector<double>& rates, std::uint64_t seed) {
  return platform::generate_training_grid(data.workloads, rates, p, g,
                                          mix_seed(substream(seed, "data-gen"), fnv1a(to_string(g))));
}

GeneratedData generate_data(const CorpusData& data, const platform::PlatformSpec& p, Gesture g,
                            const std::vector<double>& rates, std::uint64_t seed) {
  GeneratedData out;
  out.transform = model::fit_transform_on(data.pages, data.manifest.version());
  out.samples = model::attach_pcs(training_grid(data, p, g, rates, seed), model::project_pages(data.pages, out.transform));
  return out;
}

model::CvResult run_cross_validation(const CorpusData& data, const platform::PlatformSpec& p, Gesture g,
                                     const ExperimentConfig& cfg) {
  const auto grid = training_grid(data, p, g, cfg.event_rates, cfg.seed);
  model::ModelConfig mc = cfg.model;
  mc.seed = mix_seed(cfg.model.seed, fnv1a(to_string(g)));
  return model::cross_validate(data.pages, grid, data.manifest.version(), mc, cfg.folds,
                               substream(cfg.seed, "folds"));
}

GestureModels models_from_cv(Gesture g, const model::CvResult& cv) {
  GestureModels m;
  m.gesture = g;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    model::ModelRegistry r;
    auto mlp = cv.folds[f].mlp;
    mlp.gesture = g;
    r.add(std::move(mlp));
    m.folds.push_back(std::move(r));
    for (const auto& id : cv.folds[f].validation_pages) m.fold_of_page[id] = f;
  }
  return m;
}

std::vector<SessionRecord> simulate(const CorpusData& data, const platform::PlatformSpec& p,
                                    const GestureModels& models, const std::vector<double>& users,
                                    const ExperimentConfig& cfg, unsigned jobs) {
  const auto rate_model = user_rate_model(users, cfg.seed);
  const std::uint64_t trace_root = substream(cfg.seed, "traces");
  struct Job {
    std::size_t page = 0;
    std::size_t user = 0;
    std::size_t rate = 0;
  };
  std::vector<Job> work;
  for (std::size_t pi = 0; pi < data.workloads.size(); ++pi)
    for (std::size_t u = 0; u < users.size(); ++u)
      for (std::size_t r = 0; r < cfg.event_rates.size(); ++r) work.push_back({pi, u, r});

  auto governors = cfg.governors;
  const bool has_baseline =
      std::find(governors.begin(), governors.end(), sched::GovernorKind::Interactive) != governors.end();
  if (!has_baseline) governors.push_back(sched::GovernorKind::Interactive);

  std::vector<std::vector<SessionRecord>> results(work.size());
  auto run_one = [&](std::size_t idx) {
    const auto& job = work[idx];
    const auto& page_id = data.workloads[job.page].id;
    const double rate = cfg.event_rates[job.rate];
    const std::string trace_id =
        to_string(models.gesture) + "/" + page_id + "/u" + std::to_string(job.user) + "/r" + format_real(rate);
    const auto trace =
        sched::generate_trace(trace_id, page_id, models.gesture, rate, mix_seed(trace_root, fnv1a(trace_id)));
    const auto fold = models.fold_of_page.find(page_id);
    if (fold == models.fold_of_page.end()) throw std::runtime_error("no held-out model for page " + page_id);
    const sched::SessionInputs in{&p, &data.catalog, &models.folds[fold->second], nullptr};
    std::vector<SessionRecord> recs;
    double baseline = 0.0;
    for (const auto g : governors) {
      sched::SessionConfig sc;
      sc.fps_min = users[job.user];
      sc.governor = g;
      sc.search_mode = cfg.search_mode;
      sc.qos_mode = cfg.qos_mode;
      sc.rate_model = rate_model;
      SessionRecord r;
      r.page_id = page_id;
      r.user = job.user;
      r.fps_min = users[job.user];
      r.rate = rate;
      r.gesture = models.gesture;
      r.report = sched::run_session(trace, sc, in);
      if (g == sched::GovernorKind::Interactive) baseline = r.report.total_energy_j;
      recs.push_back(std::move(r));
    }
    std::vector<SessionRecord> kept;
    for (std::size_t k = 0; k < recs.size(); ++k) {
      if (!has_baseline && k + 1 == recs.size()) break;
      recs[k].energy_reduction = baseline > 0.0 ? 1.0 - recs[k].report.total_energy_j / baseline : 0.0;
      kept.push_back(std::move(recs[k]));
    }
    results[idx] = std::move(kept);
  };

  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < work.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_lock);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  std::vector<SessionRecord> out;
  for (auto& r : results)
    for (auto& rec : r) out.push_back(std::move(rec));
  return out;
}

std::string aggregate_csv(const std::vector<SessionRecord>& records) {
  std::ostringstream out;
  out << "page,user,rate,governor,energy_j,qos_violation,reduction\n";
  for (const auto& r : records) {
    out << r.page_id << ',' << r.user << ',' << format_real(r.rate) << ',' << sched::to_string(r.report.governor)
        << ',' << format_real(r.report.total_energy_j) << ',' << format_real(r.report.qos_violation) << ','
        << format_real(r.energy_reduction) << '\n';
  }
  return out.str();
}

std::string session_json_line(const SessionRecord& r) {
  auto j = ordered_json::parse(r.report.to_json_text());
  ordered_json line;
  line["gesture"] = to_string(r.gesture);
  line["user"] = r.user;
  line["rate"] = r.rate;
  line["energy_reduction"] = r.energy_reduction;
  for (auto& [k, v] : j.items()) line[k] = v;
  return line.dump();
}

namespace {

constexpr double kReductionBin = 0.05;
constexpr double kQosBin = 0.02;

long reduction_bin(double x) { return std::clamp(static_cast<long>(std::floor(x / kReductionBin)), -20L, 19L); }
long qos_bin(double x) { return std::clamp(static_cast<long>(std::floor(x / kQosBin)), 0L, 49L); }

}  // namespace

ReportTables build_report(const std::string& sessions_jsonl) {
  struct Acc {
    std::size_t n = 0;
    double energy = 0.0;
    double reduction = 0.0;
    double qos = 0.0;
    std::map<long, std::size_t> red_bins;
    std::map<long, std::size_t> qos_bins;
    std::map<std::string, std::size_t> settings;
  };
  std::map<std::string, Acc> by_gov;
  std::istringstream in(sessions_jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto& a = by_gov[j.at("governor").get<std::string>()];
      ++a.n;
      a.energy += j.at("total_energy_j").get<double>();
      const double red = j.at("energy_reduction").get<double>();
      const double q = j.at("qos_violation").get<double>();
      a.reduction += red;
      a.qos += q;
      ++a.red_bins[reduction_bin(red)];
      ++a.qos_bins[qos_bin(q)];
      for (const auto& [k, v] : j.at("setting_histogram").items()) a.settings[k] += v.get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("sessions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (by_gov.empty()) throw std::invalid_argument("no sessions to report");

  std::vector<std::string> order;
  for (const auto g : sched::all_governors())
    if (by_gov.count(sched::to_string(g))) order.push_back(sched::to_string(g));
  for (const auto& [g, a] : by_gov)
    if (std::find(order.begin(), order.end(), g) == order.end()) order.push_back(g);

  ReportTables t;
  std::ostringstream summary, red, qos, settings;
  summary << "governor,sessions,mean_energy_j,mean_energy_reduction,mean_qos_violation\n";
  red << "governor,bin_low,bin_high,sessions\n";
  qos << "governor,bin_low,bin_high,sessions\n";
  settings << "governor,setting,windows\n";
  for (const auto& g : order) {
    const auto& a = by_gov.at(g);
    const double n = static_cast<double>(a.n);
    summary << g << ',' << a.n << ',' << format_real(a.energy / n) << ',' << format_real(a.reduction / n) << ','
            << format_real(a.qos / n) << '\n';
    for (long b = -20; b < 20; ++b) {
      const auto it = a.red_bins.find(b);
      red << g << ',' << format_real(b * kReductionBin) << ',' << format_real((b + 1) * kReductionBin) << ','
          << (it == a.red_bins.end() ? 0 : it->second) << '\n';
    }
    for (long b = 0; b < 50; ++b) {
      const auto it = a.qos_bins.find(b);
      qos << g << ',' << format_real(b * kQosBin) << ',' << format_real((b + 1) * kQosBin) << ','
          << (it == a.qos_bins.end() ? 0 : it->second) << '\n';
    }
    for (const auto& [s, c] : a.settings) settings << g << ',' << s << ',' << c << '\n';
  }
  t.summary_csv = summary.str();
  t.reduction_histogram_csv = red.str();
  t.qos_histogram_csv = qos.str();
  t.setting_histogram_csv = settings.str();
  return t;
}

void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& outputs) {
  ordered_json j;
  j["command"] = command;
  j["seed"] = cfg.seed;
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << cfg.hash();
  j["config_hash"] = hex.str();
  j["config"] = ordered_json::parse(cfg.to_json_text());
  j["outputs"] = outputs;
  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir / "manifest.json", j.dump(2) + "\n");
}

std::string cv_summary_csv(const model::CvResult& cv) {
  std::ostringstream out;
  out << "fold,validation_pages,pcs,mlp_mean_error,mlp_geometric_error,linear_mean_error,linear_geometric_error,"
         "linear_ridge_fallback\n";
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const auto& fr = cv.folds[f];
    out << f << ',' << fr.validation_pages.size() << ',' << fr.transform.output_dim() << ','
        << format_real(fr.mlp_error.arithmetic_mean) << ',' << format_real(fr.mlp_error.geometric_mean) << ','
        << format_real(fr.linear_error.arithmetic_mean) << ',' << format_real(fr.linear_error.geometric_mean) << ','
        << (fr.linear.ridge_fallback ? 1 : 0) << '\n';
  }
  out << "all,,," << format_real(cv.mlp_mean_error) << ",," << format_real(cv.linear_mean_error) << ",,\n";
  return out.str();
}

std::string cv_page_errors_csv(const CorpusData& data, const std::vector<platform::GridSample>& grid,
                               const model::CvResult& cv) {
  std::ostringstream out;
  out << "page_id,fold,mlp_error,linear_error\n";
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const auto& fr = cv.folds[f];
    for (const auto& id : fr.validation_pages) {
      const auto it = std::find_if(data.pages.begin(), data.pages.end(),
                                   [&](const model::PageFeatures& p) { return p.id == id; });
      if (it == data.pages.end()) continue;
      const auto samples = model::attach_pcs(grid, model::project_pages({*it}, fr.transform));
      out << id << ',' << f << ',' << format_real(model::evaluate_error(fr.mlp, samples).arithmetic_mean) << ','
          << format_real(model::evaluate_error(fr.linear, samples).arithmetic_mean) << '\n';
    }
  }
  return out.str();
}

std::vector<double> mean_fps_per_page(const CorpusData& data, const std::vector<platform::GridSample>& grid) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& s : grid) {
    auto& a = acc[s.page_id];
    a.first += s.fps;
    ++a.second;
  }
  std::vector<double> out;
  for (const auto& p : data.pages) {
    const auto it = acc.find(p.id);
    out.push_back(it == acc.end() || it->second.second == 0 ? 0.0
                                                            : it->second.first / static_cast<double>(it->second.second));
  }
  return out;
}

}  // namespace webdvfs::harness
