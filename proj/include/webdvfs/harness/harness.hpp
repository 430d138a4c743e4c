#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "webdvfs/dom/features.hpp"
#include "webdvfs/model/cross_validation.hpp"
#include "webdvfs/platform/platform.hpp"
#include "webdvfs/sched/scheduler.hpp"

namespace webdvfs::harness {

namespace fs = std::filesystem;

struct ExperimentConfig {
  fs::path corpus_dir = "corpus";
  fs::path platform_path = "platforms/jetson-tx2.json";
  fs::path manifest_path = "data/manifest.json";
  std::vector<Gesture> gestures{Gesture::Scroll};
  std::vector<double> event_rates = platform::default_event_rates();
  /// Empty means the 20 synthetic users.
  std::vector<double> fps_min;
  model::ModelConfig model;
  search::SearchMode search_mode = search::SearchMode::MinFeasible;
  sched::QosMode qos_mode = sched::QosMode::Magnitude;
  std::vector<sched::GovernorKind> governors = sched::all_governors();
  std::uint64_t seed = 2019;
  int folds = 5;
  /// Use only the first N corpus pages (by id); 0 keeps all.
  std::size_t page_limit = 0;
  fs::path out_dir = "out";

  void validate() const;
  /// Canonical JSON of every field that influences results (not out_dir).
  std::string to_json_text() const;
  std::uint64_t hash() const;
};

/// Corpus root: the explicit flag, else $WEBDVFS_CORPUS, else `fallback`.
fs::path resolve_corpus_dir(const std::string& flag_value, const fs::path& fallback = "corpus");

struct CorpusData {
  dom::FeatureManifest manifest;
  std::vector<model::PageFeatures> pages;
  std::vector<platform::PageWorkload> workloads;
  sched::PageCatalog catalog;
};

CorpusData load_corpus_data(const ExperimentConfig& cfg, const platform::PlatformSpec& p);

/// 20 fps_min values drawn around 30 and clipped to [20, 45].
std::vector<double> synthetic_users(std::uint64_t seed, std::size_t count = 20);

/// Linear acceptable-rate model fitted to per-user comfort rates drawn from the same seed.
sched::RateModel user_rate_model(const std::vector<double>& users, std::uint64_t seed);

std::vector<platform::GridSample> training_grid(const CorpusData& data, const platform::PlatformSpec& p,
                                                Gesture g, const std::vector<double>& rates, std::uint64_t seed);

struct GeneratedData {
  pipeline::FeatureTransform transform;
  std::vector<model::TrainingSample> samples;
};

/// Grid over every loaded page with PCs from a transform fitted on those pages.
GeneratedData generate_data(const CorpusData& data, const platform::PlatformSpec& p, Gesture g,
                            const std::vector<double>& rates, std::uint64_t seed);

model::CvResult run_cross_validation(const CorpusData& data, const platform::PlatformSpec& p, Gesture g,
                                     const ExperimentConfig& cfg);

struct SessionRecord {
  std::string page_id;
  std::size_t user = 0;
  double fps_min = 0.0;
  double rate = 0.0;
  Gesture gesture = Gesture::Scroll;
  sched::SessionReport report;
  /// Relative to the interactive session of the same trace.
  double energy_reduction = 0.0;
};

struct GestureModels {
  Gesture gesture = Gesture::Scroll;
  /// One registry per fold; pages use the fold that held them out.
  std::vector<model::ModelRegistry> folds;
  std::map<std::string, std::size_t> fold_of_page;
};

GestureModels models_from_cv(Gesture g, const model::CvResult& cv);

/// Runs every governor on every (page, user, rate) trace. Records come back in a fixed order
/// regardless of `jobs`.
std::vector<SessionRecord> simulate(const CorpusData& data, const platform::PlatformSpec& p,
                                    const GestureModels& models, const std::vector<double>& users,
                                    const ExperimentConfig& cfg, unsigned jobs = 1);

/// page,user,rate,governor,energy_j,qos_violation,reduction
std::string aggregate_csv(const std::vector<SessionRecord>& records);
std::string session_json_line(const SessionRecord& r);

struct ReportTables {
  std::string summary_csv;
  std::string reduction_histogram_csv;
  std::string qos_histogram_csv;
  std::string setting_histogram_csv;
};

/// Aggregates computed from the raw sessions.jsonl text only.
ReportTables build_report(const std::string& sessions_jsonl);

/// Writes manifest.json (command, seed, config hash, config, outputs) into cfg.out_dir.
void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& outputs);

std::string cv_summary_csv(const model::CvResult& cv);
/// page_id,fold,mlp_error,linear_error: mean relative error of each held-out page.
std::string cv_page_errors_csv(const CorpusData& data, const std::vector<platform::GridSample>& grid,
                               const model::CvResult& cv);

/// Per-page mean FPS over the grid; the target used for gain-ratio importance.
std::vector<double> mean_fps_per_page(const CorpusData& data, const std::vector<platform::GridSample>& grid);

}  // namespace webdvfs::harness
