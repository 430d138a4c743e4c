#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "webdvfs/common/random.hpp"
#include "webdvfs/common/text.hpp"
#include "webdvfs/harness/harness.hpp"

namespace {

using namespace webdvfs;
using harness::ExperimentConfig;
namespace fs = std::filesystem;

struct Options {
  std::string corpus;
  std::string platform = "platforms/jetson-tx2.json";
  std::string manifest = "data/manifest.json";
  std::vector<std::string> gestures{"scroll"};
  std::vector<double> fps_min;
  std::vector<double> rates;
  std::string search_mode = "min-feasible";
  std::string qos_mode = "magnitude";
  std::vector<std::string> governors;
  std::uint64_t seed = 2019;
  std::string out = "out";
  std::size_t limit = 0;
  int epochs = 300;
  int hidden_layers = 5;
  int hidden_width = 80;
  int folds = 5;
  unsigned jobs = 1;
  // subcommand specific
  std::string data_dir;
  std::string models_dir;
  std::string sessions_dir;
  std::vector<int> layers{1, 2, 3, 4, 5, 6, 7, 8};
};

ExperimentConfig make_config(const Options& o) {
  ExperimentConfig c;
  c.corpus_dir = harness::resolve_corpus_dir(o.corpus);
  c.platform_path = o.platform;
  c.manifest_path = o.manifest;
  c.gestures.clear();
  for (const auto& g : o.gestures) c.gestures.push_back(parse_gesture(g));
  c.fps_min = o.fps_min;
  if (!o.rates.empty()) c.event_rates = o.rates;
  c.search_mode = search::parse_search_mode(o.search_mode);
  c.qos_mode = sched::parse_qos_mode(o.qos_mode);
  if (!o.governors.empty()) {
    c.governors.clear();
    for (const auto& g : o.governors) c.governors.push_back(sched::parse_governor(g));
  }
  c.seed = o.seed;
  c.out_dir = o.out;
  c.page_limit = o.limit;
  c.folds = o.folds;
  c.model.epochs = o.epochs;
  c.model.hidden_layers = o.hidden_layers;
  c.model.hidden_width = o.hidden_width;
  c.model.seed = o.seed;
  c.validate();
  return c;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--corpus", o.corpus, "Corpus directory (default: $WEBDVFS_CORPUS, then ./corpus)");
  sub->add_option("--platform", o.platform, "Platform spec JSON")->capture_default_str();
  sub->add_option("--manifest", o.manifest, "Feature manifest JSON")->capture_default_str();
  sub->add_option("--gesture", o.gestures, "Gestures (scroll, pinch)")->delimiter(',')->capture_default_str();
  sub->add_option("--fps-min", o.fps_min, "fps_min values, one per simulated user (default: 20 synthetic users)")
      ->delimiter(',');
  sub->add_option("--rates", o.rates, "Event rates in px/s (default: 125 * 2^i, i = 0..7)")->delimiter(',');
  sub->add_option("--search-mode", o.search_mode, "literal or min-feasible")->capture_default_str();
  sub->add_option("--qos-mode", o.qos_mode, "magnitude or count")->capture_default_str();
  sub->add_option("--governors", o.governors, "Governors to simulate")->delimiter(',');
  sub->add_option("--seed", o.seed, "Root seed")->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  sub->add_option("--limit", o.limit, "Use only the first N pages");
  sub->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--hidden-layers", o.hidden_layers, "Hidden layers")->capture_default_str();
  sub->add_option("--hidden-width", o.hidden_width, "Neurons per hidden layer")->capture_default_str();
  sub->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
  sub->add_option("--jobs", o.jobs, "Worker threads for simulate")->capture_default_str();
}

std::string suffix(Gesture g) { return "-" + to_string(g); }

int cmd_extract(const ExperimentConfig& cfg) {
  const auto p = platform::load_platform_spec(cfg.platform_path);
  const auto data = harness::load_corpus_data(cfg, p);
  std::vector<dom::FeatureRow> rows;
  for (const auto& page : data.pages) rows.push_back({page.id, {page.raw, data.manifest.version()}});
  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir / "features.csv", dom::features_to_csv(rows, data.manifest));
  harness::write_run_manifest(cfg, "extract", {"features.csv"});
  std::cout << "extracted " << rows.size() << " pages x " << data.manifest.dimension() << " features\n";
  return 0;
}

int cmd_gen_data(const ExperimentConfig& cfg) {
  const auto p = platform::load_platform_spec(cfg.platform_path);
  const auto data = harness::load_corpus_data(cfg, p);
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> outputs;
  for (const auto g : cfg.gestures) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto gen = harness::generate_data(data, p, g, cfg.event_rates, cfg.seed);
    const std::string csv = "training" + suffix(g) + ".csv";
    const std::string tf = "transform" + suffix(g) + ".json";
    write_text_file(cfg.out_dir / csv, model::samples_to_csv(gen.samples));
    write_text_file(cfg.out_dir / tf, gen.transform.to_json_text());
    outputs.push_back(csv);
    outputs.push_back(tf);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << to_string(g) << ": " << gen.samples.size() << " samples (" << data.pages.size() << " pages x "
              << cfg.event_rates.size() << " rates x " << p.setting_table.size() << " settings), "
              << gen.transform.output_dim() << " PCs, " << format_real(std::round(secs * 1000) / 1000) << " s\n";
  }
  harness::write_run_manifest(cfg, "gen-data", outputs);
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const Options& o) {
  const auto p = platform::load_platform_spec(cfg.platform_path);
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> outputs;
  std::optional<harness::CorpusData> data;
  for (const auto g : cfg.gestures) {
    harness::GeneratedData gen;
    if (!o.data_dir.empty()) {
      const fs::path dir = o.data_dir;
      gen.samples = model::samples_from_csv(read_text_file(dir / ("training" + suffix(g) + ".csv")));
      gen.transform = pipeline::FeatureTransform::from_json_text(read_text_file(dir / ("transform" + suffix(g) + ".json")));
    } else {
      if (!data) data = harness::load_corpus_data(cfg, p);
      gen = harness::generate_data(*data, p, g, cfg.event_rates, cfg.seed);
    }
    auto mc = cfg.model;
    mc.seed = mix_seed(cfg.model.seed, fnv1a(to_string(g)));
    auto m = model::train(gen.samples, mc);
    m.transform = gen.transform;
    const std::string name = "model" + suffix(g) + ".json";
    write_text_file(cfg.out_dir / name, m.to_json_text());
    outputs.push_back(name);
    std::cout << to_string(g) << ": trained on " << gen.samples.size() << " samples, MSLE "
              << format_real(m.initial_loss) << " -> " << format_real(m.final_loss) << "\n";
  }
  harness::write_run_manifest(cfg, "train", outputs);
  return 0;
}

void save_fold_models(const fs::path& dir, Gesture g, const model::CvResult& cv) {
  fs::create_directories(dir);
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    write_text_file(dir / ("fold-" + std::to_string(f) + suffix(g) + ".json"), cv.folds[f].mlp.to_json_text());
    folds.push_back(cv.folds[f].validation_pages);
  }
  write_text_file(dir / ("folds" + suffix(g) + ".json"), folds.dump(2) + "\n");
}

harness::GestureModels load_fold_models(const fs::path& dir, Gesture g) {
  const auto folds = nlohmann::json::parse(read_text_file(dir / ("folds" + suffix(g) + ".json")));
  harness::GestureModels m;
  m.gesture = g;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    model::ModelRegistry r;
    r.add(model::MlpModel::from_json_text(read_text_file(dir / ("fold-" + std::to_string(f) + suffix(g) + ".json"))));
    m.folds.push_back(std::move(r));
    for (const auto& id : folds[f]) m.fold_of_page[id.get<std::string>()] = f;
  }
  return m;
}

int cmd_eval(const ExperimentConfig& cfg) {
  const auto p = platform::load_platform_spec(cfg.platform_path);
  const auto data = harness::load_corpus_data(cfg, p);
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> outputs;
  for (const auto g : cfg.gestures) {
    const auto cv = harness::run_cross_validation(data, p, g, cfg);
    const auto grid = harness::training_grid(data, p, g, cfg.event_rates, cfg.seed);
    write_text_file(cfg.out_dir / ("cv-summary" + suffix(g) + ".csv"), harness::cv_summary_csv(cv));
    write_text_file(cfg.out_dir / ("cv-page-errors" + suffix(g) + ".csv"), harness::cv_page_errors_csv(data, grid, cv));
    save_fold_models(cfg.out_dir / "models", g, cv);
    outputs.push_back("cv-summary" + suffix(g) + ".csv");
    outputs.push_back("cv-page-errors" + suffix(g) + ".csv");
    outputs.push_back("models/");
    std::cout << to_string(g) << ": mean relative error mlp " << format_real(cv.mlp_mean_error) << ", linear "
              << format_real(cv.linear_mean_error) << "\n";
  }
  harness::write_run_manifest(cfg, "eval", outputs);
  return 0;
}

int cmd_simulate(const ExperimentConfig& cfg, const Options& o) {
  const auto p = platform::load_platform_spec(cfg.platform_path);
  const auto data = harness::load_corpus_data(cfg, p);
  const auto users = cfg.fps_min.empty() ? harness::synthetic_users(cfg.seed) : cfg.fps_min;
  fs::create_directories(cfg.out_dir);
  std::ofstream sessions(cfg.out_dir / "sessions.jsonl", std::ios::binary);
  std::ofstream aggregate(cfg.out_dir / "aggregate.csv", std::ios::binary);
  if (!sessions || !aggregate) throw std::runtime_error("cannot write into " + cfg.out_dir.string());
  bool header = true;
  for (const auto g : cfg.gestures) {
    harness::GestureModels models;
    if (!o.models_dir.empty()) {
      models = load_fold_models(o.models_dir, g);
    } else {
      const auto cv = harness::run_cross_validation(data, p, g, cfg);
      save_fold_models(cfg.out_dir / "models", g, cv);
      models = harness::models_from_cv(g, cv);
    }
    const auto records = harness::simulate(data, p, models, users, cfg, o.jobs);
    for (const auto& r : records) sessions << harness::session_json_line(r) << '\n';
    auto csv = harness::aggregate_csv(records);
    if (!header) csv.erase(0, csv.find('\n') + 1);
    header = false;
    aggregate << csv;
    std::size_t ml = 0;
    for (const auto& r : records) ml += r.report.governor == sched::GovernorKind::Ml ? 1 : 0;
    std::cout << to_string(g) << ": " << records.size() << " sessions (" << ml << " ml) over " << data.pages.size()
              << " pages x " << users.size() << " users x " << cfg.event_rates.size() << " rates\n";
  }
  harness::write_run_manifest(cfg, "simulate", {"sessions.jsonl", "aggregate.csv"});
  return 0;
}

int cmd_report(const ExperimentConfig& cfg, const Options& o) {
  const fs::path dir = o.sessions_dir.empty() ? cfg.out_dir : fs::path(o.sessions_dir);
  const fs::path file = dir / "sessions.jsonl";
  if (!fs::is_regular_file(file)) throw std::invalid_argument("no sessions.jsonl in " + dir.string());
  const auto tables = harness::build_report(read_text_file(file));
  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir / "summary.csv", tables.summary_csv);
  write_text_file(cfg.out_dir / "reduction_histogram.csv", tables.reduction_histogram_csv);
  write_text_file(cfg.out_dir / "qos_histogram.csv", tables.qos_histogram_csv);
  write_text_file(cfg.out_dir / "setting_histogram.csv", tables.setting_histogram_csv);

  const auto p = platform::load_platform_spec(cfg.platform_path);
  const auto data = harness::load_corpus_data(cfg, p);
  const auto grid = harness::training_grid(data, p, cfg.gestures.front(), cfg.event_rates, cfg.seed);
  std::vector<std::vector<double>> raws;
  for (const auto& page : data.pages) raws.push_back(page.raw);
  const auto X = pipeline::stack_rows(raws);
  const auto transform = pipeline::fit_feature_transform(X, data.manifest.version());
  const auto importance = pipeline::importance_report(data.manifest.feature_names(), X,
                                                      harness::mean_fps_per_page(data, grid), transform.pca,
                                                      transform.scaler);
  write_text_file(cfg.out_dir / "importance.csv", importance.to_csv());
  harness::write_run_manifest(cfg, "report",
                              {"summary.csv", "reduction_histogram.csv", "qos_histogram.csv", "setting_histogram.csv",
                               "importance.csv"});
  std::cout << tables.summary_csv;
  return 0;
}

int cmd_layer_sweep(const ExperimentConfig& cfg, const Options& o) {
  for (const int l : o.layers)
    if (l < 1) throw std::invalid_argument("layer counts must be at least 1");
  const auto p = platform::load_platform_spec(cfg.platform_path);
  const auto data = harness::load_corpus_data(cfg, p);
  const Gesture g = cfg.gestures.front();
  std::ostringstream csv;
  csv << "layers,mean_error\n";
  for (const int l : o.layers) {
    auto c = cfg;
    c.model.hidden_layers = l;
    const auto cv = harness::run_cross_validation(data, p, g, c);
    csv << l << ',' << format_real(cv.mlp_mean_error) << '\n';
    std::cout << l << " layers: " << format_real(cv.mlp_mean_error) << "\n" << std::flush;
  }
  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir / "layer_sweep.csv", csv.str());
  harness::write_run_manifest(cfg, "layer-sweep", {"layer_sweep.csv"});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"webdvfs: FPS-driven processor setting selection for mobile web browsing"};
  app.require_subcommand(1);
  Options o;
  auto* extract = app.add_subcommand("extract", "Corpus -> features.csv");
  auto* gen = app.add_subcommand("gen-data", "Training grid CSV and feature transform per gesture");
  auto* train = app.add_subcommand("train", "Train one model per gesture");
  auto* eval = app.add_subcommand("eval", "Cross-validated error of the MLP and the linear baseline");
  auto* sim = app.add_subcommand("simulate", "Replay sessions for every governor x user x rate x page");
  auto* report = app.add_subcommand("report", "Aggregate session reports and feature importance");
  auto* sweep = app.add_subcommand("layer-sweep", "Cross-validated error per hidden-layer count");
  for (auto* s : {extract, gen, train, eval, sim, report, sweep}) add_common(s, o);
  train->add_option("--data", o.data_dir, "Directory written by gen-data");
  sim->add_option("--models", o.models_dir, "Directory of fold models written by eval");
  report->add_option("--sessions", o.sessions_dir, "Directory holding sessions.jsonl (default: --out)");
  sweep->add_option("--layers", o.layers, "Hidden-layer counts")->delimiter(',')->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    const auto cfg = make_config(o);
    if (*extract) return cmd_extract(cfg);
    if (*gen) return cmd_gen_data(cfg);
    if (*train) return cmd_train(cfg, o);
    if (*eval) return cmd_eval(cfg);
    if (*sim) return cmd_simulate(cfg, o);
    if (*report) return cmd_report(cfg, o);
    if (*sweep) return cmd_layer_sweep(cfg, o);
  } catch (const std::exception& e) {
    std::cerr << "webdvfs: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
