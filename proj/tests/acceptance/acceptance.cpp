// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "webdvfs/common/random.hpp"
#include "webdvfs/common/text.hpp"
#include "webdvfs/harness/harness.hpp"

using namespace webdvfs;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& label, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << label << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

harness::ExperimentConfig base_config() {
  harness::ExperimentConfig c;
  const std::string root = WEBDVFS_SOURCE_DIR;
  c.corpus_dir = root + "/corpus";
  c.platform_path = root + "/platforms/jetson-tx2.json";
  c.manifest_path = root + "/data/manifest.json";
  // 100 epochs keeps five-fold training inside the five minute budget on one core.
  c.model.epochs = 100;
  return c;
}

// ---- criterion 3 helpers: an independent forward pass to detect ReLU kinks ----

std::vector<model::Matrix> pre_activations(const model::MlpModel& m, const model::Matrix& X) {
  std::vector<model::Matrix> out;
  model::Matrix a = X;
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    model::Matrix z = m.layers[l].weights * a;
    z.colwise() += m.layers[l].bias;
    out.push_back(z);
    a = z.cwiseMax(0.0);
  }
  return out;
}

bool same_signs(const std::vector<model::Matrix>& a, const std::vector<model::Matrix>& b) {
  for (std::size_t l = 0; l < a.size(); ++l)
    if (((a[l].array() > 0.0) != (b[l].array() > 0.0)).any()) return false;
  return true;
}

// ---- criterion 5 helper: the reference binary search on a plain array, unguarded reads reported ----

struct ReferenceOutcome {
  long index;
  bool out_of_range;
};

ReferenceOutcome reference_search(const std::vector<double>& pred, double fps_min) {
  const long n = static_cast<long>(pred.size());
  bool oob = false;
  auto read = [&](long i) {
    if (i < 0 || i >= n) {
      oob = true;
      i = std::clamp(i, 0L, n - 1);
    }
    return pred[static_cast<std::size_t>(i)];
  };
  long low = 0, high = n - 1;
  while (low <= high) {
    const long mid = (low + high) / 2;
    const double fps = read(mid);
    if (fps > fps_min)
      high = mid - 1;
    else if (fps < fps_min)
      low = mid + 1;
    else
      return {mid, oob};
  }
  if (low > n - 1) return {n - 1, oob};
  const double fps_low = read(low);
  const double fps_high = read(high);
  const long pick = (fps_low - fps_min) < (fps_min - fps_high) ? low + 1 : high;
  return {std::clamp(pick, 0L, n - 1), oob};
}

search::SettingTable ladder_table(const std::vector<double>& fps) {
  std::vector<platform::ProcessorSetting> settings;
  for (std::size_t i = 0; i < fps.size(); ++i)
    settings.push_back({platform::ClusterKind::Big, 0.1 * static_cast<double>(i + 1), 0.5});
  return search::SettingTable(settings, [settings, fps](const platform::ProcessorSetting& s) {
    for (std::size_t i = 0; i < settings.size(); ++i)
      if (settings[i] == s) return fps[i];
    return -1.0;
  });
}

}  // namespace

int main() {
  const auto cfg = base_config();
  const auto p = platform::load_platform_spec(cfg.platform_path);
  const auto data = harness::load_corpus_data(cfg, p);
  const auto users = harness::synthetic_users(cfg.seed);

  // 1. grid size
  {
    auto c80 = cfg;
    c80.page_limit = 80;
    const auto t0 = Clock::now();
    const auto d80 = harness::load_corpus_data(c80, p);
    const auto gen = harness::generate_data(d80, p, Gesture::Scroll, c80.event_rates, c80.seed);
    const double secs = seconds_since(t0);
    report("criterion 1 (grid size)", gen.samples.size() == 8960 && secs < 10.0,
           std::to_string(d80.pages.size()) + " pages x " + std::to_string(c80.event_rates.size()) + " rates x " +
               std::to_string(p.setting_table.size()) + " settings = " + std::to_string(gen.samples.size()) +
               " samples in " + fixed(secs, 2) + " s");
  }

  // 2. five-fold prediction accuracy
  const auto t_cv = Clock::now();
  const auto cv = harness::run_cross_validation(data, p, Gesture::Scroll, cfg);
  const double cv_secs = seconds_since(t_cv);
  report("criterion 2 (prediction accuracy)", cv.mlp_mean_error < 0.15 && cv_secs < 300.0,
         "5-fold mean relative error " + fixed(cv.mlp_mean_error) + " (< 0.15), " + std::to_string(cfg.model.epochs) +
             " epochs, " + fixed(cv_secs, 1) + " s");

  // 3. gradient check
  {
    model::ModelConfig mc;
    mc.seed = 77;
    auto m = model::init_model(8, mc, Gesture::Scroll, {0, 1, 0, 1}, 30.0);
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    model::Matrix X(m.input_dim(), 20);
    model::Vector y(20);
    for (int c = 0; c < 20; ++c) {
      for (int r = 0; r < X.rows(); ++r) X(r, c) = u(rng);
      y[c] = 5.0 + 50.0 * u(rng);
    }
    model::Gradients grads;
    model::loss_and_gradients(m, X, y, grads);
    const auto base = pre_activations(m, X);
    const double h = 1e-5;
    int checked = 0, kinks = 0, dead = 0;
    double worst = 0.0;
    while (checked < 100 && checked + kinks + dead < 5000) {
      const auto l = static_cast<std::size_t>(u(rng) * m.layers.size());
      auto& layer = m.layers[l];
      const bool bias = u(rng) < 0.2;
      const auto r = static_cast<Eigen::Index>(u(rng) * layer.weights.rows());
      const auto c = static_cast<Eigen::Index>(u(rng) * layer.weights.cols());
      double& param = bias ? layer.bias[r] : layer.weights(r, c);
      const double analytic = bias ? grads.layers[l].bias[r] : grads.layers[l].weights(r, c);
      const double orig = param;
      model::Gradients scratch;
      param = orig + h;
      const bool up_ok = same_signs(base, pre_activations(m, X));
      const double up = model::loss_and_gradients(m, X, y, scratch);
      param = orig - h;
      const bool down_ok = same_signs(base, pre_activations(m, X));
      const double down = model::loss_and_gradients(m, X, y, scratch);
      param = orig;
      if (!up_ok || !down_ok) {
        ++kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max(std::fabs(numeric), std::fabs(analytic));
      if (scale < 1e-12) {
        ++dead;
        continue;
      }
      worst = std::max(worst, std::fabs(numeric - analytic) / scale);
      ++checked;
    }
    report("criterion 3 (gradient check)", checked == 100 && worst < 1e-4,
           std::to_string(checked) + " probes on 5x80 relu, worst relative error " + fixed(worst * 1e6, 3) +
               "e-6 (" + std::to_string(kinks) + " kink and " + std::to_string(dead) + " dead-unit probes redrawn)");
  }

  // 4. MSLE asymmetry
  {
    Rng rng(404);
    std::uniform_real_distribution<double> ux(0.01, 120.0);
    int held = 0;
    for (int i = 0; i < 1000; ++i) {
      const double x = ux(rng);
      const double margin = std::uniform_real_distribution<double>(1e-3, x)(rng);
      const double under = model::msle_loss({x - margin}, {x});
      const double over = model::msle_loss({x + margin}, {x});
      held += under > over ? 1 : 0;
    }
    report("criterion 4 (MSLE asymmetry)", held == 1000,
           std::to_string(held) + "/1000 pairs penalize the underestimate more");
  }

  // 5. literal search fidelity
  {
    const auto t = ladder_table({10, 20, 30, 40, 50});
    const bool hand = search::search_literal(t, 30).index == 2 && search::search_literal(t, 45).index == 3 &&
                      search::search_literal(t, 48).index == 4;
    Rng rng(55);
    std::uniform_int_distribution<std::size_t> size(2, 32);
    std::uniform_real_distribution<double> step(0.5, 8.0);
    int agree = 0, total = 0, bounded = 0, reference_oob = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> fps;
      double x = std::uniform_real_distribution<double>(1.0, 20.0)(rng);
      const std::size_t n = size(rng);
      for (std::size_t i = 0; i < n; ++i) {
        fps.push_back(std::round(x));
        x += step(rng);
      }
      for (std::size_t i = 1; i < n; ++i) fps[i] = std::max(fps[i], fps[i - 1] + 1.0);
      const auto table = ladder_table(fps);
      const double targets[] = {fps[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)],
                                std::uniform_real_distribution<double>(1e-3, fps.back() + 30.0)(rng),
                                fps.back() + 1.0, 1e-3};
      for (const double fps_min : targets) {
        const auto ref = reference_search(fps, fps_min);
        const auto got = search::search_literal(table, fps_min);
        ++total;
        agree += got.index == static_cast<std::size_t>(ref.index) ? 1 : 0;
        bounded += got.index < n ? 1 : 0;
        reference_oob += ref.out_of_range ? 1 : 0;
      }
    }
    report("criterion 5 (literal search fidelity)", hand && agree == total && bounded == total,
           std::string("hand traces ") + (hand ? "ok" : "WRONG") + ", " + std::to_string(agree) + "/" +
               std::to_string(total) + " fuzzed queries match the reference, " + std::to_string(bounded) + "/" +
               std::to_string(total) + " in bounds (" + std::to_string(reference_oob) +
               " would have read outside the table without clamps)");
  }

  // 6. search optimality with a perfect predictor
  {
    const auto table = search::sorted_by_frequency(p.setting_table);
    std::size_t total = 0, agree = 0, tie = 0, other = 0;
    for (const auto& page : data.workloads) {
      for (const double rate : cfg.event_rates) {
        auto truth = [&](const platform::ProcessorSetting& s) {
          return platform::noiseless_fps(page, rate, s, p, Gesture::Scroll);
        };
        auto power = [&](const platform::ProcessorSetting& s, double) {
          return platform::power_draw(s, p, platform::render_utilization(page, rate, s, p, Gesture::Scroll));
        };
        const search::SettingTable st(table, truth, power);
        for (const double fps_min : users) {
          ++total;
          const auto a = search::search_min_feasible(st, fps_min);
          const auto b = search::exhaustive_oracle(st, fps_min);
          if (a.setting == b.setting) {
            ++agree;
          } else {
            const double pa = power(a.setting, 0.0), pb = power(b.setting, 0.0);
            (std::fabs(pa - pb) <= 1e-9 * std::max(pa, pb) ? tie : other) += 1;
          }
        }
      }
    }
    const double rate = static_cast<double>(agree) / static_cast<double>(total);
    report("criterion 6 (search optimality)", rate >= 0.99 && other == 0,
           std::to_string(agree) + "/" + std::to_string(total) + " (page, rate, fps_min) triples agree (" +
               fixed(100.0 * rate, 2) + "%), " + std::to_string(tie) + " power ties, " + std::to_string(other) +
               " other disagreements");
  }

  // 7. governor ordering on the full simulate matrix
  {
    const auto t0 = Clock::now();
    const auto models = harness::models_from_cv(Gesture::Scroll, cv);
    const auto records = harness::simulate(data, p, models, users, cfg);
    const double secs = seconds_since(t0);
    std::map<std::string, std::map<sched::GovernorKind, const harness::SessionRecord*>> by_trace;
    double ml_qos = 0.0, eb_qos = 0.0;
    std::size_t ml_n = 0, eb_n = 0;
    for (const auto& r : records) {
      by_trace[r.report.trace_id][r.report.governor] = &r;
      if (r.report.governor == sched::GovernorKind::Ml) {
        ml_qos += r.report.qos_violation;
        ++ml_n;
      } else if (r.report.governor == sched::GovernorKind::Ebrowser) {
        eb_qos += r.report.qos_violation;
        ++eb_n;
      }
    }
    ml_qos /= static_cast<double>(std::max<std::size_t>(ml_n, 1));
    eb_qos /= static_cast<double>(std::max<std::size_t>(eb_n, 1));
    std::size_t oracle_ok = 0, interactive_ok = 0, oracle_bad_ml_violating = 0;
    for (const auto& [id, g] : by_trace) {
      const double e_ml = g.at(sched::GovernorKind::Ml)->report.total_energy_j;
      const double e_or = g.at(sched::GovernorKind::Oracle)->report.total_energy_j;
      const double e_it = g.at(sched::GovernorKind::Interactive)->report.total_energy_j;
      if (e_or <= e_ml) {
        ++oracle_ok;
      } else if (g.at(sched::GovernorKind::Ml)->report.qos_violation > 0.0) {
        ++oracle_bad_ml_violating;
      }
      interactive_ok += e_ml <= e_it ? 1 : 0;
    }
    const std::size_t n = by_trace.size();
    const bool ok = oracle_ok == n && interactive_ok == n && ml_qos < eb_qos && secs < 900.0;
    report("criterion 7 (governor ordering)", ok,
           "oracle <= ml on " + std::to_string(oracle_ok) + "/" + std::to_string(n) + " traces (" +
               std::to_string(oracle_bad_ml_violating) + " of the " + std::to_string(n - oracle_ok) +
               " exceptions are traces where ml missed fps_min), ml <= interactive on " +
               std::to_string(interactive_ok) + "/" + std::to_string(n) + ", mean qos ml " + fixed(ml_qos) +
               " vs ebrowser " + fixed(eb_qos) + ", " + std::to_string(records.size()) + " sessions in " +
               fixed(secs, 1) + " s");
  }

  // 8. MLP beats linear regression
  report("criterion 8 (MLP vs LR)", cv.mlp_mean_error < cv.linear_mean_error,
         "mean CV error mlp " + fixed(cv.mlp_mean_error) + " vs linear " + fixed(cv.linear_mean_error));

  // 9. PCA on the extracted corpus
  {
    std::vector<std::vector<double>> raws;
    for (const auto& page : data.pages) raws.push_back(page.raw);
    const auto t = pipeline::fit_feature_transform(pipeline::stack_rows(raws), data.manifest.version());
    const auto& C = t.pca.components;
    const model::Matrix gram = C * C.transpose();
    const double ortho = (gram - model::Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    report("criterion 9 (PCA)", t.pca.cumulative_ratio() >= 0.95 && ortho <= 1e-8,
           "k = " + std::to_string(t.pca.k) + " explains " + fixed(t.pca.cumulative_ratio()) +
               " of the variance, max |C C^T - I| = " + fixed(ortho * 1e15, 3) + "e-15");
  }

  // 10. determinism
  {
    auto small = cfg;
    small.page_limit = 15;
    small.folds = 3;
    small.model.epochs = 3;
    auto run = [&]() {
      const auto d = harness::load_corpus_data(small, p);
      const auto gen = harness::generate_data(d, p, Gesture::Scroll, small.event_rates, small.seed);
      auto m = model::train(gen.samples, small.model);
      m.transform = gen.transform;
      const auto fold_cv = harness::run_cross_validation(d, p, Gesture::Scroll, small);
      const auto recs = harness::simulate(d, p, harness::models_from_cv(Gesture::Scroll, fold_cv),
                                          {25.0, 30.0, 40.0}, small);
      std::string lines;
      for (const auto& r : recs) lines += harness::session_json_line(r) + "\n";
      const auto tables = harness::build_report(lines);
      return std::vector<std::string>{model::samples_to_csv(gen.samples), m.to_json_text(),
                                      harness::aggregate_csv(recs), tables.summary_csv,
                                      tables.setting_histogram_csv};
    };
    const auto a = run();
    const auto b = run();
    const char* names[] = {"training CSV", "model JSON", "aggregate CSV", "summary CSV", "setting histogram"};
    std::string detail;
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool eq = a[i] == b[i];
      same = same && eq;
      detail += std::string(i ? ", " : "") + names[i] + (eq ? " identical" : " DIFFERS") + " (" +
                std::to_string(a[i].size()) + " bytes)";
    }
    report("criterion 10 (determinism)", same, detail);
  }

  // Model checks beyond the numbered criteria, on out-of-fold models.
  {
    const auto idx = cv.fold_of("cnn-like");
    const auto& m = cv.folds[idx].mlp;
    const auto it = std::find_if(data.pages.begin(), data.pages.end(),
                                 [](const model::PageFeatures& pf) { return pf.id == "cnn-like"; });
    const auto pcs = cv.folds[idx].transform.apply(it->raw);
    const double fps = model::predict_fps(m, pcs, 1000.0, 0, 1.5);
    report("model anchor", std::fabs(fps - 31.0) <= 3.1,
           "held-out cnn-like page, little cluster at 1.5 GHz, 1000 px/s: predicted " + fixed(fps, 2) + " FPS (31 +/- 10%)");

    std::size_t pairs = 0, violations = 0, on_plateau = 0;
    double largest_drop = 0.0;
    for (const auto& fold : cv.folds) {
      for (const auto& id : fold.validation_pages) {
        const auto page = std::find_if(data.pages.begin(), data.pages.end(),
                                       [&](const model::PageFeatures& pf) { return pf.id == id; });
        const auto pc = fold.transform.apply(page->raw);
        for (const double rate : cfg.event_rates) {
          for (const auto* cl : {&p.little, &p.big}) {
            double prev = -1.0;
            for (int k = 0; k <= 20; ++k) {
              const double f = cl->min_freq() + (cl->max_freq() - cl->min_freq()) * k / 20.0;
              const double fps_k = model::predict_fps(fold.mlp, pc, rate, static_cast<int>(cl->kind), f);
              if (k > 0) {
                ++pairs;
                if (fps_k < prev) {
                  ++violations;
                  on_plateau += prev >= 0.9 * p.fps_cap ? 1 : 0;
                  largest_drop = std::max(largest_drop, prev - fps_k);
                }
              }
              prev = fps_k;
            }
          }
        }
      }
    }
    const double frac = static_cast<double>(violations) / static_cast<double>(pairs);
    report("model monotonicity", frac < 0.02,
           std::to_string(violations) + "/" + std::to_string(pairs) + " frequency steps decrease the prediction (" +
               fixed(100.0 * frac, 2) + "%, < 2%); " + std::to_string(on_plateau) +
               " of them within 10% of the FPS cap, largest drop " + fixed(largest_drop, 3) + " FPS");
  }

  std::cout << (failures == 0 ? "all acceptance checks passed" : std::to_string(failures) + " acceptance check(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
