#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "webdvfs/model/cross_validation.hpp"
#include "webdvfs/model/mlp.hpp"

using namespace webdvfs;
using namespace webdvfs::model;

namespace {

std::vector<TrainingSample> smooth_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingSample> out;
  for (int i = 0; i < n; ++i) {
    TrainingSample s;
    s.pcs = {u(rng) - 0.5, u(rng) - 0.5};
    s.event_rate = 125.0 + 15875.0 * u(rng);
    s.cluster_label = i % 2;
    s.frequency = 0.4 + 1.6 * u(rng);
    const double work = 10.0 + 6.0 * (s.pcs[0] + 0.5) + 0.001 * s.event_rate;
    s.measured_fps = std::min(60.0, 1000.0 / (work / ((0.5 + 0.5 * s.cluster_label) * s.frequency)));
    out.push_back(s);
  }
  return out;
}

// Numerical forward pass written out layer by layer with scalar loops.
double naive_forward(const MlpModel& m, const Vector& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    std::vector<double> next(static_cast<std::size_t>(layer.weights.rows()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      double z = layer.bias[r];
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) z += layer.weights(r, c) * a[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = (l + 1 < m.layers.size()) ? std::max(0.0, z) : z;
    }
    a = std::move(next);
  }
  return a[0];
}

}  // namespace

TEST_CASE("msle closed forms") {
  CHECK(msle_loss({3.0, 7.0}, {3.0, 7.0}) == 0.0);
  CHECK(msle_loss({0.0}, {0.0}) == 0.0);
  const double e = std::exp(1.0);
  CHECK(msle_loss({e * e - 1.0}, {e - 1.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(msle_loss({-1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(msle_loss({1.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(msle_loss({}, {}), std::invalid_argument);
}

TEST_CASE("property: msle punishes underestimates harder") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double x = 0.01 + 100.0 * u(rng);
    const double m = x * (0.001 + 0.999 * u(rng));
    CHECK(msle_loss({x - m}, {x}) > msle_loss({x + m}, {x}));
  }
}

TEST_CASE("zero weights predict the output bias") {
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 4;
  auto m = init_model(3, cfg, Gesture::Scroll, {0, 1, 0, 1}, 0.0);
  for (auto& l : m.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  m.layers.back().bias[0] = 42.5;
  CHECK(predict_fps(m, Vector(Vector::Ones(3)), 500.0, 1, 1.2) == 42.5);
  m.layers.back().bias[0] = -3.0;
  CHECK(predict_fps(m, Vector(Vector::Ones(3)), 500.0, 1, 1.2) == 0.0);
}

TEST_CASE("one hidden unit by hand") {
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 1;
  auto m = init_model(1, cfg, Gesture::Scroll, {0.0, 1000.0, 0.0, 2.0}, 0.0);
  // x = [pc, rate/1000, cluster, freq/2]
  m.layers[0].weights << 2.0, 1.0, -1.0, 4.0;
  m.layers[0].bias << 0.5;
  m.layers[1].weights << 3.0;
  m.layers[1].bias << 1.0;
  // h = relu(2*0.25 + 0.5 - 1 + 4*0.5 + 0.5) = 2.5; y = 3*2.5 + 1
  CHECK(predict_fps(m, std::vector<double>{0.25}, 500.0, 1, 1.0) == doctest::Approx(8.5));
  // negative pre-activation is cut by relu: h = relu(-2 + 0 - 0 + 0 + 0.5) = 0
  CHECK(predict_fps(m, std::vector<double>{-1.0}, 0.0, 0, 0.0 + 1e-300) == doctest::Approx(1.0));
  CHECK_THROWS_AS(predict_fps(m, std::vector<double>{1.0, 2.0}, 500.0, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(predict_fps(m, std::vector<double>{NAN}, 500.0, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(predict_fps(m, std::vector<double>{1.0}, 500.0, 1, 0.0), std::invalid_argument);
}

TEST_CASE("batched forward agrees with scalar loops") {
  ModelConfig cfg;
  cfg.seed = 77;
  const auto m = init_model(6, cfg, Gesture::Pinch, {125, 16000, 0.4, 2.0}, 30.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix X(9, 12);
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = g(rng);
  const Vector out = m.forward(X);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    CHECK(out[c] == doctest::Approx(naive_forward(m, X.col(c))).epsilon(1e-12));
  }
}

TEST_CASE("gradient check on a 5x80 relu network") {
  ModelConfig cfg;
  cfg.seed = 11;
  auto m = init_model(8, cfg, Gesture::Scroll, {0, 1, 0, 1}, 30.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(11, 20);
  Vector y(20);
  for (int c = 0; c < 20; ++c) {
    for (int r = 0; r < 11; ++r) X(r, c) = u(rng);
    y[c] = 5.0 + 50.0 * u(rng);
  }
  Gradients grads;
  loss_and_gradients(m, X, y, grads);
  const double h = 1e-5;
  std::uniform_int_distribution<std::size_t> pick_layer(0, m.layers.size() - 1);
  int checked = 0;
  int attempts = 0;
  while (checked < 40 && attempts < 400) {
    ++attempts;
    const std::size_t l = pick_layer(rng);
    auto& W = m.layers[l].weights;
    const auto r = static_cast<Eigen::Index>(u(rng) * W.rows());
    const auto c = static_cast<Eigen::Index>(u(rng) * W.cols());
    const double orig = W(r, c);
    Gradients dummy;
    W(r, c) = orig + h;
    const double up = loss_and_gradients(m, X, y, dummy);
    W(r, c) = orig - h;
    const double down = loss_and_gradients(m, X, y, dummy);
    W(r, c) = orig;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grads.layers[l].weights(r, c);
    const double scale = std::max(std::fabs(numeric), std::fabs(analytic));
    if (scale < 1e-9) continue;  // parameter feeds only dead units
    CAPTURE(l);
    CHECK(std::fabs(numeric - analytic) / scale < 1e-4);
    ++checked;
  }
  CHECK(checked == 40);
}

TEST_CASE("epochs = 0 returns the initialization") {
  const auto samples = smooth_samples(50, 1);
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 8;
  cfg.epochs = 0;
  const auto trained = train(samples, cfg);
  Vector y = sample_targets(samples);
  const auto init = init_model(2, cfg, Gesture::Scroll, fit_input_norm(samples), y.mean());
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    CHECK(trained.layers[l].weights == init.layers[l].weights);
    CHECK(trained.layers[l].bias == init.layers[l].bias);
  }
}

TEST_CASE("training halves the loss on smooth data and is reproducible") {
  const auto samples = smooth_samples(200, 2);
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 16;
  cfg.epochs = 200;
  const auto a = train(samples, cfg);
  CHECK(a.final_loss <= 0.5 * a.initial_loss);
  const auto b = train(samples, cfg);
  CHECK(a.to_json_text() == b.to_json_text());
  cfg.seed += 1;
  const auto c = train(samples, cfg);
  CHECK(a.to_json_text() != c.to_json_text());
}

TEST_CASE("constant targets are learned") {
  auto samples = smooth_samples(120, 3);
  for (auto& s : samples) s.measured_fps = 37.0;
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 8;
  cfg.epochs = 50;
  const auto m = train(samples, cfg);
  for (const auto& s : samples) {
    CHECK(predict_fps(m, s.pcs, s.event_rate, s.cluster_label, s.frequency) == doctest::Approx(37.0).epsilon(0.05));
  }
}

TEST_CASE("training rejects mixed gestures and diverging runs") {
  auto samples = smooth_samples(20, 4);
  samples[3].gesture = Gesture::Pinch;
  CHECK_THROWS_AS(train(samples, ModelConfig{}), std::invalid_argument);
  samples = smooth_samples(40, 4);
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 4;
  cfg.epochs = 5;
  cfg.learning_rate = 1e300;
  CHECK_THROWS_AS(train(samples, cfg), std::runtime_error);
  cfg = ModelConfig{};
  cfg.hidden_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("relative error") {
  const auto r = error_report({27.0, 10.0, 5.0}, {30.0, 10.0, 0.0});
  REQUIRE(r.per_sample.size() == 2);
  CHECK(r.per_sample[0] == doctest::Approx(0.10));
  CHECK(r.per_sample[1] == 0.0);
  CHECK(r.excluded == 1);
  CHECK(r.arithmetic_mean == doctest::Approx(0.05));
  CHECK(r.geometric_mean == doctest::Approx(std::sqrt(1.1) - 1.0));
  CHECK(error_report({4.0}, {4.0}).arithmetic_mean == 0.0);
}

TEST_CASE("linear baseline recovers exact log-linear data") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 60; ++i) {
    TrainingSample s;
    s.pcs = {u(rng), u(rng)};
    s.event_rate = 100.0 * i;
    s.cluster_label = i % 2;
    s.frequency = 0.5 + 1.5 * u(rng);
    samples.push_back(s);
  }
  const auto norm = fit_input_norm(samples);
  for (auto& s : samples) {
    const double r = (s.event_rate - norm.rate_min) / (norm.rate_max - norm.rate_min);
    const double f = (s.frequency - norm.freq_min) / (norm.freq_max - norm.freq_min);
    s.measured_fps = std::expm1(0.7 + 0.3 * s.pcs[0] - 0.2 * s.pcs[1] - 0.5 * r + 0.25 * s.cluster_label + 1.5 * f);
  }
  const auto lm = fit_linear_baseline(samples);
  CHECK_FALSE(lm.ridge_fallback);
  CHECK(lm.intercept == doctest::Approx(0.7).epsilon(1e-6));
  const std::vector<double> expected{0.3, -0.2, -0.5, 0.25, 1.5};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(std::fabs(lm.coefficients[static_cast<Eigen::Index>(i)] - expected[i]) < 1e-6);
  }

  for (auto& s : samples) s.measured_fps = 20.0;
  const auto flat = fit_linear_baseline(samples);
  CHECK(flat.coefficients.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(flat.intercept == doctest::Approx(std::log1p(20.0)));
}

TEST_CASE("linear baseline flags a singular design") {
  auto samples = smooth_samples(30, 8);
  for (auto& s : samples) s.cluster_label = 1;
  const auto lm = fit_linear_baseline(samples);
  CHECK(lm.ridge_fallback);
  CHECK(lm.coefficients.allFinite());
  CHECK_THROWS_AS(fit_linear_baseline(smooth_samples(4, 1)), std::invalid_argument);
}

TEST_CASE("model JSON round trip is exact") {
  const auto samples = smooth_samples(64, 9);
  ModelConfig cfg;
  cfg.hidden_layers = 3;
  cfg.hidden_width = 7;
  cfg.epochs = 3;
  cfg.activation = Activation::Tanh;
  const auto m = train(samples, cfg);
  const auto back = MlpModel::from_json_text(m.to_json_text());
  CHECK(back.to_json_text() == m.to_json_text());
  for (const auto& s : samples) {
    CHECK(predict_fps(back, s.pcs, s.event_rate, s.cluster_label, s.frequency) ==
          predict_fps(m, s.pcs, s.event_rate, s.cluster_label, s.frequency));
  }
  CHECK_THROWS(MlpModel::from_json_text("{\"format\":\"other\"}"));
}

TEST_CASE("registry holds one model per gesture") {
  ModelRegistry reg;
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 2;
  reg.add(init_model(2, cfg, Gesture::Scroll, {}, 1.0));
  reg.add(init_model(2, cfg, Gesture::Pinch, {}, 1.0));
  CHECK(reg.size() == 2);
  CHECK_THROWS_AS(reg.add(init_model(2, cfg, Gesture::Scroll, {}, 1.0)), std::invalid_argument);
  ModelRegistry empty;
  CHECK_THROWS_AS(empty.get(Gesture::Pinch), std::runtime_error);
}

TEST_CASE("training CSV round trip") {
  auto samples = smooth_samples(5, 10);
  samples[0].page_id = "cnn-like";
  const auto csv = samples_to_csv(samples);
  CHECK(csv.rfind("page_id,pc_0,pc_1,event_rate,cluster,freq_ghz,fps,gesture\n", 0) == 0);
  const auto back = samples_from_csv(csv);
  REQUIRE(back.size() == 5);
  CHECK(back[0].page_id == "cnn-like");
  CHECK(back[2].pcs == samples[2].pcs);
  CHECK(back[4].measured_fps == samples[4].measured_fps);
  CHECK(samples_to_csv(back) == csv);
}

TEST_CASE("fold partition") {
  const auto folds = fold_partition(100, 5, 2019);
  REQUIRE(folds.size() == 5);
  std::set<std::size_t> all;
  for (const auto& f : folds) {
    CHECK(f.size() == 20);
    all.insert(f.begin(), f.end());
  }
  CHECK(all.size() == 100);
  const auto uneven = fold_partition(13, 5, 1);
  std::vector<std::size_t> sizes;
  for (const auto& f : uneven) sizes.push_back(f.size());
  CHECK(sizes == std::vector<std::size_t>{3, 3, 3, 2, 2});
  CHECK_THROWS_AS(fold_partition(100, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(fold_partition(3, 5, 0), std::invalid_argument);
  CHECK(fold_partition(100, 5, 2019) == folds);
}

TEST_CASE("cross validation keeps validation pages out of fitting") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PageFeatures> pages;
  std::vector<platform::PageWorkload> work;
  for (int i = 0; i < 10; ++i) {
    const double c = 3.0 * u(rng);
    pages.push_back({"p" + std::to_string(i), {c * 100.0, c * 10.0 + u(rng), u(rng), 5.0}});
    work.push_back({"p" + std::to_string(i), c});
  }
  platform::PlatformSpec spec;
  spec.big = {"b", platform::ClusterKind::Big, {1.0, 2.0}, 1.0, 0.1, 0.5};
  spec.little = {"l", platform::ClusterKind::Little, {0.5, 1.0}, 0.5, 0.05, 0.1};
  spec.setting_table = platform::default_setting_table(spec.big, spec.little);
  const auto grid = platform::generate_training_grid(work, {125, 1000}, spec, Gesture::Scroll, 1);
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 4;
  cfg.epochs = 2;
  const auto cv = cross_validate(pages, grid, "v", cfg, 5, 3);
  REQUIRE(cv.folds.size() == 5);
  std::set<std::string> seen;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const auto& fold = cv.folds[f];
    CHECK(fold.validation_pages.size() == 2);
    for (const auto& id : fold.validation_pages) {
      CHECK(seen.insert(id).second);
      CHECK(cv.fold_of(id) == f);
    }
    // The transform saw exactly the eight training pages: its scaler bounds
    // come from them, so recomputing over those pages reproduces it.
    std::vector<PageFeatures> train_pages;
    for (const auto& p : pages) {
      if (std::find(fold.validation_pages.begin(), fold.validation_pages.end(), p.id) == fold.validation_pages.end()) {
        train_pages.push_back(p);
      }
    }
    const auto again = fit_transform_on(train_pages, "v");
    CHECK(again.scaler.min == fold.transform.scaler.min);
    CHECK(again.scaler.max == fold.transform.scaler.max);
    CHECK(fold.mlp_error.per_sample.size() == 2 * 2 * 4);
  }
  CHECK(seen.size() == 10);
  CHECK(std::isfinite(cv.mlp_mean_error));
}
