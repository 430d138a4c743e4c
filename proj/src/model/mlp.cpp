#include "webdvfs/model/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "webdvfs/common/random.hpp"
#include "webdvfs/common/text.hpp"

namespace webdvfs::model {
namespace {

using nlohmann::json;

double scale01(double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }

void activate(Activation a, Matrix& z) {
  switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Sigmoid: z = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
  }
}

// Derivative expressed through the pre-activation z and the activation a.
Matrix activation_grad(Activation act, const Matrix& z, const Matrix& a) {
  switch (act) {
    case Activation::Relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid: return (a.array() * (1.0 - a.array())).matrix();
    case Activation::Tanh: return (1.0 - a.array().square()).matrix();
  }
  return Matrix();
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
};

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  for (const auto& l : layers) {
    out.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
  }
  return out;
}

void check_samples(const std::vector<TrainingSample>& samples, const char* who) {
  if (samples.empty()) throw std::invalid_argument(std::string(who) + ": no samples");
  const auto k = samples.front().pcs.size();
  for (const auto& s : samples) {
    if (s.pcs.size() != k) throw std::invalid_argument(std::string(who) + ": inconsistent pc count");
    if (s.gesture != samples.front().gesture) throw std::invalid_argument(std::string(who) + ": mixed gestures");
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "relu";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void ModelConfig::validate() const {
  if (hidden_layers < 1) throw std::invalid_argument("ModelConfig: hidden_layers must be >= 1");
  if (hidden_width < 1) throw std::invalid_argument("ModelConfig: hidden_width must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ModelConfig: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("ModelConfig: beta1 and beta2 must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("ModelConfig: epsilon must be > 0");
  if (epochs < 0) throw std::invalid_argument("ModelConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("ModelConfig: batch_size must be >= 1");
}

int MlpModel::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols()); }

int MlpModel::pc_count() const { return input_dim() - 3; }

void MlpModel::check_shapes() const {
  if (layers.size() < 2) throw std::invalid_argument("MlpModel: needs at least one hidden layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weights.rows()) throw std::invalid_argument("MlpModel: bias/weight mismatch");
    if (i > 0 && l.weights.cols() != layers[i - 1].weights.rows()) {
      throw std::invalid_argument("MlpModel: layer shapes do not chain");
    }
    if (!all_finite(l.weights) || !l.bias.allFinite()) throw std::invalid_argument("MlpModel: non-finite weights");
  }
  if (layers.back().weights.rows() != 1) throw std::invalid_argument("MlpModel: output must be scalar");
  if (input_dim() < 3) throw std::invalid_argument("MlpModel: input must hold rate, cluster and frequency");
}

Vector MlpModel::encode(const Vector& pcs, double event_rate, int cluster, double frequency) const {
  if (pcs.size() != pc_count()) {
    throw std::invalid_argument("predict: expected " + std::to_string(pc_count()) + " principal components, got " +
                                std::to_string(pcs.size()));
  }
  if (!pcs.allFinite() || !std::isfinite(event_rate) || !std::isfinite(frequency)) {
    throw std::invalid_argument("predict: non-finite input");
  }
  Vector x(pcs.size() + 3);
  x.head(pcs.size()) = pcs;
  x[pcs.size()] = scale01(event_rate, norm.rate_min, norm.rate_max);
  x[pcs.size() + 1] = cluster;
  x[pcs.size() + 2] = scale01(frequency, norm.freq_min, norm.freq_max);
  return x;
}

Vector MlpModel::forward(const Matrix& inputs) const {
  Matrix a = inputs;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    Matrix z = layers[i].weights * a;
    z.colwise() += layers[i].bias;
    activate(config.activation, z);
    a = std::move(z);
  }
  Matrix out = layers.back().weights * a;
  out.colwise() += layers.back().bias;
  return out.row(0).transpose();
}

MlpModel init_model(int pc_count, const ModelConfig& cfg, Gesture gesture, const InputNorm& norm,
                    double output_bias) {
  cfg.validate();
  if (pc_count < 0) throw std::invalid_argument("init_model: negative pc count");
  MlpModel m;
  m.config = cfg;
  m.gesture = gesture;
  m.norm = norm;
  Rng rng(substream(cfg.seed, "init"));
  int fan_in = pc_count + 3;
  for (int l = 0; l <= cfg.hidden_layers; ++l) {
    const int fan_out = l == cfg.hidden_layers ? 1 : cfg.hidden_width;
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (int c = 0; c < fan_in; ++c)
      for (int r = 0; r < fan_out; ++r) layer.weights(r, c) = u(rng);
    m.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  m.layers.back().bias[0] = output_bias;
  return m;
}

double predict_fps(const MlpModel& m, const Vector& pcs, double event_rate, int cluster, double frequency) {
  if (!(frequency > 0.0)) throw std::invalid_argument("predict_fps: frequency must be > 0");
  const Vector x = m.encode(pcs, event_rate, cluster, frequency);
  return std::max(0.0, m.forward(x)[0]);
}

double predict_fps(const MlpModel& m, const std::vector<double>& pcs, double event_rate, int cluster,
                   double frequency) {
  return predict_fps(m, Vector(Eigen::Map<const Vector>(pcs.data(), static_cast<Eigen::Index>(pcs.size()))),
                     event_rate, cluster, frequency);
}

double msle_loss(const std::vector<double>& predicted, const std::vector<double>& measured) {
  if (predicted.size() != measured.size() || predicted.empty()) {
    throw std::invalid_argument("msle_loss: inputs must be non-empty and of equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0.0 || measured[i] < 0.0) throw std::invalid_argument("msle_loss: negative value");
    const double d = std::log1p(measured[i]) - std::log1p(predicted[i]);
    total += d * d;
  }
  return total / static_cast<double>(predicted.size());
}

double loss_and_gradients(const MlpModel& m, const Matrix& inputs, const Vector& targets, Gradients& grads) {
  const std::size_t L = m.layers.size();
  const auto n = static_cast<double>(inputs.cols());
  std::vector<Matrix> pre(L);
  std::vector<Matrix> act(L + 1);
  act[0] = inputs;
  for (std::size_t i = 0; i < L; ++i) {
    pre[i] = m.layers[i].weights * act[i];
    pre[i].colwise() += m.layers[i].bias;
    act[i + 1] = pre[i];
    if (i + 1 < L) activate(m.config.activation, act[i + 1]);
  }
  const Eigen::ArrayXd y = act[L].row(0).transpose().array();
  const Eigen::ArrayXd yc = y.cwiseMax(0.0);
  const Eigen::ArrayXd diff = (yc + 1.0).log() - (targets.array() + 1.0).log();
  const double loss = diff.square().mean();

  grads.layers.resize(L);
  Matrix delta = (2.0 * diff / (yc + 1.0) / n).matrix().transpose();
  for (std::size_t i = L; i-- > 0;) {
    grads.layers[i].weights = delta * act[i].transpose();
    grads.layers[i].bias = delta.rowwise().sum();
    if (i > 0) {
      delta = (m.layers[i].weights.transpose() * delta).cwiseProduct(
          activation_grad(m.config.activation, pre[i - 1], act[i]));
    }
  }
  return loss;
}

InputNorm fit_input_norm(const std::vector<TrainingSample>& samples) {
  check_samples(samples, "fit_input_norm");
  InputNorm n{samples[0].event_rate, samples[0].event_rate, samples[0].frequency, samples[0].frequency};
  for (const auto& s : samples) {
    n.rate_min = std::min(n.rate_min, s.event_rate);
    n.rate_max = std::max(n.rate_max, s.event_rate);
    n.freq_min = std::min(n.freq_min, s.frequency);
    n.freq_max = std::max(n.freq_max, s.frequency);
  }
  return n;
}

Matrix encode_samples(const MlpModel& m, const std::vector<TrainingSample>& samples) {
  Matrix X(m.input_dim(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Vector pcs = Eigen::Map<const Vector>(s.pcs.data(), static_cast<Eigen::Index>(s.pcs.size()));
    X.col(static_cast<Eigen::Index>(i)) = m.encode(pcs, s.event_rate, s.cluster_label, s.frequency);
  }
  return X;
}

Vector sample_targets(const std::vector<TrainingSample>& samples) {
  Vector y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].measured_fps < 0.0) throw std::invalid_argument("training sample with negative fps");
    y[static_cast<Eigen::Index>(i)] = samples[i].measured_fps;
  }
  return y;
}

MlpModel train(const std::vector<TrainingSample>& samples, const ModelConfig& cfg) {
  cfg.validate();
  check_samples(samples, "train");
  const Vector y = sample_targets(samples);
  MlpModel m = init_model(static_cast<int>(samples[0].pcs.size()), cfg, samples[0].gesture,
                          fit_input_norm(samples), y.mean());
  const Matrix X = encode_samples(m, samples);
  Gradients grads;
  m.initial_loss = loss_and_gradients(m, X, y, grads);
  m.final_loss = m.initial_loss;
  if (cfg.epochs == 0) return m;

  AdamState adam{zeros_like(m.layers), zeros_like(m.layers)};
  Rng shuffle_rng(substream(cfg.seed, "shuffle"));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  long step = 0;
  Matrix Xb;
  Vector yb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      Xb = X(Eigen::all, idx);
      yb = y(idx);
      epoch_loss += loss_and_gradients(m, Xb, yb, grads) * static_cast<double>(end - start);
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto update = [&](auto& param, auto& mom, auto& vel, const auto& g) {
          mom = cfg.beta1 * mom + (1.0 - cfg.beta1) * g;
          vel = cfg.beta2 * vel + (1.0 - cfg.beta2) * g.cwiseProduct(g);
          param.array() -= cfg.learning_rate * (mom.array() / c1) / ((vel.array() / c2).sqrt() + cfg.epsilon);
        };
        update(m.layers[l].weights, adam.m[l].weights, adam.v[l].weights, grads.layers[l].weights);
        update(m.layers[l].bias, adam.m[l].bias, adam.v[l].bias, grads.layers[l].bias);
      }
    }
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("train: loss became non-finite at epoch " + std::to_string(epoch + 1) +
                               " (learning_rate " + format_real(cfg.learning_rate) + ")");
    }
  }
  m.final_loss = loss_and_gradients(m, X, y, grads);
  return m;
}

ErrorReport error_report(const std::vector<double>& predicted, const std::vector<double>& measured) {
  if (predicted.size() != measured.size()) throw std::invalid_argument("error_report: length mismatch");
  ErrorReport r;
  double log_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (measured[i] == 0.0) {
      ++r.excluded;
      continue;
    }
    const double e = std::fabs(measured[i] - predicted[i]) / measured[i];
    r.per_sample.push_back(e);
    log_sum += std::log1p(e);
  }
  if (!r.per_sample.empty()) {
    const auto n = static_cast<double>(r.per_sample.size());
    r.arithmetic_mean = std::accumulate(r.per_sample.begin(), r.per_sample.end(), 0.0) / n;
    r.geometric_mean = std::expm1(log_sum / n);
  }
  return r;
}

ErrorReport evaluate_error(const MlpModel& m, const std::vector<TrainingSample>& samples) {
  if (samples.empty()) return {};
  const Matrix X = encode_samples(m, samples);
  const Vector out = m.forward(X).cwiseMax(0.0);
  std::vector<double> predicted(out.data(), out.data() + out.size());
  std::vector<double> measured;
  for (const auto& s : samples) measured.push_back(s.measured_fps);
  return error_report(predicted, measured);
}

Vector LinearModel::encode(const Vector& pcs, double event_rate, int cluster, double frequency) const {
  if (pcs.size() != pc_count) throw std::invalid_argument("linear model: principal component count mismatch");
  Vector x(pcs.size() + 3);
  x.head(pcs.size()) = pcs;
  x[pcs.size()] = scale01(event_rate, norm.rate_min, norm.rate_max);
  x[pcs.size() + 1] = cluster;
  x[pcs.size() + 2] = scale01(frequency, norm.freq_min, norm.freq_max);
  return x;
}

LinearModel fit_linear_baseline(const std::vector<TrainingSample>& samples) {
  check_samples(samples, "fit_linear_baseline");
  LinearModel lm;
  lm.pc_count = static_cast<int>(samples[0].pcs.size());
  lm.norm = fit_input_norm(samples);
  const auto n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index d = lm.pc_count + 3;
  if (n <= d) throw std::invalid_argument("fit_linear_baseline: need more samples than inputs");
  Matrix A(n, d + 1);
  Vector t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const Vector pcs = Eigen::Map<const Vector>(s.pcs.data(), lm.pc_count);
    A(i, 0) = 1.0;
    A.row(i).tail(d) = lm.encode(pcs, s.event_rate, s.cluster_label, s.frequency).transpose();
    t[i] = std::log1p(s.measured_fps);
  }
  Matrix normal = A.transpose() * A;
  const Vector rhs = A.transpose() * t;
  Eigen::FullPivLU<Matrix> lu(normal);
  if (lu.rank() < normal.rows()) {
    normal.diagonal().array() += 1e-6;
    lm.ridge_fallback = true;
  }
  const Vector beta = normal.ldlt().solve(rhs);
  lm.intercept = beta[0];
  lm.coefficients = beta.tail(d);
  return lm;
}

double predict_linear(const LinearModel& m, const std::vector<double>& pcs, double event_rate, int cluster,
                      double frequency) {
  const Vector x = m.encode(Eigen::Map<const Vector>(pcs.data(), static_cast<Eigen::Index>(pcs.size())), event_rate,
                            cluster, frequency);
  return std::max(0.0, std::expm1(m.predict_log(x)));
}

ErrorReport evaluate_error(const LinearModel& m, const std::vector<TrainingSample>& samples) {
  std::vector<double> predicted;
  std::vector<double> measured;
  for (const auto& s : samples) {
    predicted.push_back(predict_linear(m, s.pcs, s.event_rate, s.cluster_label, s.frequency));
    measured.push_back(s.measured_fps);
  }
  return error_report(predicted, measured);
}

void ModelRegistry::add(MlpModel model) {
  const Gesture g = model.gesture;
  if (!models_.emplace(g, std::move(model)).second) {
    throw std::invalid_argument("ModelRegistry: a " + to_string(g) + " model is already registered");
  }
}

const MlpModel& ModelRegistry::get(Gesture g) const {
  const auto it = models_.find(g);
  if (it == models_.end()) throw std::runtime_error("ModelRegistry: no model for gesture " + to_string(g));
  return it->second;
}

std::string MlpModel::to_json_text() const {
  nlohmann::ordered_json j;
  j["format"] = "webdvfs-mlp-1";
  j["gesture"] = webdvfs::to_string(gesture);
  j["config"] = {{"hidden_layers", config.hidden_layers},
                 {"hidden_width", config.hidden_width},
                 {"activation", to_string(config.activation)},
                 {"learning_rate", config.learning_rate},
                 {"beta1", config.beta1},
                 {"beta2", config.beta2},
                 {"epsilon", config.epsilon},
                 {"epochs", config.epochs},
                 {"batch_size", config.batch_size},
                 {"seed", config.seed}};
  j["input_norm"] = {{"rate_min", norm.rate_min},
                     {"rate_max", norm.rate_max},
                     {"freq_min", norm.freq_min},
                     {"freq_max", norm.freq_max}};
  j["initial_loss"] = initial_loss;
  j["final_loss"] = final_loss;
  json layer_list = json::array();
  for (const auto& l : layers) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layer_list.push_back({{"rows", l.weights.rows()}, {"cols", l.weights.cols()}, {"weights", w},
                          {"bias", vec_json(l.bias)}});
  }
  j["layers"] = layer_list;
  if (transform) j["feature_transform"] = json::parse(transform->to_json_text());
  return j.dump() + "\n";
}

MlpModel MlpModel::from_json_text(const std::string& text) {
  const auto j = json::parse(text);
  if (j.value("format", std::string()) != "webdvfs-mlp-1") throw std::invalid_argument("model JSON: unknown format");
  MlpModel m;
  m.gesture = parse_gesture(j.at("gesture").get<std::string>());
  const auto& c = j.at("config");
  m.config.hidden_layers = c.at("hidden_layers").get<int>();
  m.config.hidden_width = c.at("hidden_width").get<int>();
  m.config.activation = parse_activation(c.at("activation").get<std::string>());
  m.config.learning_rate = c.at("learning_rate").get<double>();
  m.config.beta1 = c.at("beta1").get<double>();
  m.config.beta2 = c.at("beta2").get<double>();
  m.config.epsilon = c.at("epsilon").get<double>();
  m.config.epochs = c.at("epochs").get<int>();
  m.config.batch_size = c.at("batch_size").get<int>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  const auto& n = j.at("input_norm");
  m.norm = {n.at("rate_min").get<double>(), n.at("rate_max").get<double>(), n.at("freq_min").get<double>(),
            n.at("freq_max").get<double>()};
  m.initial_loss = j.at("initial_loss").get<double>();
  m.final_loss = j.at("final_loss").get<double>();
  for (const auto& l : j.at("layers")) {
    const auto rows = l.at("rows").get<Eigen::Index>();
    const auto cols = l.at("cols").get<Eigen::Index>();
    const auto w = l.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols) throw std::invalid_argument("model JSON: weight count");
    DenseLayer layer{Matrix(rows, cols), vec_from(l.at("bias"))};
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index cc = 0; cc < cols; ++cc) layer.weights(r, cc) = w[static_cast<std::size_t>(r * cols + cc)];
    m.layers.push_back(std::move(layer));
  }
  if (j.contains("feature_transform")) {
    m.transform = pipeline::FeatureTransform::from_json_text(j.at("feature_transform").dump());
  }
  m.check_shapes();
  if (m.transform && m.transform->output_dim() != m.pc_count()) {
    throw std::invalid_argument("model JSON: feature transform output does not match model input");
  }
  return m;
}

std::string samples_to_csv(const std::vector<TrainingSample>& samples) {
  std::ostringstream out;
  const std::size_t k = samples.empty() ? 0 : samples[0].pcs.size();
  out << "page_id";
  for (std::size_t i = 0; i < k; ++i) out << ",pc_" << i;
  out << ",event_rate,cluster,freq_ghz,fps,gesture\n";
  for (const auto& s : samples) {
    if (s.pcs.size() != k) throw std::invalid_argument("samples_to_csv: inconsistent pc count");
    out << s.page_id;
    for (const double v : s.pcs) out << ',' << format_real(v);
    out << ',' << format_real(s.event_rate) << ',' << s.cluster_label << ',' << format_real(s.frequency) << ','
        << format_real(s.measured_fps) << ',' << webdvfs::to_string(s.gesture) << '\n';
  }
  return out.str();
}

std::vector<TrainingSample> samples_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("training CSV: missing header");
  const auto header = split(line, ',');
  if (header.size() < 6 || header[0] != "page_id" || header[header.size() - 5] != "event_rate" ||
      header.back() != "gesture") {
    throw std::invalid_argument("training CSV: unexpected header");
  }
  const std::size_t k = header.size() - 6;
  std::vector<TrainingSample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw std::invalid_argument("training CSV: line " + std::to_string(line_no) + " has wrong cell count");
    }
    TrainingSample s;
    s.page_id = cells[0];
    for (std::size_t i = 0; i < k; ++i) s.pcs.push_back(parse_real(cells[1 + i]));
    s.event_rate = parse_real(cells[k + 1]);
    s.cluster_label = static_cast<int>(parse_real(cells[k + 2]));
    s.frequency = parse_real(cells[k + 3]);
    s.measured_fps = parse_real(cells[k + 4]);
    s.gesture = parse_gesture(cells[k + 5]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace webdvfs::model
