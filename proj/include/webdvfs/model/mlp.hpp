#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "webdvfs/common/gesture.hpp"
#include "webdvfs/pipeline/pipeline.hpp"

namespace webdvfs::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Relu, Sigmoid, Tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct ModelConfig {
  int hidden_layers = 5;
  int hidden_width = 80;
  Activation activation = Activation::Relu;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 300;
  int batch_size = 32;
  std::uint64_t seed = 2019;

  void validate() const;
};

struct TrainingSample {
  std::string page_id;
  std::vector<double> pcs;
  double event_rate = 0.0;
  int cluster_label = 0;  // 0 little, 1 big
  double frequency = 0.0;
  double measured_fps = 0.0;
  Gesture gesture = Gesture::Scroll;
};

/// Min/max bounds used to scale event rate and frequency into [0, 1].
struct InputNorm {
  double rate_min = 0.0;
  double rate_max = 1.0;
  double freq_min = 0.0;
  double freq_max = 1.0;
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;
};

class MlpModel {
 public:
  ModelConfig config;
  std::vector<DenseLayer> layers;
  InputNorm norm;
  Gesture gesture = Gesture::Scroll;
  std::optional<pipeline::FeatureTransform> transform;
  double initial_loss = 0.0;
  double final_loss = 0.0;

  /// Number of principal components expected by the model.
  int pc_count() const;
  int input_dim() const;
  void check_shapes() const;

  /// [pcs..., scaled rate, cluster, scaled freq]
  Vector encode(const Vector& pcs, double event_rate, int cluster, double frequency) const;
  /// Raw linear output for a batch of encoded inputs, one column per sample.
  Vector forward(const Matrix& inputs) const;

  std::string to_json_text() const;
  static MlpModel from_json_text(const std::string& text);
};

MlpModel init_model(int pc_count, const ModelConfig& cfg, Gesture gesture, const InputNorm& norm,
                    double output_bias);

/// max(0, forward(encode(...))).
double predict_fps(const MlpModel& m, const Vector& pcs, double event_rate, int cluster, double frequency);
double predict_fps(const MlpModel& m, const std::vector<double>& pcs, double event_rate, int cluster,
                   double frequency);

/// mean (log(x+1) - log(xhat+1))^2
double msle_loss(const std::vector<double>& predicted, const std::vector<double>& measured);

/// Gradients of the batch MSLE (on max(output, 0), straight-through at 0) with respect to each layer.
struct Gradients {
  std::vector<DenseLayer> layers;
};

double loss_and_gradients(const MlpModel& m, const Matrix& inputs, const Vector& targets, Gradients& grads);

InputNorm fit_input_norm(const std::vector<TrainingSample>& samples);
/// Encoded inputs (one column per sample) and targets.
Matrix encode_samples(const MlpModel& m, const std::vector<TrainingSample>& samples);
Vector sample_targets(const std::vector<TrainingSample>& samples);

/// Minibatch Adam on MSLE. epochs = 0 returns the initialized model.
MlpModel train(const std::vector<TrainingSample>& samples, const ModelConfig& cfg);

struct ErrorReport {
  std::vector<double> per_sample;  // |measured - predicted| / measured
  double arithmetic_mean = 0.0;
  /// exp(mean(log(1 + e))) - 1
  double geometric_mean = 0.0;
  std::size_t excluded = 0;  // samples with measured_fps == 0
};

ErrorReport error_report(const std::vector<double>& predicted, const std::vector<double>& measured);
ErrorReport evaluate_error(const MlpModel& m, const std::vector<TrainingSample>& samples);

/// Ordinary least squares on the MLP's encoded inputs with log(FPS + 1) targets.
struct LinearModel {
  Vector coefficients;  // one per encoded input
  double intercept = 0.0;
  InputNorm norm;
  int pc_count = 0;
  bool ridge_fallback = false;

  Vector encode(const Vector& pcs, double event_rate, int cluster, double frequency) const;
  double predict_log(const Vector& encoded) const { return intercept + coefficients.dot(encoded); }
};

LinearModel fit_linear_baseline(const std::vector<TrainingSample>& samples);
double predict_linear(const LinearModel& m, const std::vector<double>& pcs, double event_rate, int cluster,
                      double frequency);
ErrorReport evaluate_error(const LinearModel& m, const std::vector<TrainingSample>& samples);

class ModelRegistry {
 public:
  /// Throws if a model for the gesture is already registered.
  void add(MlpModel model);
  bool contains(Gesture g) const { return models_.count(g) != 0; }
  const MlpModel& get(Gesture g) const;
  std::size_t size() const { return models_.size(); }

 private:
  std::map<Gesture, MlpModel> models_;
};

/// CSV: page_id,pc_0..pc_{k-1},event_rate,cluster,freq_ghz,fps,gesture
std::string samples_to_csv(const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> samples_from_csv(const std::string& text);

}  // namespace webdvfs::model
