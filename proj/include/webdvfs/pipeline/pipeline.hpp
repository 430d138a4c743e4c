#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace webdvfs::pipeline {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Per-feature min/max recorded on the training set.
struct ScalerParams {
  Vector min;
  Vector max;
};

ScalerParams fit_scaler(const Matrix& X);

/// Clips to [min, max] then maps to [0, 1]; constant features map to 0.
Vector apply_scaler(const Vector& x, const ScalerParams& p);
Matrix apply_scaler(const Matrix& X, const ScalerParams& p);

struct PcaTransform {
  Vector mean;
  /// k x d, rows orthonormal, largest-magnitude entry of each row positive.
  Matrix components;
  Vector explained_variance_ratio;
  /// Variance captured by each retained component (eigenvalues of the covariance).
  Vector explained_variance;
  int k = 0;
  double variance_target = 0.95;
  /// False when k was capped (k_max or rank) before the target was reached.
  bool target_reached = true;
  std::string warning;

  int input_dim() const { return static_cast<int>(mean.size()); }
  double cumulative_ratio() const { return explained_variance_ratio.sum(); }
};

/// PCA by eigendecomposition of the sample covariance of X_scaled.
PcaTransform fit_pca(const Matrix& X_scaled, double variance_target = 0.95, int k_max = 49);

/// components * (x - mean)
Vector apply_pca(const Vector& x_scaled, const PcaTransform& t);
Matrix apply_pca(const Matrix& X_scaled, const PcaTransform& t);

struct VarimaxResult {
  Matrix loadings;  ///< d x k rotated loadings
  Matrix rotation;  ///< k x k orthogonal rotation
  int iterations = 0;
};

/// Orthogonal varimax rotation (no Kaiser normalization).
VarimaxResult varimax_rotate(const Matrix& loadings, int max_iter = 100, double tol = 1e-6);

/// PCA loadings (d x k): components scaled by the standard deviation of each PC.
Matrix pca_loadings(const PcaTransform& t);

/// Equal-frequency bin index per value; ties share a bin.
std::vector<int> equal_frequency_bins(const std::vector<double>& values, int bins);

/// Information gain ratio of each column of X about y, both discretized into
/// equal-frequency bins. Constant columns score 0.
std::vector<double> gain_ratio_importance(const Matrix& X, const std::vector<double>& y, int bins = 10);

struct ImportanceReport {
  std::vector<std::string> feature_names;
  /// Largest squared varimax-rotated loading of the feature.
  std::vector<double> varimax_contribution;
  std::vector<double> gain_ratio;

  std::string to_csv() const;
};

ImportanceReport importance_report(const std::vector<std::string>& names, const Matrix& X_raw,
                                   const std::vector<double>& y, const PcaTransform& pca,
                                   const ScalerParams& scaler, int bins = 10);

/// Fitted scaler + PCA; serialized beside every trained model.
struct FeatureTransform {
  std::string manifest_version;
  ScalerParams scaler;
  PcaTransform pca;

  int input_dim() const { return static_cast<int>(scaler.min.size()); }
  int output_dim() const { return pca.k; }

  Vector apply(const std::vector<double>& raw) const;
  std::string to_json_text() const;
  static FeatureTransform from_json_text(const std::string& text);
};

FeatureTransform fit_feature_transform(const Matrix& X_raw, std::string manifest_version,
                                       double variance_target = 0.95, int k_max = 49);

/// Rows of raw feature vectors stacked into a matrix.
Matrix stack_rows(const std::vector<std::vector<double>>& rows);

}  // namespace webdvfs::pipeline
