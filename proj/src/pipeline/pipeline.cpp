#include "webdvfs/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "webdvfs/common/text.hpp"

namespace webdvfs::pipeline {
namespace {

void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
  }
}

double entropy_bits(const std::map<int, int>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = c / n;
    if (p > 0) h -= p * std::log2(p);
  }
  return h;
}

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ScalerParams fit_scaler(const Matrix& X) {
  if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("fit_scaler: empty matrix");
  return {X.colwise().minCoeff().transpose(), X.colwise().maxCoeff().transpose()};
}

Vector apply_scaler(const Vector& x, const ScalerParams& p) {
  require_dim(x.size(), p.min.size(), "apply_scaler");
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double range = p.max[i] - p.min[i];
    if (!(range > 0.0)) {
      out[i] = 0.0;
      continue;
    }
    const double clipped = std::clamp(x[i], p.min[i], p.max[i]);
    out[i] = (clipped - p.min[i]) / range;
  }
  return out;
}

Matrix apply_scaler(const Matrix& X, const ScalerParams& p) {
  require_dim(X.cols(), p.min.size(), "apply_scaler");
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out.row(r) = apply_scaler(Vector(X.row(r).transpose()), p).transpose();
  return out;
}

PcaTransform fit_pca(const Matrix& X_scaled, double variance_target, int k_max) {
  if (X_scaled.rows() < 2) throw std::invalid_argument("fit_pca: need at least two rows");
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw std::invalid_argument("fit_pca: variance_target must lie in (0, 1]");
  }
  const Eigen::Index d = X_scaled.cols();
  PcaTransform t;
  t.variance_target = variance_target;
  t.mean = X_scaled.colwise().mean().transpose();
  const Matrix centered = X_scaled.rowwise() - t.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(X_scaled.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");
  // Eigen sorts ascending; flip to descending and clamp round-off negatives.
  Vector evals = solver.eigenvalues().reverse().cwiseMax(0.0);
  Matrix evecs = solver.eigenvectors().rowwise().reverse();
  const double total = evals.sum();
  if (!(total > 0.0)) {
    t.k = 0;
    t.components = Matrix(0, d);
    t.explained_variance_ratio = Vector(0);
    t.explained_variance = Vector(0);
    t.target_reached = false;
    t.warning = "zero-variance dataset; no components retained";
    return t;
  }
  const double rank_tol = evals[0] * 1e-12 * static_cast<double>(d);
  const int rank = static_cast<int>((evals.array() > rank_tol).count());
  const int cap = std::min(std::max(k_max, 0), rank);

  int k = 0;
  double cumulative = 0.0;
  while (k < cap && cumulative < variance_target) {
    cumulative += evals[k] / total;
    ++k;
  }
  t.k = k;
  t.target_reached = cumulative >= variance_target;
  if (!t.target_reached) {
    t.warning = "variance target not reached: k capped at " + std::to_string(k) +
                " with cumulative ratio " + format_real(cumulative);
  }
  t.components = Matrix(k, d);
  t.explained_variance.resize(k);
  t.explained_variance_ratio.resize(k);
  for (int i = 0; i < k; ++i) {
    Vector v = evecs.col(i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    t.components.row(i) = v.transpose();
    t.explained_variance[i] = evals[i];
    t.explained_variance_ratio[i] = evals[i] / total;
  }
  return t;
}

Vector apply_pca(const Vector& x_scaled, const PcaTransform& t) {
  require_dim(x_scaled.size(), t.mean.size(), "apply_pca");
  return t.components * (x_scaled - t.mean);
}

Matrix apply_pca(const Matrix& X_scaled, const PcaTransform& t) {
  require_dim(X_scaled.cols(), t.mean.size(), "apply_pca");
  return (X_scaled.rowwise() - t.mean.transpose()) * t.components.transpose();
}

VarimaxResult varimax_rotate(const Matrix& loadings, int max_iter, double tol) {
  const Eigen::Index p = loadings.rows();
  const Eigen::Index k = loadings.cols();
  if (k < 1) throw std::invalid_argument("varimax_rotate: need at least one column");
  VarimaxResult out{loadings, Matrix::Identity(k, k), 0};
  if (k == 1) return out;

  Matrix rotation = Matrix::Identity(k, k);
  double criterion = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Matrix lam = loadings * rotation;
    const Vector col_ss = lam.array().square().colwise().sum().transpose();
    const Matrix target = lam.array().cube().matrix() - lam * col_ss.asDiagonal() / static_cast<double>(p);
    Eigen::JacobiSVD<Matrix> svd(loadings.transpose() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rotation = svd.matrixU() * svd.matrixV().transpose();
    const double previous = criterion;
    criterion = svd.singularValues().sum();
    out.iterations = it + 1;
    if (previous != 0.0 && criterion < previous * (1.0 + tol)) break;
  }
  out.rotation = rotation;
  out.loadings = loadings * rotation;
  return out;
}

Matrix pca_loadings(const PcaTransform& t) {
  return t.components.transpose() * t.explained_variance.cwiseSqrt().asDiagonal();
}

std::vector<int> equal_frequency_bins(const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("equal_frequency_bins: bins must be >= 1");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(values.size());
  std::vector<int> out;
  out.reserve(values.size());
  for (const double v : values) {
    const auto below = static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    out.push_back(std::min(bins - 1, static_cast<int>(std::floor(bins * below / n))));
  }
  return out;
}

std::vector<double> gain_ratio_importance(const Matrix& X, const std::vector<double>& y, int bins) {
  require_dim(X.rows(), static_cast<Eigen::Index>(y.size()), "gain_ratio_importance");
  if (static_cast<Eigen::Index>(bins) > X.rows()) {
    throw std::invalid_argument("gain_ratio_importance: fewer samples than bins");
  }
  const double n = static_cast<double>(y.size());
  const auto ybins = equal_frequency_bins(y, bins);
  std::map<int, int> ycounts;
  for (const int b : ybins) ++ycounts[b];
  const double hy = entropy_bits(ycounts, n);

  std::vector<double> out(static_cast<std::size_t>(X.cols()), 0.0);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    std::vector<double> col(X.col(c).data(), X.col(c).data() + X.rows());
    const auto xbins = equal_frequency_bins(col, bins);
    std::map<int, int> xcounts;
    std::map<std::pair<int, int>, int> joint;
    for (std::size_t i = 0; i < xbins.size(); ++i) {
      ++xcounts[xbins[i]];
      ++joint[{xbins[i], ybins[i]}];
    }
    const double split = entropy_bits(xcounts, n);
    if (!(split > 0.0)) continue;
    double conditional = 0.0;
    for (const auto& [xb, xc] : xcounts) {
      std::map<int, int> sub;
      for (const auto& [key, count] : joint) {
        if (key.first == xb) sub[key.second] = count;
      }
      conditional += (xc / n) * entropy_bits(sub, xc);
    }
    out[static_cast<std::size_t>(c)] = std::clamp((hy - conditional) / split, 0.0, 1.0);
  }
  return out;
}

std::string ImportanceReport::to_csv() const {
  std::ostringstream out;
  out << "feature,varimax_contribution,gain_ratio\n";
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    out << feature_names[i] << ',' << format_real(varimax_contribution[i]) << ','
        << format_real(gain_ratio[i]) << '\n';
  }
  return out.str();
}

ImportanceReport importance_report(const std::vector<std::string>& names, const Matrix& X_raw,
                                   const std::vector<double>& y, const PcaTransform& pca,
                                   const ScalerParams& scaler, int bins) {
  require_dim(static_cast<Eigen::Index>(names.size()), X_raw.cols(), "importance_report");
  ImportanceReport rep;
  rep.feature_names = names;
  rep.varimax_contribution.assign(names.size(), 0.0);
  if (pca.k > 0) {
    const auto rotated = varimax_rotate(pca_loadings(pca));
    for (Eigen::Index i = 0; i < rotated.loadings.rows(); ++i) {
      rep.varimax_contribution[static_cast<std::size_t>(i)] = rotated.loadings.row(i).array().square().maxCoeff();
    }
  }
  rep.gain_ratio = gain_ratio_importance(apply_scaler(X_raw, scaler), y, bins);
  return rep;
}

Vector FeatureTransform::apply(const std::vector<double>& raw) const {
  const Vector x = Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
  return apply_pca(apply_scaler(x, scaler), pca);
}

std::string FeatureTransform::to_json_text() const {
  nlohmann::ordered_json j;
  j["manifest_version"] = manifest_version;
  j["scaler"] = {{"min", to_json(scaler.min)}, {"max", to_json(scaler.max)}};
  nlohmann::ordered_json p;
  p["k"] = pca.k;
  p["variance_target"] = pca.variance_target;
  p["target_reached"] = pca.target_reached;
  p["mean"] = to_json(pca.mean);
  p["explained_variance"] = to_json(pca.explained_variance);
  p["explained_variance_ratio"] = to_json(pca.explained_variance_ratio);
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < pca.components.rows(); ++r) rows.push_back(to_json(pca.components.row(r).transpose()));
  p["components"] = rows;
  j["pca"] = p;
  return j.dump() + "\n";
}

FeatureTransform FeatureTransform::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FeatureTransform t;
  t.manifest_version = j.at("manifest_version").get<std::string>();
  t.scaler.min = vector_from_json(j.at("scaler").at("min"));
  t.scaler.max = vector_from_json(j.at("scaler").at("max"));
  const auto& p = j.at("pca");
  t.pca.k = p.at("k").get<int>();
  t.pca.variance_target = p.at("variance_target").get<double>();
  t.pca.target_reached = p.at("target_reached").get<bool>();
  t.pca.mean = vector_from_json(p.at("mean"));
  t.pca.explained_variance = vector_from_json(p.at("explained_variance"));
  t.pca.explained_variance_ratio = vector_from_json(p.at("explained_variance_ratio"));
  const auto& rows = p.at("components");
  t.pca.components = Matrix(static_cast<Eigen::Index>(rows.size()), t.pca.mean.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Vector row = vector_from_json(rows[r]);
    require_dim(row.size(), t.pca.mean.size(), "FeatureTransform: component row");
    t.pca.components.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  require_dim(t.scaler.max.size(), t.scaler.min.size(), "FeatureTransform: scaler");
  require_dim(t.pca.mean.size(), t.scaler.min.size(), "FeatureTransform: pca mean");
  if (t.pca.components.rows() != t.pca.k) throw std::invalid_argument("FeatureTransform: k does not match components");
  return t;
}

FeatureTransform fit_feature_transform(const Matrix& X_raw, std::string manifest_version,
                                       double variance_target, int k_max) {
  FeatureTransform t;
  t.manifest_version = std::move(manifest_version);
  t.scaler = fit_scaler(X_raw);
  t.pca = fit_pca(apply_scaler(X_raw, t.scaler), variance_target, k_max);
  return t;
}

Matrix stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_dim(static_cast<Eigen::Index>(rows[r].size()), X.cols(), "stack_rows");
    X.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Vector>(rows[r].data(), X.cols()).transpose();
  }
  return X;
}

}  // namespace webdvfs::pipeline
