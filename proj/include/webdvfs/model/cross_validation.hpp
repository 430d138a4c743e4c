#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "webdvfs/model/mlp.hpp"
#include "webdvfs/pipeline/pipeline.hpp"
#include "webdvfs/platform/platform.hpp"

namespace webdvfs::model {

struct PageFeatures {
  std::string id;
  std::vector<double> raw;
};

/// Seeded shuffle of 0..n-1 split into `folds` contiguous groups; the first n % folds groups get one extra.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int folds, std::uint64_t seed);

/// Projects every page through the transform.
std::map<std::string, std::vector<double>> project_pages(const std::vector<PageFeatures>& pages,
                                                         const pipeline::FeatureTransform& transform);

/// Joins grid measurements with page principal components; grid rows for unknown pages are skipped.
std::vector<TrainingSample> attach_pcs(const std::vector<platform::GridSample>& grid,
                                       const std::map<std::string, std::vector<double>>& pcs_by_page);

/// Scaler + PCA fitted on the given pages only.
pipeline::FeatureTransform fit_transform_on(const std::vector<PageFeatures>& pages,
                                            const std::string& manifest_version);

struct FoldResult {
  std::vector<std::string> validation_pages;
  pipeline::FeatureTransform transform;
  MlpModel mlp;
  LinearModel linear;
  ErrorReport mlp_error;
  ErrorReport linear_error;
};

struct CvResult {
  std::vector<FoldResult> folds;
  /// Means pooled over every validation sample of every fold.
  double mlp_mean_error = 0.0;
  double linear_mean_error = 0.0;

  /// Index of the fold whose validation set holds `page_id`.
  std::size_t fold_of(const std::string& page_id) const;
};

/// Pages are partitioned into folds; transform, MLP and linear baseline are fitted on the training folds.
CvResult cross_validate(const std::vector<PageFeatures>& pages, const std::vector<platform::GridSample>& grid,
                        const std::string& manifest_version, const ModelConfig& cfg, int folds,
                        std::uint64_t seed);

}  // namespace webdvfs::model
