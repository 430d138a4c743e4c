#include "webdvfs/model/cross_validation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "webdvfs/common/random.hpp"

namespace webdvfs::model {

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("fold_partition: need at least two folds");
  if (static_cast<std::size_t>(folds) > n) throw std::invalid_argument("fold_partition: more folds than items");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(substream(seed, "folds"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  const std::size_t base = n / static_cast<std::size_t>(folds);
  const std::size_t extra = n % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < out.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(out[f].begin(), out[f].end());
    pos += size;
  }
  return out;
}

std::map<std::string, std::vector<double>> project_pages(const std::vector<PageFeatures>& pages,
                                                         const pipeline::FeatureTransform& transform) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& p : pages) {
    const Vector z = transform.apply(p.raw);
    out[p.id] = std::vector<double>(z.data(), z.data() + z.size());
  }
  return out;
}

std::vector<TrainingSample> attach_pcs(const std::vector<platform::GridSample>& grid,
                                       const std::map<std::string, std::vector<double>>& pcs_by_page) {
  std::vector<TrainingSample> out;
  for (const auto& g : grid) {
    const auto it = pcs_by_page.find(g.page_id);
    if (it == pcs_by_page.end()) continue;
    out.push_back({g.page_id, it->second, g.event_rate, g.cluster, g.freq_ghz, g.fps, g.gesture});
  }
  return out;
}

pipeline::FeatureTransform fit_transform_on(const std::vector<PageFeatures>& pages,
                                            const std::string& manifest_version) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : pages) rows.push_back(p.raw);
  return pipeline::fit_feature_transform(pipeline::stack_rows(rows), manifest_version);
}

std::size_t CvResult::fold_of(const std::string& page_id) const {
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& v = folds[f].validation_pages;
    if (std::find(v.begin(), v.end(), page_id) != v.end()) return f;
  }
  throw std::out_of_range("page '" + page_id + "' is in no validation fold");
}

CvResult cross_validate(const std::vector<PageFeatures>& pages, const std::vector<platform::GridSample>& grid,
                        const std::string& manifest_version, const ModelConfig& cfg, int folds,
                        std::uint64_t seed) {
  const auto partition = fold_partition(pages.size(), folds, seed);
  CvResult result;
  double mlp_sum = 0.0;
  double lr_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < partition.size(); ++f) {
    std::vector<bool> held(pages.size(), false);
    for (const auto i : partition[f]) held[i] = true;
    std::vector<PageFeatures> train_pages;
    std::vector<PageFeatures> val_pages;
    for (std::size_t i = 0; i < pages.size(); ++i) (held[i] ? val_pages : train_pages).push_back(pages[i]);

    FoldResult fr;
    for (const auto& p : val_pages) fr.validation_pages.push_back(p.id);
    fr.transform = fit_transform_on(train_pages, manifest_version);
    const auto train_samples = attach_pcs(grid, project_pages(train_pages, fr.transform));
    const auto val_samples = attach_pcs(grid, project_pages(val_pages, fr.transform));
    ModelConfig fold_cfg = cfg;
    fold_cfg.seed = mix_seed(cfg.seed, f);
    fr.mlp = train(train_samples, fold_cfg);
    fr.mlp.transform = fr.transform;
    fr.linear = fit_linear_baseline(train_samples);
    fr.mlp_error = evaluate_error(fr.mlp, val_samples);
    fr.linear_error = evaluate_error(fr.linear, val_samples);
    for (const double e : fr.mlp_error.per_sample) mlp_sum += e;
    for (const double e : fr.linear_error.per_sample) lr_sum += e;
    count += fr.mlp_error.per_sample.size();
    result.folds.push_back(std::move(fr));
  }
  if (count > 0) {
    result.mlp_mean_error = mlp_sum / static_cast<double>(count);
    result.linear_mean_error = lr_sum / static_cast<double>(count);
  }
  return result;
}

}  // namespace webdvfs::model
