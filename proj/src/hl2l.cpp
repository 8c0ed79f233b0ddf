#include "myoadapt/hl2l.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "myoadapt/error.hpp"

namespace myoadapt {

SplitParts stratified_split(const FeatureSet& fs, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  fs.validate();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(fs.class_count));
  for (std::size_t i = 0; i < fs.size(); ++i)
    by_class[static_cast<std::size_t>(fs.labels[i])].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<bool> to_first(fs.size(), false);
  for (std::size_t g = 0; g < by_class.size(); ++g) {
    auto items = by_class[g];
    if (items.empty()) continue;
    if (items.size() == 1)
      throw ConfigError("class " + std::to_string(g) +
                        " has a single item and cannot populate both split parts");
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(items.size()))));
    for (std::size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[static_cast<std::size_t>(rng() % i)]);
    for (std::size_t j = 0; j < take; ++j) to_first[items[j]] = true;
  }
  std::vector<std::size_t> first, second;
  for (std::size_t i = 0; i < fs.size(); ++i) (to_first[i] ? first : second).push_back(i);
  return {fs.select(first), fs.select(second)};
}

Eigen::MatrixXd confidence_matrix(const MulticlassModel& target, const SourceSet& sources,
                                  const Eigen::MatrixXd& X) {
  const int g = target.class_count;
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(sources.size() + 1) * g);
  out.leftCols(g) = class_scores(target, X);
  if (!sources.empty()) out.rightCols(static_cast<Eigen::Index>(sources.size()) * g) = source_score_features(sources, X);
  return out;
}

Eigen::VectorXd confidence_vector(const MulticlassModel& target, const SourceSet& sources,
                                  const Eigen::Ref<const Eigen::VectorXd>& x) {
  return confidence_matrix(target, sources, x.transpose()).row(0).transpose();
}

namespace {

struct FirstLayer {
  MulticlassModel model;
  FeatureSet confidences;
};

FirstLayer train_first_layer(const FeatureSet& train, const SourceSet& sources,
                             const KernelSpec& kernel_first, double C_first, std::uint64_t seed,
                             double fraction) {
  check_sources(sources, train.class_count, train.dim());
  const auto parts = stratified_split(train, fraction, seed);
  FirstLayer out;
  out.model = train_multiclass(parts.first, kernel_first, C_first);
  out.model.id = "hl2l_first_layer";
  out.confidences = parts.second;
  out.confidences.vectors = confidence_matrix(out.model, sources, parts.second.vectors);
  return out;
}

}  // namespace

Hl2lModel hl2l_train(const FeatureSet& train, const SourceSet& sources,
                     const KernelSpec& kernel_first, const KernelSpec& kernel_second,
                     double C_first, double C_second, std::uint64_t seed, double fraction) {
  auto first = train_first_layer(train, sources, kernel_first, C_first, seed, fraction);
  Hl2lModel model;
  model.second_layer = train_multiclass(first.confidences, kernel_second, C_second);
  model.second_layer.id = "hl2l_second_layer";
  model.first_layer = std::move(first.model);
  model.sources = sources;
  model.fraction = fraction;
  return model;
}

Hl2lModel hl2l_train_search(const FeatureSet& train, const SourceSet& sources,
                            const KernelSpec& kernel_first, double C_first,
                            const Hl2lSearch& search, std::uint64_t seed, double fraction) {
  auto first = train_first_layer(train, sources, kernel_first, C_first, seed, fraction);
  const int folds = feasible_folds(first.confidences, search.folds);
  KernelSpec kernel_second =
      search.kind == KernelKind::rbf ? KernelSpec::rbf(1.0) : KernelSpec::linear();
  double C_second = 1.0;
  if (folds >= 2) {
    const auto best = grid_search(first.confidences, search.grid, folds, search.kind);
    C_second = best.C;
    if (search.kind == KernelKind::rbf) kernel_second.gamma = best.gamma;
  }
  Hl2lModel model;
  model.second_layer = train_multiclass(first.confidences, kernel_second, C_second);
  model.second_layer.id = "hl2l_second_layer";
  model.first_layer = std::move(first.model);
  model.sources = sources;
  model.fraction = fraction;
  return model;
}

Eigen::MatrixXd class_scores(const Hl2lModel& model, const Eigen::MatrixXd& X) {
  return class_scores(model.second_layer, confidence_matrix(model.first_layer, model.sources, X));
}

Prediction predict(const Hl2lModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd scores = class_scores(model, x.transpose()).row(0).transpose();
  return {argmax(scores), std::move(scores)};
}

}  // namespace myoadapt
