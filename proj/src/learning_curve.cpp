#include <algorithm>
#include <numeric>
#include <random>

#include "myoadapt/error.hpp"
#include "myoadapt/evaluation.hpp"

namespace myoadapt {

namespace {

void shuffle(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng() % i)]);
}

}  // namespace

std::vector<std::size_t> curve_ordering(const FeatureSet& pool, CurveOrder order, std::uint64_t seed) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  switch (order) {
    case CurveOrder::prefix:
      break;
    case CurveOrder::shuffled:
      shuffle(idx, rng);
      break;
    case CurveOrder::interleaved:
    case CurveOrder::stratified: {
      std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(pool.class_count));
      for (std::size_t i = 0; i < pool.size(); ++i)
        by_class[static_cast<std::size_t>(pool.labels[i])].push_back(i);
      if (order == CurveOrder::stratified)
        for (auto& items : by_class) shuffle(items, rng);
      idx.clear();
      for (std::size_t round = 0; idx.size() < pool.size(); ++round)
        for (const auto& items : by_class)
          if (round < items.size()) idx.push_back(items[round]);
      break;
    }
  }
  return idx;
}

namespace {

std::uint64_t step_seed(std::uint64_t base, std::size_t n) {
  return base * 6364136223846793005ULL + static_cast<std::uint64_t>(n) * 1442695040888963407ULL;
}

}  // namespace

CurveResult run_learning_curve(const FeatureSet& train_pool, const FeatureSet& test,
                               const SourceSet& sources, std::span<const Method> methods,
                               std::span<const std::size_t> steps, const CurveOptions& options) {
  train_pool.validate();
  test.validate();
  if (steps.empty()) throw ConfigError("learning curve needs at least one step");
  for (std::size_t s = 1; s < steps.size(); ++s)
    if (steps[s] <= steps[s - 1]) throw ConfigError("learning curve steps must increase strictly");
  const std::size_t largest = steps.back();
  if (largest > train_pool.size())
    throw ConfigError("training pool has " + std::to_string(train_pool.size()) +
                      " items, largest step needs " + std::to_string(largest) + " (deficit " +
                      std::to_string(largest - train_pool.size()) + ")");

  const auto order = curve_ordering(train_pool, options.order, options.seed);

  CurveResult result;
  for (std::size_t n : steps) {
    // The order decides which items enter; inside the subset they keep their
    // temporal order, so cross-validation folds stay contiguous in time.
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(chosen.begin(), chosen.end());
    const FeatureSet subset = train_pool.select(chosen);
    const int folds = feasible_folds(subset, options.folds);
    if (folds == 0)
      throw ConfigError("step " + std::to_string(n) +
                        " has a class with a single item; cannot cross-validate");
    const auto search = grid_search(subset, options.grid, folds, KernelKind::rbf);
    const KernelSpec kernel = KernelSpec::rbf(search.gamma);
    result.hyperparameters[n] = {search.C, search.gamma, folds};

    CurvePoint point;
    point.n_train = n;
    for (Method m : methods) {
      Eigen::MatrixXd scores;
      switch (m) {
        case Method::no_transfer:
          scores = class_scores(no_transfer_train(subset, search.C, search.gamma), test.vectors);
          break;
        case Method::prior_features: {
          PriorFeaturesModel pf;
          if (options.prior_mode == PriorFeaturesMode::source_data_only) {
            pf = prior_features_train_source_only(options.source_data, search.C);
          } else {
            FeatureSet stacked = subset;
            stacked.vectors = source_score_features(sources, subset.vectors);
            const auto lin = grid_search(stacked, options.grid, folds, KernelKind::linear);
            pf = prior_features_train(sources, subset, lin.C);
          }
          scores = class_scores(pf, test.vectors);
          break;
        }
        case Method::multi_adapt: {
          BetaSearchOptions beta = options.beta;
          if (beta.select_C && beta.C_candidates.empty()) beta.C_candidates = options.grid.normalized().C;
          scores = class_scores(multi_adapt_train(subset, sources, kernel, search.C, beta), test.vectors);
          break;
        }
        case Method::mkal: {
          MkalConfig cfg = options.mkal;
          cfg.seed = step_seed(options.mkal.seed, n);
          scores = class_scores(mkal_train(subset, sources, cfg, kernel), test.vectors);
          break;
        }
        case Method::hl2l: {
          const Hl2lSearch second{options.grid, options.folds, options.hl2l_second_kernel};
          scores = class_scores(hl2l_train_search(subset, sources, kernel, search.C, second,
                                                  step_seed(options.seed + 1, n),
                                                  options.hl2l_fraction),
                                test.vectors);
          break;
        }
      }
      const auto predicted = argmax_rows(scores);
      point.balanced_accuracy[m] = balanced_accuracy(test.labels, predicted, test.class_count);
      result.confusions[{m, n}] = confusion(test.labels, predicted, test.class_count);
    }
    result.curve.points.push_back(std::move(point));
  }
  return result;
}

}  // namespace myoadapt
