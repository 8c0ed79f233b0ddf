#include "myoadapt/mkal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "myoadapt/error.hpp"
#include "myoadapt/multi_adapt.hpp"

namespace myoadapt {

void MkalConfig::validate() const {
  if (!(p > 1.0 && p <= 2.0)) throw ConfigError("mkal p must lie in (1, 2]");
  if (epochs < 1) throw ConfigError("mkal epochs must be >= 1");
  if (!(eta0 > 0.0)) throw ConfigError("mkal eta0 must be positive");
}

std::vector<Eigen::VectorXd> block_features(const SourceSet& sources,
                                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::vector<Eigen::VectorXd> blocks{x};
  for (const auto& s : sources) {
    if (s->dim() != x.size()) throw DomainError("source " + s->id + " expects another dimension");
    blocks.push_back(class_scores(*s, x.transpose()).row(0).transpose());
  }
  return blocks;
}

double group_norm(const std::vector<Eigen::VectorXd>& blocks, double p) {
  if (!(p >= 1.0 && p <= 2.0)) throw DomainError("group norm exponent must lie in [1, 2]");
  double acc = 0.0;
  for (const auto& b : blocks) acc += std::pow(b.norm(), p);
  return std::pow(acc, 1.0 / p);
}

Eigen::VectorXd block_weight_factors(const Eigen::VectorXd& block_norms, double q) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < block_norms.size(); ++k) total += std::pow(block_norms(k), q);
  Eigen::VectorXd factors = Eigen::VectorXd::Zero(block_norms.size());
  if (!(total > 0.0)) return factors;
  total = std::pow(total, 1.0 / q);
  for (Eigen::Index k = 0; k < block_norms.size(); ++k)
    factors(k) = (1.0 / q) * std::pow(block_norms(k) / total, q - 2.0);
  return factors;
}

Eigen::VectorXd MkalState::recompute_factors(double q) const {
  return block_weight_factors(block_sq_norms.cwiseSqrt(), q);
}

namespace {

// Fisher-Yates with the raw engine so the order only depends on mt19937_64.
void shuffle_indices(std::vector<Eigen::Index>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

int best_wrong_class(const Eigen::VectorXd& scores, int true_class) {
  int best = -1;
  for (Eigen::Index g = 0; g < scores.size(); ++g) {
    if (g == true_class) continue;
    if (best < 0 || scores(g) > scores(best)) best = static_cast<int>(g);
  }
  return best;
}

}  // namespace

MkalModel mkal_untrained(const SourceSet& sources, const MkalConfig& cfg,
                         const KernelSpec& target_kernel, int class_count, Eigen::Index dim) {
  MkalModel model;
  model.config = cfg;
  model.target_kernel = target_kernel;
  model.class_count = class_count;
  model.support_X.resize(0, dim);
  model.support_coef.resize(0, class_count);
  model.source_theta.assign(sources.size(), Eigen::MatrixXd::Zero(class_count, class_count));
  model.block_factors = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sources.size()) + 1);
  model.sources = sources;
  return model;
}

MkalModel mkal_train(const FeatureSet& train, const SourceSet& sources, const MkalConfig& cfg,
                     const KernelSpec& target_kernel, const MkalObserver& observer) {
  cfg.validate();
  train.validate();
  target_kernel.validate();
  check_sources(sources, train.class_count, train.dim());
  const auto counts = train.class_counts();
  if (std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2)
    throw DomainError("mkal needs at least two classes present");

  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const int g_count = train.class_count;
  const int k_count = static_cast<int>(sources.size());
  const double q = cfg.q();

  const Eigen::MatrixXd gram = gram_matrix(target_kernel, train.vectors, train.vectors);
  const ScoreTable table = source_score_table(sources, train.vectors);

  MkalState state;
  state.coef = Eigen::MatrixXd::Zero(n, g_count);
  state.source_theta.assign(static_cast<std::size_t>(k_count), Eigen::MatrixXd::Zero(g_count, g_count));
  state.block_sq_norms = Eigen::VectorXd::Zero(k_count + 1);
  state.block_factors = Eigen::VectorXd::Zero(k_count + 1);

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Eigen::VectorXd u0(g_count), scores(g_count);
  std::vector<Eigen::VectorXd> uk(static_cast<std::size_t>(k_count), Eigen::VectorXd(g_count));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (Eigen::Index i : order) {
      ++state.steps;
      const int y = train.labels[static_cast<std::size_t>(i)];

      u0.noalias() = state.coef.transpose() * gram.col(i);
      scores = state.block_factors(0) * u0;
      for (int k = 0; k < k_count; ++k) {
        uk[static_cast<std::size_t>(k)].noalias() =
            state.source_theta[static_cast<std::size_t>(k)] * table.source(k).row(i).transpose();
        scores += state.block_factors(k + 1) * uk[static_cast<std::size_t>(k)];
      }

      if (multiclass_hinge(scores, y) <= 0.0) {
        if (observer) observer(state, false);
        continue;
      }

      const int wrong = best_wrong_class(scores, y);
      const double eta = cfg.eta0 / std::sqrt(static_cast<double>(state.steps));
      state.coef(i, y) += eta;
      state.coef(i, wrong) -= eta;

      state.block_sq_norms(0) = std::max(
          0.0, state.block_sq_norms(0) + 2.0 * eta * (u0(y) - u0(wrong)) + 2.0 * eta * eta * gram(i, i));
      for (int k = 0; k < k_count; ++k) {
        auto& theta = state.source_theta[static_cast<std::size_t>(k)];
        const auto z = table.source(k).row(i);
        theta.row(y) += eta * z;
        theta.row(wrong) -= eta * z;
        state.block_sq_norms(k + 1) = theta.squaredNorm();
      }
      state.block_factors = state.recompute_factors(q);
      ++state.updates;
      if (observer) observer(state, true);
    }
  }

  MkalModel model = mkal_untrained(sources, cfg, target_kernel, g_count, train.dim());
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i)
    if (state.coef.row(i).any()) support.push_back(i);
  model.support_X = train.vectors(support, Eigen::all);
  model.support_coef = state.coef(support, Eigen::all);
  model.source_theta = state.source_theta;
  model.block_factors = state.block_factors;
  model.steps = state.steps;
  model.updates = state.updates;
  return model;
}

Eigen::VectorXd block_sq_norms_from_scratch(const MkalState& state, const Eigen::MatrixXd& train_X,
                                            const SourceSet& sources,
                                            const KernelSpec& target_kernel) {
  Eigen::VectorXd norms(static_cast<Eigen::Index>(sources.size()) + 1);
  const Eigen::MatrixXd gram = gram_matrix(target_kernel, train_X, train_X);
  norms(0) = (state.coef.transpose() * gram * state.coef).trace();
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const Eigen::MatrixXd theta = state.coef.transpose() * class_scores(*sources[k], train_X);
    norms(static_cast<Eigen::Index>(k) + 1) = theta.squaredNorm();
  }
  return norms;
}

Eigen::MatrixXd class_scores(const MkalModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.support_X.cols()) throw DomainError("mkal input has wrong dimension");
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(X.rows(), model.class_count);
  if (model.support_X.rows() > 0)
    s = model.block_factors(0) *
        (gram_matrix(model.target_kernel, X, model.support_X) * model.support_coef);
  for (std::size_t k = 0; k < model.sources.size(); ++k)
    s += model.block_factors(static_cast<Eigen::Index>(k) + 1) *
         (class_scores(*model.sources[k], X) * model.source_theta[k].transpose());
  return s;
}

Prediction predict(const MkalModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd scores = class_scores(model, x.transpose()).row(0).transpose();
  return {argmax(scores), std::move(scores)};
}

}  // namespace myoadapt
