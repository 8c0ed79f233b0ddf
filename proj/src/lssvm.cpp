#include "myoadapt/lssvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "myoadapt/error.hpp"
#include "myoadapt/evaluation.hpp"

namespace myoadapt {

BorderedSystem::BorderedSystem(const Eigen::MatrixXd& gram, double C) {
  if (gram.rows() != gram.cols() || gram.rows() == 0)
    throw DomainError("bordered system needs a nonempty square kernel matrix");
  if (!(C > 0.0)) throw DomainError("regularization C must be positive");
  Eigen::MatrixXd h = gram;
  h.diagonal().array() += 1.0 / C;
  llt_.compute(h);
  if (llt_.info() != Eigen::Success)
    throw NumericError("LS-SVM system is not positive definite", 0.0);
  const double rcond = llt_.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon()))
    throw NumericError("LS-SVM system is numerically singular", rcond);
  ones_solved_ = llt_.solve(Eigen::VectorXd::Ones(gram.rows()));
  schur_ = ones_solved_.sum();
  if (!(schur_ > 0.0)) throw NumericError("degenerate bias row in LS-SVM system", rcond);
}

BorderedSystem::Solution BorderedSystem::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != size()) throw DomainError("right-hand side has wrong length");
  Solution sol;
  sol.alphas = llt_.solve(rhs);
  sol.biases = sol.alphas.colwise().sum() / schur_;
  sol.alphas -= ones_solved_ * sol.biases;
  return sol;
}

Eigen::VectorXd BorderedSystem::inverse_diagonal() const {
  const Eigen::Index n = size();
  const Eigen::MatrixXd h_inv = llt_.solve(Eigen::MatrixXd::Identity(n, n));
  return h_inv.diagonal().array() - ones_solved_.array().square() / schur_;
}

BinaryLssvmModel train_binary(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const KernelSpec& kernel, double C) {
  if (X.rows() < 1) throw DomainError("binary LS-SVM needs at least one item");
  if (y.size() != X.rows()) throw DomainError("targets and items differ in length");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 1.0 && y(i) != -1.0) throw DomainError("binary targets must be +1 or -1");
  BorderedSystem system(gram_matrix(kernel, X, X), C);
  auto sol = system.solve(y);
  return BinaryLssvmModel{sol.alphas.col(0), sol.biases(0), X, kernel, C};
}

double score(const BinaryLssvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.train_X.cols()) throw DomainError("score input has wrong dimension");
  double s = model.bias;
  for (Eigen::Index i = 0; i < model.train_X.rows(); ++i)
    s += model.alphas(i) * kernel_eval(model.kernel, model.train_X.row(i).transpose(), x);
  return s;
}

Eigen::VectorXd score_batch(const BinaryLssvmModel& model, const Eigen::MatrixXd& X) {
  return (gram_matrix(model.kernel, X, model.train_X) * model.alphas).array() + model.bias;
}

BinaryLssvmModel MulticlassModel::class_model(int g) const {
  if (g < 0 || g >= class_count) throw DomainError("class index out of range");
  return BinaryLssvmModel{alphas.col(g), biases(g), train_X, kernel, C};
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  if (scores.size() == 0) throw DomainError("argmax of an empty score vector");
  int best = 0;
  for (Eigen::Index g = 1; g < scores.size(); ++g)
    if (scores(g) > scores(best)) best = static_cast<int>(g);
  return best;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    out[static_cast<std::size_t>(i)] = argmax(scores.row(i).transpose());
  return out;
}

Eigen::MatrixXd one_vs_all_targets(std::span<const int> labels, int class_count) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(labels.size()),
                                                class_count, -1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) throw DomainError("label out of range");
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

MulticlassModel train_multiclass(const FeatureSet& fs, const KernelSpec& kernel, double C) {
  fs.validate();
  kernel.validate();
  const auto counts = fs.class_counts();
  if (std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2)
    throw DomainError("multiclass training needs at least two classes present");
  BorderedSystem system(gram_matrix(kernel, fs.vectors, fs.vectors), C);
  auto sol = system.solve(one_vs_all_targets(fs.labels, fs.class_count));
  MulticlassModel model;
  model.kernel = kernel;
  model.C = C;
  model.class_count = fs.class_count;
  model.train_X = fs.vectors;
  model.alphas = std::move(sol.alphas);
  model.biases = std::move(sol.biases);
  return model;
}

Eigen::MatrixXd class_scores(const MulticlassModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.dim())
    throw DomainError("model expects dimension " + std::to_string(model.dim()) + ", got " +
                      std::to_string(X.cols()));
  Eigen::MatrixXd s = gram_matrix(model.kernel, X, model.train_X) * model.alphas;
  s.rowwise() += model.biases;
  return s;
}

Prediction predict(const MulticlassModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd scores = class_scores(model, x.transpose()).row(0).transpose();
  return {argmax(scores), std::move(scores)};
}

GridSpec GridSpec::normalized() const {
  GridSpec out;
  auto clean = [](std::vector<double> v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("grid ") + name + " list is empty");
    for (double x : v)
      if (!(x > 0.0)) throw ConfigError(std::string("grid ") + name + " values must be positive");
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  out.C = clean(C, "C");
  out.gamma = clean(gamma, "gamma");
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int class_count, int folds) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) throw DomainError("label out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::vector<int> fold(labels.size(), 0);
  for (std::size_t g = 0; g < by_class.size(); ++g) {
    const auto& items = by_class[g];
    if (items.empty()) continue;
    if (items.size() < static_cast<std::size_t>(folds))
      throw ConfigError("class " + std::to_string(g) + " has " + std::to_string(items.size()) +
                        " items, fewer than " + std::to_string(folds) + " folds");
    for (std::size_t j = 0; j < items.size(); ++j)
      fold[items[j]] = static_cast<int>(j * static_cast<std::size_t>(folds) / items.size());
  }
  return fold;
}

int feasible_folds(const FeatureSet& fs, int requested) {
  int min_count = std::numeric_limits<int>::max();
  for (int c : fs.class_counts())
    if (c > 0) min_count = std::min(min_count, c);
  const int folds = std::min(requested, min_count);
  return folds >= 2 ? folds : 0;
}

GridSearchResult grid_search(const FeatureSet& train, const GridSpec& grid, int folds,
                             KernelKind kind) {
  train.validate();
  const GridSpec g = grid.normalized();
  const auto fold_of = stratified_folds(train.labels, train.class_count, folds);

  GridSearchResult result;
  result.folds = folds;
  result.C_values = g.C;
  result.gamma_values = kind == KernelKind::rbf ? g.gamma : std::vector<double>{0.0};
  result.table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(result.C_values.size()),
                                       static_cast<Eigen::Index>(result.gamma_values.size()));

  std::vector<std::vector<Eigen::Index>> train_idx(static_cast<std::size_t>(folds)),
      val_idx(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    for (int f = 0; f < folds; ++f)
      (fold_of[i] == f ? val_idx : train_idx)[static_cast<std::size_t>(f)].push_back(
          static_cast<Eigen::Index>(i));

  const Eigen::MatrixXd targets = one_vs_all_targets(train.labels, train.class_count);
  const Eigen::MatrixXd sq_dist =
      kind == KernelKind::rbf ? squared_distances(train.vectors, train.vectors) : Eigen::MatrixXd();

  for (std::size_t gi = 0; gi < result.gamma_values.size(); ++gi) {
    const Eigen::MatrixXd full =
        kind == KernelKind::rbf ? rbf_from_distances(sq_dist, result.gamma_values[gi])
                                : Eigen::MatrixXd(train.vectors * train.vectors.transpose());
    for (int f = 0; f < folds; ++f) {
      const auto& tr = train_idx[static_cast<std::size_t>(f)];
      const auto& va = val_idx[static_cast<std::size_t>(f)];
      const Eigen::MatrixXd k_tr = full(tr, tr);
      const Eigen::MatrixXd k_va = full(va, tr);
      const Eigen::MatrixXd y_tr = targets(tr, Eigen::all);
      std::vector<int> y_va;
      for (auto i : va) y_va.push_back(train.labels[static_cast<std::size_t>(i)]);
      for (std::size_t ci = 0; ci < result.C_values.size(); ++ci) {
        BorderedSystem system(k_tr, result.C_values[ci]);
        const auto sol = system.solve(y_tr);
        Eigen::MatrixXd s = k_va * sol.alphas;
        s.rowwise() += sol.biases;
        result.table(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(gi)) +=
            balanced_accuracy(y_va, argmax_rows(s), train.class_count) / folds;
      }
    }
  }

  double best = -1.0;
  for (Eigen::Index ci = 0; ci < result.table.rows(); ++ci)
    for (Eigen::Index gi = 0; gi < result.table.cols(); ++gi)
      if (result.table(ci, gi) > best) {
        best = result.table(ci, gi);
        result.C = result.C_values[static_cast<std::size_t>(ci)];
        result.gamma = result.gamma_values[static_cast<std::size_t>(gi)];
      }
  return result;
}

MulticlassModel no_transfer_train(const FeatureSet& fs, double C, double gamma) {
  return train_multiclass(fs, KernelSpec::rbf(gamma), C);
}

void check_sources(const SourceSet& sources, int class_count, Eigen::Index dim) {
  for (const auto& s : sources) {
    if (!s) throw DomainError("null source model");
    if (s->class_count != class_count)
      throw DomainError("source " + s->id + " has " + std::to_string(s->class_count) +
                        " classes, target has " + std::to_string(class_count));
    if (s->dim() != dim)
      throw DomainError("source " + s->id + " expects dimension " + std::to_string(s->dim()) +
                        ", target has " + std::to_string(dim));
  }
}

Eigen::MatrixXd source_score_features(const SourceSet& sources, const Eigen::MatrixXd& X) {
  if (sources.empty()) return Eigen::MatrixXd(X.rows(), 0);
  const int g = sources.front()->class_count;
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(sources.size()) * g);
  for (std::size_t k = 0; k < sources.size(); ++k)
    out.middleCols(static_cast<Eigen::Index>(k) * g, g) = class_scores(*sources[k], X);
  return out;
}

PriorFeaturesModel prior_features_train(const SourceSet& sources, const FeatureSet& target_train,
                                        double C) {
  if (sources.empty()) throw DomainError("prior features needs at least one source");
  check_sources(sources, target_train.class_count, target_train.dim());
  FeatureSet stacked = target_train;
  stacked.vectors = source_score_features(sources, target_train.vectors);
  PriorFeaturesModel model;
  model.mode = PriorFeaturesMode::score_stacking;
  model.sources = sources;
  model.stacked = train_multiclass(stacked, KernelSpec::linear(), C);
  model.stacked.id = "prior_features";
  return model;
}

PriorFeaturesModel prior_features_train_source_only(std::span<const FeatureSet> source_data,
                                                    double C) {
  if (source_data.empty()) throw DomainError("prior features needs at least one source");
  FeatureSet pooled;
  pooled.class_count = source_data.front().class_count;
  Eigen::Index rows = 0;
  for (const auto& fs : source_data) {
    if (fs.class_count != pooled.class_count || fs.dim() != source_data.front().dim())
      throw DomainError("source data sets disagree on classes or dimension");
    rows += fs.vectors.rows();
  }
  pooled.vectors.resize(rows, source_data.front().dim());
  Eigen::Index at = 0;
  for (const auto& fs : source_data) {
    pooled.vectors.middleRows(at, fs.vectors.rows()) = fs.vectors;
    at += fs.vectors.rows();
    pooled.labels.insert(pooled.labels.end(), fs.labels.begin(), fs.labels.end());
    pooled.repetitions.insert(pooled.repetitions.end(), fs.repetitions.begin(),
                              fs.repetitions.end());
  }
  PriorFeaturesModel model;
  model.mode = PriorFeaturesMode::source_data_only;
  model.stacked = train_multiclass(pooled, KernelSpec::linear(), C);
  model.stacked.id = "prior_features";
  return model;
}

Eigen::MatrixXd class_scores(const PriorFeaturesModel& model, const Eigen::MatrixXd& X) {
  if (model.mode == PriorFeaturesMode::source_data_only) return class_scores(model.stacked, X);
  return class_scores(model.stacked, source_score_features(model.sources, X));
}

Prediction predict(const PriorFeaturesModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd scores = class_scores(model, x.transpose()).row(0).transpose();
  return {argmax(scores), std::move(scores)};
}

}  // namespace myoadapt
