#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "myoadapt/features.hpp"
#include "myoadapt/kernels.hpp"

namespace myoadapt {

// Factorization of the LS-SVM bordered matrix
//
//   A = [ K + I/C   1 ]
//       [ 1^T       0 ]
//
// through the Cholesky factor of H = K + I/C and the Schur complement
// s = 1^T H^-1 1. H is positive definite for any positive semidefinite
// kernel matrix and C > 0.
class BorderedSystem {
 public:
  BorderedSystem(const Eigen::MatrixXd& gram, double C);

  struct Solution {
    Eigen::MatrixXd alphas;  // N x m
    Eigen::RowVectorXd biases;  // m
  };

  // Solves A [alpha; b] = [rhs; 0] for every column of rhs.
  Solution solve(const Eigen::MatrixXd& rhs) const;

  // First N diagonal entries of A^-1.
  Eigen::VectorXd inverse_diagonal() const;

  Eigen::Index size() const { return ones_solved_.size(); }
  double reciprocal_condition() const { return llt_.rcond(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd ones_solved_;  // H^-1 1
  double schur_ = 0.0;
};

struct BinaryLssvmModel {
  Eigen::VectorXd alphas;
  double bias = 0.0;
  Eigen::MatrixXd train_X;
  KernelSpec kernel;
  double C = 1.0;
};

BinaryLssvmModel train_binary(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const KernelSpec& kernel, double C);

// Raw decision value sum_i alpha_i K(X_i, x) + b.
double score(const BinaryLssvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd score_batch(const BinaryLssvmModel& model, const Eigen::MatrixXd& X);

// One-vs-all LS-SVM. Column g of `alphas` and entry g of `biases` form the
// binary model for class g (targets +1 for g, -1 otherwise). All classes
// share the training matrix and kernel.
struct MulticlassModel {
  std::string id;
  KernelSpec kernel;
  double C = 1.0;
  int class_count = 0;
  Eigen::MatrixXd train_X;     // N x d
  Eigen::MatrixXd alphas;      // N x G
  Eigen::RowVectorXd biases;   // G

  BinaryLssvmModel class_model(int g) const;
  Eigen::Index dim() const { return train_X.cols(); }
};

using SourceSet = std::vector<std::shared_ptr<const MulticlassModel>>;

struct Prediction {
  int class_id = 0;
  Eigen::VectorXd scores;
};

// Index of the largest entry; ties go to the lowest index.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& scores);
std::vector<int> argmax_rows(const Eigen::MatrixXd& scores);

// N x G matrix of +-1 one-vs-all targets.
Eigen::MatrixXd one_vs_all_targets(std::span<const int> labels, int class_count);

// Classes absent from the training set get the all -1 target.
MulticlassModel train_multiclass(const FeatureSet& fs, const KernelSpec& kernel, double C);

// n x G raw scores.
Eigen::MatrixXd class_scores(const MulticlassModel& model, const Eigen::MatrixXd& X);
Prediction predict(const MulticlassModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct GridSpec {
  std::vector<double> C{0.01, 0.1, 1, 10, 100, 1000};
  std::vector<double> gamma{0.01, 0.1, 1, 10, 100, 1000};

  // Sorted and deduplicated copy; throws ConfigError on empty lists or
  // non-positive values.
  GridSpec normalized() const;
};

struct GridSearchResult {
  double C = 1.0;
  double gamma = 1.0;  // 0 for the linear kernel
  std::vector<double> C_values;
  std::vector<double> gamma_values;
  Eigen::MatrixXd table;  // mean fold balanced accuracy, |C| x |gamma|
  int folds = 0;
};

// Fold index per item. Within each class the items, in their given order,
// are cut into `folds` contiguous blocks. Classes without items are ignored.
std::vector<int> stratified_folds(std::span<const int> labels, int class_count, int folds);

// Stratified k-fold search. Best pair by mean balanced accuracy; ties go to
// the smaller C, then the smaller gamma. For the linear kernel the gamma list
// is ignored.
GridSearchResult grid_search(const FeatureSet& train, const GridSpec& grid, int folds,
                             KernelKind kind = KernelKind::rbf);

// Largest usable fold count <= requested for the given labels, or 0 when
// some present class has a single item.
int feasible_folds(const FeatureSet& fs, int requested);

// Baseline trained on the target data only.
MulticlassModel no_transfer_train(const FeatureSet& fs, double C, double gamma);

// Concatenated source scores, n x (K*G), source-major.
Eigen::MatrixXd source_score_features(const SourceSet& sources, const Eigen::MatrixXd& X);

void check_sources(const SourceSet& sources, int class_count, Eigen::Index dim);

enum class PriorFeaturesMode {
  score_stacking,     // linear LS-SVM on source scores of target data
  source_data_only,   // linear LS-SVM on pooled source training data
};

struct PriorFeaturesModel {
  PriorFeaturesMode mode = PriorFeaturesMode::score_stacking;
  SourceSet sources;
  MulticlassModel stacked;
};

PriorFeaturesModel prior_features_train(const SourceSet& sources, const FeatureSet& target_train,
                                        double C);
PriorFeaturesModel prior_features_train_source_only(std::span<const FeatureSet> source_data,
                                                    double C);

Eigen::MatrixXd class_scores(const PriorFeaturesModel& model, const Eigen::MatrixXd& X);
Prediction predict(const PriorFeaturesModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace myoadapt
