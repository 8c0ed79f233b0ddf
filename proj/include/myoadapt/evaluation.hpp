#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "myoadapt/features.hpp"
#include "myoadapt/hl2l.hpp"
#include "myoadapt/lssvm.hpp"
#include "myoadapt/mkal.hpp"
#include "myoadapt/multi_adapt.hpp"

namespace myoadapt {

// Macro-averaged recall over the classes present in y_true. For two
// classes this is 0.5 TP/(TP+FN) + 0.5 TN/(TN+FP).
double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int class_count);

// Entry (p, t) = fraction of items of true class t predicted as p. Columns
// of classes with no items are zero and flagged in `empty_column`.
struct ConfusionMatrix {
  Eigen::MatrixXd values;
  std::vector<bool> empty_column;

  int classes() const { return static_cast<int>(values.rows()); }
  // Diagonal, i.e. recall per true class.
  Eigen::VectorXd per_class_recognition() const { return values.diagonal(); }
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int class_count);

// Elementwise mean (used to pool confusion matrices across targets). A
// column is empty only if it is empty in every input.
ConfusionMatrix mean_confusion(std::span<const ConfusionMatrix> matrices);

struct ClassFraction {
  int class_id = 0;
  double fraction = 0.0;
};

// Per true class: its k largest column entries, descending, ties by class id.
using TopkHistogram = std::vector<std::vector<ClassFraction>>;

TopkHistogram topk_histogram(const ConfusionMatrix& cm, int k);

struct OverlapResult {
  double percentage = 0.0;
  int matched = 0;
  int total = 0;
};

// Share of classes whose top-k sets have at least `threshold` members in common.
OverlapResult overlap_percentage(const TopkHistogram& a, const TopkHistogram& b, int threshold);

// Pearson correlations between per-class recognition vectors, each divided
// by its maximum first. Pairs involving a constant vector are undefined
// (NaN in `values`, false in `defined`).
struct CorrelationMatrix {
  Eigen::MatrixXd values;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
};

CorrelationMatrix class_correlation(std::span<const Eigen::VectorXd> recognition);

enum class Method { no_transfer, prior_features, multi_adapt, mkal, hl2l };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
const std::vector<Method>& all_methods();

// How training subsets of growing size are drawn from the training pool.
enum class CurveOrder {
  prefix,       // first n items in temporal order
  shuffled,     // first n items of a seeded permutation
  interleaved,  // round robin over classes, temporal order within each class
  stratified,   // round robin over classes, seeded random order within each class
};

std::string to_string(CurveOrder o);
CurveOrder curve_order_from_string(const std::string& name);

// Permutation of the pool realizing the given order.
std::vector<std::size_t> curve_ordering(const FeatureSet& pool, CurveOrder order, std::uint64_t seed);

struct CurveOptions {
  GridSpec grid;
  int folds = 5;
  CurveOrder order = CurveOrder::prefix;
  std::uint64_t seed = 0;
  BetaSearchOptions beta;
  MkalConfig mkal;
  double hl2l_fraction = 0.63;
  KernelKind hl2l_second_kernel = KernelKind::rbf;
  PriorFeaturesMode prior_mode = PriorFeaturesMode::score_stacking;
  std::vector<FeatureSet> source_data;  // needed for PriorFeaturesMode::source_data_only
};

struct CurvePoint {
  std::size_t n_train = 0;
  std::map<Method, double> balanced_accuracy;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
};

struct StepHyperparameters {
  double C = 1.0;
  double gamma = 1.0;
  int folds = 0;
};

struct CurveResult {
  LearningCurve curve;
  std::map<std::pair<Method, std::size_t>, ConfusionMatrix> confusions;
  std::map<std::size_t, StepHyperparameters> hyperparameters;
};

// For every step n: train each method on the first n pool items (under the
// chosen order) and evaluate on the fixed test set. Target hyperparameters
// come from a grid search on the step's training subset and are shared by
// the target-side kernels of every method.
CurveResult run_learning_curve(const FeatureSet& train_pool, const FeatureSet& test,
                               const SourceSet& sources, std::span<const Method> methods,
                               std::span<const std::size_t> steps, const CurveOptions& options);

}  // namespace myoadapt
