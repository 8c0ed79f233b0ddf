#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "myoadapt/lssvm.hpp"

namespace myoadapt {

struct SplitParts {
  FeatureSet first;   // `fraction` of each class
  FeatureSet second;  // the rest
};

// Per class: floor(fraction * n_g) items (at least 1) go to `first`, chosen
// by a seeded shuffle; relative order inside each part is preserved.
SplitParts stratified_split(const FeatureSet& fs, double fraction, std::uint64_t seed);

// [target scores | source 1 scores | ... | source K scores], length (K+1) G.
Eigen::VectorXd confidence_vector(const MulticlassModel& target, const SourceSet& sources,
                                  const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::MatrixXd confidence_matrix(const MulticlassModel& target, const SourceSet& sources,
                                  const Eigen::MatrixXd& X);

struct Hl2lModel {
  MulticlassModel first_layer;
  SourceSet sources;
  MulticlassModel second_layer;  // input dimension (K+1) G
  double fraction = 0.63;
};

// Fixed second-layer kernel and C.
Hl2lModel hl2l_train(const FeatureSet& train, const SourceSet& sources,
                     const KernelSpec& kernel_first, const KernelSpec& kernel_second,
                     double C_first, double C_second, std::uint64_t seed,
                     double fraction = 0.63);

// Second layer hyperparameters chosen by grid search on the confidence
// vectors of the held-out part.
struct Hl2lSearch {
  GridSpec grid;
  int folds = 5;
  KernelKind kind = KernelKind::rbf;
};

Hl2lModel hl2l_train_search(const FeatureSet& train, const SourceSet& sources,
                            const KernelSpec& kernel_first, double C_first,
                            const Hl2lSearch& search, std::uint64_t seed,
                            double fraction = 0.63);

Eigen::MatrixXd class_scores(const Hl2lModel& model, const Eigen::MatrixXd& X);
Prediction predict(const Hl2lModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace myoadapt
