#pragma once

#include <vector>

#include <Eigen/Core>

#include "myoadapt/lssvm.hpp"

namespace myoadapt {

// Raw source scores on a set of items: entry (k, g, i) is the decision value
// of source k, class g on item i.
class ScoreTable {
 public:
  ScoreTable() = default;
  explicit ScoreTable(std::vector<Eigen::MatrixXd> per_source);  // each N x G

  int sources() const { return static_cast<int>(per_source_.size()); }
  int classes() const { return per_source_.empty() ? 0 : static_cast<int>(per_source_[0].cols()); }
  Eigen::Index items() const { return per_source_.empty() ? 0 : per_source_[0].rows(); }

  double operator()(int k, int g, Eigen::Index i) const { return per_source_[static_cast<std::size_t>(k)](i, g); }
  const Eigen::MatrixXd& source(int k) const { return per_source_[static_cast<std::size_t>(k)]; }

 private:
  std::vector<Eigen::MatrixXd> per_source_;
};

ScoreTable source_score_table(const SourceSet& sources, const Eigen::MatrixXd& X);

// K x G transfer weights; entry (k, g) weighs class g of source k.
struct BetaMatrix {
  Eigen::MatrixXd values;

  static BetaMatrix zeros(int sources, int classes) {
    return {Eigen::MatrixXd::Zero(sources, classes)};
  }
};

// Leave-one-out building blocks for one binary problem:
//   alpha'  = first N entries of A^-1 [y; 0]
//   alpha'' = first N entries of A^-1 [-yhat; 0]
// so that for a weight beta the adapted solution is alpha' + beta alpha''
// and the leave-one-out prediction for item i is
//   y_i - (alpha'_i + beta alpha''_i) / P_ii.
struct LooComponents {
  Eigen::VectorXd alpha_prime;
  Eigen::VectorXd alpha_double;
  Eigen::VectorXd p_diag;
};

LooComponents loo_components(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y_pm,
                             const Eigen::VectorXd& yhat_combo, double C);

// max(0, 1 - s_y + max_{g != y} s_g).
double multiclass_hinge(const Eigen::Ref<const Eigen::VectorXd>& confidences, int true_class);

struct BetaSearchOptions {
  std::vector<double> candidates{0.0, 0.25, 0.5, 1.0, 2.0};
  int sweeps = 2;
  double beta_max = 4.0;
  bool allow_negative = false;  // adds the mirrored candidates and lifts the lower bound
  bool per_class = true;        // false: one weight per source shared by all classes
  // When nonempty, multi_adapt_train also picks C from this list by the
  // leave-one-out loss of its best B (ties to the smaller C).
  std::vector<double> C_candidates;
  // Learning curves fill C_candidates from the grid when set.
  bool select_C = true;

  // Candidate list inside the box, always containing 0, ascending.
  std::vector<double> effective_candidates() const;
};

// Leave-one-out confidence matrix (G x N) for a given B.
Eigen::MatrixXd loo_confidences(const FeatureSet& train, const SourceSet& sources,
                                const KernelSpec& kernel, double C, const BetaMatrix& beta);

// Sum over items of the multiclass hinge of the leave-one-out confidences.
double loo_loss(const FeatureSet& train, const SourceSet& sources, const KernelSpec& kernel,
                double C, const BetaMatrix& beta);

// Coordinate search over the cells of B on the candidate grid, starting
// from B = 0 and accepting only strict improvements.
BetaMatrix optimize_beta(const FeatureSet& train, const SourceSet& sources,
                         const KernelSpec& kernel, double C,
                         const BetaSearchOptions& options = {});

struct MultiAdaptModel {
  KernelSpec kernel;
  double C = 1.0;
  int class_count = 0;
  Eigen::MatrixXd train_X;
  Eigen::MatrixXd alphas;     // N x G
  Eigen::RowVectorXd biases;  // G
  BetaMatrix beta;
  SourceSet sources;
};

MultiAdaptModel multi_adapt_train(const FeatureSet& train, const SourceSet& sources,
                                  const KernelSpec& kernel, double C,
                                  const BetaSearchOptions& options = {});

// Solves the adapted system for a given B without searching.
MultiAdaptModel multi_adapt_train_fixed(const FeatureSet& train, const SourceSet& sources,
                                        const KernelSpec& kernel, double C,
                                        const BetaMatrix& beta);

// score_g(x) = sum_i alpha_ig K(x_i, x) + b_g + sum_k B_kg s_kg(x).
Eigen::MatrixXd class_scores(const MultiAdaptModel& model, const Eigen::MatrixXd& X);
Prediction predict(const MultiAdaptModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace myoadapt
