#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "myoadapt/lssvm.hpp"

namespace myoadapt {

struct MkalConfig {
  double p = 1.5;        // group norm exponent, 1 < p <= 2
  int epochs = 5;
  double eta0 = 1.0;     // step size eta_t = eta0 / sqrt(t)
  std::uint64_t seed = 0;

  double q() const { return p / (p - 1.0); }
  void validate() const;
};

// Block 0: the raw feature vector. Blocks 1..K: the G scores of source k.
std::vector<Eigen::VectorXd> block_features(const SourceSet& sources,
                                            const Eigen::Ref<const Eigen::VectorXd>& x);

// p-norm of the vector of per-block 2-norms, 1 <= p <= 2.
double group_norm(const std::vector<Eigen::VectorXd>& blocks, double p);

// Per-block factors of the conjugate map
//   w^k = (1/q) (|theta^k|_2 / |theta|_{2,q})^(q-2) theta^k,
// from the block norms |theta^k|_2. All zero when theta = 0.
Eigen::VectorXd block_weight_factors(const Eigen::VectorXd& block_norms, double q);

// Online state. Every subgradient step adds +eta at the true class and -eta
// at the offending class of one training item, identically in every block,
// so one coefficient matrix represents all blocks of theta:
//   theta^0_g = sum_i coef(i, g) phi_rbf(x_i)
//   theta^k_g = sum_i coef(i, g) z^k(x_i)      (linear source blocks)
// The source blocks are also kept explicitly as G x G matrices.
struct MkalState {
  Eigen::MatrixXd coef;                  // N x G
  std::vector<Eigen::MatrixXd> source_theta;  // K of G x G, row g = theta^k_g
  Eigen::VectorXd block_sq_norms;        // K + 1
  Eigen::VectorXd block_factors;         // K + 1, from block_sq_norms
  long steps = 0;
  long updates = 0;

  // Factors recomputed from the stored norms.
  Eigen::VectorXd recompute_factors(double q) const;
};

struct MkalModel {
  MkalConfig config;
  KernelSpec target_kernel;
  int class_count = 0;
  Eigen::MatrixXd support_X;        // rows with a nonzero coefficient
  Eigen::MatrixXd support_coef;     // S x G
  std::vector<Eigen::MatrixXd> source_theta;
  Eigen::VectorXd block_factors;    // K + 1
  SourceSet sources;
  long steps = 0;
  long updates = 0;
};

// Called after every step with the state and whether the step updated it.
using MkalObserver = std::function<void(const MkalState&, bool updated)>;

MkalModel mkal_train(const FeatureSet& train, const SourceSet& sources, const MkalConfig& cfg,
                     const KernelSpec& target_kernel, const MkalObserver& observer = {});

// Squared block norms computed from scratch from the coefficient matrix.
Eigen::VectorXd block_sq_norms_from_scratch(const MkalState& state, const Eigen::MatrixXd& train_X,
                                            const SourceSet& sources,
                                            const KernelSpec& target_kernel);

Eigen::MatrixXd class_scores(const MkalModel& model, const Eigen::MatrixXd& X);
Prediction predict(const MkalModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// Model with theta = 0.
MkalModel mkal_untrained(const SourceSet& sources, const MkalConfig& cfg,
                         const KernelSpec& target_kernel, int class_count, Eigen::Index dim);

}  // namespace myoadapt
