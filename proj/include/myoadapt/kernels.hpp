#pragma once

#include <string>

#include <Eigen/Core>

namespace myoadapt {

enum class KernelKind { rbf, linear };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;  // rbf only

  static KernelSpec rbf(double gamma) { return {KernelKind::rbf, gamma}; }
  static KernelSpec linear() { return {KernelKind::linear, 0.0}; }

  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

// rbf: exp(-gamma * |x - x'|^2), linear: <x, x'>.
double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2);

// Pairwise squared distances between the rows of a and b.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Entry (i, j) = kernel_eval(spec, a.row(i), b.row(j)).
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b);

// Gram matrix from precomputed squared distances (rbf only).
Eigen::MatrixXd rbf_from_distances(const Eigen::MatrixXd& sq_dist, double gamma);

}  // namespace myoadapt
