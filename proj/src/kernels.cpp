#include "myoadapt/kernels.hpp"

#include <cmath>
#include <limits>

#include "myoadapt/error.hpp"

namespace myoadapt {

namespace {

// Subnormal kernel values are replaced by 0; they carry no information and
// slow down every later product.
double flushed_exp(double arg) {
  const double v = std::exp(arg);
  return v < std::numeric_limits<double>::min() ? 0.0 : v;
}

}  // namespace

std::string to_string(KernelKind kind) { return kind == KernelKind::rbf ? "rbf" : "linear"; }

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "rbf") return KernelKind::rbf;
  if (name == "linear") return KernelKind::linear;
  throw ConfigError("unknown kernel kind '" + name + "'");
}

void KernelSpec::validate() const {
  if (kind == KernelKind::rbf && !(gamma > 0.0)) throw DomainError("rbf gamma must be positive");
}

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2) {
  if (x.size() != x2.size())
    throw DomainError("kernel arguments differ in dimension: " + std::to_string(x.size()) +
                      " vs " + std::to_string(x2.size()));
  if (spec.kind == KernelKind::linear) return x.dot(x2);
  return flushed_exp(-spec.gamma * (x - x2).squaredNorm());
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols())
    throw DomainError("gram inputs differ in feature dimension: " + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.cols()));
  // Direct differences rather than |a|^2 + |b|^2 - 2ab: no cancellation, and
  // the diagonal of a self-distance matrix is exactly zero.
  const Eigen::MatrixXd bt = b.transpose();
  const Eigen::MatrixXd at = a.transpose();
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) d(i, j) = (at.col(i) - bt.col(j)).squaredNorm();
  return d;
}

Eigen::MatrixXd rbf_from_distances(const Eigen::MatrixXd& sq_dist, double gamma) {
  return sq_dist.unaryExpr([gamma](double d) { return flushed_exp(-gamma * d); });
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b) {
  spec.validate();
  if (a.cols() != b.cols())
    throw DomainError("gram inputs differ in feature dimension: " + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.cols()));
  if (spec.kind == KernelKind::linear) return a * b.transpose();
  return rbf_from_distances(squared_distances(a, b), spec.gamma);
}

}  // namespace myoadapt
