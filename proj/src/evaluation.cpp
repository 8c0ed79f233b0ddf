#include "myoadapt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "myoadapt/error.hpp"

namespace myoadapt {

namespace {

void check_labels(std::span<const int> y_true, std::span<const int> y_pred, int class_count) {
  if (y_true.size() != y_pred.size()) throw DomainError("label vectors differ in length");
  if (y_true.empty()) throw DomainError("no labels to evaluate");
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if (y_true[i] < 0 || y_true[i] >= class_count || y_pred[i] < 0 || y_pred[i] >= class_count)
      throw DomainError("label out of range [0, " + std::to_string(class_count) + ")");
}

}  // namespace

double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int class_count) {
  check_labels(y_true, y_pred, class_count);
  std::vector<double> hits(static_cast<std::size_t>(class_count), 0.0), totals(hits);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    totals[static_cast<std::size_t>(y_true[i])] += 1.0;
    if (y_true[i] == y_pred[i]) hits[static_cast<std::size_t>(y_true[i])] += 1.0;
  }
  double sum = 0.0;
  int present = 0;
  for (std::size_t g = 0; g < totals.size(); ++g)
    if (totals[g] > 0.0) {
      sum += hits[g] / totals[g];
      ++present;
    }
  return sum / present;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int class_count) {
  check_labels(y_true, y_pred, class_count);
  ConfusionMatrix cm;
  cm.values = Eigen::MatrixXd::Zero(class_count, class_count);
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(class_count);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    cm.values(y_pred[i], y_true[i]) += 1.0;
    totals(y_true[i]) += 1.0;
  }
  cm.empty_column.assign(static_cast<std::size_t>(class_count), false);
  for (int t = 0; t < class_count; ++t) {
    if (totals(t) > 0.0)
      cm.values.col(t) /= totals(t);
    else
      cm.empty_column[static_cast<std::size_t>(t)] = true;
  }
  return cm;
}

ConfusionMatrix mean_confusion(std::span<const ConfusionMatrix> matrices) {
  if (matrices.empty()) throw DomainError("no confusion matrices to average");
  const int g = matrices.front().classes();
  ConfusionMatrix out;
  out.values = Eigen::MatrixXd::Zero(g, g);
  out.empty_column.assign(static_cast<std::size_t>(g), true);
  std::vector<int> contributors(static_cast<std::size_t>(g), 0);
  for (const auto& m : matrices) {
    if (m.classes() != g) throw DomainError("confusion matrices differ in size");
    for (int t = 0; t < g; ++t) {
      if (m.empty_column[static_cast<std::size_t>(t)]) continue;
      out.values.col(t) += m.values.col(t);
      ++contributors[static_cast<std::size_t>(t)];
      out.empty_column[static_cast<std::size_t>(t)] = false;
    }
  }
  for (int t = 0; t < g; ++t)
    if (contributors[static_cast<std::size_t>(t)] > 0) out.values.col(t) /= contributors[static_cast<std::size_t>(t)];
  return out;
}

TopkHistogram topk_histogram(const ConfusionMatrix& cm, int k) {
  const int g = cm.classes();
  if (k < 1 || k > g) throw DomainError("k must lie in [1, G]");
  TopkHistogram hist(static_cast<std::size_t>(g));
  for (int t = 0; t < g; ++t) {
    std::vector<ClassFraction> column;
    for (int p = 0; p < g; ++p) column.push_back({p, cm.values(p, t)});
    std::stable_sort(column.begin(), column.end(), [](const ClassFraction& a, const ClassFraction& b) {
      return a.fraction > b.fraction;
    });
    column.resize(static_cast<std::size_t>(k));
    hist[static_cast<std::size_t>(t)] = std::move(column);
  }
  return hist;
}

OverlapResult overlap_percentage(const TopkHistogram& a, const TopkHistogram& b, int threshold) {
  if (a.size() != b.size()) throw DomainError("histograms cover different class counts");
  OverlapResult r;
  r.total = static_cast<int>(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != b[t].size()) throw DomainError("histograms use different k");
    int shared = 0;
    for (const auto& x : a[t])
      for (const auto& y : b[t])
        if (x.class_id == y.class_id) ++shared;
    if (shared >= threshold) ++r.matched;
  }
  r.percentage = r.total > 0 ? 100.0 * r.matched / r.total : 0.0;
  return r;
}

CorrelationMatrix class_correlation(std::span<const Eigen::VectorXd> recognition) {
  if (recognition.size() < 2) throw DomainError("correlation needs at least two settings");
  const Eigen::Index g = recognition.front().size();
  std::vector<Eigen::VectorXd> centered;
  std::vector<bool> constant;
  for (const auto& v : recognition) {
    if (v.size() != g) throw DomainError("recognition vectors differ in class count");
    const double max = v.maxCoeff();
    Eigen::VectorXd scaled = max != 0.0 ? Eigen::VectorXd(v / max) : v;
    scaled.array() -= scaled.mean();
    constant.push_back(scaled.squaredNorm() == 0.0);
    centered.push_back(std::move(scaled));
  }
  const auto s = static_cast<Eigen::Index>(recognition.size());
  CorrelationMatrix cm;
  cm.values = Eigen::MatrixXd::Constant(s, s, std::numeric_limits<double>::quiet_NaN());
  cm.defined = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(s, s, false);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) {
      if (constant[static_cast<std::size_t>(i)] || constant[static_cast<std::size_t>(j)]) continue;
      const auto& a = centered[static_cast<std::size_t>(i)];
      const auto& b = centered[static_cast<std::size_t>(j)];
      cm.values(i, j) = i == j ? 1.0 : a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
      cm.defined(i, j) = true;
    }
  return cm;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::no_transfer: return "no_transfer";
    case Method::prior_features: return "prior_features";
    case Method::multi_adapt: return "multi_adapt";
    case Method::mkal: return "mkal";
    case Method::hl2l: return "hl2l";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (Method m : all_methods())
    if (to_string(m) == name) return m;
  throw ConfigError("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::no_transfer, Method::prior_features,
                                           Method::multi_adapt, Method::mkal, Method::hl2l};
  return methods;
}

std::string to_string(CurveOrder o) {
  switch (o) {
    case CurveOrder::prefix: return "prefix";
    case CurveOrder::shuffled: return "shuffled";
    case CurveOrder::interleaved: return "interleaved";
    case CurveOrder::stratified: return "stratified";
  }
  return "unknown";
}

CurveOrder curve_order_from_string(const std::string& name) {
  for (CurveOrder o : {CurveOrder::prefix, CurveOrder::shuffled, CurveOrder::interleaved,
                       CurveOrder::stratified})
    if (to_string(o) == name) return o;
  throw ConfigError("unknown curve order '" + name + "'");
}

}  // namespace myoadapt
