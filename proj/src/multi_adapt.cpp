#include "myoadapt/multi_adapt.hpp"

#include <algorithm>
#include <limits>

#include "myoadapt/error.hpp"

namespace myoadapt {

ScoreTable::ScoreTable(std::vector<Eigen::MatrixXd> per_source) : per_source_(std::move(per_source)) {
  for (const auto& m : per_source_)
    if (m.rows() != per_source_.front().rows() || m.cols() != per_source_.front().cols())
      throw DomainError("score table blocks differ in shape");
}

ScoreTable source_score_table(const SourceSet& sources, const Eigen::MatrixXd& X) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(sources.size());
  for (const auto& s : sources) blocks.push_back(class_scores(*s, X));
  return ScoreTable(std::move(blocks));
}

LooComponents loo_components(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y_pm,
                             const Eigen::VectorXd& yhat_combo, double C) {
  if (y_pm.size() != gram.rows() || yhat_combo.size() != gram.rows())
    throw DomainError("loo components: vector lengths do not match the kernel matrix");
  BorderedSystem system(gram, C);
  Eigen::MatrixXd rhs(gram.rows(), 2);
  rhs.col(0) = y_pm;
  rhs.col(1) = -yhat_combo;
  const auto sol = system.solve(rhs);
  return {sol.alphas.col(0), sol.alphas.col(1), system.inverse_diagonal()};
}

double multiclass_hinge(const Eigen::Ref<const Eigen::VectorXd>& confidences, int true_class) {
  if (true_class < 0 || true_class >= confidences.size())
    throw DomainError("true class out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (Eigen::Index g = 0; g < confidences.size(); ++g)
    if (g != true_class) other = std::max(other, confidences(g));
  if (confidences.size() == 1) other = 0.0;
  return std::max(0.0, 1.0 - confidences(true_class) + other);
}

std::vector<double> BetaSearchOptions::effective_candidates() const {
  std::vector<double> out{0.0};
  const double lo = allow_negative ? -beta_max : 0.0;
  for (double c : candidates) {
    if (c >= lo && c <= beta_max) out.push_back(c);
    if (allow_negative && -c >= lo && -c <= beta_max) out.push_back(-c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// Leave-one-out confidences are affine in B:
//   Ytilde(g, i) = base(g, i) + sum_k B(k, g) slope_k(g, i).
struct LooBasis {
  Eigen::MatrixXd base;                // G x N
  std::vector<Eigen::MatrixXd> slope;  // K of G x N
};

LooBasis build_loo_basis(const FeatureSet& train, const ScoreTable& table,
                         const KernelSpec& kernel, double C) {
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const int g = train.class_count;
  const int k = table.sources();
  BorderedSystem system(gram_matrix(kernel, train.vectors, train.vectors), C);
  const Eigen::VectorXd p_diag = system.inverse_diagonal();
  const Eigen::MatrixXd y = one_vs_all_targets(train.labels, g);

  Eigen::MatrixXd rhs(n, static_cast<Eigen::Index>(g) * (k + 1));
  rhs.leftCols(g) = y;
  for (int s = 0; s < k; ++s) rhs.middleCols(static_cast<Eigen::Index>(s + 1) * g, g) = -table.source(s);
  const auto sol = system.solve(rhs);

  const Eigen::ArrayXd inv_p = p_diag.array().inverse();
  LooBasis basis;
  basis.base = (y - (sol.alphas.leftCols(g).array().colwise() * inv_p).matrix()).transpose();
  for (int s = 0; s < k; ++s)
    basis.slope.push_back(
        (-(sol.alphas.middleCols(static_cast<Eigen::Index>(s + 1) * g, g).array().colwise() * inv_p))
            .matrix()
            .transpose());
  return basis;
}

Eigen::MatrixXd confidences_from_basis(const LooBasis& basis, const BetaMatrix& beta) {
  Eigen::MatrixXd conf = basis.base;
  for (std::size_t k = 0; k < basis.slope.size(); ++k)
    conf += (basis.slope[k].array().colwise() *
             beta.values.row(static_cast<Eigen::Index>(k)).transpose().array())
                .matrix();
  return conf;
}

double total_hinge(const Eigen::MatrixXd& conf, std::span<const int> labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < conf.cols(); ++i)
    loss += multiclass_hinge(conf.col(i), labels[static_cast<std::size_t>(i)]);
  return loss;
}

void check_inputs(const FeatureSet& train, const SourceSet& sources) {
  train.validate();
  if (sources.empty()) throw DomainError("multi-adapt needs at least one source");
  check_sources(sources, train.class_count, train.dim());
  const auto counts = train.class_counts();
  if (std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2)
    throw DomainError("multi-adapt needs at least two classes present");
}

void check_beta_shape(const BetaMatrix& beta, const SourceSet& sources, int classes) {
  if (beta.values.rows() != static_cast<Eigen::Index>(sources.size()) ||
      beta.values.cols() != classes)
    throw DomainError("beta matrix must be sources x classes");
}

}  // namespace

Eigen::MatrixXd loo_confidences(const FeatureSet& train, const SourceSet& sources,
                                const KernelSpec& kernel, double C, const BetaMatrix& beta) {
  check_inputs(train, sources);
  check_beta_shape(beta, sources, train.class_count);
  const auto basis = build_loo_basis(train, source_score_table(sources, train.vectors), kernel, C);
  return confidences_from_basis(basis, beta);
}

double loo_loss(const FeatureSet& train, const SourceSet& sources, const KernelSpec& kernel,
                double C, const BetaMatrix& beta) {
  return total_hinge(loo_confidences(train, sources, kernel, C, beta), train.labels);
}

namespace {

BetaMatrix search_beta(const FeatureSet& train, const ScoreTable& table, const KernelSpec& kernel,
                       double C, const BetaSearchOptions& options, double* loss_out) {
  const int k_count = table.sources();
  const int g_count = train.class_count;
  const auto candidates = options.effective_candidates();
  const auto basis = build_loo_basis(train, table, kernel, C);

  BetaMatrix beta = BetaMatrix::zeros(k_count, g_count);
  Eigen::MatrixXd conf = basis.base;
  double current = total_hinge(conf, train.labels);

  // A cell is (source, class) or, for shared weights, (source, all classes).
  const int cells_per_source = options.per_class ? g_count : 1;
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    for (int k = 0; k < k_count; ++k) {
      for (int cell = 0; cell < cells_per_source; ++cell) {
        const int g_lo = options.per_class ? cell : 0;
        const int g_hi = options.per_class ? cell + 1 : g_count;
        const double old_value = beta.values(k, g_lo);
        double best_value = old_value;
        double best_loss = current;
        for (double cand : candidates) {
          if (cand == old_value) continue;
          Eigen::MatrixXd trial = conf;
          trial.middleRows(g_lo, g_hi - g_lo) +=
              (cand - old_value) * basis.slope[static_cast<std::size_t>(k)].middleRows(g_lo, g_hi - g_lo);
          const double loss = total_hinge(trial, train.labels);
          if (loss < best_loss) {
            best_loss = loss;
            best_value = cand;
          }
        }
        if (best_value != old_value) {
          conf.middleRows(g_lo, g_hi - g_lo) +=
              (best_value - old_value) * basis.slope[static_cast<std::size_t>(k)].middleRows(g_lo, g_hi - g_lo);
          beta.values.row(k).segment(g_lo, g_hi - g_lo).setConstant(best_value);
          current = best_loss;
        }
      }
    }
  }
  if (loss_out) *loss_out = current;
  return beta;
}

}  // namespace

BetaMatrix optimize_beta(const FeatureSet& train, const SourceSet& sources,
                         const KernelSpec& kernel, double C, const BetaSearchOptions& options) {
  check_inputs(train, sources);
  return search_beta(train, source_score_table(sources, train.vectors), kernel, C, options, nullptr);
}

MultiAdaptModel multi_adapt_train_fixed(const FeatureSet& train, const SourceSet& sources,
                                        const KernelSpec& kernel, double C,
                                        const BetaMatrix& beta) {
  check_inputs(train, sources);
  check_beta_shape(beta, sources, train.class_count);
  const auto table = source_score_table(sources, train.vectors);
  Eigen::MatrixXd rhs = one_vs_all_targets(train.labels, train.class_count);
  for (int k = 0; k < table.sources(); ++k)
    rhs -= (table.source(k).array().rowwise() * beta.values.row(k).array()).matrix();

  BorderedSystem system(gram_matrix(kernel, train.vectors, train.vectors), C);
  auto sol = system.solve(rhs);
  MultiAdaptModel model;
  model.kernel = kernel;
  model.C = C;
  model.class_count = train.class_count;
  model.train_X = train.vectors;
  model.alphas = std::move(sol.alphas);
  model.biases = std::move(sol.biases);
  model.beta = beta;
  model.sources = sources;
  return model;
}

MultiAdaptModel multi_adapt_train(const FeatureSet& train, const SourceSet& sources,
                                  const KernelSpec& kernel, double C,
                                  const BetaSearchOptions& options) {
  if (options.C_candidates.empty())
    return multi_adapt_train_fixed(train, sources, kernel, C,
                                   optimize_beta(train, sources, kernel, C, options));
  check_inputs(train, sources);
  const auto table = source_score_table(sources, train.vectors);
  std::vector<double> cs = options.C_candidates;
  std::sort(cs.begin(), cs.end());
  double best_loss = std::numeric_limits<double>::infinity(), best_C = cs.front();
  BetaMatrix best_beta;
  for (double c : cs) {
    if (!(c > 0.0)) throw ConfigError("C candidates must be positive");
    double loss = 0.0;
    auto beta = search_beta(train, table, kernel, c, options, &loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_C = c;
      best_beta = std::move(beta);
    }
  }
  return multi_adapt_train_fixed(train, sources, kernel, best_C, best_beta);
}

Eigen::MatrixXd class_scores(const MultiAdaptModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.train_X.cols()) throw DomainError("multi-adapt input has wrong dimension");
  Eigen::MatrixXd s = gram_matrix(model.kernel, X, model.train_X) * model.alphas;
  s.rowwise() += model.biases;
  for (std::size_t k = 0; k < model.sources.size(); ++k)
    s += (class_scores(*model.sources[k], X).array().rowwise() *
          model.beta.values.row(static_cast<Eigen::Index>(k)).array())
             .matrix();
  return s;
}

Prediction predict(const MultiAdaptModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd scores = class_scores(model, x.transpose()).row(0).transpose();
  return {argmax(scores), std::move(scores)};
}

}  // namespace myoadapt
