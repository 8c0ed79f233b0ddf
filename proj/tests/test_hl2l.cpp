#include <doctest.h>

#include <cmath>

#include "myoadapt/error.hpp"
#include "myoadapt/evaluation.hpp"
#include "myoadapt/hl2l.hpp"
#include "oracles.hpp"

using namespace myoadapt;

namespace {

std::shared_ptr<const MulticlassModel> make_source(const FeatureSet& data, const KernelSpec& k, double C,
                                                   const std::string& id = "src") {
  auto m = train_multiclass(data, k, C);
  m.id = id;
  return std::make_shared<const MulticlassModel>(std::move(m));
}

template <class Model>
double bacc(const Model& m, const FeatureSet& test) {
  const auto pred = argmax_rows(class_scores(m, test.vectors));
  return balanced_accuracy(test.labels, pred, test.class_count);
}

Hl2lSearch small_search() {
  Hl2lSearch s;
  s.grid.C = {0.1, 1, 10, 100};
  s.grid.gamma = {0.01, 0.1, 1};
  s.folds = 3;
  return s;
}

}  // namespace

TEST_SUITE("hl2l") {
  TEST_CASE("stratified split sizes, disjointness and order") {
    auto fs = oracle::blobs(11, 3, 2, 1.0, 0.5, 1);
    fs.vectors.col(0).setLinSpaced(static_cast<Eigen::Index>(fs.size()), 0.0, 1.0);
    const auto parts = stratified_split(fs, 0.63, 7);
    CHECK(parts.first.size() + parts.second.size() == fs.size());
    for (int c : parts.first.class_counts()) CHECK(c == 6);
    for (int c : parts.second.class_counts()) CHECK(c == 5);
    std::vector<double> keys;
    for (const auto* part : {&parts.first, &parts.second}) {
      for (Eigen::Index i = 1; i < part->vectors.rows(); ++i) CHECK(part->vectors(i, 0) > part->vectors(i - 1, 0));
      for (Eigen::Index i = 0; i < part->vectors.rows(); ++i) keys.push_back(part->vectors(i, 0));
    }
    std::sort(keys.begin(), keys.end());
    CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());

    const auto again = stratified_split(fs, 0.63, 7);
    CHECK(again.first.vectors == parts.first.vectors);
    CHECK(stratified_split(fs, 0.63, 8).first.vectors != parts.first.vectors);
  }

  TEST_CASE("split keeps at least one item per class in the first part") {
    const auto fs = oracle::blobs(2, 2, 2, 1.0, 0.5, 2);
    const auto parts = stratified_split(fs, 0.1, 1);
    CHECK(parts.first.class_counts() == std::vector<int>{1, 1});
    CHECK(parts.second.class_counts() == std::vector<int>{1, 1});
    CHECK_THROWS_AS(stratified_split(oracle::blobs(1, 2, 2, 1.0, 0.5, 3), 0.5, 1), ConfigError);
    CHECK_THROWS_AS(stratified_split(fs, 1.0, 1), ConfigError);
  }

  TEST_CASE("confidence vector layout") {
    const auto kernel = KernelSpec::rbf(0.5);
    const auto target = train_multiclass(oracle::blobs(5, 3, 2, 1.0, 0.5, 4), kernel, 1.0);
    const SourceSet sources{make_source(oracle::blobs(5, 3, 2, 1.0, 0.5, 5), kernel, 1.0, "a"),
                            make_source(oracle::blobs(5, 3, 2, 1.0, 0.5, 6), KernelSpec::linear(), 2.0, "b")};
    const Eigen::Vector2d x(0.4, -0.1);
    const auto v = confidence_vector(target, sources, x);
    REQUIRE(v.size() == 9);
    CHECK(v.head(3) == predict(target, x).scores);
    CHECK(v.segment(3, 3) == predict(*sources[0], x).scores);
    CHECK(v.tail(3) == predict(*sources[1], x).scores);
  }

  TEST_CASE("without sources it stays close to no transfer") {
    const auto kernel = KernelSpec::rbf(0.5);
    const auto train = oracle::blobs(30, 3, 2, 2.5, 0.6, 7);
    const auto test = oracle::blobs(50, 3, 2, 2.5, 0.6, 8);
    const auto nt = train_multiclass(train, kernel, 10.0);
    const auto m = hl2l_train_search(train, {}, kernel, 10.0, small_search(), 1);
    CHECK(m.second_layer.dim() == 3);
    CHECK(bacc(m, test) >= bacc(nt, test) - 0.05);
  }

  TEST_CASE("a perfect source is not lost") {
    const auto kernel = KernelSpec::rbf(0.5);
    const auto train = oracle::blobs(10, 3, 2, 3.0, 0.5, 9);
    const auto test = oracle::blobs(60, 3, 2, 3.0, 0.5, 10);
    const auto good = make_source(oracle::blobs(100, 3, 2, 3.0, 0.5, 11), kernel, 10.0, "good");
    std::mt19937_64 rng(12);
    FeatureSet noise = oracle::blobs(20, 3, 2, 3.0, 0.5, 13);
    noise.labels = oracle::random_labels(rng, noise.size(), 3);
    const SourceSet sources{make_source(noise, kernel, 1.0, "noise"), good};
    const auto m = hl2l_train_search(train, sources, kernel, 10.0, small_search(), 2);
    CHECK(bacc(*good, test) >= 0.98);
    CHECK(bacc(m, test) >= bacc(*good, test) - 0.02);
  }

  TEST_CASE("second layer trained on one-hot confidences returns the one-hot class") {
    FeatureSet onehot;
    onehot.class_count = 3;
    onehot.vectors = Eigen::MatrixXd::Identity(3, 3);
    onehot.vectors.conservativeResize(6, 3);
    onehot.vectors.bottomRows(3) = 2.0 * Eigen::MatrixXd::Identity(3, 3);
    onehot.labels = {0, 1, 2, 0, 1, 2};
    onehot.repetitions.assign(6, 1);
    Hl2lModel m;
    m.second_layer = train_multiclass(onehot, KernelSpec::linear(), 100.0);
    for (int g = 0; g < 3; ++g)
      CHECK(predict(m.second_layer, Eigen::Vector3d::Unit(g)).class_id == g);
  }

  TEST_CASE("zero confidences tie to class 0 and batch equals pointwise") {
    const auto kernel = KernelSpec::rbf(0.5);
    const auto train = oracle::blobs(10, 3, 2, 2.0, 0.6, 14);
    const SourceSet sources{make_source(oracle::blobs(10, 3, 2, 2.0, 0.6, 15), kernel, 1.0)};
    auto m = hl2l_train(train, sources, kernel, KernelSpec::linear(), 1.0, 1.0, 3);
    const Eigen::MatrixXd X = oracle::blobs(4, 3, 2, 2.0, 0.6, 16).vectors;
    const auto batch = class_scores(m, X);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto p = predict(m, X.row(i).transpose());
      CHECK((p.scores - batch.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
    m.second_layer.alphas.setZero();
    m.second_layer.biases.setZero();
    CHECK(predict(m, X.row(0).transpose()).class_id == 0);
  }

  TEST_CASE("training is deterministic") {
    const auto kernel = KernelSpec::rbf(0.5);
    const auto train = oracle::blobs(10, 3, 2, 1.0, 0.8, 17);
    const SourceSet sources{make_source(oracle::blobs(10, 3, 2, 1.0, 0.8, 18), kernel, 1.0)};
    const auto a = hl2l_train_search(train, sources, kernel, 1.0, small_search(), 4);
    const auto b = hl2l_train_search(train, sources, kernel, 1.0, small_search(), 4);
    CHECK(a.second_layer.alphas == b.second_layer.alphas);
    CHECK(a.second_layer.kernel == b.second_layer.kernel);
    CHECK_THROWS_AS(class_scores(a, Eigen::MatrixXd::Zero(2, 5)), DomainError);
  }
}
