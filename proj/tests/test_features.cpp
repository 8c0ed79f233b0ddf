#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "myoadapt/error.hpp"
#include "myoadapt/features.hpp"

using namespace myoadapt;

namespace {

std::vector<double> random_window(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.3, 2.0);
  std::vector<double> w(n);
  for (auto& x : w) x = d(rng);
  return w;
}

std::vector<Window> windows_over(const Eigen::MatrixXd& samples, int len, int shift, int class_id) {
  Segment seg;
  seg.class_id = class_id;
  seg.repetition = 1;
  seg.samples = std::make_shared<const Eigen::MatrixXd>(samples);
  return window_segment(seg, {len, shift});
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("mav") {
    CHECK(mav(std::vector<double>{1, -1, 2, -2}) == 1.5);
    CHECK(mav(std::vector<double>{0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(mav(std::vector<double>{}), DomainError);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 20; ++k) {
      const auto w = random_window(rng, 37);
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) s += w[i] < 0 ? -w[i] : w[i];
      CHECK(mav(w) == doctest::Approx(s / 37).epsilon(1e-14));
    }
  }

  TEST_CASE("variance") {
    CHECK(variance(std::vector<double>{1, -1}) == 1.0);
    CHECK(variance(std::vector<double>{4, 4, 4}) == 0.0);
    CHECK_THROWS_AS(variance(std::vector<double>{}), DomainError);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 20; ++k) {
      const auto w = random_window(rng, 50);
      // Textbook one-pass sums as an independent formula.
      double s = 0.0, sq = 0.0;
      for (double x : w) s += x, sq += x * x;
      const double expected = sq / 50 - (s / 50) * (s / 50);
      CHECK(std::abs(variance(w) - expected) <= 1e-12 * std::max(1.0, expected));
    }
  }

  TEST_CASE("waveform length") {
    CHECK(waveform_length(std::vector<double>{0, 1, 3}) == 3.0);
    CHECK(waveform_length(std::vector<double>{2, 2, 2, 2}) == 0.0);
    CHECK_THROWS_AS(waveform_length(std::vector<double>{1}), DomainError);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) {
      auto w = random_window(rng, 30);
      std::sort(w.begin(), w.end());
      CHECK(waveform_length(w) == doctest::Approx(w.back() - w.front()).epsilon(1e-12));
    }
  }

  TEST_CASE("homogeneity") {
    std::mt19937_64 rng(4);
    const auto w = random_window(rng, 40);
    std::vector<double> scaled(w);
    for (auto& x : scaled) x *= 2.5;
    CHECK(mav(scaled) == doctest::Approx(2.5 * mav(w)));
    CHECK(waveform_length(scaled) == doctest::Approx(2.5 * waveform_length(w)));
    CHECK(variance(scaled) == doctest::Approx(6.25 * variance(w)));
  }

  TEST_CASE("histogram") {
    CHECK(semg_histogram(std::vector<double>{0.1, 0.9}, 2, 0.0, 1.0) == Eigen::Vector2d(1, 1));
    const Eigen::VectorXd below = semg_histogram(std::vector<double>{-5, -4, -3}, 4, 0.0, 1.0);
    CHECK(below(0) == 3.0);
    CHECK(below.tail(3).sum() == 0.0);
    CHECK_THROWS_AS(semg_histogram(std::vector<double>{1}, 2, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(semg_histogram(std::vector<double>{1}, 0, 0.0, 1.0), DomainError);

    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
      const auto w = random_window(rng, 200);
      const double lo = -2.0, hi = 3.0;
      const int bins = 7;
      Eigen::VectorXd naive = Eigen::VectorXd::Zero(bins);
      for (double x : w) {
        int b = 0;
        for (int j = 0; j < bins; ++j)
          if (x >= lo + j * (hi - lo) / bins) b = j;
        naive(b) += 1;
      }
      const auto h = semg_histogram(w, bins, lo, hi);
      CHECK(h.sum() == 200.0);
      CHECK(h == naive);
    }
  }

  TEST_CASE("normalizer") {
    Eigen::MatrixXd raw(4, 2);
    raw << 1, 5, 2, 5, 3, 5, 4, 5;
    const auto n = FeatureNormalizer::fit(raw);
    CHECK(n.scale(1) == 1.0);
    const auto z = n.apply(raw);
    CHECK(std::abs(z.col(0).mean()) < 1e-15);
    CHECK(z.col(0).squaredNorm() / 4 == doctest::Approx(1.0));
    CHECK(z.col(1).isZero());
    CHECK_THROWS_AS(n.apply(Eigen::MatrixXd::Zero(1, 3)), DomainError);
    CHECK(FeatureNormalizer::identity(2).apply(raw) == raw);
  }

  TEST_CASE("family layout and combined feature") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::MatrixXd samples(200, 2);
    for (Eigen::Index i = 0; i < samples.size(); ++i) samples(i) = d(rng);
    const auto windows = windows_over(samples, 50, 25, 1);
    const auto fam = time_domain_families(windows);
    REQUIRE(fam.cols() == 6);
    std::vector<double> ch1(samples.col(1).data() + 25, samples.col(1).data() + 75);
    CHECK(fam(1, 1) == mav(ch1));
    CHECK(fam(1, 3) == variance(ch1));
    CHECK(fam(1, 5) == waveform_length(ch1));

    const auto norm = fit_time_normalizer(windows);
    const auto fs = extract_combined(windows, norm, 2);
    CHECK(fs.dim() == 2);
    CHECK(fs.size() == windows.size());
    const auto z = norm.apply(fam);
    for (Eigen::Index j = 0; j < 6; ++j) {
      CHECK(std::abs(z.col(j).mean()) < 1e-12);
      CHECK(z.col(j).squaredNorm() / static_cast<double>(z.rows()) == doctest::Approx(1.0));
    }
    CHECK(fs.vectors(2, 0) == doctest::Approx((z(2, 0) + z(2, 2) + z(2, 4)) / 3.0));
    CHECK_THROWS_AS(extract_combined(windows, FeatureNormalizer::identity(4), 2), DomainError);
  }

  TEST_CASE("equal standardized families give that value") {
    Eigen::MatrixXd fam(1, 3);
    fam << 3, 5, 7;
    FeatureNormalizer n{Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, 2, 3)};
    CHECK(combine_families(fam, n)(0, 0) == 2.0);
  }

  TEST_CASE("combined feature is invariant to channel gain after refitting") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::MatrixXd samples(300, 3);
    for (Eigen::Index i = 0; i < samples.size(); ++i) samples(i) = d(rng);
    Eigen::MatrixXd gained = samples;
    gained.col(1) *= 2.0;
    const auto a = windows_over(samples, 40, 20, 0);
    const auto b = windows_over(gained, 40, 20, 0);
    const auto fa = extract_combined(a, fit_time_normalizer(a), 1);
    const auto fb = extract_combined(b, fit_time_normalizer(b), 1);
    CHECK((fa.vectors - fb.vectors).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("histogram features") {
    Eigen::MatrixXd samples = Eigen::MatrixXd::Random(120, 2);
    const auto windows = windows_over(samples, 30, 30, 1);
    const auto ranges = fit_histogram_ranges(windows);
    const auto fs = extract_histogram(windows, 5, ranges, 2);
    CHECK(fs.dim() == 10);
    for (Eigen::Index i = 0; i < fs.vectors.rows(); ++i) {
      CHECK(fs.vectors.row(i).head(5).sum() == 30.0);
      CHECK(fs.vectors.row(i).tail(5).sum() == 30.0);
    }
  }

  TEST_CASE("feature csv round trip") {
    FeatureSet fs;
    fs.class_count = 3;
    fs.vectors = Eigen::MatrixXd::Random(5, 4);
    fs.labels = {0, 1, 2, 1, 0};
    fs.repetitions = {1, 1, 2, 3, 6};
    const auto path = std::filesystem::temp_directory_path() / "myoadapt_features.csv";
    write_feature_csv(path, fs);
    const auto back = read_feature_csv(path, 3);
    CHECK(back.vectors == fs.vectors);
    CHECK(back.labels == fs.labels);
    CHECK(back.repetitions == fs.repetitions);
  }

  TEST_CASE("feature set validation and selection") {
    FeatureSet fs;
    fs.class_count = 2;
    fs.vectors = Eigen::MatrixXd::Zero(3, 1);
    fs.labels = {0, 1, 2};
    fs.repetitions = {1, 1, 1};
    CHECK_THROWS_AS(fs.validate(), DomainError);
    fs.labels = {0, 1, 1};
    fs.vectors(1, 0) = 4;
    const std::vector<std::size_t> idx{1, 0};
    const auto sel = fs.select(idx);
    CHECK(sel.vectors(0, 0) == 4);
    CHECK(sel.labels == std::vector<int>{1, 0});
    CHECK(fs.prefix(2).size() == 2);
    CHECK(fs.class_counts() == std::vector<int>{1, 2});
    fs.vectors(0, 0) = std::nan("");
    CHECK_THROWS_AS(fs.validate(), DomainError);
  }
}
