#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "myoadapt/emg_data.hpp"

namespace myoadapt {

// Feature vectors (one row per item) with class and repetition per item.
struct FeatureSet {
  Eigen::MatrixXd vectors;
  std::vector<int> labels;
  std::vector<int> repetitions;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dim() const { return vectors.cols(); }

  void validate() const;
  // Items at the given positions, in that order.
  FeatureSet select(std::span<const std::size_t> indices) const;
  FeatureSet prefix(std::size_t n) const;
  std::vector<int> class_counts() const;
};

double mav(std::span<const double> window);
double variance(std::span<const double> window);
double waveform_length(std::span<const double> window);

// Equal-width bins over [lo, hi); samples outside the range are clipped into
// the edge bins.
Eigen::VectorXd semg_histogram(std::span<const double> window, int bins, double lo, double hi);

// Per-feature standardization. Constant features get scale 1.
struct FeatureNormalizer {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  static FeatureNormalizer fit(const Eigen::MatrixXd& raw);
  static FeatureNormalizer identity(Eigen::Index dim);

  Eigen::Index dim() const { return center.size(); }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

// n x 3C matrix laid out as [MAV_1..MAV_C | Var_1..Var_C | WL_1..WL_C].
Eigen::MatrixXd time_domain_families(std::span<const Window> windows);

FeatureNormalizer fit_time_normalizer(std::span<const Window> windows);

// Per channel: mean of the standardized MAV, Var and WL values. d = C.
FeatureSet extract_combined(std::span<const Window> windows, const FeatureNormalizer& normalizer,
                            int class_count);
// Same, from an already computed family matrix.
Eigen::MatrixXd combine_families(const Eigen::MatrixXd& families,
                                 const FeatureNormalizer& normalizer);

struct HistogramRanges {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// Per channel (mean - sigmas * sd, mean + sigmas * sd) over all window samples.
HistogramRanges fit_histogram_ranges(std::span<const Window> windows, double sigmas = 3.0);

// d = C * bins, channel-major.
FeatureSet extract_histogram(std::span<const Window> windows, int bins,
                             const HistogramRanges& ranges, int class_count);

// CSV with header label,repetition,f0..f{d-1}.
void write_feature_csv(const std::filesystem::path& path, const FeatureSet& fs);
FeatureSet read_feature_csv(const std::filesystem::path& path, int class_count);

}  // namespace myoadapt
