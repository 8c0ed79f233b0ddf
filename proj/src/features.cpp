#include "myoadapt/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "myoadapt/error.hpp"

namespace myoadapt {

void FeatureSet::validate() const {
  if (static_cast<std::size_t>(vectors.rows()) != labels.size() ||
      labels.size() != repetitions.size())
    throw DomainError("feature set rows, labels and repetitions differ in length");
  if (!vectors.allFinite()) throw DomainError("feature set contains non-finite values");
  for (int y : labels)
    if (y < 0 || y >= class_count)
      throw DomainError("label " + std::to_string(y) + " outside [0, " +
                        std::to_string(class_count) + ")");
}

FeatureSet FeatureSet::select(std::span<const std::size_t> indices) const {
  FeatureSet out;
  out.class_count = class_count;
  out.vectors.resize(static_cast<Eigen::Index>(indices.size()), vectors.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.vectors.row(static_cast<Eigen::Index>(r)) =
        vectors.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(labels[indices[r]]);
    out.repetitions.push_back(repetitions[indices[r]]);
  }
  return out;
}

FeatureSet FeatureSet::prefix(std::size_t n) const {
  n = std::min(n, size());
  FeatureSet out;
  out.class_count = class_count;
  out.vectors = vectors.topRows(static_cast<Eigen::Index>(n));
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  out.repetitions.assign(repetitions.begin(), repetitions.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

std::vector<int> FeatureSet::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

double mav(std::span<const double> window) {
  if (window.empty()) throw DomainError("mav of an empty window");
  double sum = 0.0;
  for (double x : window) sum += std::abs(x);
  return sum / static_cast<double>(window.size());
}

double variance(std::span<const double> window) {
  if (window.empty()) throw DomainError("variance of an empty window");
  const double n = static_cast<double>(window.size());
  double mean = 0.0;
  for (double x : window) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : window) ss += (x - mean) * (x - mean);
  return ss / n;
}

double waveform_length(std::span<const double> window) {
  if (window.size() < 2) throw DomainError("waveform length needs at least two samples");
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < window.size(); ++t) sum += std::abs(window[t] - window[t + 1]);
  return sum;
}

Eigen::VectorXd semg_histogram(std::span<const double> window, int bins, double lo, double hi) {
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  if (!(lo < hi)) throw DomainError("histogram range must satisfy lo < hi");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(bins);
  const double width = (hi - lo) / bins;
  for (double x : window) {
    int b = static_cast<int>(std::floor((x - lo) / width));
    b = std::clamp(b, 0, bins - 1);
    counts(b) += 1.0;
  }
  return counts;
}

FeatureNormalizer FeatureNormalizer::fit(const Eigen::MatrixXd& raw) {
  if (raw.rows() == 0) throw DomainError("cannot fit a normalizer on zero items");
  FeatureNormalizer norm;
  norm.center = raw.colwise().mean().transpose();
  norm.scale.resize(raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double sd =
        std::sqrt((raw.col(j).array() - norm.center(j)).square().sum() / static_cast<double>(raw.rows()));
    norm.scale(j) = sd > 0.0 ? sd : 1.0;
  }
  return norm;
}

FeatureNormalizer FeatureNormalizer::identity(Eigen::Index dim) {
  return FeatureNormalizer{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Eigen::MatrixXd FeatureNormalizer::apply(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != dim())
    throw DomainError("normalizer expects " + std::to_string(dim()) + " features, got " +
                      std::to_string(raw.cols()));
  return (raw.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
}

namespace {

std::span<const double> channel_span(const Window& w, int channel) {
  // Columns of a row block of a column-major matrix are contiguous.
  const double* base = w.source->data() + channel * w.source->rows() + w.start;
  return {base, static_cast<std::size_t>(w.length)};
}

int common_channels(std::span<const Window> windows) {
  if (windows.empty()) return 0;
  const int channels = windows.front().channels();
  for (const auto& w : windows)
    if (w.channels() != channels) throw DomainError("windows differ in channel count");
  return channels;
}

}  // namespace

Eigen::MatrixXd time_domain_families(std::span<const Window> windows) {
  const int channels = common_channels(windows);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), 3 * channels);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int c = 0; c < channels; ++c) {
      auto x = channel_span(windows[i], c);
      out(r, c) = mav(x);
      out(r, channels + c) = variance(x);
      out(r, 2 * channels + c) = waveform_length(x);
    }
  }
  return out;
}

FeatureNormalizer fit_time_normalizer(std::span<const Window> windows) {
  return FeatureNormalizer::fit(time_domain_families(windows));
}

Eigen::MatrixXd combine_families(const Eigen::MatrixXd& families,
                                 const FeatureNormalizer& normalizer) {
  if (families.cols() % 3 != 0) throw DomainError("family matrix must have 3C columns");
  const Eigen::MatrixXd z = normalizer.apply(families);
  const Eigen::Index c = families.cols() / 3;
  return (z.leftCols(c) + z.middleCols(c, c) + z.rightCols(c)) / 3.0;
}

FeatureSet extract_combined(std::span<const Window> windows, const FeatureNormalizer& normalizer,
                            int class_count) {
  FeatureSet fs;
  fs.class_count = class_count;
  fs.vectors = combine_families(time_domain_families(windows), normalizer);
  for (const auto& w : windows) {
    fs.labels.push_back(w.class_id);
    fs.repetitions.push_back(w.repetition);
  }
  fs.validate();
  return fs;
}

HistogramRanges fit_histogram_ranges(std::span<const Window> windows, double sigmas) {
  const int channels = common_channels(windows);
  if (channels == 0) throw DomainError("cannot fit histogram ranges on zero windows");
  HistogramRanges ranges{Eigen::VectorXd(channels), Eigen::VectorXd(channels)};
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& w : windows)
      for (double x : channel_span(w, c)) {
        sum += x;
        sq += x * x;
        n += 1.0;
      }
    const double mean = sum / n;
    double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    if (!(sd > 0.0)) sd = 1.0;
    ranges.lo(c) = mean - sigmas * sd;
    ranges.hi(c) = mean + sigmas * sd;
  }
  return ranges;
}

FeatureSet extract_histogram(std::span<const Window> windows, int bins,
                             const HistogramRanges& ranges, int class_count) {
  const int channels = common_channels(windows);
  if (ranges.lo.size() != channels || ranges.hi.size() != channels)
    throw DomainError("histogram ranges do not match channel count");
  FeatureSet fs;
  fs.class_count = class_count;
  fs.vectors.resize(static_cast<Eigen::Index>(windows.size()), channels * bins);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (int c = 0; c < channels; ++c)
      fs.vectors.row(static_cast<Eigen::Index>(i)).segment(c * bins, bins) =
          semg_histogram(channel_span(windows[i], c), bins, ranges.lo(c), ranges.hi(c)).transpose();
    fs.labels.push_back(windows[i].class_id);
    fs.repetitions.push_back(windows[i].repetition);
  }
  fs.validate();
  return fs;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureSet& fs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "label,repetition";
  for (Eigen::Index j = 0; j < fs.dim(); ++j) out << ",f" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    out << fs.labels[i] << ',' << fs.repetitions[i];
    for (Eigen::Index j = 0; j < fs.dim(); ++j) out << ',' << fs.vectors(static_cast<Eigen::Index>(i), j);
    out << '\n';
  }
}

FeatureSet read_feature_csv(const std::filesystem::path& path, int class_count) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty feature file " + path.string());
  const auto header_fields = std::count(line.begin(), line.end(), ',') + 1;
  if (header_fields < 2 || !line.starts_with("label,repetition"))
    throw SchemaError("feature file header must start with label,repetition");
  const Eigen::Index dim = header_fields - 2;

  std::vector<std::vector<double>> rows;
  FeatureSet fs;
  fs.class_count = class_count;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<Eigen::Index>(cells.size()) != dim + 2)
      throw ParseError("ragged feature row", line_no);
    try {
      fs.labels.push_back(std::stoi(cells[0]));
      fs.repetitions.push_back(std::stoi(cells[1]));
      std::vector<double> row;
      for (Eigen::Index j = 0; j < dim; ++j) row.push_back(std::stod(cells[static_cast<std::size_t>(j + 2)]));
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw ParseError("malformed number in feature row", line_no);
    }
  }
  fs.vectors.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < dim; ++j) fs.vectors(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  fs.validate();
  return fs;
}

}  // namespace myoadapt
