#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace myoadapt {

// Internal class ids are 0-based with 0 = rest. Reports use the 1-based
// numbering of the original protocol, where label 1 is rest.
//
//   internal id   reported label   meaning
//   0             1                rest posture
//   1..17         2..18            movements
constexpr int to_reported_label(int class_id) { return class_id + 1; }
constexpr int from_reported_label(int label) { return label - 1; }

struct Recording {
  int channels = 0;
  Eigen::MatrixXd samples;  // time x channels
  std::vector<int> labels;
  std::vector<int> repetitions;
  double sample_rate = 2000.0;

  std::size_t length() const { return labels.size(); }
};

// Column mapping for CSV recordings. One header row, one row per time sample.
struct CsvSchema {
  std::string emg_prefix = "emg";
  int channels = 0;  // 0 = infer from the header
  std::string label_column = "restimulus";
  std::string repetition_column = "rerepetition";
  double sample_rate = 2000.0;
};

// Reads a recording. Labels come from the a-posteriori (restimulus) column
// verbatim. Structural irregularities (a movement run not bracketed by rest)
// are appended to `warnings` when given.
Recording load_recording(const std::filesystem::path& path, const CsvSchema& schema,
                         std::vector<std::string>* warnings = nullptr);

void save_recording(const std::filesystem::path& path, const Recording& rec);

// Movement runs not bracketed by rest, as human readable messages.
std::vector<std::string> check_rest_bracketing(const Recording& rec);

struct Segment {
  int class_id = 0;
  int repetition = 0;
  std::shared_ptr<const Eigen::MatrixXd> samples;  // time x channels

  Eigen::Index length() const { return samples ? samples->rows() : 0; }
};

// One segment per maximal constant-label run, in temporal order. The
// segment's repetition is the repetition index at its first sample.
std::vector<Segment> segment_by_label(const Recording& rec);

// Rest rows carry repetition 0 in the published exports. Gives every rest
// segment with repetition 0 the repetition of the next movement segment
// (the previous one for trailing rest) so rest windows can be split too.
void inherit_rest_repetitions(std::vector<Segment>& segments);

struct WindowingConfig {
  int window_len = 400;
  int shift = 20;

  void validate() const;
};

// A window is a view into its segment's sample matrix.
struct Window {
  std::shared_ptr<const Eigen::MatrixXd> source;
  Eigen::Index start = 0;
  Eigen::Index length = 0;
  int class_id = 0;
  int repetition = 0;

  auto samples() const { return source->middleRows(start, length); }
  int channels() const { return static_cast<int>(source->cols()); }
};

std::vector<Window> window_segment(const Segment& seg, const WindowingConfig& cfg);
std::vector<Window> window_segments(std::span<const Segment> segments,
                                    const WindowingConfig& cfg);

template <class Item>
struct RepetitionSplit {
  std::vector<Item> train;
  std::vector<Item> test;
};

void check_disjoint(const std::set<int>& train_reps, const std::set<int>& test_reps);

// Routes items by their `repetition` member; items in neither set are dropped.
template <class Item>
RepetitionSplit<Item> split_by_repetition(std::span<const Item> items,
                                          const std::set<int>& train_reps,
                                          const std::set<int>& test_reps) {
  check_disjoint(train_reps, test_reps);
  RepetitionSplit<Item> out;
  for (const Item& item : items) {
    if (train_reps.count(item.repetition))
      out.train.push_back(item);
    else if (test_reps.count(item.repetition))
      out.test.push_back(item);
  }
  return out;
}

void check_stride(std::size_t stride);

// Keeps items 0, stride, 2*stride, ...
template <class Item>
std::vector<Item> subsample(std::span<const Item> items, std::size_t stride) {
  check_stride(stride);
  std::vector<Item> out;
  out.reserve(items.size() / stride + 1);
  for (std::size_t i = 0; i < items.size(); i += stride) out.push_back(items[i]);
  return out;
}

// Per-subject generator parameters. Row 0 of the amplitude and noise tables
// is rest; rows 1..movement_count are movements.
struct SyntheticSubjectSpec {
  int movement_count = 2;
  int channels = 2;
  Eigen::MatrixXd amplitude;  // (movement_count + 1) x channels
  Eigen::MatrixXd noise;      // (movement_count + 1) x channels
  Eigen::VectorXd gain;       // channels, > 0
  Eigen::VectorXd offset;     // channels
  std::uint64_t seed = 0;
  double sample_rate = 2000.0;
  // Amplitude modulation, both log-normal: one factor per run and channel,
  // and a slowly varying envelope (AR(1) in log space with the given
  // correlation length in samples).
  double run_variability = 0.0;
  double envelope_variability = 0.0;
  double envelope_corr_len = 400.0;

  int class_count() const { return movement_count + 1; }
  void validate() const;
};

// Sample model per channel c in class k:
//   x_t = gain_c * (amplitude_kc * m_t * z_t + noise_kc * e_t) + offset_c
// with z, e independent standard normal streams drawn from the seed and m_t
// the amplitude modulation (1 when both variabilities are 0). None of the
// streams depends on gain/offset, so two subjects differing only in their
// shift are related by the channel-wise affine map.
//
// Run order: for each repetition r, for each movement m: rest, m; then a
// closing rest. Rest runs take the repetition of their round.
Recording generate_synthetic_recording(const SyntheticSubjectSpec& spec, int reps,
                                       int movement_len, int rest_len);

// Cohort-level generator: a shared class amplitude pattern, perturbed per
// subject, plus per-subject channel gain and offset.
struct SyntheticCohortSpec {
  int subjects = 4;
  int movement_count = 5;
  int channels = 8;
  int reps = 6;
  int movement_len = 4380;
  int rest_len = 1180;
  double amplitude_lo = 0.2;
  double amplitude_hi = 1.0;
  double noise_level = 0.05;
  double pattern_jitter = 0.15;  // relative per-subject amplitude perturbation
  double gain_spread = 0.3;      // log-normal sigma of channel gains
  double offset_spread = 0.05;
  double run_variability = 0.0;
  double envelope_variability = 0.0;
  double envelope_corr_len = 400.0;
  std::uint64_t seed = 1;
};

std::vector<SyntheticSubjectSpec> make_cohort_specs(const SyntheticCohortSpec& cohort);
std::string synthetic_subject_id(int index);

}  // namespace myoadapt
