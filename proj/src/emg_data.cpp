#include "myoadapt/emg_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "myoadapt/error.hpp"

namespace myoadapt {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  for (;;) {
    std::size_t comma = line.find(',', begin);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(begin)));
      return fields;
    }
    fields.push_back(trim(line.substr(begin, comma - begin)));
    begin = comma + 1;
  }
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError("not a number: '" + std::string(field) + "'", line);
  return v;
}

int parse_int(std::string_view field, std::size_t line, const std::string& column) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec == std::errc() && ptr == field.data() + field.size()) return v;
  // Exports sometimes write integer columns as "3.0".
  double d = parse_double(field, line);
  if (std::floor(d) != d || std::abs(d) > 1e9)
    throw ParseError("non-integer value in column " + column + ": '" + std::string(field) + "'",
                     line);
  return static_cast<int>(d);
}

}  // namespace

Recording load_recording(const std::filesystem::path& path, const CsvSchema& schema,
                         std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open recording " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty recording file " + path.string());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM

  const auto header = split_csv(line);
  std::map<int, std::size_t> emg_cols;  // channel index -> column
  std::ptrdiff_t label_col = -1, rep_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string_view name = header[c];
    if (name == schema.label_column) {
      label_col = static_cast<std::ptrdiff_t>(c);
    } else if (name == schema.repetition_column) {
      rep_col = static_cast<std::ptrdiff_t>(c);
    } else if (name.starts_with(schema.emg_prefix)) {
      std::string_view idx = name.substr(schema.emg_prefix.size());
      int channel = 0;
      auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), channel);
      if (ec == std::errc() && ptr == idx.data() + idx.size()) emg_cols[channel] = c;
    }
  }
  if (label_col < 0) throw SchemaError("missing column " + schema.label_column);
  if (rep_col < 0) throw SchemaError("missing column " + schema.repetition_column);
  if (emg_cols.empty()) throw SchemaError("no columns with prefix " + schema.emg_prefix);
  if (schema.channels > 0 && static_cast<int>(emg_cols.size()) != schema.channels)
    throw SchemaError("schema declares " + std::to_string(schema.channels) +
                      " emg channels, file has " + std::to_string(emg_cols.size()));

  const int channels = static_cast<int>(emg_cols.size());
  std::vector<double> values;
  Recording rec;
  rec.channels = channels;
  rec.sample_rate = schema.sample_rate;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    for (const auto& [channel, col] : emg_cols) values.push_back(parse_double(fields[col], line_no));
    rec.labels.push_back(parse_int(fields[label_col], line_no, schema.label_column));
    rec.repetitions.push_back(parse_int(fields[rep_col], line_no, schema.repetition_column));
  }

  const auto rows = static_cast<Eigen::Index>(rec.labels.size());
  rec.samples = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, channels);
  if (warnings) {
    auto w = check_rest_bracketing(rec);
    warnings->insert(warnings->end(), w.begin(), w.end());
  }
  return rec;
}

void save_recording(const std::filesystem::path& path, const Recording& rec) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write recording " + path.string());
  for (int c = 0; c < rec.channels; ++c) out << "emg" << (c + 1) << ',';
  out << "restimulus,rerepetition\n";
  out << std::setprecision(17);
  for (std::size_t t = 0; t < rec.length(); ++t) {
    for (int c = 0; c < rec.channels; ++c) out << rec.samples(static_cast<Eigen::Index>(t), c) << ',';
    out << rec.labels[t] << ',' << rec.repetitions[t] << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::string> check_rest_bracketing(const Recording& rec) {
  std::vector<std::string> warnings;
  const std::size_t n = rec.length();
  std::size_t t = 0;
  while (t < n) {
    std::size_t end = t;
    while (end < n && rec.labels[end] == rec.labels[t]) ++end;
    if (rec.labels[t] != 0) {
      const bool rest_before = t > 0 && rec.labels[t - 1] == 0;
      const bool rest_after = end < n && rec.labels[end] == 0;
      if (!rest_before || !rest_after)
        warnings.push_back("movement run of class " + std::to_string(rec.labels[t]) +
                           " at samples [" + std::to_string(t) + ", " + std::to_string(end) +
                           ") is not bracketed by rest");
    }
    t = end;
  }
  return warnings;
}

std::vector<Segment> segment_by_label(const Recording& rec) {
  std::vector<Segment> segments;
  const auto n = static_cast<Eigen::Index>(rec.length());
  Eigen::Index t = 0;
  while (t < n) {
    Eigen::Index end = t;
    while (end < n && rec.labels[end] == rec.labels[t]) ++end;
    Segment seg;
    seg.class_id = rec.labels[t];
    seg.repetition = rec.repetitions[t];
    seg.samples = std::make_shared<const Eigen::MatrixXd>(rec.samples.middleRows(t, end - t));
    segments.push_back(std::move(seg));
    t = end;
  }
  return segments;
}

void inherit_rest_repetitions(std::vector<Segment>& segments) {
  int next_rep = 0;
  for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
    if (it->class_id != 0)
      next_rep = it->repetition;
    else if (it->repetition == 0)
      it->repetition = next_rep;
  }
  // Trailing rest has no following movement: use the previous one.
  int prev_rep = 0;
  for (auto& seg : segments) {
    if (seg.class_id != 0)
      prev_rep = seg.repetition;
    else if (seg.repetition == 0)
      seg.repetition = prev_rep;
  }
}

void WindowingConfig::validate() const {
  if (window_len <= 0) throw ConfigError("window_len must be positive");
  if (shift <= 0 || shift > window_len) throw ConfigError("shift must be in (0, window_len]");
}

std::vector<Window> window_segment(const Segment& seg, const WindowingConfig& cfg) {
  cfg.validate();
  std::vector<Window> windows;
  const Eigen::Index len = seg.length();
  for (Eigen::Index start = 0; start + cfg.window_len <= len; start += cfg.shift)
    windows.push_back(Window{seg.samples, start, cfg.window_len, seg.class_id, seg.repetition});
  return windows;
}

std::vector<Window> window_segments(std::span<const Segment> segments,
                                    const WindowingConfig& cfg) {
  std::vector<Window> windows;
  for (const auto& seg : segments) {
    auto w = window_segment(seg, cfg);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  return windows;
}

void check_disjoint(const std::set<int>& train_reps, const std::set<int>& test_reps) {
  for (int r : train_reps)
    if (test_reps.count(r))
      throw ConfigError("repetition " + std::to_string(r) + " is in both train and test sets");
}

void check_stride(std::size_t stride) {
  if (stride < 1) throw ConfigError("subsample stride must be >= 1");
}

void SyntheticSubjectSpec::validate() const {
  if (class_count() < 2) throw ConfigError("synthetic subject needs at least one movement");
  if (channels < 1) throw ConfigError("synthetic subject needs at least one channel");
  if (amplitude.rows() != class_count() || amplitude.cols() != channels ||
      noise.rows() != class_count() || noise.cols() != channels)
    throw ConfigError("amplitude/noise tables must be (movements + 1) x channels");
  if (gain.size() != channels || offset.size() != channels)
    throw ConfigError("gain/offset must have one entry per channel");
  if ((gain.array() <= 0.0).any()) throw ConfigError("channel gains must be positive");
  if (run_variability < 0.0 || envelope_variability < 0.0)
    throw ConfigError("amplitude variabilities must be >= 0");
  if (!(envelope_corr_len > 0.0)) throw ConfigError("envelope correlation length must be positive");
}

Recording generate_synthetic_recording(const SyntheticSubjectSpec& spec, int reps,
                                       int movement_len, int rest_len) {
  spec.validate();
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (movement_len < 1 || rest_len < 1) throw ConfigError("run lengths must be positive");

  const int runs_per_round = 2 * spec.movement_count;
  const Eigen::Index total =
      static_cast<Eigen::Index>(reps) * spec.movement_count * (movement_len + rest_len) + rest_len;

  Recording rec;
  rec.channels = spec.channels;
  rec.sample_rate = spec.sample_rate;
  rec.samples.resize(total, spec.channels);
  rec.labels.reserve(static_cast<std::size_t>(total));
  rec.repetitions.reserve(static_cast<std::size_t>(total));

  std::mt19937_64 rng(spec.seed);
  std::mt19937_64 mod_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = std::exp(-1.0 / spec.envelope_corr_len);
  const double innovation = std::sqrt(1.0 - rho * rho) * spec.envelope_variability;
  Eigen::VectorXd run_factor(spec.channels), log_env(spec.channels);
  Eigen::Index t = 0;
  auto emit = [&](int class_id, int rep, int len) {
    for (int c = 0; c < spec.channels; ++c) {
      run_factor(c) = std::exp(spec.run_variability * normal(mod_rng));
      log_env(c) = spec.envelope_variability * normal(mod_rng);
    }
    for (int s = 0; s < len; ++s, ++t) {
      for (int c = 0; c < spec.channels; ++c) {
        log_env(c) = rho * log_env(c) + innovation * normal(mod_rng);
        const double m = run_factor(c) * std::exp(log_env(c));
        const double z = normal(rng);
        const double e = normal(rng);
        rec.samples(t, c) =
            spec.gain(c) * (spec.amplitude(class_id, c) * m * z + spec.noise(class_id, c) * e) +
            spec.offset(c);
      }
      rec.labels.push_back(class_id);
      rec.repetitions.push_back(rep);
    }
  };
  for (int r = 1; r <= reps; ++r) {
    for (int run = 0; run < runs_per_round; ++run) {
      if (run % 2 == 0)
        emit(0, r, rest_len);
      else
        emit(run / 2 + 1, r, movement_len);
    }
  }
  emit(0, reps, rest_len);
  return rec;
}

std::string synthetic_subject_id(int index) {
  std::ostringstream os;
  os << 's' << std::setw(2) << std::setfill('0') << (index + 1);
  return os.str();
}

std::vector<SyntheticSubjectSpec> make_cohort_specs(const SyntheticCohortSpec& cohort) {
  if (cohort.subjects < 1) throw ConfigError("cohort needs at least one subject");
  if (cohort.movement_count < 1) throw ConfigError("cohort needs at least one movement");
  if (!(cohort.amplitude_lo > 0.0 && cohort.amplitude_hi > cohort.amplitude_lo))
    throw ConfigError("cohort amplitude range must satisfy 0 < lo < hi");

  const int classes = cohort.movement_count + 1;
  std::mt19937_64 rng(cohort.seed);
  std::uniform_real_distribution<double> uniform(cohort.amplitude_lo, cohort.amplitude_hi);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd pattern(classes, cohort.channels);
  for (int c = 0; c < cohort.channels; ++c) {
    // Rest is a low, flat activation.
    pattern(0, c) = 0.5 * cohort.amplitude_lo;
    for (int k = 1; k < classes; ++k) pattern(k, c) = uniform(rng);
  }

  std::vector<SyntheticSubjectSpec> specs;
  for (int s = 0; s < cohort.subjects; ++s) {
    SyntheticSubjectSpec spec;
    spec.movement_count = cohort.movement_count;
    spec.channels = cohort.channels;
    spec.amplitude.resize(classes, cohort.channels);
    spec.noise = Eigen::MatrixXd::Constant(classes, cohort.channels, cohort.noise_level);
    spec.gain.resize(cohort.channels);
    spec.offset.resize(cohort.channels);
    for (int k = 0; k < classes; ++k)
      for (int c = 0; c < cohort.channels; ++c)
        spec.amplitude(k, c) =
            pattern(k, c) * std::max(0.05, 1.0 + cohort.pattern_jitter * normal(rng));
    for (int c = 0; c < cohort.channels; ++c) {
      spec.gain(c) = std::exp(cohort.gain_spread * normal(rng));
      spec.offset(c) = cohort.offset_spread * normal(rng);
    }
    spec.seed = cohort.seed * 1000003ULL + static_cast<std::uint64_t>(s) + 1;
    spec.run_variability = cohort.run_variability;
    spec.envelope_variability = cohort.envelope_variability;
    spec.envelope_corr_len = cohort.envelope_corr_len;
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace myoadapt
