#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "myoadapt/emg_data.hpp"
#include "myoadapt/evaluation.hpp"
#include "myoadapt/features.hpp"
#include "myoadapt/serialization.hpp"

namespace myoadapt {

enum class CohortKind { synthetic, csv };

struct CohortConfig {
  CohortKind kind = CohortKind::synthetic;
  SyntheticCohortSpec synthetic;
  std::filesystem::path directory;     // csv: one <subject>.csv per subject
  std::vector<std::string> subjects;   // csv: empty = every *.csv in the directory
  CsvSchema schema;
  int class_count = 0;  // csv: 0 = largest label in the cohort + 1
};

enum class ExperimentMode {
  leave_one_out,  // every target uses all other listed subjects as sources
  fixed_sources,  // the same disjoint source list for every target
};

enum class FeatureKind { combined, histogram };

struct ExperimentConfig {
  CohortConfig cohort;
  ExperimentMode mode = ExperimentMode::leave_one_out;
  std::vector<std::string> targets;  // empty = every subject
  std::vector<std::string> sources;  // empty = every subject (leave-one-out only)
  std::vector<Method> methods = all_methods();

  WindowingConfig windowing;
  std::set<int> train_repetitions{1, 3, 4, 6};
  std::set<int> test_repetitions{2, 5};
  std::size_t train_stride = 10;
  std::size_t test_stride = 10;

  FeatureKind features = FeatureKind::combined;
  bool normalize_families = true;  // combined: standardize MAV, Var, WL before averaging
  int histogram_bins = 20;

  GridSpec grid;
  int folds = 5;
  std::vector<std::size_t> steps{120, 240, 360, 480};
  CurveOrder order = CurveOrder::prefix;
  BetaSearchOptions beta;
  MkalConfig mkal;
  std::optional<std::uint64_t> mkal_seed;  // defaults to the target seed
  double hl2l_fraction = 0.63;
  KernelKind hl2l_second_kernel = KernelKind::rbf;
  PriorFeaturesMode prior_mode = PriorFeaturesMode::score_stacking;

  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path cache_dir;  // empty = <output_dir>/source_cache
  int jobs = 1;

  void validate() const;
  std::filesystem::path effective_cache_dir() const;
};

// Unknown keys and malformed values throw ConfigError. Relative cohort
// directories are resolved against `base_dir`.
ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> cohort_subjects(const CohortConfig& cohort);
Recording load_subject_recording(const CohortConfig& cohort, const std::string& id);

// Windowed, split, subsampled and normalized data of one subject. The
// normalizer (or histogram ranges) is fit on the training pool.
struct SubjectData {
  std::string id;
  FeatureSet train;
  FeatureSet test;
};

SubjectData prepare_subject(const ExperimentConfig& cfg, const std::string& id);
SubjectData prepare_recording(const ExperimentConfig& cfg, const std::string& id,
                              const Recording& rec, int class_count);

// FNV-1a, 64 bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ULL);
std::string hex64(std::uint64_t v);

// Key of a source model: content of the training pool plus everything that
// influences training.
std::uint64_t source_cache_key(const FeatureSet& pool, const GridSpec& grid, int folds);

struct SourceCacheReport {
  std::vector<std::string> trained;
  std::vector<std::string> reused;
  std::map<std::string, std::shared_ptr<const MulticlassModel>> models;
};

// Trains (grid search + one-vs-all LS-SVM) or reloads each source. Entries
// with a mismatching key, a bad checksum or unreadable content are retrained.
SourceCacheReport build_source_cache(const ExperimentConfig& cfg,
                                     const std::map<std::string, SubjectData>& data,
                                     const std::vector<std::string>& ids);
SourceCacheReport build_source_cache(const ExperimentConfig& cfg);

// Sources used for each target under the configured mode.
std::map<std::string, std::vector<std::string>> source_assignment(
    const ExperimentConfig& cfg, const std::vector<std::string>& subjects);

struct TargetFailure {
  std::string target;
  std::string kind;  // config | data | numeric | domain | internal
  std::string message;
  int exit_code = 1;
};

struct ExperimentOutcome {
  std::vector<std::string> completed;
  std::vector<TargetFailure> failures;
  int exit_code = 0;
};

// Writes under cfg.output_dir:
//   learning_curve.csv          target,step,method,balanced_accuracy
//   correlation.csv, overlap.csv (methods at the last step, pooled over targets)
//   summary.json                config echo, seed manifest, outcome
//   errors.json                 only when a target failed
//   targets/<id>/...            per-target curve, confusion and histogram files
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

// Mean / best / worst curve per method across the targets of a finished
// run, written to <dir>/report.csv. Best and worst targets are those with
// the highest and lowest accuracy averaged over steps.
void write_report(const std::filesystem::path& run_dir);

// Writes <out>/<subject>.csv for every synthetic subject.
std::vector<std::filesystem::path> write_synthetic_cohort(const SyntheticCohortSpec& spec,
                                                          const std::filesystem::path& out);

int exit_code_for(const std::exception& e);

}  // namespace myoadapt
