#include "myoadapt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "myoadapt/error.hpp"

namespace myoadapt {

namespace fs = std::filesystem;

namespace {

// Reads one JSON object, rejecting keys that were never asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const Json& at(const char* key) const { return j_.at(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key " + where_ + "." + key);
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << body;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are
// collected per index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn,
                  std::vector<std::exception_ptr>& errors) {
  errors.assign(n, nullptr);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string kind_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  return "internal";
}

std::string mode_name(ExperimentMode m) {
  return m == ExperimentMode::leave_one_out ? "leave_one_out" : "fixed_sources";
}

std::string prior_mode_name(PriorFeaturesMode m) {
  return m == PriorFeaturesMode::score_stacking ? "score_stacking" : "source_data_only";
}

Json synthetic_to_json(const SyntheticCohortSpec& s) {
  return {{"subjects", s.subjects},         {"movement_count", s.movement_count},
          {"channels", s.channels},         {"reps", s.reps},
          {"movement_len", s.movement_len}, {"rest_len", s.rest_len},
          {"amplitude_lo", s.amplitude_lo}, {"amplitude_hi", s.amplitude_hi},
          {"noise_level", s.noise_level},   {"pattern_jitter", s.pattern_jitter},
          {"gain_spread", s.gain_spread},   {"offset_spread", s.offset_spread},
          {"run_variability", s.run_variability},
          {"envelope_variability", s.envelope_variability},
          {"envelope_corr_len", s.envelope_corr_len},
          {"seed", s.seed}};
}

SyntheticCohortSpec synthetic_from_json(const Json& j, std::uint64_t default_seed) {
  SyntheticCohortSpec s;
  s.seed = default_seed;
  ObjectReader r(j, "cohort.synthetic");
  r.get("subjects", s.subjects);
  r.get("movement_count", s.movement_count);
  r.get("channels", s.channels);
  r.get("reps", s.reps);
  r.get("movement_len", s.movement_len);
  r.get("rest_len", s.rest_len);
  r.get("amplitude_lo", s.amplitude_lo);
  r.get("amplitude_hi", s.amplitude_hi);
  r.get("noise_level", s.noise_level);
  r.get("pattern_jitter", s.pattern_jitter);
  r.get("gain_spread", s.gain_spread);
  r.get("offset_spread", s.offset_spread);
  r.get("run_variability", s.run_variability);
  r.get("envelope_variability", s.envelope_variability);
  r.get("envelope_corr_len", s.envelope_corr_len);
  r.get("seed", s.seed);
  r.finish();
  return s;
}

std::uint64_t target_seed(std::uint64_t master, const std::string& id) {
  return fnv1a(id, fnv1a(hex64(master)));
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const Json::exception*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const DomainError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

void ExperimentConfig::validate() const {
  if (cohort.kind == CohortKind::csv && cohort.directory.empty())
    throw ConfigError("csv cohort needs a directory");
  if (methods.empty()) throw ConfigError("no methods requested");
  windowing.validate();
  check_disjoint(train_repetitions, test_repetitions);
  if (train_repetitions.empty() || test_repetitions.empty())
    throw ConfigError("train and test repetition sets must be nonempty");
  check_stride(train_stride);
  check_stride(test_stride);
  if (histogram_bins < 1) throw ConfigError("histogram bins must be >= 1");
  (void)grid.normalized();
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (steps.empty()) throw ConfigError("curve needs at least one step");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] == 0) throw ConfigError("curve steps must be positive");
    if (i > 0 && steps[i] <= steps[i - 1]) throw ConfigError("curve steps must increase strictly");
  }
  mkal.validate();
  if (!(hl2l_fraction > 0.0 && hl2l_fraction < 1.0)) throw ConfigError("hl2l fraction must lie in (0, 1)");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (mode == ExperimentMode::fixed_sources) {
    if (sources.empty()) throw ConfigError("fixed_sources mode needs a source list");
    for (const auto& t : targets)
      if (std::find(sources.begin(), sources.end(), t) != sources.end())
        throw ConfigError("subject " + t + " is both target and source in fixed_sources mode");
  }
}

fs::path ExperimentConfig::effective_cache_dir() const {
  return cache_dir.empty() ? output_dir / "source_cache" : cache_dir;
}

ExperimentConfig config_from_json(const Json& j, const fs::path& base_dir) {
  ExperimentConfig cfg;
  ObjectReader top(j, "config");
  top.get("seed", cfg.seed);

  if (top.has("cohort")) {
    ObjectReader c(top.at("cohort"), "cohort");
    const bool synthetic = c.has("synthetic");
    const bool csv = c.has("csv");
    if (synthetic == csv) throw ConfigError("cohort needs exactly one of 'synthetic' or 'csv'");
    if (synthetic) {
      cfg.cohort.kind = CohortKind::synthetic;
      cfg.cohort.synthetic = synthetic_from_json(c.at("synthetic"), cfg.seed);
    } else {
      cfg.cohort.kind = CohortKind::csv;
      ObjectReader r(c.at("csv"), "cohort.csv");
      std::string dir;
      r.get("directory", dir);
      cfg.cohort.directory = fs::path(dir).is_relative() && !base_dir.empty() ? base_dir / dir : fs::path(dir);
      r.get("subjects", cfg.cohort.subjects);
      r.get("class_count", cfg.cohort.class_count);
      if (r.has("schema")) {
        ObjectReader s(r.at("schema"), "cohort.csv.schema");
        s.get("emg_prefix", cfg.cohort.schema.emg_prefix);
        s.get("channels", cfg.cohort.schema.channels);
        s.get("label_column", cfg.cohort.schema.label_column);
        s.get("repetition_column", cfg.cohort.schema.repetition_column);
        s.get("sample_rate", cfg.cohort.schema.sample_rate);
        s.finish();
      }
      r.finish();
    }
    c.finish();
  } else {
    cfg.cohort.synthetic.seed = cfg.seed;
  }

  std::string mode = mode_name(cfg.mode);
  top.get("mode", mode);
  if (mode == "leave_one_out")
    cfg.mode = ExperimentMode::leave_one_out;
  else if (mode == "fixed_sources")
    cfg.mode = ExperimentMode::fixed_sources;
  else
    throw ConfigError("unknown mode '" + mode + "'");

  top.get("targets", cfg.targets);
  top.get("sources", cfg.sources);
  if (top.has("methods")) {
    std::vector<std::string> names;
    top.get("methods", names);
    cfg.methods.clear();
    for (const auto& n : names) cfg.methods.push_back(method_from_string(n));
  }

  if (top.has("windowing")) {
    ObjectReader r(top.at("windowing"), "windowing");
    r.get("window_len", cfg.windowing.window_len);
    r.get("shift", cfg.windowing.shift);
    r.finish();
  }
  if (top.has("split")) {
    ObjectReader r(top.at("split"), "split");
    r.get("train_repetitions", cfg.train_repetitions);
    r.get("test_repetitions", cfg.test_repetitions);
    r.get("train_stride", cfg.train_stride);
    r.get("test_stride", cfg.test_stride);
    r.finish();
  }
  if (top.has("features")) {
    ObjectReader r(top.at("features"), "features");
    std::string kind = "combined";
    r.get("kind", kind);
    if (kind == "combined")
      cfg.features = FeatureKind::combined;
    else if (kind == "histogram")
      cfg.features = FeatureKind::histogram;
    else
      throw ConfigError("unknown feature kind '" + kind + "'");
    r.get("bins", cfg.histogram_bins);
    r.get("normalize", cfg.normalize_families);
    r.finish();
  }
  if (top.has("grid")) {
    ObjectReader r(top.at("grid"), "grid");
    r.get("C", cfg.grid.C);
    r.get("gamma", cfg.grid.gamma);
    r.get("folds", cfg.folds);
    r.finish();
  }
  if (top.has("curve")) {
    ObjectReader r(top.at("curve"), "curve");
    r.get("steps", cfg.steps);
    std::string order = to_string(cfg.order);
    r.get("order", order);
    cfg.order = curve_order_from_string(order);
    r.finish();
  }
  if (top.has("multi_adapt")) {
    ObjectReader r(top.at("multi_adapt"), "multi_adapt");
    r.get("candidates", cfg.beta.candidates);
    r.get("sweeps", cfg.beta.sweeps);
    r.get("beta_max", cfg.beta.beta_max);
    r.get("allow_negative", cfg.beta.allow_negative);
    r.get("per_class", cfg.beta.per_class);
    r.get("select_C", cfg.beta.select_C);
    r.finish();
  }
  if (top.has("mkal")) {
    ObjectReader r(top.at("mkal"), "mkal");
    r.get("p", cfg.mkal.p);
    r.get("epochs", cfg.mkal.epochs);
    r.get("eta0", cfg.mkal.eta0);
    if (r.has("seed")) {
      std::uint64_t s = 0;
      r.get("seed", s);
      cfg.mkal_seed = s;
    }
    r.finish();
  }
  if (top.has("hl2l")) {
    ObjectReader r(top.at("hl2l"), "hl2l");
    r.get("fraction", cfg.hl2l_fraction);
    std::string kind = to_string(cfg.hl2l_second_kernel);
    r.get("second_kernel", kind);
    cfg.hl2l_second_kernel = kernel_kind_from_string(kind);
    r.finish();
  }
  if (top.has("prior_features")) {
    ObjectReader r(top.at("prior_features"), "prior_features");
    std::string mode_str = prior_mode_name(cfg.prior_mode);
    r.get("mode", mode_str);
    if (mode_str == "score_stacking")
      cfg.prior_mode = PriorFeaturesMode::score_stacking;
    else if (mode_str == "source_data_only")
      cfg.prior_mode = PriorFeaturesMode::source_data_only;
    else
      throw ConfigError("unknown prior_features mode '" + mode_str + "'");
    r.finish();
  }

  std::string out = cfg.output_dir.string(), cache;
  top.get("output_dir", out);
  top.get("cache_dir", cache);
  cfg.output_dir = out;
  cfg.cache_dir = cache;
  top.get("jobs", cfg.jobs);
  top.finish();
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json cohort;
  if (cfg.cohort.kind == CohortKind::synthetic) {
    cohort["synthetic"] = synthetic_to_json(cfg.cohort.synthetic);
  } else {
    const auto& s = cfg.cohort.schema;
    cohort["csv"] = {{"directory", cfg.cohort.directory.string()},
                     {"subjects", cfg.cohort.subjects},
                     {"class_count", cfg.cohort.class_count},
                     {"schema",
                      {{"emg_prefix", s.emg_prefix},
                       {"channels", s.channels},
                       {"label_column", s.label_column},
                       {"repetition_column", s.repetition_column},
                       {"sample_rate", s.sample_rate}}}};
  }
  std::vector<std::string> methods;
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  Json mkal = {{"p", cfg.mkal.p}, {"epochs", cfg.mkal.epochs}, {"eta0", cfg.mkal.eta0}};
  if (cfg.mkal_seed) mkal["seed"] = *cfg.mkal_seed;
  return {{"cohort", cohort},
          {"mode", mode_name(cfg.mode)},
          {"targets", cfg.targets},
          {"sources", cfg.sources},
          {"methods", methods},
          {"windowing", {{"window_len", cfg.windowing.window_len}, {"shift", cfg.windowing.shift}}},
          {"split",
           {{"train_repetitions", cfg.train_repetitions},
            {"test_repetitions", cfg.test_repetitions},
            {"train_stride", cfg.train_stride},
            {"test_stride", cfg.test_stride}}},
          {"features",
           {{"kind", cfg.features == FeatureKind::combined ? "combined" : "histogram"},
            {"bins", cfg.histogram_bins},
            {"normalize", cfg.normalize_families}}},
          {"grid", {{"C", cfg.grid.C}, {"gamma", cfg.grid.gamma}, {"folds", cfg.folds}}},
          {"curve", {{"steps", cfg.steps}, {"order", to_string(cfg.order)}}},
          {"multi_adapt",
           {{"candidates", cfg.beta.candidates},
            {"sweeps", cfg.beta.sweeps},
            {"beta_max", cfg.beta.beta_max},
            {"allow_negative", cfg.beta.allow_negative},
            {"per_class", cfg.beta.per_class},
            {"select_C", cfg.beta.select_C}}},
          {"mkal", mkal},
          {"hl2l", {{"fraction", cfg.hl2l_fraction}, {"second_kernel", to_string(cfg.hl2l_second_kernel)}}},
          {"prior_features", {{"mode", prior_mode_name(cfg.prior_mode)}}},
          {"seed", cfg.seed},
          {"output_dir", cfg.output_dir.string()},
          {"cache_dir", cfg.cache_dir.string()},
          {"jobs", cfg.jobs}};
}

ExperimentConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const DataError&) {
    throw ConfigError("cannot read config " + path.string());
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

std::vector<std::string> cohort_subjects(const CohortConfig& cohort) {
  std::vector<std::string> ids;
  if (cohort.kind == CohortKind::synthetic) {
    for (int s = 0; s < cohort.synthetic.subjects; ++s) ids.push_back(synthetic_subject_id(s));
    return ids;
  }
  if (!cohort.subjects.empty()) return cohort.subjects;
  if (!fs::is_directory(cohort.directory))
    throw DataError("cohort directory " + cohort.directory.string() + " does not exist");
  for (const auto& entry : fs::directory_iterator(cohort.directory))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw DataError("no csv recordings in " + cohort.directory.string());
  return ids;
}

Recording load_subject_recording(const CohortConfig& cohort, const std::string& id) {
  if (cohort.kind == CohortKind::synthetic) {
    const auto ids = cohort_subjects(cohort);
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw DataError("unknown synthetic subject '" + id + "'");
    const auto specs = make_cohort_specs(cohort.synthetic);
    const auto& c = cohort.synthetic;
    return generate_synthetic_recording(specs[static_cast<std::size_t>(it - ids.begin())], c.reps,
                                        c.movement_len, c.rest_len);
  }
  const fs::path path = cohort.directory / (id + ".csv");
  if (!fs::exists(path)) throw DataError("missing subject file " + path.string());
  return load_recording(path, cohort.schema);
}

SubjectData prepare_recording(const ExperimentConfig& cfg, const std::string& id,
                              const Recording& rec, int class_count) {
  auto segments = segment_by_label(rec);
  inherit_rest_repetitions(segments);
  const auto windows = window_segments(segments, cfg.windowing);
  const auto split = split_by_repetition<Window>(windows, cfg.train_repetitions, cfg.test_repetitions);
  const auto train = subsample<Window>(split.train, cfg.train_stride);
  const auto test = subsample<Window>(split.test, cfg.test_stride);
  if (train.empty()) throw DataError("subject " + id + " has no training windows");
  if (test.empty()) throw DataError("subject " + id + " has no test windows");

  SubjectData out;
  out.id = id;
  if (cfg.features == FeatureKind::combined) {
    const auto normalizer = cfg.normalize_families
                                ? fit_time_normalizer(train)
                                : FeatureNormalizer::identity(3 * static_cast<Eigen::Index>(rec.channels));
    out.train = extract_combined(train, normalizer, class_count);
    out.test = extract_combined(test, normalizer, class_count);
  } else {
    const auto ranges = fit_histogram_ranges(train);
    out.train = extract_histogram(train, cfg.histogram_bins, ranges, class_count);
    out.test = extract_histogram(test, cfg.histogram_bins, ranges, class_count);
  }
  return out;
}

SubjectData prepare_subject(const ExperimentConfig& cfg, const std::string& id) {
  const Recording rec = load_subject_recording(cfg.cohort, id);
  int classes = cfg.cohort.kind == CohortKind::synthetic ? cfg.cohort.synthetic.movement_count + 1
                                                         : cfg.cohort.class_count;
  if (classes == 0) classes = *std::max_element(rec.labels.begin(), rec.labels.end()) + 1;
  for (int label : rec.labels)
    if (label < 0 || label >= classes)
      throw DataError("subject " + id + " has label " + std::to_string(label) +
                      " outside the " + std::to_string(classes) + " configured classes");
  return prepare_recording(cfg, id, rec, classes);
}

namespace {

std::map<std::string, SubjectData> prepare_subjects(const ExperimentConfig& cfg,
                                                    const std::vector<std::string>& ids) {
  std::vector<SubjectData> prepared(ids.size());
  std::vector<std::exception_ptr> errors;
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) { prepared[i] = prepare_subject(cfg, ids[i]); },
               errors);
  rethrow_first(errors);
  int classes = 0;
  for (const auto& d : prepared) classes = std::max(classes, d.train.class_count);
  std::map<std::string, SubjectData> out;
  for (auto& d : prepared) {
    d.train.class_count = classes;
    d.test.class_count = classes;
    out.emplace(d.id, std::move(d));
  }
  return out;
}

void append_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

const char* const kCacheFormat = "myoadapt.source_cache.v1";

}  // namespace

std::uint64_t source_cache_key(const FeatureSet& pool, const GridSpec& grid, int folds) {
  std::string buf = kCacheFormat;
  const std::int64_t shape[3] = {pool.vectors.rows(), pool.vectors.cols(), pool.class_count};
  append_bytes(buf, shape, sizeof shape);
  for (Eigen::Index i = 0; i < pool.vectors.rows(); ++i)
    for (Eigen::Index j = 0; j < pool.vectors.cols(); ++j) {
      const double v = pool.vectors(i, j);
      append_bytes(buf, &v, sizeof v);
    }
  append_bytes(buf, pool.labels.data(), pool.labels.size() * sizeof(int));
  const GridSpec g = grid.normalized();
  for (double c : g.C) append_bytes(buf, &c, sizeof c);
  buf += '|';
  for (double c : g.gamma) append_bytes(buf, &c, sizeof c);
  append_bytes(buf, &folds, sizeof folds);
  return fnv1a(buf);
}

SourceCacheReport build_source_cache(const ExperimentConfig& cfg,
                                     const std::map<std::string, SubjectData>& data,
                                     const std::vector<std::string>& ids) {
  const fs::path dir = cfg.effective_cache_dir();
  fs::create_directories(dir);
  std::vector<std::shared_ptr<const MulticlassModel>> models(ids.size());
  std::vector<char> retrained(ids.size(), 0);
  std::vector<std::exception_ptr> errors;
  parallel_for(
      ids.size(), cfg.jobs,
      [&](std::size_t i) {
        const auto it = data.find(ids[i]);
        if (it == data.end()) throw DataError("no data for source " + ids[i]);
        const FeatureSet& pool = it->second.train;
        const std::string key = hex64(source_cache_key(pool, cfg.grid, cfg.folds));
        const fs::path file = dir / (ids[i] + ".json");

        if (fs::exists(file)) {
          try {
            const Json entry = Json::parse(read_text(file));
            const Json& model = entry.at("model");
            if (entry.at("format") == kCacheFormat && entry.at("key") == key &&
                entry.at("checksum") == hex64(fnv1a(model.dump()))) {
              auto m = std::make_shared<MulticlassModel>(multiclass_from_json(model));
              if (m->id == ids[i] && m->class_count == pool.class_count && m->dim() == pool.dim()) {
                models[i] = std::move(m);
                return;
              }
            }
          } catch (const std::exception&) {
            // unreadable or corrupted entry: retrain below
          }
        }

        const int folds = feasible_folds(pool, cfg.folds);
        if (folds < 2)
          throw ConfigError("source " + ids[i] + " has a class with too few items for cross-validation");
        const auto search = grid_search(pool, cfg.grid, folds, KernelKind::rbf);
        auto m = std::make_shared<MulticlassModel>(
            train_multiclass(pool, KernelSpec::rbf(search.gamma), search.C));
        m->id = ids[i];
        const Json model = model_to_json(*m);
        const Json entry = {{"format", kCacheFormat},
                            {"key", key},
                            {"checksum", hex64(fnv1a(model.dump()))},
                            {"grid_folds", folds},
                            {"model", model}};
        const fs::path tmp = dir / (ids[i] + ".json.tmp");
        write_text(tmp, entry.dump());
        fs::rename(tmp, file);
        // Use the reloaded model so fresh and cached runs see identical values.
        models[i] = std::make_shared<MulticlassModel>(multiclass_from_json(model));
        retrained[i] = 1;
      },
      errors);
  rethrow_first(errors);

  SourceCacheReport report;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    (retrained[i] ? report.trained : report.reused).push_back(ids[i]);
    report.models[ids[i]] = models[i];
  }
  return report;
}

std::map<std::string, std::vector<std::string>> source_assignment(
    const ExperimentConfig& cfg, const std::vector<std::string>& subjects) {
  auto require_known = [&](const std::vector<std::string>& ids, const char* what) {
    for (const auto& id : ids)
      if (std::find(subjects.begin(), subjects.end(), id) == subjects.end())
        throw DataError(std::string("unknown ") + what + " subject '" + id + "'");
  };
  require_known(cfg.targets, "target");
  require_known(cfg.sources, "source");

  const auto targets = cfg.targets.empty() ? subjects : cfg.targets;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& t : targets) {
    if (cfg.mode == ExperimentMode::fixed_sources) {
      if (std::find(cfg.sources.begin(), cfg.sources.end(), t) != cfg.sources.end())
        throw ConfigError("target " + t + " is also listed as a fixed source");
      out[t] = cfg.sources;
      continue;
    }
    std::vector<std::string> pool = cfg.sources.empty() ? subjects : cfg.sources;
    pool.erase(std::remove(pool.begin(), pool.end(), t), pool.end());
    if (pool.empty()) throw ConfigError("target " + t + " has no sources left");
    out[t] = std::move(pool);
  }
  return out;
}

namespace {

std::vector<std::string> target_list(const ExperimentConfig& cfg, const std::vector<std::string>& subjects) {
  return cfg.targets.empty() ? subjects : cfg.targets;
}

std::vector<std::string> needed_sources(const std::map<std::string, std::vector<std::string>>& assignment,
                                        const std::vector<std::string>& subjects) {
  std::set<std::string> used;
  for (const auto& [t, s] : assignment) used.insert(s.begin(), s.end());
  std::vector<std::string> out;
  for (const auto& id : subjects)
    if (used.count(id)) out.push_back(id);
  return out;
}

std::string curve_csv(const CurveResult& r, std::span<const Method> methods, const std::string& target) {
  std::string s = target.empty() ? "step,method,balanced_accuracy\n" : "";
  for (const auto& p : r.curve.points)
    for (Method m : methods) {
      if (!target.empty()) s += target + ",";
      s += std::to_string(p.n_train) + "," + to_string(m) + "," + fmt(p.balanced_accuracy.at(m)) + "\n";
    }
  return s;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string s = "predicted\\true";
  for (int t = 0; t < cm.classes(); ++t) s += "," + std::to_string(to_reported_label(t));
  s += "\n";
  for (int p = 0; p < cm.classes(); ++p) {
    s += std::to_string(to_reported_label(p));
    for (int t = 0; t < cm.classes(); ++t) s += "," + fmt(cm.values(p, t));
    s += "\n";
  }
  return s;
}

std::string histogram_csv(const TopkHistogram& h) {
  std::string s = "true_label,rank,predicted_label,fraction\n";
  for (std::size_t t = 0; t < h.size(); ++t)
    for (std::size_t r = 0; r < h[t].size(); ++r)
      s += std::to_string(to_reported_label(static_cast<int>(t))) + "," + std::to_string(r + 1) + "," +
           std::to_string(to_reported_label(h[t][r].class_id)) + "," + fmt(h[t][r].fraction) + "\n";
  return s;
}

int histogram_k(int classes) { return std::min(4, classes); }

void write_target_files(const fs::path& dir, const CurveResult& r, std::span<const Method> methods) {
  write_text(dir / "learning_curve.csv", curve_csv(r, methods, ""));
  for (const auto& [key, cm] : r.confusions) {
    const std::string tag = to_string(key.first) + "_" + std::to_string(key.second);
    write_text(dir / ("confusion_" + tag + ".csv"), confusion_csv(cm));
    write_text(dir / ("histogram_" + tag + ".csv"), histogram_csv(topk_histogram(cm, histogram_k(cm.classes()))));
  }
}

Json failure_json(const TargetFailure& f) {
  return {{"target", f.target}, {"kind", f.kind}, {"message", f.message}, {"exit_code", f.exit_code}};
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto subjects = cohort_subjects(cfg.cohort);
  const auto assignment = source_assignment(cfg, subjects);
  const auto targets = target_list(cfg, subjects);
  const auto source_ids = needed_sources(assignment, subjects);

  std::vector<std::string> to_load = source_ids;
  for (const auto& t : targets)
    if (std::find(to_load.begin(), to_load.end(), t) == to_load.end()) to_load.push_back(t);
  const auto data = prepare_subjects(cfg, to_load);
  const auto cache = build_source_cache(cfg, data, source_ids);

  fs::create_directories(cfg.output_dir / "targets");
  std::vector<std::optional<CurveResult>> results(targets.size());
  std::vector<std::uint64_t> seeds(targets.size());
  std::vector<std::exception_ptr> errors;
  parallel_for(
      targets.size(), cfg.jobs,
      [&](std::size_t i) {
        const std::string& id = targets[i];
        seeds[i] = target_seed(cfg.seed, id);
        const fs::path final_dir = cfg.output_dir / "targets" / id;
        const fs::path partial = cfg.output_dir / "targets" / (id + ".partial");
        fs::remove_all(final_dir);
        fs::remove_all(partial);

        SourceSet sources;
        CurveOptions opt;
        for (const auto& s : assignment.at(id)) {
          sources.push_back(cache.models.at(s));
          opt.source_data.push_back(data.at(s).train);
        }
        opt.grid = cfg.grid;
        opt.folds = cfg.folds;
        opt.order = cfg.order;
        opt.seed = seeds[i];
        opt.beta = cfg.beta;
        opt.mkal = cfg.mkal;
        opt.mkal.seed = cfg.mkal_seed.value_or(seeds[i]);
        opt.hl2l_fraction = cfg.hl2l_fraction;
        opt.hl2l_second_kernel = cfg.hl2l_second_kernel;
        opt.prior_mode = cfg.prior_mode;

        const auto& d = data.at(id);
        try {
          auto r = run_learning_curve(d.train, d.test, sources, cfg.methods, cfg.steps, opt);
          fs::create_directories(partial);
          write_target_files(partial, r, cfg.methods);
          fs::rename(partial, final_dir);
          results[i] = std::move(r);
        } catch (...) {
          std::error_code ec;
          fs::remove_all(partial, ec);
          throw;
        }
      },
      errors);

  ExperimentOutcome outcome;
  std::string curve = "target,step,method,balanced_accuracy\n";
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (errors[i]) {
      TargetFailure f;
      f.target = targets[i];
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        f.kind = kind_of(e);
        f.message = e.what();
        f.exit_code = exit_code_for(e);
      } catch (...) {
        f.kind = "internal";
        f.message = "unknown failure";
      }
      outcome.failures.push_back(std::move(f));
      continue;
    }
    outcome.completed.push_back(targets[i]);
    curve += curve_csv(*results[i], cfg.methods, targets[i]);
  }
  if (!outcome.failures.empty()) outcome.exit_code = outcome.failures.front().exit_code;
  write_text(cfg.output_dir / "learning_curve.csv", curve);

  // Pooled confusions at the last step, one setting per method.
  const std::size_t last = cfg.steps.back();
  std::vector<ConfusionMatrix> pooled;
  for (Method m : cfg.methods) {
    std::vector<ConfusionMatrix> per_target;
    for (const auto& r : results)
      if (r) per_target.push_back(r->confusions.at({m, last}));
    if (!per_target.empty()) pooled.push_back(mean_confusion(per_target));
  }
  std::string corr = "method";
  std::string overlap = "method_a,method_b,percentage,matched,total\n";
  if (pooled.size() == cfg.methods.size()) {
    for (Method m : cfg.methods) corr += "," + to_string(m);
    corr += "\n";
    if (pooled.size() >= 2) {
      std::vector<Eigen::VectorXd> rec;
      for (const auto& cm : pooled) rec.push_back(cm.per_class_recognition());
      const auto cc = class_correlation(rec);
      for (std::size_t a = 0; a < pooled.size(); ++a) {
        corr += to_string(cfg.methods[a]);
        for (std::size_t b = 0; b < pooled.size(); ++b) {
          const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
          corr += "," + (cc.defined(ia, ib) ? fmt(cc.values(ia, ib)) : std::string("NA"));
        }
        corr += "\n";
      }
      const int k = histogram_k(pooled.front().classes());
      const int threshold = std::min(3, k);
      std::vector<TopkHistogram> hists;
      for (const auto& cm : pooled) hists.push_back(topk_histogram(cm, k));
      for (std::size_t a = 0; a < pooled.size(); ++a)
        for (std::size_t b = a + 1; b < pooled.size(); ++b) {
          const auto o = overlap_percentage(hists[a], hists[b], threshold);
          overlap += to_string(cfg.methods[a]) + "," + to_string(cfg.methods[b]) + "," +
                     fmt(o.percentage) + "," + std::to_string(o.matched) + "," +
                     std::to_string(o.total) + "\n";
        }
    }
  }
  write_text(cfg.output_dir / "correlation.csv", corr);
  write_text(cfg.output_dir / "overlap.csv", overlap);

  Json seed_manifest = {{"master", cfg.seed}};
  if (cfg.cohort.kind == CohortKind::synthetic) seed_manifest["cohort"] = cfg.cohort.synthetic.seed;
  Json per_target = Json::object();
  Json hyper = Json::object();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::uint64_t mkal_seed = cfg.mkal_seed.value_or(seeds[i]);
    per_target[targets[i]] = {{"curve_order", seeds[i]}, {"mkal", mkal_seed}, {"hl2l", seeds[i] + 1}};
    if (results[i]) {
      Json steps = Json::object();
      for (const auto& [n, h] : results[i]->hyperparameters)
        steps[std::to_string(n)] = {{"C", h.C}, {"gamma", h.gamma}, {"folds", h.folds}};
      hyper[targets[i]] = steps;
    }
  }
  seed_manifest["targets"] = per_target;
  Json failures = Json::array();
  for (const auto& f : outcome.failures) failures.push_back(failure_json(f));
  const Json summary = {{"config", config_to_json(cfg)},
                        {"seeds", seed_manifest},
                        {"sources", assignment},
                        {"source_cache", {{"trained", cache.trained}, {"reused", cache.reused}}},
                        {"target_hyperparameters", hyper},
                        {"completed", outcome.completed},
                        {"failures", failures},
                        {"exit_code", outcome.exit_code}};
  write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
  const fs::path error_file = cfg.output_dir / "errors.json";
  if (outcome.failures.empty())
    fs::remove(error_file);
  else
    write_text(error_file, Json{{"failures", failures}}.dump(2) + "\n");
  return outcome;
}

SourceCacheReport build_source_cache(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto subjects = cohort_subjects(cfg.cohort);
  const auto ids = needed_sources(source_assignment(cfg, subjects), subjects);
  return build_source_cache(cfg, prepare_subjects(cfg, ids), ids);
}

void write_report(const fs::path& run_dir) {
  const std::string text = read_text(run_dir / "learning_curve.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "target,step,method,balanced_accuracy")
    throw SchemaError("unexpected learning_curve.csv header in " + run_dir.string());

  // method -> target -> step -> accuracy, remembering first-seen target order.
  std::map<Method, std::map<std::string, std::map<std::size_t, double>>> acc;
  std::vector<std::string> order;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) throw ParseError("expected 4 fields", line_no);
    try {
      acc[method_from_string(cells[2])][cells[0]][std::stoul(cells[1])] = std::stod(cells[3]);
    } catch (const std::logic_error&) {
      throw ParseError("malformed row", line_no);
    }
    if (std::find(order.begin(), order.end(), cells[0]) == order.end()) order.push_back(cells[0]);
  }
  if (acc.empty()) throw DataError("no completed targets in " + run_dir.string());

  std::string out = "method,step,mean,best,worst,best_target,worst_target\n";
  for (const auto& [method, by_target] : acc) {
    std::string best, worst;
    double best_mean = -1.0, worst_mean = 2.0;
    for (const auto& t : order) {
      const auto it = by_target.find(t);
      if (it == by_target.end()) continue;
      double m = 0.0;
      for (const auto& [n, a] : it->second) m += a;
      m /= static_cast<double>(it->second.size());
      if (m > best_mean) best_mean = m, best = t;
      if (m < worst_mean) worst_mean = m, worst = t;
    }
    std::set<std::size_t> steps;
    for (const auto& [t, curve] : by_target)
      for (const auto& [n, a] : curve) steps.insert(n);
    for (std::size_t n : steps) {
      double sum = 0.0;
      int count = 0;
      for (const auto& [t, curve] : by_target)
        if (auto it = curve.find(n); it != curve.end()) sum += it->second, ++count;
      const auto& bc = by_target.at(best);
      const auto& wc = by_target.at(worst);
      out += to_string(method) + "," + std::to_string(n) + "," + fmt(sum / count) + "," +
             (bc.count(n) ? fmt(bc.at(n)) : "NA") + "," + (wc.count(n) ? fmt(wc.at(n)) : "NA") + "," +
             best + "," + worst + "\n";
    }
  }
  write_text(run_dir / "report.csv", out);
}

std::vector<fs::path> write_synthetic_cohort(const SyntheticCohortSpec& spec, const fs::path& out) {
  fs::create_directories(out);
  const auto specs = make_cohort_specs(spec);
  std::vector<fs::path> files(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s) {
    files[s] = out / (synthetic_subject_id(static_cast<int>(s)) + ".csv");
    save_recording(files[s],
                   generate_synthetic_recording(specs[s], spec.reps, spec.movement_len, spec.rest_len));
  }
  write_text(out / "cohort.json", synthetic_to_json(spec).dump(2) + "\n");
  return files;
}

}  // namespace myoadapt
