#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "myoadapt/error.hpp"
#include "myoadapt/experiment.hpp"
#include "myoadapt/serialization.hpp"
#include "oracles.hpp"

using namespace myoadapt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "myoadapt_experiment_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

Json small_json(const fs::path& out) {
  return {{"cohort",
           {{"synthetic",
             {{"subjects", 4}, {"movement_count", 2}, {"channels", 3}, {"reps", 6},
              {"movement_len", 800}, {"rest_len", 500}, {"run_variability", 0.2}}}}},
          {"split", {{"train_stride", 3}, {"test_stride", 5}}},
          {"grid", {{"C", {1, 10}}, {"gamma", {0.1, 1}}, {"folds", 3}}},
          {"curve", {{"steps", {15, 30}}}},
          {"mkal", {{"epochs", 2}}},
          {"seed", 3},
          {"output_dir", out.string()}};
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("config parsing and defaults") {
    const auto cfg = config_from_json(Json::object());
    CHECK(cfg.steps == std::vector<std::size_t>{120, 240, 360, 480});
    CHECK(cfg.train_repetitions == std::set<int>{1, 3, 4, 6});
    CHECK(cfg.test_repetitions == std::set<int>{2, 5});
    CHECK(cfg.methods.size() == 5);
    CHECK(cfg.cohort.synthetic.seed == cfg.seed);
    CHECK(cfg.effective_cache_dir() == fs::path("out") / "source_cache");

    const auto parsed = config_from_json(small_json("x"));
    CHECK(parsed.cohort.synthetic.subjects == 4);
    CHECK(parsed.cohort.synthetic.seed == 3);
    CHECK(parsed.grid.C == std::vector<double>{1, 10});
    CHECK(parsed.folds == 3);
    CHECK(parsed.mkal.epochs == 2);

    const auto echoed = config_from_json(config_to_json(parsed));
    CHECK(config_to_json(echoed) == config_to_json(parsed));
  }

  TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(config_from_json(Json{{"sedd", 1}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"grid", {{"Cs", {1}}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"mode", "all"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"methods", {"svm"}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"curve", {{"order", "random"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"seed", "one"}}), ConfigError);
    ExperimentConfig bad;
    bad.train_repetitions = {1, 2};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("source assignment") {
    ExperimentConfig cfg;
    const std::vector<std::string> subjects{"a", "b", "c", "d"};
    const auto loo = source_assignment(cfg, subjects);
    CHECK(loo.size() == 4);
    for (const auto& [target, srcs] : loo) {
      CHECK(srcs.size() == 3);
      CHECK(std::find(srcs.begin(), srcs.end(), target) == srcs.end());
    }
    cfg.mode = ExperimentMode::fixed_sources;
    cfg.targets = {"a", "b"};
    cfg.sources = {"c", "d"};
    const auto fixed = source_assignment(cfg, subjects);
    CHECK(fixed.size() == 2);
    CHECK(fixed.at("a") == std::vector<std::string>{"c", "d"});
    CHECK(fixed.at("b") == std::vector<std::string>{"c", "d"});
    cfg.sources = {"a", "c"};
    CHECK_THROWS_AS(source_assignment(cfg, subjects), ConfigError);
  }

  TEST_CASE("hashing") {
    CHECK(fnv1a("") == 14695981039346656037ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
  }

  TEST_CASE("full run, outputs, cache reuse and determinism") {
    const auto dir = fresh_dir("run");
    const auto cfg = config_from_json(small_json(dir / "a"));
    const auto outcome = run_experiment(cfg);
    CHECK(outcome.exit_code == 0);
    CHECK(outcome.completed.size() == 4);

    const auto curve = slurp(dir / "a" / "learning_curve.csv");
    CHECK(curve.rfind("target,step,method,balanced_accuracy\n", 0) == 0);
    CHECK(line_count(curve) == 1 + 4 * 5 * 2);
    CHECK(fs::exists(dir / "a" / "targets" / "s01" / "confusion_mkal_30.csv"));
    CHECK(fs::exists(dir / "a" / "targets" / "s01" / "histogram_hl2l_15.csv"));
    CHECK_FALSE(fs::exists(dir / "a" / "errors.json"));
    CHECK(fs::exists(dir / "a" / "correlation.csv"));
    const auto summary = Json::parse(slurp(dir / "a" / "summary.json"));
    CHECK(summary.at("source_cache").at("trained").size() == 4);
    CHECK(summary.at("seeds").at("master") == 3);

    // Second run in the same directory reuses every cached source.
    const auto cache = build_source_cache(cfg);
    CHECK(cache.trained.empty());
    CHECK(cache.reused.size() == 4);

    // A fresh directory reproduces the CSVs byte for byte.
    const auto again = config_from_json(small_json(dir / "b"));
    run_experiment(again);
    CHECK(slurp(dir / "b" / "learning_curve.csv") == curve);
    CHECK(slurp(dir / "b" / "correlation.csv") == slurp(dir / "a" / "correlation.csv"));
    CHECK(slurp(dir / "b" / "targets" / "s02" / "confusion_multi_adapt_30.csv") ==
          slurp(dir / "a" / "targets" / "s02" / "confusion_multi_adapt_30.csv"));

    write_report(dir / "a");
    const auto report = slurp(dir / "a" / "report.csv");
    CHECK(line_count(report) == 1 + 5 * 2);
    CHECK(report.rfind("method,step,mean,best,worst,best_target,worst_target\n", 0) == 0);
  }

  TEST_CASE("cache writes one entry per source and retrains corrupt entries") {
    const auto dir = fresh_dir("cache");
    auto j = small_json(dir / "out");
    j["mode"] = "fixed_sources";
    j["targets"] = {"s01"};
    j["sources"] = {"s02", "s03", "s04"};
    const auto cfg = config_from_json(j);
    const auto first = build_source_cache(cfg);
    CHECK(first.trained.size() == 3);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(cfg.effective_cache_dir())) files += e.path().extension() == ".json";
    CHECK(files == 3);

    const auto second = build_source_cache(cfg);
    CHECK(second.trained.empty());
    CHECK(second.reused.size() == 3);
    for (const auto& [id, m] : first.models)
      CHECK(class_scores(*m, m->train_X) == class_scores(*second.models.at(id), m->train_X));

    const auto entry = cfg.effective_cache_dir() / "s03.json";
    auto content = Json::parse(slurp(entry));
    content["model"]["C"] = 12345.0;
    std::ofstream(entry) << content.dump();
    const auto third = build_source_cache(cfg);
    CHECK(third.trained == std::vector<std::string>{"s03"});
    CHECK(third.reused.size() == 2);

    std::ofstream(entry) << "{ not json";
    CHECK(build_source_cache(cfg).trained == std::vector<std::string>{"s03"});
  }

  TEST_CASE("failing targets are reported without stopping the others") {
    const auto dir = fresh_dir("fail");
    auto j = small_json(dir / "out");
    j["curve"]["steps"] = {15, 5000};
    const auto outcome = run_experiment(config_from_json(j));
    CHECK(outcome.completed.empty());
    CHECK(outcome.failures.size() == 4);
    CHECK(outcome.exit_code == 2);
    CHECK(outcome.failures[0].kind == "config");
    CHECK(fs::exists(dir / "out" / "errors.json"));
    CHECK_FALSE(fs::exists(dir / "out" / "targets" / "s01"));
    CHECK_FALSE(fs::exists(dir / "out" / "targets" / "s01.partial"));
  }

  TEST_CASE("synthetic cohort export loads back as a csv cohort") {
    const auto dir = fresh_dir("export");
    SyntheticCohortSpec spec;
    spec.subjects = 2;
    spec.movement_count = 2;
    spec.channels = 2;
    spec.movement_len = 500;
    spec.rest_len = 300;
    const auto files = write_synthetic_cohort(spec, dir);
    CHECK(files.size() == 2);
    ExperimentConfig cfg;
    cfg.cohort.kind = CohortKind::csv;
    cfg.cohort.directory = dir;
    cfg.cohort.schema.channels = 2;
    CHECK(cohort_subjects(cfg.cohort) == std::vector<std::string>{"s01", "s02"});
    const auto rec = load_subject_recording(cfg.cohort, "s02");
    CHECK(rec.channels == 2);
    const auto d = prepare_recording(cfg, "s02", rec, 3);
    CHECK(d.train.class_count == 3);
    CHECK(d.train.size() > 0);
    CHECK(d.test.size() > 0);
    for (int r : d.train.repetitions) CHECK(cfg.train_repetitions.count(r) == 1);
    for (int r : d.test.repetitions) CHECK(cfg.test_repetitions.count(r) == 1);
    CHECK_THROWS_AS(load_subject_recording(cfg.cohort, "s09"), DataError);
  }

  TEST_CASE("model serialization round trips") {
    const auto kernel = KernelSpec::rbf(0.5);
    auto src = train_multiclass(oracle::blobs(5, 3, 2, 1.0, 0.5, 1), kernel, 2.0);
    src.id = "s";
    const auto back = multiclass_from_json(Json::parse(model_to_json(src).dump()));
    CHECK(back.alphas == src.alphas);
    CHECK(back.biases == src.biases);
    CHECK(back.kernel == src.kernel);
    const SourceSet sources{std::make_shared<const MulticlassModel>(src)};
    const auto train = oracle::blobs(6, 3, 2, 1.0, 0.5, 2);
    const auto ma = multi_adapt_train(train, sources, kernel, 1.0);
    const auto ma2 = multi_adapt_from_json(Json::parse(model_to_json(ma).dump()), sources);
    CHECK(class_scores(ma2, train.vectors) == class_scores(ma, train.vectors));
    const auto mk = mkal_train(train, sources, MkalConfig{}, kernel);
    const auto mk2 = mkal_from_json(Json::parse(model_to_json(mk).dump()), sources);
    CHECK(class_scores(mk2, train.vectors) == class_scores(mk, train.vectors));
    const auto hl = hl2l_train(train, sources, kernel, kernel, 1.0, 1.0, 1);
    const auto hl2 = hl2l_from_json(Json::parse(model_to_json(hl).dump()), sources);
    CHECK(class_scores(hl2, train.vectors) == class_scores(hl, train.vectors));
    CHECK_THROWS_AS(multi_adapt_from_json(model_to_json(ma), SourceSet{}), DataError);
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(DataError("x")) == 3);
    CHECK(exit_code_for(ParseError("x", 3)) == 3);
    CHECK(exit_code_for(DomainError("x")) == 3);
    CHECK(exit_code_for(NumericError("x", 0.0)) == 4);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);
  }
}
