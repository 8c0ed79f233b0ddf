#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "myoadapt/error.hpp"
#include "myoadapt/experiment.hpp"

using namespace myoadapt;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
  auto* opt = cmd->add_option("--config", o.config, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "master seed");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.seed) {
    cfg.seed = *o.seed;
    if (cfg.cohort.kind == CohortKind::synthetic) cfg.cohort.synthetic.seed = *o.seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer learning for sEMG movement classification"};
  app.require_subcommand(1);

  Overrides synth_o, cache_o, run_o;
  std::string report_dir;
  auto* synth = app.add_subcommand("synth", "write a synthetic cohort as CSV recordings");
  add_common(synth, synth_o, false);
  auto* cache = app.add_subcommand("cache-sources", "train or refresh the source model cache");
  add_common(cache, cache_o, true);
  auto* run = app.add_subcommand("run", "run the learning-curve experiment");
  add_common(run, run_o, true);
  auto* report = app.add_subcommand("report", "aggregate mean/best/worst curves of a finished run");
  report->add_option("--out", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const auto cfg = resolve(synth_o);
      if (cfg.cohort.kind != CohortKind::synthetic)
        throw ConfigError("synth needs a synthetic cohort config");
      const auto files = write_synthetic_cohort(cfg.cohort.synthetic, cfg.output_dir);
      std::cout << "wrote " << files.size() << " recordings to " << cfg.output_dir.string() << "\n";
    } else if (*cache) {
      const auto r = build_source_cache(resolve(cache_o));
      std::cout << "trained " << r.trained.size() << ", reused " << r.reused.size() << "\n";
    } else if (*run) {
      const auto cfg = resolve(run_o);
      const auto outcome = run_experiment(cfg);
      std::cout << outcome.completed.size() << " targets completed, " << outcome.failures.size()
                << " failed; results in " << cfg.output_dir.string() << "\n";
      for (const auto& f : outcome.failures)
        std::cerr << "target " << f.target << " failed (" << f.kind << "): " << f.message << "\n";
      return outcome.exit_code;
    } else if (*report) {
      write_report(report_dir);
      std::cout << "wrote " << (std::filesystem::path(report_dir) / "report.csv").string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
