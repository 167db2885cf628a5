// limbsense: wrist accelerometry severity pipeline.
//
//   limbsense synth|featurize|train-eval|correlate|report --config <path>
//             [--seed N] [--jobs N] [--windows 15,30,...] [--sweep N]
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 degenerate experiment.
// LIMBSENSE_LOG sets the log level (trace, debug, info, warn, error, off).
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "limbsense/error.hpp"
#include "limbsense/pipeline.hpp"

namespace {

void init_logging() {
  auto logger = spdlog::stderr_color_mt("limbsense");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("LIMBSENSE_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();

  CLI::App app{"Wrist accelerometry feature extraction and severity classification"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> sweep;
  std::string windows;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Key-value run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--jobs", jobs, "Worker threads");
    sub->add_option("--windows", windows, "Comma-separated window lengths in minutes (15,30,45,60,90,120)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic bilateral cohort and clinical table");
  auto* featurize = app.add_subcommand(
      "featurize", "Trim, epoch, and aggregate features per window length; compute use ratios. "
                   "Sessions are labeled severe when ARAT < arat_cutoff (strict), moderate otherwise");
  auto* train_eval = app.add_subcommand("train-eval", "Patient split, grid search with k-fold CV, test ROC/AUC");
  auto* correlate = app.add_subcommand("correlate", "Pearson correlation between ARAT and use ratio");
  auto* report = app.add_subcommand("report", "Print the AUC table and re-render roc.svg");
  for (auto* sub : {synth, featurize, train_eval, correlate, report}) add_common(sub);
  train_eval->add_option("--sweep", sweep, "Repeat the experiment for N consecutive seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : limbsense::kExitConfig;
  }

  using namespace limbsense;
  try {
    RunConfig config = load_run_config(config_path);
    if (seed) config.seed = *seed;
    if (jobs) config.jobs = *jobs;
    if (sweep) config.sweep_seeds = *sweep;
    if (!windows.empty()) config.window_minutes_set = parse_int_list(windows);
    config.validate();
    spdlog::info("arat_cutoff = {} (severe iff ARAT < cutoff), seed = {}", config.arat_cutoff, config.seed);

    if (synth->parsed()) {
      cmd_synth(config);
    } else if (featurize->parsed()) {
      const auto summary = cmd_featurize(config);
      std::cout << fmt::format("featurized {} session(s), skipped {}\n", summary.sessions_ok, summary.sessions_failed);
    } else if (train_eval->parsed()) {
      const auto result = cmd_train_eval(config);
      std::size_t invalid = 0;
      for (const auto& c : result.cells) invalid += c.valid ? 0 : 1;
      std::cout << fmt::format("{} report cell(s), {} invalid; outputs in {}\n", result.cells.size(), invalid,
                               config.output_dir.string());
    } else if (correlate->parsed()) {
      std::cout << fmt::format("pearson r(arat, use_ratio) = {:.3f}\n", cmd_correlate(config));
    } else if (report->parsed()) {
      std::cout << cmd_report(config);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitOk;
}
