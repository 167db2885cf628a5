#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "limbsense/config.hpp"
#include "limbsense/error.hpp"
#include "limbsense/eval.hpp"

namespace limbsense {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitDegenerate = 4 };

int exit_code_for(ErrorKind kind);

/// Runs fn(0..n-1) on up to `jobs` threads. Callers write results by index,
/// so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct FeaturizeSummary {
  std::size_t sessions_ok = 0;
  std::size_t sessions_failed = 0;
};

/// Session files found under accel_dir, sorted by patient id.
struct SessionFiles {
  std::string patient_id;
  std::filesystem::path paretic;
  std::filesystem::path non_paretic;  // empty when absent
};

std::vector<SessionFiles> discover_sessions(const std::filesystem::path& accel_dir);

void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

void cmd_synth(const RunConfig& config);

/// Writes features_<W>.csv per window and use_ratio.csv. Throws EmptyInput
/// when every session fails.
FeaturizeSummary cmd_featurize(const RunConfig& config);

/// Grid search, refit, and test evaluation for every (model, window) pair.
EvalReport cmd_train_eval(const RunConfig& config);

/// Pearson r between ARAT and use ratio, written to correlation.csv.
double cmd_correlate(const RunConfig& config);

/// Prints the AUC table from report.csv and re-renders roc.svg from roc_points.csv.
std::string cmd_report(const RunConfig& config);

}  // namespace limbsense
