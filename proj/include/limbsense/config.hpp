#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "limbsense/features.hpp"
#include "limbsense/ingest.hpp"
#include "limbsense/models.hpp"

namespace limbsense {

/// `key = value` lines; '#' starts a comment. Later keys override earlier ones.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Everything a pipeline run depends on. Relative paths are resolved against
/// the directory of the config file they came from.
struct RunConfig {
  std::filesystem::path accel_dir = "data/accel";
  std::filesystem::path clinical_csv = "data/clinical.csv";
  std::filesystem::path output_dir = "out";

  int arat_cutoff = kDefaultAratCutoff;
  double rate_hz = kDefaultRateHz;
  double trim_lead_minutes = 10.0;
  double horizon_minutes = 240.0;
  double epoch_seconds = kDefaultEpochSeconds;
  std::vector<int> window_minutes_set = {15, 30, 45, 60, 90, 120};
  double activity_threshold_g = kDefaultActivityThresholdG;
  std::optional<int> session_week;

  std::uint64_t seed = 7;
  double train_fraction = kDefaultTrainFraction;
  std::size_t k_folds = 5;
  bool group_cv = true;
  std::vector<ModelKind> models = {std::begin(kAllModelKinds), std::end(kAllModelKinds)};
  std::map<ModelKind, ParamGrid> grids;
  std::size_t sweep_seeds = 1;
  std::size_t jobs = 1;

  // Synthetic cohort.
  std::size_t n_patients = 40;
  double severe_fraction = 0.5;
  double synth_minutes = 250.0;

  /// Grid for a kind: the configured one, else the default.
  ParamGrid grid(ModelKind kind) const;

  /// Canonical key-value text with absolute paths; parsing it back yields the
  /// same configuration.
  std::string resolved_text() const;

  /// Throws ConfigError on any out-of-range value.
  void validate() const;
};

/// Applies keys on top of defaults. Grid entries use `grid.<kind>.<param> = v1,v2,...`
/// (`inf` allowed); `grid_file` names a file holding more such lines.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::vector<int> parse_int_list(std::string_view text);

}  // namespace limbsense
