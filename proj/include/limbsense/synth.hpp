#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "limbsense/ingest.hpp"

namespace limbsense {

struct SynthOptions {
  std::size_t n_patients = 40;
  double severe_fraction = 0.5;
  double minutes = 250.0;
  double rate_hz = kDefaultRateHz;
  int arat_cutoff = kDefaultAratCutoff;
  std::uint64_t seed = 7;
};

/// Per-patient generator settings, drawn from the cohort seed.
struct SynthProfile {
  ClinicalRecord record;
  Severity severity = Severity::moderate;
  std::uint64_t seed = 0;
  double non_paretic_active_fraction = 0.5;
  double paretic_active_fraction = 0.5;
  double paretic_frequency_hz = 2.0;
  double paretic_amplitude_g = 0.3;
  double non_paretic_frequency_hz = 2.0;
  double non_paretic_amplitude_g = 0.3;
};

std::vector<SynthProfile> synth_cohort(const SynthOptions& options);

/// Bilateral recording for one profile. Moderate patients move the paretic
/// arm more often, harder, and faster than severe ones.
SampleSeries synth_series(const SynthProfile& profile, Limb limb, const SynthOptions& options);

/// Writes `<id>_paretic.csv`, `<id>_non_paretic.csv` under accel_dir (header
/// `ax,ay,az`, 4 decimals) and the clinical table.
void write_synth_dataset(const SynthOptions& options, const std::filesystem::path& accel_dir,
                         const std::filesystem::path& clinical_csv);

}  // namespace limbsense
