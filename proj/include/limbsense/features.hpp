#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "limbsense/ingest.hpp"

namespace limbsense {

inline constexpr double kDefaultEpochSeconds = 12.8;
inline constexpr std::size_t kEpochSamples = 384;
inline constexpr double kDefaultActivityThresholdG = 0.02;
inline constexpr int kWindowMinutes[] = {15, 30, 45, 60, 90, 120};
inline constexpr std::size_t kFeatureCount = 8;

/// Feature column names in storage order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "mag_mean", "mag_max", "mag_min", "narj", "f1", "p1", "f2", "p2"};

using FeatureArray = std::array<double, kFeatureCount>;

double vector_magnitude(const AccelSample& sample);

/// One non-overlapping analysis unit of vector magnitudes.
struct Epoch {
  std::vector<double> vm;
  double start_t = 0.0;
};

/// Cuts consecutive runs of round(epoch_seconds * rate) samples; a trailing
/// partial run is dropped.
std::vector<Epoch> segment_epochs(const SampleSeries& series,
                                  double epoch_seconds = kDefaultEpochSeconds);

/// Normalized average rectified jerk: mean |vm[i+1] - vm[i]| * rate, divided
/// by the epoch's peak magnitude. Zero for an all-zero epoch.
double narj(std::span<const double> vm, double rate_hz = kDefaultRateHz);

/// One-sided power spectrum with |X[k]|^2 / N^2 per bin, interior bins doubled,
/// so that the bins sum to mean(vm^2).
struct PowerSpectrum {
  std::vector<double> power;
  double resolution_hz = 0.0;

  double frequency(std::size_t bin) const { return static_cast<double>(bin) * resolution_hz; }
};

PowerSpectrum spectrum(std::span<const double> vm, double rate_hz = kDefaultRateHz);

struct DominantFrequencies {
  double f1 = 0.0;
  double p1 = 0.0;
  double f2 = 0.0;
  double p2 = 0.0;
};

/// Two strongest non-DC bins, ties toward the lower frequency.
DominantFrequencies dominant_freqs(const PowerSpectrum& spec);

struct EpochFeatures {
  double mag_mean = 0.0;
  double mag_max = 0.0;
  double mag_min = 0.0;
  double narj = 0.0;
  double f1 = 0.0;
  double p1 = 0.0;
  double f2 = 0.0;
  double p2 = 0.0;

  FeatureArray to_array() const { return {mag_mean, mag_max, mag_min, narj, f1, p1, f2, p2}; }
};

EpochFeatures epoch_features(const Epoch& epoch, double rate_hz = kDefaultRateHz);

struct TimedEpochFeatures {
  double start_t = 0.0;
  EpochFeatures features;
};

/// Features of every epoch of a trimmed series. Epochs without any non-DC
/// content are skipped and counted in `skipped`.
std::vector<TimedEpochFeatures> session_epoch_features(const SampleSeries& trimmed,
                                                       double epoch_seconds = kDefaultEpochSeconds,
                                                       std::size_t* skipped = nullptr);

/// Identity and label shared by every window vector of one session.
struct SessionInfo {
  std::string patient_id;
  int week = 2;
  Severity label = Severity::moderate;
};

struct WindowFeatureVector {
  std::string patient_id;
  int week = 2;
  int window_minutes = 15;
  int window_index = 0;
  FeatureArray features{};
  Severity label = Severity::moderate;

  friend bool operator==(const WindowFeatureVector&, const WindowFeatureVector&) = default;
};

/// Bins epochs by start time into consecutive windows covering the horizon
/// and averages each bin. Windows that would run past the horizon are dropped.
std::vector<WindowFeatureVector> aggregate_windows(std::span<const TimedEpochFeatures> epochs,
                                                   int window_minutes, const SessionInfo& info,
                                                   double horizon_minutes = 240.0);

/// Paretic active seconds over non-paretic active seconds. A 1 s block is
/// active when the population standard deviation of vm within it exceeds
/// activity_threshold_g.
double use_ratio(const SampleSeries& paretic, const SampleSeries& non_paretic,
                 double activity_threshold_g = kDefaultActivityThresholdG);

/// Number of active 1 s blocks in a series.
std::size_t active_seconds(const SampleSeries& series, double activity_threshold_g);

void write_feature_csv(std::span<const WindowFeatureVector> rows, std::ostream& out);
std::vector<WindowFeatureVector> parse_feature_csv(std::string_view text);
std::vector<WindowFeatureVector> load_feature_csv(const std::filesystem::path& path);

}  // namespace limbsense
