#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace limbsense {

inline constexpr double kDefaultRateHz = 30.0;
inline constexpr int kAratMax = 57;
inline constexpr int kUeFmMax = 66;
inline constexpr int kSafeMax = 10;
inline constexpr int kDefaultAratCutoff = 22;

/// One tri-axial reading in g, t in seconds since session start.
struct AccelSample {
  double t = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  double az = 0.0;

  friend bool operator==(const AccelSample&, const AccelSample&) = default;
};

enum class Limb { paretic, non_paretic };

std::string_view to_string(Limb limb);
std::optional<Limb> parse_limb(std::string_view text);

struct SampleSeries {
  std::string patient_id;
  Limb limb = Limb::paretic;
  double rate_hz = kDefaultRateHz;
  std::vector<AccelSample> samples;

  /// Covered time span, n / rate_hz.
  double duration_seconds() const { return static_cast<double>(samples.size()) / rate_hz; }

  friend bool operator==(const SampleSeries&, const SampleSeries&) = default;
};

enum class Side { left, right };

std::string_view to_string(Side side);

struct ClinicalRecord {
  std::string patient_id;
  Side affected_side = Side::left;
  int week = 2;
  int arat = 0;
  int ue_fm = 0;
  int safe = 0;

  friend bool operator==(const ClinicalRecord&, const ClinicalRecord&) = default;
};

/// Weeks post-stroke at which recordings were collected.
inline constexpr int kCollectionWeeks[] = {2, 4, 6, 8, 12, 16, 20, 24};

bool is_collection_week(int week);

enum class Severity { moderate = 0, severe = 1 };

std::string_view to_string(Severity severity);
std::optional<Severity> parse_severity(std::string_view text);

/// Parses an accelerometer CSV with header `t,ax,ay,az` (or `ax,ay,az`, in
/// which case t is synthesized as index / expected_rate_hz).
///
/// The rate is inferred from the median inter-sample gap and must lie within
/// 1% of expected_rate_hz; every individual gap must then match 1/rate within
/// 1e-6 s.
SampleSeries parse_accel_csv(std::string_view text, std::string patient_id, Limb limb,
                             double expected_rate_hz = kDefaultRateHz);

SampleSeries load_accel_csv(const std::filesystem::path& path, std::string patient_id, Limb limb,
                            double expected_rate_hz = kDefaultRateHz);

/// Writes `t,ax,ay,az` using shortest round-trip formatting, so parsing the
/// output reproduces the series exactly.
void write_accel_csv(const SampleSeries& series, std::ostream& out);

std::vector<ClinicalRecord> parse_clinical_csv(std::string_view text);
std::vector<ClinicalRecord> load_clinical_csv(const std::filesystem::path& path);
void write_clinical_csv(const std::vector<ClinicalRecord>& records, std::ostream& out);

struct TrimOptions {
  double lead_minutes = 10.0;
  double horizon_minutes = 240.0;
};

/// Keeps the samples with t in [lead, lead + horizon), re-based to start at 0.
SampleSeries trim_session(const SampleSeries& series, const TrimOptions& options = {});

/// severe iff arat < cutoff. cutoff must be in (0, 57].
Severity label_severity(const ClinicalRecord& record, int cutoff);

std::string read_file(const std::filesystem::path& path);

}  // namespace limbsense
