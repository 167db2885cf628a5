#include "limbsense/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "limbsense/error.hpp"
#include "text.hpp"

namespace limbsense {

namespace {

constexpr double kGapTolerance = 1e-6;
constexpr double kRateTolerance = 0.01;

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::MalformedRow, fmt::format("line {}: {}", line, what));
}

double median_gap(const std::vector<AccelSample>& samples) {
  std::vector<double> gaps;
  gaps.reserve(samples.size() - 1);
  for (std::size_t i = 1; i < samples.size(); ++i) gaps.push_back(samples[i].t - samples[i - 1].t);
  const std::size_t mid = gaps.size() / 2;
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid), gaps.end());
  if (gaps.size() % 2 == 1) return gaps[mid];
  const double upper = gaps[mid];
  const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

std::string_view to_string(Limb limb) {
  return limb == Limb::paretic ? "paretic" : "non_paretic";
}

std::optional<Limb> parse_limb(std::string_view text) {
  if (text == "paretic") return Limb::paretic;
  if (text == "non_paretic") return Limb::non_paretic;
  return std::nullopt;
}

std::string_view to_string(Side side) { return side == Side::left ? "left" : "right"; }

std::string_view to_string(Severity severity) {
  return severity == Severity::severe ? "severe" : "moderate";
}

std::optional<Severity> parse_severity(std::string_view text) {
  if (text == "severe") return Severity::severe;
  if (text == "moderate") return Severity::moderate;
  return std::nullopt;
}

bool is_collection_week(int week) {
  return std::find(std::begin(kCollectionWeeks), std::end(kCollectionWeeks), week) !=
         std::end(kCollectionWeeks);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

SampleSeries parse_accel_csv(std::string_view text, std::string patient_id, Limb limb,
                             double expected_rate_hz) {
  text::LineCursor cursor(text);
  std::string_view line;
  if (!cursor.next(line)) throw Error(ErrorKind::EmptyInput, "accelerometer file is empty");

  std::array<std::string_view, 5> fields;
  const std::size_t header_width = text::split_into(line, ',', fields);
  bool has_time = false;
  if (header_width == 4 && fields[0] == "t" && fields[1] == "ax" && fields[2] == "ay" &&
      fields[3] == "az") {
    has_time = true;
  } else if (!(header_width == 3 && fields[0] == "ax" && fields[1] == "ay" && fields[2] == "az")) {
    malformed(cursor.line_number(), "expected header 't,ax,ay,az' or 'ax,ay,az'");
  }
  const std::size_t width = has_time ? 4 : 3;

  SampleSeries series{std::move(patient_id), limb, expected_rate_hz, {}};
  series.samples.reserve(text.size() / 24);

  while (cursor.next(line)) {
    if (text::trim(line).empty()) continue;
    const std::size_t n = text::split_into(line, ',', fields);
    if (n != width) {
      malformed(cursor.line_number(), fmt::format("expected {} columns, got {}", width, n));
    }
    std::array<double, 4> values{};
    for (std::size_t c = 0; c < width; ++c) {
      const auto parsed = text::parse_double(fields[c]);
      if (!parsed || !std::isfinite(*parsed)) {
        malformed(cursor.line_number(), fmt::format("non-numeric cell '{}'", fields[c]));
      }
      values[c] = *parsed;
    }
    AccelSample sample;
    if (has_time) {
      sample = {values[0], values[1], values[2], values[3]};
      if (sample.t < 0.0) malformed(cursor.line_number(), "negative time");
    } else {
      sample = {static_cast<double>(series.samples.size()) / expected_rate_hz, values[0], values[1],
                values[2]};
    }
    if (!series.samples.empty() && sample.t <= series.samples.back().t) {
      throw Error(ErrorKind::NonMonotonicTime,
                  fmt::format("line {}: t={} does not follow t={}", cursor.line_number(), sample.t,
                              series.samples.back().t));
    }
    series.samples.push_back(sample);
  }

  if (series.samples.empty()) throw Error(ErrorKind::EmptyInput, "no data rows");
  if (series.samples.size() >= 2) {
    const double inferred = 1.0 / median_gap(series.samples);
    if (std::abs(inferred - expected_rate_hz) > kRateTolerance * expected_rate_hz) {
      throw Error(ErrorKind::RateMismatch,
                  fmt::format("inferred {:.4f} Hz, expected {} Hz", inferred, expected_rate_hz));
    }
    const double period = 1.0 / expected_rate_hz;
    for (std::size_t i = 1; i < series.samples.size(); ++i) {
      const double gap = series.samples[i].t - series.samples[i - 1].t;
      if (std::abs(gap - period) > kGapTolerance) {
        throw Error(ErrorKind::RateMismatch,
                    fmt::format("irregular gap of {} s before sample {}", gap, i));
      }
    }
  }
  return series;
}

SampleSeries load_accel_csv(const std::filesystem::path& path, std::string patient_id, Limb limb,
                            double expected_rate_hz) {
  return parse_accel_csv(read_file(path), std::move(patient_id), limb, expected_rate_hz);
}

void write_accel_csv(const SampleSeries& series, std::ostream& out) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "t,ax,ay,az\n");
  for (const auto& s : series.samples) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", s.t, s.ax, s.ay, s.az);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<ClinicalRecord> parse_clinical_csv(std::string_view text) {
  text::LineCursor cursor(text);
  std::string_view line;
  if (!cursor.next(line)) throw Error(ErrorKind::EmptyInput, "clinical file is empty");
  if (text::split(line, ',') !=
      std::vector<std::string_view>{"patient_id", "affected_side", "week", "arat", "ue_fm", "safe"}) {
    malformed(1, "expected header 'patient_id,affected_side,week,arat,ue_fm,safe'");
  }

  std::vector<ClinicalRecord> records;
  while (cursor.next(line)) {
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    const std::size_t at = cursor.line_number();
    if (fields.size() != 6) malformed(at, fmt::format("expected 6 columns, got {}", fields.size()));
    ClinicalRecord record;
    if (fields[0].empty()) malformed(at, "empty patient_id");
    record.patient_id = std::string(fields[0]);
    if (fields[1] == "left") {
      record.affected_side = Side::left;
    } else if (fields[1] == "right") {
      record.affected_side = Side::right;
    } else {
      malformed(at, fmt::format("affected_side '{}' is not left/right", fields[1]));
    }
    std::array<int, 4> values{};
    for (std::size_t c = 0; c < 4; ++c) {
      const auto parsed = text::parse_int<int>(fields[c + 2]);
      if (!parsed) malformed(at, fmt::format("non-integer cell '{}'", fields[c + 2]));
      values[c] = *parsed;
    }
    record.week = values[0];
    record.arat = values[1];
    record.ue_fm = values[2];
    record.safe = values[3];
    if (!is_collection_week(record.week)) {
      throw Error(ErrorKind::UnknownWeek, fmt::format("line {}: week {}", at, record.week));
    }
    auto check = [at](const char* name, int value, int max) {
      if (value < 0 || value > max) {
        throw Error(ErrorKind::ScoreOutOfRange,
                    fmt::format("line {}: {}={} outside [0, {}]", at, name, value, max));
      }
    };
    check("arat", record.arat, kAratMax);
    check("ue_fm", record.ue_fm, kUeFmMax);
    check("safe", record.safe, kSafeMax);
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<ClinicalRecord> load_clinical_csv(const std::filesystem::path& path) {
  return parse_clinical_csv(read_file(path));
}

void write_clinical_csv(const std::vector<ClinicalRecord>& records, std::ostream& out) {
  out << "patient_id,affected_side,week,arat,ue_fm,safe\n";
  for (const auto& r : records) {
    out << r.patient_id << ',' << to_string(r.affected_side) << ',' << r.week << ',' << r.arat
        << ',' << r.ue_fm << ',' << r.safe << '\n';
  }
}

SampleSeries trim_session(const SampleSeries& series, const TrimOptions& options) {
  const double lead = options.lead_minutes * 60.0;
  const double horizon = options.horizon_minutes * 60.0;
  const double needed = lead + horizon;
  if (series.samples.empty() || series.samples.back().t + 1.0 / series.rate_hz < needed - kGapTolerance) {
    const double have = series.samples.empty() ? 0.0 : series.samples.back().t + 1.0 / series.rate_hz;
    throw Error(ErrorKind::SessionTooShort,
                fmt::format("{} ({}): {:.1f} min available, {:.1f} min required", series.patient_id,
                            to_string(series.limb), have / 60.0, needed / 60.0));
  }

  const auto begin = std::lower_bound(
      series.samples.begin(), series.samples.end(), lead - kGapTolerance,
      [](const AccelSample& s, double t) { return s.t < t; });
  const auto end = std::lower_bound(begin, series.samples.end(), needed - kGapTolerance,
                                    [](const AccelSample& s, double t) { return s.t < t; });

  SampleSeries out{series.patient_id, series.limb, series.rate_hz, {begin, end}};
  if (!out.samples.empty()) {
    const double origin = out.samples.front().t;
    for (auto& s : out.samples) s.t -= origin;
  }
  return out;
}

Severity label_severity(const ClinicalRecord& record, int cutoff) {
  if (cutoff <= 0 || cutoff > kAratMax) {
    throw Error(ErrorKind::ConfigError, fmt::format("arat_cutoff {} outside (0, {}]", cutoff, kAratMax));
  }
  return record.arat < cutoff ? Severity::severe : Severity::moderate;
}

}  // namespace limbsense
