#include "limbsense/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "limbsense/error.hpp"
#include "limbsense/fft.hpp"
#include "text.hpp"

namespace limbsense {

namespace {

constexpr double kSilentPower = 1e-12;
constexpr double kTieTolerance = 1e-9;

std::size_t samples_per_epoch(double epoch_seconds, double rate_hz) {
  return static_cast<std::size_t>(std::llround(epoch_seconds * rate_hz));
}

// Plans are cached per length; the epoch length is almost always 384.
const FftPlan& plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, FftPlan> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(n);
  if (it == plans.end()) it = plans.try_emplace(n, n).first;
  return it->second;
}

bool stronger(double power, std::size_t bin, double other_power, std::size_t other_bin) {
  const double scale = std::max(power, other_power);
  if (std::abs(power - other_power) <= kTieTolerance * scale) return bin < other_bin;
  return power > other_power;
}

}  // namespace

double vector_magnitude(const AccelSample& s) {
  return std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az);
}

std::vector<Epoch> segment_epochs(const SampleSeries& series, double epoch_seconds) {
  const std::size_t len = samples_per_epoch(epoch_seconds, series.rate_hz);
  if (len == 0 || series.samples.size() < len) {
    throw Error(ErrorKind::EmptyInput,
                fmt::format("{} samples is less than one epoch of {}", series.samples.size(), len));
  }
  const std::size_t count = series.samples.size() / len;
  std::vector<Epoch> epochs(count);
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t first = e * len;
    epochs[e].start_t = series.samples[first].t;
    epochs[e].vm.resize(len);
    for (std::size_t i = 0; i < len; ++i) epochs[e].vm[i] = vector_magnitude(series.samples[first + i]);
  }
  return epochs;
}

double narj(std::span<const double> vm, double rate_hz) {
  if (vm.size() < 2) return 0.0;
  const double peak = *std::max_element(vm.begin(), vm.end());
  if (peak <= 0.0) return 0.0;
  double rectified = 0.0;
  for (std::size_t i = 1; i < vm.size(); ++i) rectified += std::abs(vm[i] - vm[i - 1]);
  const double arj = rectified / static_cast<double>(vm.size() - 1) * rate_hz;
  return arj / peak;
}

PowerSpectrum spectrum(std::span<const double> vm, double rate_hz) {
  const std::size_t n = vm.size();
  if (n == 0) throw Error(ErrorKind::EmptyInput, "spectrum of an empty epoch");
  const auto bins = plan_for(n).forward(vm);
  const std::size_t half = n / 2;
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

  PowerSpectrum out;
  out.resolution_hz = rate_hz / static_cast<double>(n);
  out.power.resize(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    double p = std::norm(bins[k]) * norm;
    const bool nyquist = (n % 2 == 0) && k == half;
    if (k != 0 && !nyquist) p *= 2.0;
    out.power[k] = p;
  }
  return out;
}

DominantFrequencies dominant_freqs(const PowerSpectrum& spec) {
  const auto& power = spec.power;
  if (power.size() < 3) throw Error(ErrorKind::NoDominantFrequency, "spectrum has fewer than two non-DC bins");
  const double strongest = *std::max_element(power.begin() + 1, power.end());
  if (strongest < kSilentPower) {
    throw Error(ErrorKind::NoDominantFrequency, "no non-DC power above 1e-12");
  }

  std::size_t first = 1;
  std::size_t second = 2;
  if (stronger(power[2], 2, power[1], 1)) std::swap(first, second);
  for (std::size_t k = 3; k < power.size(); ++k) {
    if (stronger(power[k], k, power[first], first)) {
      second = first;
      first = k;
    } else if (stronger(power[k], k, power[second], second)) {
      second = k;
    }
  }
  // Near-ties may order the frequencies against the powers by a rounding
  // error; the powers are reported ordered.
  return {spec.frequency(first), std::max(power[first], power[second]), spec.frequency(second),
          std::min(power[first], power[second])};
}

EpochFeatures epoch_features(const Epoch& epoch, double rate_hz) {
  const auto& vm = epoch.vm;
  if (vm.empty()) throw Error(ErrorKind::EmptyInput, "empty epoch");
  EpochFeatures f;
  const auto [lo, hi] = std::minmax_element(vm.begin(), vm.end());
  f.mag_min = *lo;
  f.mag_max = *hi;
  f.mag_mean = std::accumulate(vm.begin(), vm.end(), 0.0) / static_cast<double>(vm.size());
  // Summation rounding can push the mean a hair outside [min, max].
  f.mag_mean = std::clamp(f.mag_mean, f.mag_min, f.mag_max);
  f.narj = narj(vm, rate_hz);
  const auto dom = dominant_freqs(spectrum(vm, rate_hz));
  f.f1 = dom.f1;
  f.p1 = dom.p1;
  f.f2 = dom.f2;
  f.p2 = dom.p2;
  return f;
}

std::vector<TimedEpochFeatures> session_epoch_features(const SampleSeries& trimmed,
                                                       double epoch_seconds, std::size_t* skipped) {
  const auto epochs = segment_epochs(trimmed, epoch_seconds);
  std::vector<TimedEpochFeatures> out;
  out.reserve(epochs.size());
  std::size_t dropped = 0;
  for (const auto& epoch : epochs) {
    try {
      out.push_back({epoch.start_t, epoch_features(epoch, trimmed.rate_hz)});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoDominantFrequency) throw;
      ++dropped;
    }
  }
  if (skipped != nullptr) *skipped = dropped;
  return out;
}

std::vector<WindowFeatureVector> aggregate_windows(std::span<const TimedEpochFeatures> epochs,
                                                   int window_minutes, const SessionInfo& info,
                                                   double horizon_minutes) {
  if (window_minutes <= 0) throw Error(ErrorKind::ConfigError, "window_minutes must be positive");
  const double span = window_minutes * 60.0;
  const auto window_count = static_cast<std::size_t>(std::floor(horizon_minutes / window_minutes + 1e-9));

  std::vector<FeatureArray> sums(window_count, FeatureArray{});
  std::vector<std::size_t> counts(window_count, 0);
  for (const auto& e : epochs) {
    const double slot = std::floor(e.start_t / span + 1e-9);
    if (slot < 0.0 || slot >= static_cast<double>(window_count)) continue;
    const auto w = static_cast<std::size_t>(slot);
    const auto values = e.features.to_array();
    for (std::size_t j = 0; j < kFeatureCount; ++j) sums[w][j] += values[j];
    ++counts[w];
  }

  std::vector<WindowFeatureVector> out;
  out.reserve(window_count);
  for (std::size_t w = 0; w < window_count; ++w) {
    if (counts[w] == 0) {
      throw Error(ErrorKind::EmptyWindow,
                  fmt::format("{}: {}-min window {} has no epochs", info.patient_id, window_minutes, w));
    }
    WindowFeatureVector v{info.patient_id, info.week, window_minutes, static_cast<int>(w), {}, info.label};
    for (std::size_t j = 0; j < kFeatureCount; ++j) v.features[j] = sums[w][j] / static_cast<double>(counts[w]);
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

std::size_t active_blocks(std::span<const AccelSample> samples, double rate_hz, double threshold) {
  const auto block = static_cast<std::size_t>(std::llround(rate_hz));
  const std::size_t blocks = block == 0 ? 0 : samples.size() / block;
  std::size_t active = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = b * block; i < (b + 1) * block; ++i) {
      const double v = vector_magnitude(samples[i]);
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / static_cast<double>(block);
    const double var = std::max(0.0, sum_sq / static_cast<double>(block) - mean * mean);
    if (std::sqrt(var) > threshold) ++active;
  }
  return active;
}

}  // namespace

std::size_t active_seconds(const SampleSeries& series, double activity_threshold_g) {
  return active_blocks(series.samples, series.rate_hz, activity_threshold_g);
}

double use_ratio(const SampleSeries& paretic, const SampleSeries& non_paretic,
                 double activity_threshold_g) {
  // Compare only the time span both limbs cover.
  const std::size_t common = std::min(paretic.samples.size(), non_paretic.samples.size());
  const std::size_t reference = active_blocks(std::span(non_paretic.samples).first(common),
                                              non_paretic.rate_hz, activity_threshold_g);
  if (reference == 0) {
    throw Error(ErrorKind::NoReferenceActivity,
                fmt::format("{}: non-paretic limb has no active seconds", non_paretic.patient_id));
  }
  const std::size_t active =
      active_blocks(std::span(paretic.samples).first(common), paretic.rate_hz, activity_threshold_g);
  return static_cast<double>(active) / static_cast<double>(reference);
}

void write_feature_csv(std::span<const WindowFeatureVector> rows, std::ostream& out) {
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "patient_id,week,window_minutes,window_index");
  for (auto name : kFeatureNames) fmt::format_to(it, ",{}", name);
  fmt::format_to(it, ",label\n");
  for (const auto& r : rows) {
    fmt::format_to(it, "{},{},{},{}", r.patient_id, r.week, r.window_minutes, r.window_index);
    for (double v : r.features) fmt::format_to(it, ",{:.9g}", v);
    fmt::format_to(it, ",{}\n", to_string(r.label));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<WindowFeatureVector> parse_feature_csv(std::string_view content) {
  text::LineCursor cursor(content);
  std::string_view line;
  if (!cursor.next(line)) throw Error(ErrorKind::EmptyInput, "feature file is empty");
  const auto header = text::split(line, ',');
  if (header.size() != 5 + kFeatureCount || header[0] != "patient_id" || header[1] != "week" ||
      header[2] != "window_minutes" || header[3] != "window_index" || header.back() != "label" ||
      !std::equal(kFeatureNames.begin(), kFeatureNames.end(), header.begin() + 4)) {
    throw Error(ErrorKind::MalformedRow, "unexpected feature CSV header");
  }

  std::vector<WindowFeatureVector> rows;
  while (cursor.next(line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    const auto bad = [&](std::string_view what) {
      return Error(ErrorKind::MalformedRow, fmt::format("line {}: {}", cursor.line_number(), what));
    };
    if (f.size() != header.size()) throw bad("wrong column count");
    WindowFeatureVector r;
    r.patient_id = std::string(f[0]);
    const auto week = text::parse_int<int>(f[1]);
    const auto minutes = text::parse_int<int>(f[2]);
    const auto index = text::parse_int<int>(f[3]);
    if (!week || !minutes || !index) throw bad("non-integer identifier column");
    r.week = *week;
    r.window_minutes = *minutes;
    r.window_index = *index;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const auto v = text::parse_double(f[4 + j]);
      if (!v || !std::isfinite(*v)) throw bad(fmt::format("bad feature value '{}'", f[4 + j]));
      r.features[j] = *v;
    }
    const auto label = parse_severity(f.back());
    if (!label) throw bad(fmt::format("unknown label '{}'", f.back()));
    r.label = *label;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<WindowFeatureVector> load_feature_csv(const std::filesystem::path& path) {
  return parse_feature_csv(read_file(path));
}

}  // namespace limbsense
