#include "limbsense/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "limbsense/error.hpp"
#include "limbsense/random.hpp"

namespace limbsense {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;
constexpr double kMeanBoutSeconds = 8.0;
constexpr double kRestNoiseG = 0.003;

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::array<double, 3> unit(std::array<double, 3> v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

std::vector<SynthProfile> synth_cohort(const SynthOptions& options) {
  if (options.n_patients < 2) throw Error(ErrorKind::ConfigError, "synthetic cohort needs at least 2 patients");
  Rng rng(mix(options.seed));
  const auto n = options.n_patients;
  const auto n_severe = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(options.severe_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  std::vector<bool> severe(n, false);
  for (std::size_t i = 0; i < n_severe; ++i) severe[order[i]] = true;

  const int cutoff = options.arat_cutoff;
  std::vector<SynthProfile> cohort;
  for (std::size_t i = 0; i < n; ++i) {
    SynthProfile p;
    p.severity = severe[i] ? Severity::severe : Severity::moderate;
    p.seed = mix(options.seed ^ mix(i + 1));
    auto& r = p.record;
    r.patient_id = fmt::format("P{:03}", i + 1);
    r.affected_side = rng.uniform() < 0.5 ? Side::left : Side::right;
    r.week = 2;
    r.arat = severe[i] ? static_cast<int>(rng.below(static_cast<std::uint64_t>(cutoff)))
                       : cutoff + static_cast<int>(rng.below(static_cast<std::uint64_t>(kAratMax - cutoff + 1)));
    const double level = static_cast<double>(r.arat) / kAratMax;
    r.ue_fm = std::clamp(static_cast<int>(std::lround(level * kUeFmMax + rng.normal(0.0, 3.0))), 0, kUeFmMax);
    r.safe = std::clamp(static_cast<int>(std::lround(level * kSafeMax + rng.normal(0.0, 0.7))), 0, kSafeMax);

    p.non_paretic_active_fraction = rng.uniform(0.45, 0.6);
    p.non_paretic_frequency_hz = rng.uniform(1.8, 2.8);
    p.non_paretic_amplitude_g = rng.uniform(0.25, 0.45);
    // Paretic use tracks ARAT, so use ratio and ARAT correlate.
    const double use = std::clamp(0.1 + 0.85 * level + rng.normal(0.0, 0.03), 0.05, 1.0);
    p.paretic_active_fraction = p.non_paretic_active_fraction * use;
    if (severe[i]) {
      p.paretic_frequency_hz = rng.uniform(0.6, 1.2);
      p.paretic_amplitude_g = rng.uniform(0.05, 0.12);
    } else {
      p.paretic_frequency_hz = rng.uniform(1.8, 2.8);
      p.paretic_amplitude_g = rng.uniform(0.25, 0.45);
    }
    cohort.push_back(std::move(p));
  }
  return cohort;
}

SampleSeries synth_series(const SynthProfile& profile, Limb limb, const SynthOptions& options) {
  const bool paretic = limb == Limb::paretic;
  Rng rng(mix(profile.seed + (paretic ? 1 : 2)));
  const double fraction = paretic ? profile.paretic_active_fraction : profile.non_paretic_active_fraction;
  const double freq = paretic ? profile.paretic_frequency_hz : profile.non_paretic_frequency_hz;
  const double amp = paretic ? profile.paretic_amplitude_g : profile.non_paretic_amplitude_g;

  // Sensor orientation: gravity direction and a movement axis close to it, so
  // movement shows up in the vector magnitude.
  const auto gravity = unit({rng.normal(0.0, 0.3), rng.normal(0.0, 0.3), 1.0});
  const auto axis = unit({gravity[0] + rng.normal(0.0, 0.25), gravity[1] + rng.normal(0.0, 0.25), gravity[2]});

  const auto per_second = static_cast<std::size_t>(std::llround(options.rate_hz));
  const auto total = static_cast<std::size_t>(std::llround(options.minutes * 60.0 * options.rate_hz));
  SampleSeries series{profile.record.patient_id, limb, options.rate_hz, {}};
  series.samples.resize(total);

  // Two-state bout model at one-second resolution with stationary active
  // probability `fraction`.
  const double p_stop = 1.0 / kMeanBoutSeconds;
  const double p_start = std::min(1.0, p_stop * fraction / std::max(1e-9, 1.0 - fraction));
  bool active = rng.uniform() < fraction;
  double phase = rng.uniform(0.0, kTwoPi);
  double bout_amp = amp;
  for (std::size_t i = 0; i < total; ++i) {
    if (i % per_second == 0) {
      const bool was_active = active;
      active = active ? rng.uniform() >= p_stop : rng.uniform() < p_start;
      if (active && !was_active) {
        phase = rng.uniform(0.0, kTwoPi);
        bout_amp = amp * rng.uniform(0.8, 1.2);
      }
    }
    const double t = static_cast<double>(i) / options.rate_hz;
    double motion = 0.0;
    double noise = kRestNoiseG;
    if (active) {
      motion = bout_amp * (std::sin(kTwoPi * freq * t + phase) + 0.3 * std::sin(kTwoPi * 2.1 * freq * t + 0.5 * phase));
      noise = 0.02 * bout_amp + kRestNoiseG;
    }
    auto& s = series.samples[i];
    s.t = t;
    s.ax = gravity[0] + motion * axis[0] + rng.normal(0.0, noise);
    s.ay = gravity[1] + motion * axis[1] + rng.normal(0.0, noise);
    s.az = gravity[2] + motion * axis[2] + rng.normal(0.0, noise);
  }
  return series;
}

void write_synth_dataset(const SynthOptions& options, const std::filesystem::path& accel_dir,
                         const std::filesystem::path& clinical_csv) {
  std::error_code ec;
  std::filesystem::create_directories(accel_dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + accel_dir.string());
  if (clinical_csv.has_parent_path()) std::filesystem::create_directories(clinical_csv.parent_path(), ec);

  const auto cohort = synth_cohort(options);
  std::vector<ClinicalRecord> records;
  fmt::memory_buffer buf;
  for (const auto& profile : cohort) {
    records.push_back(profile.record);
    for (auto limb : {Limb::paretic, Limb::non_paretic}) {
      const auto series = synth_series(profile, limb, options);
      buf.clear();
      auto it = std::back_inserter(buf);
      fmt::format_to(it, "ax,ay,az\n");
      for (const auto& s : series.samples) fmt::format_to(it, "{:.4f},{:.4f},{:.4f}\n", s.ax, s.ay, s.az);
      const auto path = accel_dir / fmt::format("{}_{}.csv", profile.record.patient_id, to_string(limb));
      std::ofstream out(path, std::ios::binary);
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    }
  }
  std::ofstream out(clinical_csv, std::ios::binary);
  write_clinical_csv(records, out);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + clinical_csv.string());
}

}  // namespace limbsense
