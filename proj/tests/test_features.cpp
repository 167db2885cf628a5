#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "limbsense/error.hpp"
#include "limbsense/features.hpp"
#include "limbsense/random.hpp"
#include "oracles.hpp"

using namespace limbsense;

namespace {

constexpr double kResolution = 30.0 / 384.0;

Epoch epoch_from(std::vector<double> vm) { return Epoch{std::move(vm), 0.0}; }

std::vector<double> tone(std::size_t bin, double amplitude, double offset = 0.0) {
  std::vector<double> vm(kEpochSamples);
  for (std::size_t i = 0; i < vm.size(); ++i) {
    vm[i] = offset + amplitude * std::sin(oracle::kTwoPi * static_cast<double>(bin) * static_cast<double>(i) / 384.0);
  }
  return vm;
}

std::vector<double> random_vm(Rng& rng) {
  std::vector<double> vm(kEpochSamples);
  for (auto& v : vm) v = std::abs(rng.normal(1.0, 0.3));
  return vm;
}

SampleSeries series_with_vm(const std::vector<double>& vm, double rate = 30.0) {
  SampleSeries s{"P", Limb::paretic, rate, {}};
  for (std::size_t i = 0; i < vm.size(); ++i) s.samples.push_back({static_cast<double>(i) / rate, 0.0, 0.0, vm[i]});
  return s;
}

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected limbsense::Error");
  return ErrorKind::IoFailure;
}

}  // namespace

TEST_CASE("vector_magnitude") {
  CHECK(vector_magnitude({0, 3, 4, 0}) == 5.0);
  CHECK(vector_magnitude({0, 0, 0, 0}) == 0.0);
  CHECK(vector_magnitude({0, -0.12, 0.54, 0.98}) == doctest::Approx(1.125344391730816).epsilon(1e-12));
}

TEST_CASE("vector_magnitude is invariant to axis permutations and sign flips") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.normal();
    const double b = rng.normal();
    const double c = rng.normal();
    const double ref = vector_magnitude({0, a, b, c});
    CHECK(vector_magnitude({0, c, a, b}) == doctest::Approx(ref).epsilon(1e-15));
    CHECK(vector_magnitude({0, b, c, a}) == doctest::Approx(ref).epsilon(1e-15));
    CHECK(vector_magnitude({0, -a, b, -c}) == ref);
  }
}

TEST_CASE("segment_epochs cuts 384-sample epochs and drops the tail") {
  SUBCASE("full trimmed session") {
    const auto epochs = segment_epochs(series_with_vm(std::vector<double>(432000, 1.0)));
    CHECK(epochs.size() == 1125);
    CHECK(epochs[1].start_t == doctest::Approx(12.8));
  }
  SUBCASE("fifteen minutes") {
    const auto epochs = segment_epochs(series_with_vm(std::vector<double>(27000, 1.0)));
    CHECK(epochs.size() == 70);
    CHECK(27000 - epochs.size() * kEpochSamples == 120);
  }
  SUBCASE("less than one epoch") {
    CHECK(error_kind_of([] { segment_epochs(series_with_vm(std::vector<double>(383, 1.0))); }) ==
          ErrorKind::EmptyInput);
  }
}

TEST_CASE("concatenated epochs reproduce the vm prefix") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    SampleSeries s{"P", Limb::paretic, 30.0, {}};
    const std::size_t n = 384 + rng.below(4000);
    for (std::size_t i = 0; i < n; ++i) s.samples.push_back({i / 30.0, rng.normal(), rng.normal(), rng.normal()});
    const auto epochs = segment_epochs(s);
    std::vector<double> joined;
    for (const auto& e : epochs) joined.insert(joined.end(), e.vm.begin(), e.vm.end());
    REQUIRE(joined.size() == 384 * (n / 384));
    for (std::size_t i = 0; i < joined.size(); ++i) REQUIRE(joined[i] == vector_magnitude(s.samples[i]));
  }
}

TEST_CASE("narj") {
  CHECK(narj(std::vector<double>(384, 0.7)) == 0.0);
  CHECK(narj(std::vector<double>(384, 0.0)) == 0.0);
  for (double c : {0.001, 1.0, 42.0}) {
    std::vector<double> ramp(384);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = c * static_cast<double>(i);
    CHECK(narj(ramp) == doctest::Approx(30.0 / 383.0).epsilon(1e-12));
  }
}

TEST_CASE("narj is scale invariant and zero only on constant input") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto vm = random_vm(rng);
    const double base = narj(vm);
    CHECK(base > 0.0);
    const double c = std::exp(rng.normal(0.0, 2.0));
    for (auto& v : vm) v *= c;
    CHECK(narj(vm) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("spectrum of a constant is pure DC") {
  const auto spec = spectrum(std::vector<double>(384, 1.3));
  REQUIRE(spec.power.size() == 193);
  CHECK(spec.resolution_hz == 0.078125);
  CHECK(spec.power[0] == doctest::Approx(1.69).epsilon(1e-12));
  for (std::size_t k = 1; k < spec.power.size(); ++k) CHECK(spec.power[k] < 1e-12);
}

TEST_CASE("bin-aligned tone lands in its bin") {
  const auto vm = tone(12, 1.0);
  const auto spec = spectrum(vm);
  const auto expected = oracle::brute_power_spectrum(vm);
  CHECK(expected[12] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(spec.power[12] == doctest::Approx(expected[12]).epsilon(1e-12));
  CHECK(spec.frequency(12) == 0.9375);
  for (std::size_t k = 0; k < spec.power.size(); ++k) {
    if (k != 12) CHECK(spec.power[k] < 1e-20);
  }
}

TEST_CASE("spectrum matches the brute-force DFT and Parseval") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto vm = random_vm(rng);
    const auto spec = spectrum(vm);
    const auto expected = oracle::brute_power_spectrum(vm);
    for (std::size_t k = 0; k < expected.size(); ++k) REQUIRE(std::abs(spec.power[k] - expected[k]) < 1e-9);
    const double total = std::accumulate(spec.power.begin(), spec.power.end(), 0.0);
    double mean_sq = 0.0;
    for (double v : vm) mean_sq += v * v;
    mean_sq /= static_cast<double>(vm.size());
    CHECK(std::abs(total - mean_sq) <= 1e-9 * mean_sq);
  }
}

TEST_CASE("odd-length spectrum keeps the Parseval normalization") {
  Rng rng(17);
  std::vector<double> vm(375);
  for (auto& v : vm) v = rng.normal();
  const auto spec = spectrum(vm, 30.0);
  const auto expected = oracle::brute_power_spectrum(vm);
  REQUIRE(spec.power.size() == expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) CHECK(std::abs(spec.power[k] - expected[k]) < 1e-9);
}

TEST_CASE("dominant_freqs on two tones") {
  auto vm = tone(12, 1.0);
  const auto second = tone(30, 0.5);
  for (std::size_t i = 0; i < vm.size(); ++i) vm[i] += second[i];
  const auto expected = oracle::brute_power_spectrum(vm);
  const auto d = dominant_freqs(spectrum(vm));
  CHECK(d.f1 == 0.9375);
  CHECK(d.f2 == 2.34375);
  CHECK(d.p1 == doctest::Approx(expected[12]).epsilon(1e-9));
  CHECK(d.p2 == doctest::Approx(expected[30]).epsilon(1e-9));
  CHECK(d.p1 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(d.p2 == doctest::Approx(0.125).epsilon(1e-9));
}

TEST_CASE("dominant_freqs tie goes to the lower frequency") {
  auto vm = tone(20, 1.0);
  const auto low = tone(10, 1.0);
  for (std::size_t i = 0; i < vm.size(); ++i) vm[i] += low[i];
  const auto expected = oracle::brute_power_spectrum(vm);
  CHECK(expected[10] == doctest::Approx(expected[20]).epsilon(1e-12));
  const auto d = dominant_freqs(spectrum(vm));
  CHECK(d.f1 == 10 * kResolution);
  CHECK(d.f2 == 20 * kResolution);
  CHECK(d.p1 >= d.p2);
}

TEST_CASE("dominant_freqs on a constant epoch") {
  CHECK(error_kind_of([] { dominant_freqs(spectrum(std::vector<double>(384, 1.0))); }) ==
        ErrorKind::NoDominantFrequency);
}

TEST_CASE("dominant_freqs ordering and strong-tone properties") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    auto vm = random_vm(rng);
    const auto base = dominant_freqs(spectrum(vm));
    CHECK(base.p1 >= base.p2);
    CHECK(base.f1 != base.f2);
    CHECK(base.f1 > 0.0);
    CHECK(base.f1 <= 15.0);

    // A tone well above every existing non-DC bin takes over f1.
    const std::size_t bin = 1 + rng.below(191);
    const auto spec = spectrum(vm);
    const double strongest = *std::max_element(spec.power.begin() + 1, spec.power.end());
    const double amplitude = 4.0 * std::sqrt(2.0 * strongest) + 0.1;
    const auto t = tone(bin, amplitude);
    for (std::size_t i = 0; i < vm.size(); ++i) vm[i] += t[i];
    CHECK(dominant_freqs(spectrum(vm)).f1 == doctest::Approx(bin * kResolution));
  }
}

TEST_CASE("epoch_features composes the pieces") {
  const auto f = epoch_features(epoch_from(tone(12, 1.0, 2.0)));
  CHECK(f.mag_mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.mag_max == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(f.mag_min == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(f.f1 == 0.9375);
  CHECK(f.p1 == doctest::Approx(0.5).epsilon(1e-9));

  const Epoch flat = epoch_from(std::vector<double>(384, 1.0));
  CHECK(error_kind_of([&] { epoch_features(flat); }) == ErrorKind::NoDominantFrequency);
  CHECK(narj(flat.vm) == 0.0);
}

TEST_CASE("epoch_features ordering invariants on random epochs") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = epoch_features(epoch_from(random_vm(rng)));
    CHECK(f.mag_min <= f.mag_mean);
    CHECK(f.mag_mean <= f.mag_max);
    CHECK(f.p1 >= f.p2);
    CHECK(f.p2 >= 0.0);
    CHECK(f.narj >= 0.0);
  }
}

namespace {

std::vector<TimedEpochFeatures> indexed_epochs(std::size_t count, double shift = 0.0) {
  std::vector<TimedEpochFeatures> out;
  for (std::size_t i = 0; i < count; ++i) {
    EpochFeatures f;
    f.mag_mean = static_cast<double>(i);
    f.mag_max = 1.0;
    out.push_back({shift + static_cast<double>(i) * 12.8, f});
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate_windows window counts over the four-hour horizon") {
  const auto epochs = indexed_epochs(1125);
  const SessionInfo info{"P01", 2, Severity::severe};
  const std::pair<int, std::size_t> expected[] = {{15, 16}, {30, 8}, {45, 5}, {60, 4}, {90, 2}, {120, 2}};
  for (auto [w, n] : expected) {
    const auto windows = aggregate_windows(epochs, w, info);
    CHECK(windows.size() == n);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      CHECK(windows[i].window_index == static_cast<int>(i));
      CHECK(windows[i].window_minutes == w);
      CHECK(windows[i].label == Severity::severe);
      CHECK(windows[i].patient_id == "P01");
    }
  }
}

TEST_CASE("aggregate_windows bins epochs by start time") {
  // 15-min windows: epochs starting at 0 .. 896 s (indices 0..70) fall in the
  // first window, so its mean index is 35.
  const auto windows = aggregate_windows(indexed_epochs(1125), 15, {"P", 2, Severity::moderate});
  CHECK(windows[0].features[0] == doctest::Approx(35.0));
  CHECK(windows[1].features[0] == doctest::Approx((71.0 + 140.0) / 2.0));
  CHECK(windows[0].features[1] == 1.0);
}

TEST_CASE("aggregate_windows averages members") {
  std::vector<TimedEpochFeatures> epochs(2);
  epochs[0].features.mag_mean = 1.0;
  epochs[1] = {12.8, {}};
  epochs[1].features.mag_mean = 2.0;
  const auto out = aggregate_windows(epochs, 15, {"P", 2, Severity::moderate}, 15.0);
  REQUIRE(out.size() == 1);
  CHECK(out[0].features[0] == 1.5);
}

TEST_CASE("aggregate_windows rejects an empty window") {
  auto epochs = indexed_epochs(1125);
  std::erase_if(epochs, [](const TimedEpochFeatures& e) { return e.start_t >= 900.0 && e.start_t < 1800.0; });
  CHECK(error_kind_of([&] { aggregate_windows(epochs, 15, {"P", 2, Severity::moderate}); }) == ErrorKind::EmptyWindow);
}

TEST_CASE("shifting epochs by a whole window shifts the window index") {
  const SessionInfo info{"P", 2, Severity::moderate};
  // 563 epochs span four 30-min windows exactly up to 7206 s.
  const auto epochs = indexed_epochs(563);
  const auto base = aggregate_windows(epochs, 30, info, 120.0);
  std::vector<TimedEpochFeatures> shifted(epochs.begin(), epochs.begin() + 141);
  for (auto e : epochs) {
    e.start_t += 1800.0;
    shifted.push_back(e);
  }
  const auto moved = aggregate_windows(shifted, 30, info, 150.0);
  REQUIRE(base.size() == 4);
  REQUIRE(moved.size() == 5);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(moved[i + 1].window_index == base[i].window_index + 1);
    for (std::size_t j = 0; j < kFeatureCount; ++j) CHECK(moved[i + 1].features[j] == doctest::Approx(base[i].features[j]));
  }
}

namespace {

// Active seconds are the blocks whose vm oscillates with std 0.1 g.
SampleSeries activity_series(const std::vector<bool>& active_seconds) {
  SampleSeries s{"P", Limb::paretic, 30.0, {}};
  for (std::size_t sec = 0; sec < active_seconds.size(); ++sec) {
    for (std::size_t i = 0; i < 30; ++i) {
      const double t = static_cast<double>(sec * 30 + i) / 30.0;
      const double motion = active_seconds[sec] ? 0.1414 * std::sin(oracle::kTwoPi * 2.0 * t) : 0.0;
      s.samples.push_back({t, 0.0, 0.0, 1.0 + motion});
    }
  }
  return s;
}

}  // namespace

TEST_CASE("use_ratio") {
  std::vector<bool> sixty(120, false);
  std::vector<bool> thirty(120, false);
  for (std::size_t i = 0; i < 60; ++i) sixty[i] = true;
  for (std::size_t i = 0; i < 30; ++i) thirty[2 * i + 1] = true;
  const auto a = activity_series(thirty);
  const auto b = activity_series(sixty);
  CHECK(active_seconds(a, 0.02) == 30);
  CHECK(active_seconds(b, 0.02) == 60);
  CHECK(use_ratio(b, b) == 1.0);
  CHECK(use_ratio(a, b) == 0.5);
  CHECK(use_ratio(a, b) * use_ratio(b, a) == doctest::Approx(1.0));
  const auto still = activity_series(std::vector<bool>(120, false));
  CHECK(error_kind_of([&] { use_ratio(a, still); }) == ErrorKind::NoReferenceActivity);
}

TEST_CASE("use_ratio reciprocity on random activity") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<bool> x(90);
    std::vector<bool> y(90);
    for (std::size_t i = 0; i < 90; ++i) {
      x[i] = rng.uniform() < 0.5;
      y[i] = rng.uniform() < 0.5;
    }
    x[0] = y[0] = true;
    const auto a = activity_series(x);
    const auto b = activity_series(y);
    CHECK(use_ratio(a, b) * use_ratio(b, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("feature CSV keeps nine significant digits and re-parses stably") {
  Rng rng(31);
  std::vector<WindowFeatureVector> rows;
  for (int i = 0; i < 25; ++i) {
    WindowFeatureVector v{"P" + std::to_string(i), 2, 30, i % 8, {}, i % 2 ? Severity::severe : Severity::moderate};
    for (auto& f : v.features) f = rng.normal() * std::pow(10.0, rng.normal(0.0, 3.0));
    rows.push_back(v);
  }
  std::ostringstream first;
  write_feature_csv(rows, first);
  const auto parsed = parse_feature_csv(first.str());
  REQUIRE(parsed.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i].patient_id == rows[i].patient_id);
    CHECK(parsed[i].label == rows[i].label);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      CHECK(parsed[i].features[j] == doctest::Approx(rows[i].features[j]).epsilon(1e-8));
    }
  }
  std::ostringstream second;
  write_feature_csv(parsed, second);
  CHECK(second.str() == first.str());
  CHECK(first.str().rfind("patient_id,week,window_minutes,window_index,mag_mean,mag_max,mag_min,narj,f1,p1,f2,p2,label\n", 0) == 0);
}
