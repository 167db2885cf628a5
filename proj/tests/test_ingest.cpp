#include <doctest.h>

#include <sstream>
#include <string>

#include <fmt/format.h>

#include "limbsense/error.hpp"
#include "limbsense/ingest.hpp"
#include "limbsense/random.hpp"

using namespace limbsense;

namespace {

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

std::string accel_csv(std::size_t n, double rate, bool with_time = true) {
  std::string out = with_time ? "t,ax,ay,az\n" : "ax,ay,az\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    out += with_time ? fmt::format("{},{},{},{}\n", t, 0.1, -0.2, 1.0) : fmt::format("{},{},{}\n", 0.1, -0.2, 1.0);
  }
  return out;
}

SampleSeries series_of_minutes(double minutes, double rate = 30.0) {
  SampleSeries s{"P01", Limb::paretic, rate, {}};
  const auto n = static_cast<std::size_t>(std::llround(minutes * 60.0 * rate));
  s.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    s.samples.push_back({t, std::sin(t), std::cos(t), 1.0});
  }
  return s;
}

}  // namespace

TEST_CASE("parse_accel_csv reads three rows at 30 Hz") {
  const auto s = parse_accel_csv("t,ax,ay,az\n0,0.1,0.2,0.3\n0.0333333333333333,0.1,0.2,0.3\n0.0666666666666667,0.1,0.2,0.3\n",
                                 "P01", Limb::paretic);
  CHECK(s.samples.size() == 3);
  CHECK(s.rate_hz == 30.0);
  CHECK(s.patient_id == "P01");
  CHECK(s.samples[1].ax == 0.1);
}

TEST_CASE("parse_accel_csv rejects malformed rows") {
  CHECK(error_kind_of([] { parse_accel_csv("t,ax,ay,az\n0.0,0.1,abc,0.2\n", "P", Limb::paretic); }) ==
        ErrorKind::MalformedRow);
  CHECK(error_kind_of([] { parse_accel_csv("t,ax,ay,az\n0.0,0.1,0.2\n", "P", Limb::paretic); }) ==
        ErrorKind::MalformedRow);
  CHECK(error_kind_of([] { parse_accel_csv("time,x,y,z\n0,0,0,0\n", "P", Limb::paretic); }) ==
        ErrorKind::MalformedRow);
  CHECK(error_kind_of([] { parse_accel_csv("t,ax,ay,az\n0,nan,0,0\n", "P", Limb::paretic); }) ==
        ErrorKind::MalformedRow);
}

TEST_CASE("parse_accel_csv detects time going backwards") {
  CHECK(error_kind_of([] {
          parse_accel_csv("t,ax,ay,az\n0,0,0,1\n0.0333333333333333,0,0,1\n0.01,0,0,1\n", "P", Limb::paretic);
        }) == ErrorKind::NonMonotonicTime);
}

TEST_CASE("parse_accel_csv rejects a 25 Hz recording") {
  CHECK(error_kind_of([] { parse_accel_csv(accel_csv(50, 25.0), "P", Limb::paretic); }) == ErrorKind::RateMismatch);
}

TEST_CASE("parse_accel_csv rejects a single irregular gap") {
  std::string csv = accel_csv(10, 30.0);
  csv += fmt::format("{},0.1,-0.2,1\n", 10.0 / 30.0 + 0.01);
  CHECK(error_kind_of([&] { parse_accel_csv(csv, "P", Limb::paretic); }) == ErrorKind::RateMismatch);
}

TEST_CASE("time column is optional") {
  const auto s = parse_accel_csv(accel_csv(90, 30.0, false), "P", Limb::non_paretic);
  REQUIRE(s.samples.size() == 90);
  CHECK(s.samples[0].t == 0.0);
  CHECK(s.samples[45].t == doctest::Approx(1.5));
  CHECK(s.limb == Limb::non_paretic);
}

TEST_CASE("accel CSV parse -> write -> parse round-trips exactly") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    SampleSeries s{"P07", Limb::paretic, 30.0, {}};
    const std::size_t n = 2 + rng.below(200);
    for (std::size_t i = 0; i < n; ++i) {
      s.samples.push_back({static_cast<double>(i) / 30.0, rng.normal(), rng.normal(), rng.normal(1.0, 0.3)});
    }
    std::ostringstream first;
    write_accel_csv(s, first);
    const auto parsed = parse_accel_csv(first.str(), "P07", Limb::paretic);
    CHECK(parsed == s);
    std::ostringstream second;
    write_accel_csv(parsed, second);
    CHECK(second.str() == first.str());
  }
}

TEST_CASE("parse_clinical_csv validates ranges and weeks") {
  const auto records = parse_clinical_csv("patient_id,affected_side,week,arat,ue_fm,safe\nP01,left,2,10,20,3\n");
  REQUIRE(records.size() == 1);
  CHECK(records[0].patient_id == "P01");
  CHECK(records[0].affected_side == Side::left);
  CHECK(records[0].arat == 10);
  CHECK(records[0].ue_fm == 20);
  CHECK(records[0].safe == 3);

  const std::string header = "patient_id,affected_side,week,arat,ue_fm,safe\n";
  CHECK(error_kind_of([&] { parse_clinical_csv(header + "P01,left,2,58,20,3\n"); }) == ErrorKind::ScoreOutOfRange);
  CHECK(error_kind_of([&] { parse_clinical_csv(header + "P01,left,2,60,20,3\n"); }) == ErrorKind::ScoreOutOfRange);
  CHECK(error_kind_of([&] { parse_clinical_csv(header + "P01,left,2,10,67,3\n"); }) == ErrorKind::ScoreOutOfRange);
  CHECK(error_kind_of([&] { parse_clinical_csv(header + "P01,left,2,10,20,11\n"); }) == ErrorKind::ScoreOutOfRange);
  CHECK(error_kind_of([&] { parse_clinical_csv(header + "P01,left,3,10,20,3\n"); }) == ErrorKind::UnknownWeek);
  CHECK(error_kind_of([&] { parse_clinical_csv(header + "P01,up,2,10,20,3\n"); }) == ErrorKind::MalformedRow);
  CHECK(parse_clinical_csv(header + "P01,right,24,57,66,10\n")[0].week == 24);
}

TEST_CASE("trim_session keeps exactly four hours after the ten-minute lead") {
  SUBCASE("260 minutes") {
    const auto s = series_of_minutes(260);
    const auto trimmed = trim_session(s);
    CHECK(trimmed.samples.size() == 432000);
    CHECK(trimmed.samples.front().t == 0.0);
    // First retained sample was the one recorded at t = 600 s.
    CHECK(trimmed.samples.front().ax == s.samples[18000].ax);
    CHECK(trimmed.duration_seconds() == doctest::Approx(14400.0));
  }
  SUBCASE("250 minutes fits exactly") { CHECK(trim_session(series_of_minutes(250)).samples.size() == 432000); }
  SUBCASE("200 minutes is too short") {
    CHECK(error_kind_of([] { trim_session(series_of_minutes(200)); }) == ErrorKind::SessionTooShort);
  }
}

TEST_CASE("trim_session ignores everything before the lead") {
  const auto s = series_of_minutes(251);
  auto garbled = s;
  Rng rng(3);
  for (std::size_t i = 0; i < 18000; ++i) {
    garbled.samples[i].ax = rng.normal(0.0, 50.0);
    garbled.samples[i].az = rng.normal(0.0, 50.0);
  }
  CHECK(trim_session(garbled) == trim_session(s));
}

TEST_CASE("label_severity uses a strict ARAT cutoff") {
  ClinicalRecord r;
  r.arat = 0;
  CHECK(label_severity(r, 22) == Severity::severe);
  r.arat = 57;
  CHECK(label_severity(r, 22) == Severity::moderate);
  r.arat = 21;
  CHECK(label_severity(r, 22) == Severity::severe);
  r.arat = 22;
  CHECK(label_severity(r, 22) == Severity::moderate);
  CHECK(error_kind_of([&] { label_severity(r, 0); }) == ErrorKind::ConfigError);
}

TEST_CASE("label_severity is monotone in ARAT") {
  for (int cutoff = 1; cutoff <= kAratMax; ++cutoff) {
    ClinicalRecord r;
    bool seen_moderate = false;
    for (int arat = 0; arat <= kAratMax; ++arat) {
      r.arat = arat;
      const bool moderate = label_severity(r, cutoff) == Severity::moderate;
      CHECK_FALSE((seen_moderate && !moderate));
      seen_moderate = seen_moderate || moderate;
    }
  }
}
