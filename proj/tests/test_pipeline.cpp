#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>

#include "limbsense/config.hpp"
#include "limbsense/error.hpp"
#include "limbsense/pipeline.hpp"
#include "limbsense/synth.hpp"

using namespace limbsense;
namespace fs = std::filesystem;

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

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("limbsense_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Ten patients with 35-minute sessions, trimmed to 30 minutes after a 2-minute lead.
RunConfig small_config(const fs::path& root) {
  return parse_run_config(
      "accel_dir = data/accel\n"
      "clinical_csv = data/clinical.csv\n"
      "output_dir = out\n"
      "n_patients = 10\n"
      "synth_minutes = 35\n"
      "trim_lead_minutes = 2\n"
      "horizon_minutes = 30\n"
      "window_minutes_set = 15,30\n"
      "models = logistic_regression, naive_bayes\n"
      "k_folds = 3\n"
      "seed = 3\n",
      root);
}

}  // namespace

TEST_CASE("parse_key_values") {
  const auto kv = parse_key_values("# comment\n a = 1 \nb=two # trailing\n\na = 3\n");
  CHECK(kv.at("a") == "3");
  CHECK(kv.at("b") == "two");
  CHECK(kv.size() == 2);
  CHECK(error_kind_of([] { parse_key_values("no equals sign\n"); }) == ErrorKind::ConfigError);
}

TEST_CASE("run config parsing") {
  const auto c = parse_run_config(
      "accel_dir = raw\nseed = 11\nwindow_minutes_set = 30,60\nmodels = knn,random_forest\n"
      "grid.knn.k = 1,3\ngrid.random_forest.max_depth = 2,inf\n",
      "/base");
  CHECK(c.accel_dir == fs::path("/base/raw"));
  CHECK(c.seed == 11);
  CHECK(c.window_minutes_set == std::vector<int>{30, 60});
  CHECK(c.models == std::vector<ModelKind>{ModelKind::knn, ModelKind::random_forest});
  CHECK(c.grid(ModelKind::knn).combinations().size() == 2);
  // Configured axes replace the default axis of the same name only.
  CHECK(c.grid(ModelKind::random_forest).combinations().size() == 4);
  CHECK(c.grid(ModelKind::linear_svm).combinations().size() == 3);
}

TEST_CASE("resolved config text re-parses to the same configuration") {
  const auto c = parse_run_config("output_dir = o\ngrid.knn.k = 1,3\nsession_week = 4\ngroup_cv = false\n", "/x");
  const auto again = parse_run_config(c.resolved_text(), "/elsewhere");
  CHECK(again.resolved_text() == c.resolved_text());
  CHECK(again.session_week == 4);
  CHECK_FALSE(again.group_cv);
}

TEST_CASE("run config validation") {
  const char* bad[] = {"arat_cutoff = 0\n",       "arat_cutoff = 58\n",     "train_fraction = 1.5\n",
                       "k_folds = 1\n",           "models = perceptron\n",  "window_minutes_set = 0\n",
                       "seed = -1\n",             "unknown_key = 3\n",      "grid.knn.depth = 2\n",
                       "session_week = 3\n",      "horizon_minutes = -5\n", "rate_hz = abc\n"};
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK(error_kind_of([&] { parse_run_config(text, "/").validate(); }) == ErrorKind::ConfigError);
  }
  CHECK_NOTHROW(parse_run_config("", "/").validate());
  CHECK(error_kind_of([] { load_run_config("/nonexistent/run.conf"); }) == ErrorKind::ConfigError);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ErrorKind::ConfigError) == kExitConfig);
  CHECK(exit_code_for(ErrorKind::MalformedRow) == kExitData);
  CHECK(exit_code_for(ErrorKind::EmptyInput) == kExitData);
  CHECK(exit_code_for(ErrorKind::DegenerateSplit) == kExitDegenerate);
}

TEST_CASE("parallel_for covers every index once") {
  for (std::size_t jobs : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("synthetic cohort is seeded and labelled by the cutoff") {
  SynthOptions opts;
  opts.n_patients = 20;
  const auto a = synth_cohort(opts);
  const auto b = synth_cohort(opts);
  REQUIRE(a.size() == 20);
  std::size_t severe = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].record.arat == b[i].record.arat);
    CHECK(a[i].seed == b[i].seed);
    CHECK(label_severity(a[i].record, opts.arat_cutoff) == a[i].severity);
    severe += a[i].severity == Severity::severe;
  }
  CHECK(severe == 10);
  opts.seed = 8;
  const auto c = synth_cohort(opts);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].record.arat != c[i].record.arat;
  CHECK(differs);
}

TEST_CASE("end-to-end on a small synthetic cohort") {
  const auto root = fresh_dir("pipeline");
  auto config = small_config(root);
  config.validate();
  cmd_synth(config);
  CHECK(discover_sessions(config.accel_dir).size() == 10);

  SUBCASE("synth is reproducible") {
    const auto other_root = fresh_dir("pipeline_again");
    auto other = small_config(other_root);
    cmd_synth(other);
    for (const auto& s : discover_sessions(config.accel_dir)) {
      CHECK(read_file(s.paretic) == read_file(other.accel_dir / s.paretic.filename()));
    }
    CHECK(read_file(config.clinical_csv) == read_file(other.clinical_csv));
    fs::remove_all(other_root);
  }

  SUBCASE("featurize, train-eval, correlate and report") {
    const auto summary = cmd_featurize(config);
    CHECK(summary.sessions_ok == 10);
    CHECK(summary.sessions_failed == 0);
    CHECK(load_feature_csv(config.output_dir / "features_15.csv").size() == 20);
    CHECK(load_feature_csv(config.output_dir / "features_30.csv").size() == 10);
    CHECK(fs::exists(config.output_dir / "use_ratio.csv"));
    CHECK(fs::exists(config.output_dir / "run_config_resolved"));

    const auto report = cmd_train_eval(config);
    CHECK(report.cells.size() == 4);
    const auto first = read_file(config.output_dir / "report.csv");
    const auto points = read_file(config.output_dir / "roc_points.csv");
    const auto model = read_file(config.output_dir / "models" / "naive_bayes_30.model");
    CHECK(fs::exists(config.output_dir / "roc.svg"));
    CHECK(fs::exists(config.output_dir / "grid_search.csv"));

    cmd_train_eval(config);
    CHECK(read_file(config.output_dir / "report.csv") == first);
    CHECK(read_file(config.output_dir / "roc_points.csv") == points);
    CHECK(read_file(config.output_dir / "models" / "naive_bayes_30.model") == model);

    const double r = cmd_correlate(config);
    CHECK(r > 0.5);
    CHECK(fs::exists(config.output_dir / "correlation.csv"));
    const auto table = cmd_report(config);
    CHECK(table.find("naive_bayes") != std::string::npos);
  }

  SUBCASE("featurize skips corrupt and unlabelled sessions") {
    const auto sessions = discover_sessions(config.accel_dir);
    {
      std::ofstream out(sessions[0].paretic, std::ios::app);
      out << "0.1,oops,0.2\n";
    }
    // Drop the clinical row of the second patient.
    const auto records = load_clinical_csv(config.clinical_csv);
    std::vector<ClinicalRecord> kept;
    for (const auto& r : records) {
      if (r.patient_id != sessions[1].patient_id) kept.push_back(r);
    }
    {
      std::ofstream out(config.clinical_csv);
      write_clinical_csv(kept, out);
    }
    const auto summary = cmd_featurize(config);
    CHECK(summary.sessions_ok == 8);
    CHECK(summary.sessions_failed == 2);
    CHECK(load_feature_csv(config.output_dir / "features_15.csv").size() == 16);
  }

  SUBCASE("featurize fails when nothing survives") {
    for (const auto& s : discover_sessions(config.accel_dir)) {
      std::ofstream out(s.paretic);
      out << "ax,ay,az\n1,2\n";
    }
    CHECK(error_kind_of([&] { cmd_featurize(config); }) == ErrorKind::EmptyInput);
  }

  fs::remove_all(root);
}
