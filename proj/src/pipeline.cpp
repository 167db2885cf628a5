#include "limbsense/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "limbsense/error.hpp"
#include "limbsense/synth.hpp"
#include "text.hpp"

namespace limbsense {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPareticSuffix = "_paretic.csv";
constexpr std::string_view kNonPareticSuffix = "_non_paretic.csv";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

void write_text(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
}

template <typename Writer>
void write_with(const fs::path& path, Writer writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  writer(out);
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

const ClinicalRecord* pick_record(const std::vector<const ClinicalRecord*>& records, std::optional<int> week) {
  const ClinicalRecord* best = nullptr;
  for (const auto* r : records) {
    if (week) {
      if (r->week == *week) return r;
    } else if (best == nullptr || r->week < best->week) {
      best = r;
    }
  }
  return best;
}

struct SessionResult {
  bool ok = false;
  std::map<int, std::vector<WindowFeatureVector>> windows;
  std::optional<double> use_ratio;
  ClinicalRecord record;
};

SessionResult featurize_session(const SessionFiles& files, const ClinicalRecord& record, const RunConfig& config) {
  const TrimOptions trim{config.trim_lead_minutes, config.horizon_minutes};
  SessionResult result;
  result.record = record;
  const auto paretic = trim_session(load_accel_csv(files.paretic, files.patient_id, Limb::paretic, config.rate_hz), trim);
  std::size_t skipped = 0;
  const auto epochs = session_epoch_features(paretic, config.epoch_seconds, &skipped);
  if (skipped > 0) {
    spdlog::warn("{}: {} epoch(s) without non-DC content left out of the averages", files.patient_id, skipped);
  }
  const SessionInfo info{files.patient_id, record.week, label_severity(record, config.arat_cutoff)};
  for (int w : config.window_minutes_set) {
    result.windows[w] = aggregate_windows(epochs, w, info, config.horizon_minutes);
  }
  if (!files.non_paretic.empty()) {
    try {
      const auto other =
          trim_session(load_accel_csv(files.non_paretic, files.patient_id, Limb::non_paretic, config.rate_hz), trim);
      result.use_ratio = use_ratio(paretic, other, config.activity_threshold_g);
    } catch (const Error& e) {
      spdlog::warn("{}: use ratio unavailable: {}", files.patient_id, e.what());
    }
  } else {
    spdlog::warn("{}: no non-paretic recording; use ratio skipped", files.patient_id);
  }
  result.ok = true;
  return result;
}

struct CellJob {
  ModelKind kind;
  int window;
};

std::string join_fold_aucs(const std::vector<double>& values) {
  std::string out;
  for (double v : values) out += (out.empty() ? "" : ";") + (std::isfinite(v) ? fmt::format("{:.6f}", v) : "nan");
  return out;
}

EvalReport train_eval_once(const RunConfig& config, const fs::path& out_dir,
                           const std::map<int, Dataset>& datasets) {
  std::set<std::string> all_patients;
  for (const auto& [w, ds] : datasets) {
    for (const auto& id : ds.patients()) all_patients.insert(id);
  }
  const auto [train_ids, test_ids] =
      split_patients({all_patients.begin(), all_patients.end()}, config.train_fraction, config.seed);
  spdlog::info("seed {}: {} train / {} test patients", config.seed, train_ids.size(), test_ids.size());

  std::map<int, std::pair<Dataset, Dataset>> splits;
  for (const auto& [w, ds] : datasets) {
    Dataset train = select_patients(ds, train_ids);
    Dataset test = select_patients(ds, test_ids);
    const auto severe = std::count_if(train.rows.begin(), train.rows.end(), [](const LabeledRow& r) { return r.label == 1; });
    if (train.rows.empty() || test.rows.empty() || severe == 0 || static_cast<std::size_t>(severe) == train.rows.size()) {
      throw Error(ErrorKind::DegenerateSplit,
                  fmt::format("{}-min window: {} train rows ({} severe), {} test rows", w, train.rows.size(), severe,
                              test.rows.size()));
    }
    splits.emplace(w, std::make_pair(std::move(train), std::move(test)));
  }

  std::vector<CellJob> jobs;
  for (int w : config.window_minutes_set) {
    for (auto kind : config.models) jobs.push_back({kind, w});
  }
  std::vector<TrainedModel> models(jobs.size());
  std::vector<GridSearchResult> searches(jobs.size());
  std::vector<std::exception_ptr> failures(jobs.size());
  parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
    try {
      const auto& train = splits.at(jobs[i].window).first;
      searches[i] = grid_search(config.grid(jobs[i].kind), train.rows, config.k_folds, config.seed, config.group_cv);
      models[i] = train_model(searches[i].best, train.rows, config.seed);
      for (const auto& entry : searches[i].table) {
        if (entry.params != searches[i].best.params) continue;
        for (double a : entry.fold_aucs) {
          if (std::isfinite(a)) models[i].fold_aucs.push_back(a);
        }
        break;
      }
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<EvalInput> inputs;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& [train, test] = splits.at(jobs[i].window);
    inputs.push_back({&models[i], jobs[i].window, searches[i].best_mean_auc, train.rows.size(),
                      train.patients().size(), &test});
  }
  EvalReport report = evaluate(inputs);

  ensure_dir(out_dir / "models");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    save_model(models[i], out_dir / "models" / fmt::format("{}_{}.model", to_string(jobs[i].kind), jobs[i].window));
  }
  write_with(out_dir / "report.csv", [&](std::ostream& out) { write_report_csv(report, out); });
  write_with(out_dir / "grid_search.csv", [&](std::ostream& out) {
    out << "model,window_minutes,params,mean_auc,fold_aucs,error\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      for (const auto& e : searches[i].table) {
        const ModelSpec spec{jobs[i].kind, e.params};
        const auto params = spec.describe();
        std::string error = e.error;
        std::replace(error.begin(), error.end(), ',', ';');
        out << fmt::format("{},{},{},{},{},{}\n", to_string(jobs[i].kind), jobs[i].window, params.empty() ? "-" : params,
                           std::isfinite(e.mean_auc) ? fmt::format("{:.6f}", e.mean_auc) : "nan",
                           join_fold_aucs(e.fold_aucs), error);
      }
    }
  });
  const auto groups = roc_groups(report);
  render_roc_svg(groups, out_dir / "roc.svg");
  write_resolved_config(config, out_dir);
  return report;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError: return kExitConfig;
    case ErrorKind::DegenerateSplit:
    case ErrorKind::TooFewGroups:
    case ErrorKind::SingleClassTraining: return kExitDegenerate;
    default: return kExitData;
  }
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

std::vector<SessionFiles> discover_sessions(const fs::path& accel_dir) {
  if (!fs::is_directory(accel_dir)) throw Error(ErrorKind::IoFailure, "accel_dir not found: " + accel_dir.string());
  std::map<std::string, SessionFiles> sessions;
  std::set<std::string> non_paretic;
  std::map<std::string, fs::path> non_paretic_paths;
  for (const auto& entry : fs::directory_iterator(accel_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.ends_with(kNonPareticSuffix)) {
      non_paretic_paths[name.substr(0, name.size() - kNonPareticSuffix.size())] = entry.path();
    } else if (name.ends_with(kPareticSuffix)) {
      const auto id = name.substr(0, name.size() - kPareticSuffix.size());
      sessions[id] = {id, entry.path(), {}};
    }
  }
  std::vector<SessionFiles> out;
  for (auto& [id, files] : sessions) {
    if (const auto it = non_paretic_paths.find(id); it != non_paretic_paths.end()) files.non_paretic = it->second;
    out.push_back(files);
  }
  return out;
}

void write_resolved_config(const RunConfig& config, const fs::path& dir) {
  ensure_dir(dir);
  write_text(dir / "run_config_resolved", config.resolved_text());
}

void cmd_synth(const RunConfig& config) {
  SynthOptions options;
  options.n_patients = config.n_patients;
  options.severe_fraction = config.severe_fraction;
  options.minutes = config.synth_minutes;
  options.rate_hz = config.rate_hz;
  options.arat_cutoff = config.arat_cutoff;
  options.seed = config.seed;
  spdlog::info("synthesizing {} patients ({} min each) into {}", options.n_patients, options.minutes,
               config.accel_dir.string());
  write_synth_dataset(options, config.accel_dir, config.clinical_csv);
  write_resolved_config(config, config.accel_dir);
}

FeaturizeSummary cmd_featurize(const RunConfig& config) {
  const auto records = load_clinical_csv(config.clinical_csv);
  std::map<std::string, std::vector<const ClinicalRecord*>> by_patient;
  for (const auto& r : records) by_patient[r.patient_id].push_back(&r);

  const auto sessions = discover_sessions(config.accel_dir);
  if (sessions.empty()) throw Error(ErrorKind::EmptyInput, "no *_paretic.csv files in " + config.accel_dir.string());

  std::vector<SessionResult> results(sessions.size());
  parallel_for(sessions.size(), config.jobs, [&](std::size_t i) {
    const auto& files = sessions[i];
    const auto it = by_patient.find(files.patient_id);
    const ClinicalRecord* record = it == by_patient.end() ? nullptr : pick_record(it->second, config.session_week);
    if (record == nullptr) {
      spdlog::warn("{}: {}: no clinical record; session skipped", files.patient_id, to_string(ErrorKind::LabelUnavailable));
      return;
    }
    try {
      results[i] = featurize_session(files, *record, config);
    } catch (const Error& e) {
      spdlog::warn("{}: session skipped: {}", files.patient_id, e.what());
    }
  });

  FeaturizeSummary summary;
  for (const auto& r : results) (r.ok ? summary.sessions_ok : summary.sessions_failed) += 1;
  if (summary.sessions_ok == 0) throw Error(ErrorKind::EmptyInput, "every session failed to featurize");

  ensure_dir(config.output_dir);
  for (int w : config.window_minutes_set) {
    std::vector<WindowFeatureVector> rows;
    for (const auto& r : results) {
      if (!r.ok) continue;
      const auto& v = r.windows.at(w);
      rows.insert(rows.end(), v.begin(), v.end());
    }
    write_with(config.output_dir / fmt::format("features_{}.csv", w),
               [&](std::ostream& out) { write_feature_csv(rows, out); });
  }
  write_with(config.output_dir / "use_ratio.csv", [&](std::ostream& out) {
    out << "patient_id,week,arat,use_ratio\n";
    for (const auto& r : results) {
      if (r.ok && r.use_ratio) {
        out << fmt::format("{},{},{},{:.9g}\n", r.record.patient_id, r.record.week, r.record.arat, *r.use_ratio);
      }
    }
  });
  write_resolved_config(config, config.output_dir);
  spdlog::info("featurized {} session(s), {} skipped", summary.sessions_ok, summary.sessions_failed);
  return summary;
}

EvalReport cmd_train_eval(const RunConfig& config) {
  std::map<int, Dataset> datasets;
  for (int w : config.window_minutes_set) {
    const auto path = config.output_dir / fmt::format("features_{}.csv", w);
    if (!fs::exists(path)) throw Error(ErrorKind::IoFailure, path.string() + " not found; run featurize first");
    datasets.emplace(w, make_dataset(load_feature_csv(path), w));
  }

  if (config.sweep_seeds <= 1) return train_eval_once(config, config.output_dir, datasets);

  // Multi-seed sweep: one full run per seed plus a summary of test AUCs.
  std::map<std::pair<std::string, int>, std::vector<double>> aucs;
  EvalReport first;
  for (std::size_t s = 0; s < config.sweep_seeds; ++s) {
    RunConfig run = config;
    run.seed = config.seed + s;
    run.sweep_seeds = 1;
    auto report = train_eval_once(run, config.output_dir / fmt::format("seed_{}", run.seed), datasets);
    for (const auto& c : report.cells) {
      if (c.valid) aucs[{std::string(to_string(c.kind)), c.window_minutes}].push_back(c.test_auc);
    }
    if (s == 0) first = std::move(report);
  }
  write_with(config.output_dir / "sweep_summary.csv", [&](std::ostream& out) {
    out << "model,window_minutes,n_seeds,mean_test_auc,sd_test_auc\n";
    for (int w : config.window_minutes_set) {
      for (auto kind : config.models) {
        const auto& v = aucs[{std::string(to_string(kind)), w}];
        double mean = 0.0;
        for (double a : v) mean += a;
        mean = v.empty() ? std::nan("") : mean / static_cast<double>(v.size());
        double var = 0.0;
        for (double a : v) var += (a - mean) * (a - mean);
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        out << fmt::format("{},{},{},{:.3f},{:.3f}\n", to_string(kind), w, v.size(), mean, sd);
      }
    }
  });
  write_resolved_config(config, config.output_dir);
  return first;
}

double cmd_correlate(const RunConfig& config) {
  const auto path = config.output_dir / "use_ratio.csv";
  const auto content = read_file(path);
  text::LineCursor cursor(content);
  std::string_view line;
  if (!cursor.next(line) || line != "patient_id,week,arat,use_ratio") {
    throw Error(ErrorKind::MalformedRow, "unexpected use_ratio.csv header");
  }
  std::vector<double> arat;
  std::vector<double> ratio;
  while (cursor.next(line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    const auto a = f.size() == 4 ? text::parse_double(f[2]) : std::nullopt;
    const auto u = f.size() == 4 ? text::parse_double(f[3]) : std::nullopt;
    if (!a || !u) throw Error(ErrorKind::MalformedRow, fmt::format("use_ratio.csv line {}", cursor.line_number()));
    arat.push_back(*a);
    ratio.push_back(*u);
  }
  const double r = pearson(arat, ratio);
  write_text(config.output_dir / "correlation.csv",
             fmt::format("x,y,n,pearson_r\narat,use_ratio,{},{:.6f}\n", arat.size(), r));
  return r;
}

std::string cmd_report(const RunConfig& config) {
  const auto rows = parse_report_csv(read_file(config.output_dir / "report.csv"));
  std::vector<std::string> models;
  std::vector<int> windows;
  std::map<std::pair<std::string, int>, double> table;
  for (const auto& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(windows.begin(), windows.end(), r.window_minutes) == windows.end()) windows.push_back(r.window_minutes);
    table[{r.model, r.window_minutes}] = r.test_auc;
  }
  std::string out = fmt::format("{:<8}", "window");
  for (const auto& m : models) out += fmt::format(" {:>19}", m);
  out += '\n';
  for (int w : windows) {
    out += fmt::format("{:<8}", fmt::format("{} min", w));
    for (const auto& m : models) {
      const auto it = table.find({m, w});
      out += it == table.end() || !std::isfinite(it->second) ? fmt::format(" {:>19}", "-")
                                                             : fmt::format(" {:>19.3f}", it->second);
    }
    out += '\n';
  }
  const auto points = config.output_dir / "roc_points.csv";
  if (fs::exists(points)) render_roc_svg(parse_roc_points_csv(read_file(points)), config.output_dir / "roc.svg");
  return out;
}

}  // namespace limbsense
