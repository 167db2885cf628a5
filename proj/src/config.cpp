#include "limbsense/config.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "limbsense/error.hpp"
#include "text.hpp"

namespace limbsense {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

double as_double(const std::string& key, std::string_view value) {
  const auto v = text::parse_double(value);
  if (!v) config_error(fmt::format("{}: '{}' is not a number", key, value));
  return *v;
}

long long as_int(const std::string& key, std::string_view value) {
  const auto v = text::parse_int(value);
  if (!v) config_error(fmt::format("{}: '{}' is not an integer", key, value));
  return *v;
}

std::size_t as_count(const std::string& key, std::string_view value) {
  const auto v = as_int(key, value);
  if (v < 0) config_error(fmt::format("{} must be non-negative", key));
  return static_cast<std::size_t>(v);
}

bool as_bool(const std::string& key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  config_error(fmt::format("{}: '{}' is not a boolean", key, value));
}

std::filesystem::path as_path(std::string_view value, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(value)};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (double v : values) out += (out.empty() ? "" : ",") + fmt::format("{}", v);
  return out;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value, const std::filesystem::path& base);

void apply_grid(RunConfig& cfg, const std::string& key, const std::string& value) {
  // grid.<kind>.<param>
  const auto rest = std::string_view(key).substr(5);
  const auto dot = rest.find('.');
  if (dot == std::string_view::npos) config_error("grid key must be grid.<kind>.<param>: " + key);
  const auto kind = parse_model_kind(rest.substr(0, dot));
  if (!kind) config_error("unknown model kind in " + key);
  const std::string param(rest.substr(dot + 1));
  const auto names = hyperparameter_names(*kind);
  if (std::find(names.begin(), names.end(), param) == names.end()) {
    config_error(fmt::format("{} has no hyperparameter '{}'", to_string(*kind), param));
  }
  std::vector<double> values;
  for (auto item : text::split(value, ',')) values.push_back(as_double(key, item));
  if (values.empty()) config_error(key + " lists no values");

  auto it = cfg.grids.find(*kind);
  if (it == cfg.grids.end()) it = cfg.grids.emplace(*kind, ParamGrid{*kind, {}}).first;
  auto& axes = it->second.axes;
  const auto axis = std::find_if(axes.begin(), axes.end(), [&](const auto& a) { return a.first == param; });
  if (axis == axes.end()) {
    axes.emplace_back(param, std::move(values));
  } else {
    axis->second = std::move(values);
  }
}

void apply_all(RunConfig& cfg, const std::map<std::string, std::string>& kv, const std::filesystem::path& base) {
  // Grid files first so inline grid keys can override them.
  if (const auto it = kv.find("grid_file"); it != kv.end()) {
    const auto path = as_path(it->second, base);
    const auto grid_kv = parse_key_values(read_file(path));
    for (const auto& [k, v] : grid_kv) {
      if (!k.starts_with("grid.")) config_error(fmt::format("{}: only grid.* keys are allowed, found '{}'", path.string(), k));
      apply_grid(cfg, k, v);
    }
  }
  for (const auto& [k, v] : kv) {
    if (k != "grid_file") apply(cfg, k, v, base);
  }
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value, const std::filesystem::path& base) {
  if (key.starts_with("grid.")) return apply_grid(cfg, key, value);
  if (key == "accel_dir") { cfg.accel_dir = as_path(value, base); return; }
  if (key == "clinical_csv") { cfg.clinical_csv = as_path(value, base); return; }
  if (key == "output_dir") { cfg.output_dir = as_path(value, base); return; }
  if (key == "arat_cutoff") { cfg.arat_cutoff = static_cast<int>(as_int(key, value)); return; }
  if (key == "rate_hz") { cfg.rate_hz = as_double(key, value); return; }
  if (key == "trim_lead_minutes") { cfg.trim_lead_minutes = as_double(key, value); return; }
  if (key == "horizon_minutes") { cfg.horizon_minutes = as_double(key, value); return; }
  if (key == "epoch_seconds") { cfg.epoch_seconds = as_double(key, value); return; }
  if (key == "window_minutes_set") { cfg.window_minutes_set = parse_int_list(value); return; }
  if (key == "activity_threshold_g") { cfg.activity_threshold_g = as_double(key, value); return; }
  if (key == "session_week") {
    if (value == "-" || value.empty()) {
      cfg.session_week.reset();
    } else {
      cfg.session_week = static_cast<int>(as_int(key, value));
    }
    return;
  }
  if (key == "seed") {
    const auto v = text::parse_int<std::uint64_t>(value);
    if (!v) config_error("seed must be a non-negative integer");
    cfg.seed = *v;
    return;
  }
  if (key == "train_fraction") { cfg.train_fraction = as_double(key, value); return; }
  if (key == "k_folds") { cfg.k_folds = as_count(key, value); return; }
  if (key == "group_cv") { cfg.group_cv = as_bool(key, value); return; }
  if (key == "models") {
    cfg.models.clear();
    for (auto item : text::split(value, ',')) {
      const auto kind = parse_model_kind(item);
      if (!kind) config_error(fmt::format("unknown model kind '{}'", item));
      cfg.models.push_back(*kind);
    }
    return;
  }
  if (key == "sweep_seeds") { cfg.sweep_seeds = as_count(key, value); return; }
  if (key == "jobs") { cfg.jobs = as_count(key, value); return; }
  if (key == "n_patients") { cfg.n_patients = as_count(key, value); return; }
  if (key == "severe_fraction") { cfg.severe_fraction = as_double(key, value); return; }
  if (key == "synth_minutes") { cfg.synth_minutes = as_double(key, value); return; }
  config_error("unknown config key '" + key + "'");
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view content) {
  std::map<std::string, std::string> kv;
  text::LineCursor cursor(content);
  std::string_view line;
  while (cursor.next(line)) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) config_error(fmt::format("line {}: expected key = value", cursor.line_number()));
    const auto key = text::trim(line.substr(0, eq));
    if (key.empty()) config_error(fmt::format("line {}: empty key", cursor.line_number()));
    kv[std::string(key)] = std::string(text::trim(line.substr(eq + 1)));
  }
  return kv;
}

std::vector<int> parse_int_list(std::string_view value) {
  std::vector<int> out;
  for (auto item : text::split(value, ',')) {
    const auto v = text::parse_int<int>(item);
    if (!v) config_error(fmt::format("'{}' is not an integer", item));
    out.push_back(*v);
  }
  return out;
}

ParamGrid RunConfig::grid(ModelKind kind) const {
  ParamGrid g = default_grid(kind);
  const auto it = grids.find(kind);
  if (it == grids.end()) return g;
  // Configured axes replace default axes of the same name and add new ones.
  for (const auto& [name, values] : it->second.axes) {
    const auto axis = std::find_if(g.axes.begin(), g.axes.end(), [&](const auto& a) { return a.first == name; });
    if (axis == g.axes.end()) {
      g.axes.emplace_back(name, values);
    } else {
      axis->second = values;
    }
  }
  return g;
}

void RunConfig::validate() const {
  if (arat_cutoff <= 0 || arat_cutoff > kAratMax) config_error(fmt::format("arat_cutoff {} outside (0, 57]", arat_cutoff));
  if (!(rate_hz > 0.0)) config_error("rate_hz must be positive");
  if (!(trim_lead_minutes >= 0.0)) config_error("trim_lead_minutes must be non-negative");
  if (!(horizon_minutes > 0.0)) config_error("horizon_minutes must be positive");
  if (!(epoch_seconds > 0.0) || std::llround(epoch_seconds * rate_hz) < 4) config_error("epoch_seconds too small");
  if (window_minutes_set.empty()) config_error("window_minutes_set is empty");
  for (int w : window_minutes_set) {
    if (std::find(std::begin(kWindowMinutes), std::end(kWindowMinutes), w) == std::end(kWindowMinutes)) {
      config_error(fmt::format("window {} is not one of 15,30,45,60,90,120", w));
    }
    if (w > horizon_minutes) config_error(fmt::format("window {} exceeds the horizon", w));
  }
  if (!(activity_threshold_g >= 0.0)) config_error("activity_threshold_g must be non-negative");
  if (session_week && !is_collection_week(*session_week)) config_error("session_week is not a collection week");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) config_error("train_fraction must lie in (0, 1)");
  if (k_folds < 2) config_error("k_folds must be at least 2");
  if (models.empty()) config_error("models is empty");
  if (sweep_seeds < 1) config_error("sweep_seeds must be at least 1");
  if (jobs < 1) config_error("jobs must be at least 1");
  if (n_patients < 2) config_error("n_patients must be at least 2");
  if (!(severe_fraction > 0.0 && severe_fraction < 1.0)) config_error("severe_fraction must lie in (0, 1)");
  if (synth_minutes < trim_lead_minutes + horizon_minutes) {
    config_error("synth_minutes shorter than trim_lead_minutes + horizon_minutes");
  }
  for (auto kind : models) {
    if (grid(kind).combinations().empty()) config_error("empty grid for " + std::string(to_string(kind)));
  }
}

std::string RunConfig::resolved_text() const {
  auto abs = [](const std::filesystem::path& p) { return std::filesystem::absolute(p).lexically_normal().string(); };
  std::string out;
  auto put = [&out](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  put("accel_dir", abs(accel_dir));
  put("clinical_csv", abs(clinical_csv));
  put("output_dir", abs(output_dir));
  put("arat_cutoff", std::to_string(arat_cutoff));
  put("rate_hz", fmt::format("{}", rate_hz));
  put("trim_lead_minutes", fmt::format("{}", trim_lead_minutes));
  put("horizon_minutes", fmt::format("{}", horizon_minutes));
  put("epoch_seconds", fmt::format("{}", epoch_seconds));
  put("window_minutes_set", fmt::format("{}", fmt::join(window_minutes_set, ",")));
  put("activity_threshold_g", fmt::format("{}", activity_threshold_g));
  put("session_week", session_week ? std::to_string(*session_week) : "-");
  put("seed", std::to_string(seed));
  put("train_fraction", fmt::format("{}", train_fraction));
  put("k_folds", std::to_string(k_folds));
  put("group_cv", group_cv ? "true" : "false");
  std::string kinds;
  for (auto k : models) kinds += (kinds.empty() ? "" : ",") + std::string(to_string(k));
  put("models", kinds);
  for (auto kind : kAllModelKinds) {
    for (const auto& [name, values] : grid(kind).axes) {
      put(fmt::format("grid.{}.{}", to_string(kind), name), join_doubles(values));
    }
  }
  put("sweep_seeds", std::to_string(sweep_seeds));
  put("jobs", std::to_string(jobs));
  put("n_patients", std::to_string(n_patients));
  put("severe_fraction", fmt::format("{}", severe_fraction));
  put("synth_minutes", fmt::format("{}", synth_minutes));
  return out;
}

RunConfig parse_run_config(std::string_view content, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  if (!base_dir.empty()) {
    cfg.accel_dir = base_dir / cfg.accel_dir;
    cfg.clinical_csv = base_dir / cfg.clinical_csv;
    cfg.output_dir = base_dir / cfg.output_dir;
  }
  apply_all(cfg, parse_key_values(content), base_dir);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) config_error("config file not found: " + path.string());
  return parse_run_config(read_file(path), path.parent_path());
}

}  // namespace limbsense
