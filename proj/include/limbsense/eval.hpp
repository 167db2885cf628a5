#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "limbsense/models.hpp"

namespace limbsense {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the origin
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Sweeps thresholds over the distinct scores in descending order; tied
/// scores collapse to one point. labels are 0/1.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

double auc(std::span<const double> scores, std::span<const int> labels);

/// Sample Pearson correlation.
double pearson(std::span<const double> x, std::span<const double> y);

struct EvalCell {
  ModelKind kind = ModelKind::logistic_regression;
  int window_minutes = 0;
  bool valid = false;
  std::string error;
  double test_auc = 0.0;
  double cv_mean_auc = 0.0;
  std::vector<double> fold_aucs;
  std::string best_params;
  std::size_t n_train_rows = 0;
  std::size_t n_test_rows = 0;
  std::size_t n_train_patients = 0;
  std::size_t n_test_patients = 0;
  std::uint64_t seed = 0;
  RocCurve roc;
};

struct EvalReport {
  std::vector<EvalCell> cells;  // ordered by window, then model kind

  const EvalCell* find(ModelKind kind, int window_minutes) const;
};

/// Everything needed to score one (kind, window) cell on held-out rows.
struct EvalInput {
  const TrainedModel* model = nullptr;
  int window_minutes = 0;
  double cv_mean_auc = 0.0;
  std::size_t n_train_rows = 0;
  std::size_t n_train_patients = 0;
  const Dataset* test = nullptr;
};

/// Scores each model on its test rows. A single-class test set marks the cell
/// invalid rather than failing the report.
EvalReport evaluate(std::span<const EvalInput> inputs);

/// One report.csv line.
struct ReportRow {
  std::string model;
  int window_minutes = 0;
  double test_auc = 0.0;
  double cv_mean_auc = 0.0;
  std::string best_params;
  std::size_t n_test_rows = 0;
  std::uint64_t seed = 0;
};

std::vector<ReportRow> report_rows(const EvalReport& report);
void write_report_csv(const EvalReport& report, std::ostream& out);
std::vector<ReportRow> parse_report_csv(std::string_view text);

/// Curves of one window length, keyed by model name.
struct RocGroup {
  int window_minutes = 0;
  std::vector<std::pair<std::string, RocCurve>> curves;
};

std::vector<RocGroup> roc_groups(const EvalReport& report);

void write_roc_points_csv(std::span<const RocGroup> groups, std::ostream& out);
std::vector<RocGroup> parse_roc_points_csv(std::string_view text);

inline constexpr double kPanelWidth = 600.0;
inline constexpr double kPanelHeight = 450.0;

/// Plot-area transform of a (fpr, tpr) point inside one panel.
std::pair<double, double> panel_coordinates(double fpr, double tpr);

/// Returns the SVG document; one panel per non-empty group.
std::string render_roc_svg(std::span<const RocGroup> groups);

/// Writes the SVG to `path` and the companion `roc_points.csv` beside it.
void render_roc_svg(std::span<const RocGroup> groups, const std::filesystem::path& path);

}  // namespace limbsense
