#include "limbsense/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "limbsense/error.hpp"
#include "text.hpp"

namespace limbsense {

namespace {

constexpr double kPlotLeft = 60.0;
constexpr double kPlotTop = 40.0;
constexpr double kPlotWidth = 520.0;
constexpr double kPlotHeight = 360.0;
constexpr std::size_t kPanelsPerRow = 3;

constexpr std::string_view kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string format_metric(double v) { return std::isfinite(v) ? fmt::format("{:.3f}", v) : "nan"; }

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} scores for {} labels", scores.size(), labels.size()));
  }
  std::int64_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorKind::NonFiniteFeature, "non-finite score");
    positives += labels[i] == 1 ? 1 : 0;
  }
  const auto negatives = static_cast<std::int64_t>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorKind::SingleClassLabels,
                fmt::format("{} positives, {} negatives", positives, negatives));
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  // Twice the area in units of (1 negative) x (1 positive), kept integral.
  std::int64_t doubled_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const std::int64_t tp_before = tp;
    const std::int64_t fp_before = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
    }
    doubled_area += (fp - fp_before) * (tp + tp_before);
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives), threshold});
  }
  curve.auc = static_cast<double>(doubled_area) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return curve;
}

double auc(std::span<const double> scores, std::span<const int> labels) { return roc_curve(scores, labels).auc; }

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "pearson inputs differ in length");
  if (x.size() < 2) throw Error(ErrorKind::EmptyInput, "pearson needs at least two pairs");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ConstantInput, "pearson input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

const EvalCell* EvalReport::find(ModelKind kind, int window_minutes) const {
  for (const auto& c : cells) {
    if (c.kind == kind && c.window_minutes == window_minutes) return &c;
  }
  return nullptr;
}

EvalReport evaluate(std::span<const EvalInput> inputs) {
  EvalReport report;
  for (const auto& in : inputs) {
    EvalCell cell;
    cell.kind = in.model->spec.kind;
    cell.window_minutes = in.window_minutes;
    cell.cv_mean_auc = in.cv_mean_auc;
    cell.fold_aucs = in.model->fold_aucs;
    cell.best_params = in.model->spec.describe();
    cell.seed = in.model->seed;
    cell.n_train_rows = in.n_train_rows;
    cell.n_train_patients = in.n_train_patients;
    cell.n_test_rows = in.test->rows.size();
    cell.n_test_patients = in.test->patients().size();
    std::vector<int> labels;
    for (const auto& r : in.test->rows) labels.push_back(r.label);
    try {
      cell.roc = roc_curve(score_rows(*in.model, in.test->rows), labels);
      cell.test_auc = cell.roc.auc;
      cell.valid = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingleClassLabels) throw;
      cell.error = e.what();
      cell.test_auc = std::numeric_limits<double>::quiet_NaN();
      spdlog::warn("{} @ {} min: {}", to_string(cell.kind), cell.window_minutes, e.what());
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

std::vector<ReportRow> report_rows(const EvalReport& report) {
  std::vector<ReportRow> rows;
  for (const auto& c : report.cells) {
    rows.push_back({std::string(to_string(c.kind)), c.window_minutes, c.test_auc, c.cv_mean_auc, c.best_params,
                    c.n_test_rows, c.seed});
  }
  return rows;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "model,window_minutes,test_auc,cv_mean_auc,best_params,n_test_rows,seed\n";
  for (const auto& r : report_rows(report)) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.model, r.window_minutes, format_metric(r.test_auc),
                       format_metric(r.cv_mean_auc), r.best_params.empty() ? "-" : r.best_params, r.n_test_rows,
                       r.seed);
  }
}

std::vector<ReportRow> parse_report_csv(std::string_view content) {
  text::LineCursor cursor(content);
  std::string_view line;
  if (!cursor.next(line) ||
      line != "model,window_minutes,test_auc,cv_mean_auc,best_params,n_test_rows,seed") {
    throw Error(ErrorKind::MalformedRow, "unexpected report.csv header");
  }
  std::vector<ReportRow> rows;
  while (cursor.next(line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    const auto window = f.size() == 7 ? text::parse_int<int>(f[1]) : std::nullopt;
    const auto test_auc = f.size() == 7 ? text::parse_double(f[2]) : std::nullopt;
    const auto cv_auc = f.size() == 7 ? text::parse_double(f[3]) : std::nullopt;
    const auto n_test = f.size() == 7 ? text::parse_int<std::size_t>(f[5]) : std::nullopt;
    const auto seed = f.size() == 7 ? text::parse_int<std::uint64_t>(f[6]) : std::nullopt;
    if (!window || !test_auc || !cv_auc || !n_test || !seed) {
      throw Error(ErrorKind::MalformedRow, fmt::format("report.csv line {}", cursor.line_number()));
    }
    rows.push_back({std::string(f[0]), *window, *test_auc, *cv_auc, f[4] == "-" ? std::string() : std::string(f[4]),
                    *n_test, *seed});
  }
  return rows;
}

std::vector<RocGroup> roc_groups(const EvalReport& report) {
  std::vector<RocGroup> groups;
  for (const auto& c : report.cells) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const RocGroup& g) { return g.window_minutes == c.window_minutes; });
    if (it == groups.end()) {
      groups.push_back({c.window_minutes, {}});
      it = std::prev(groups.end());
    }
    if (c.valid) it->curves.emplace_back(std::string(to_string(c.kind)), c.roc);
  }
  return groups;
}

void write_roc_points_csv(std::span<const RocGroup> groups, std::ostream& out) {
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "model,window_minutes,threshold,fpr,tpr\n");
  for (const auto& g : groups) {
    for (const auto& [name, curve] : g.curves) {
      for (const auto& p : curve.points) {
        fmt::format_to(it, "{},{},{},{},{}\n", name, g.window_minutes, p.threshold, p.fpr, p.tpr);
      }
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<RocGroup> parse_roc_points_csv(std::string_view content) {
  text::LineCursor cursor(content);
  std::string_view line;
  if (!cursor.next(line) || line != "model,window_minutes,threshold,fpr,tpr") {
    throw Error(ErrorKind::MalformedRow, "unexpected roc_points.csv header");
  }
  std::vector<RocGroup> groups;
  while (cursor.next(line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    const auto window = f.size() == 5 ? text::parse_int<int>(f[1]) : std::nullopt;
    const auto threshold = f.size() == 5 ? text::parse_double(f[2]) : std::nullopt;
    const auto fpr = f.size() == 5 ? text::parse_double(f[3]) : std::nullopt;
    const auto tpr = f.size() == 5 ? text::parse_double(f[4]) : std::nullopt;
    if (!window || !threshold || !fpr || !tpr) {
      throw Error(ErrorKind::MalformedRow, fmt::format("roc_points.csv line {}", cursor.line_number()));
    }
    auto g = std::find_if(groups.begin(), groups.end(), [&](const RocGroup& x) { return x.window_minutes == *window; });
    if (g == groups.end()) {
      groups.push_back({*window, {}});
      g = std::prev(groups.end());
    }
    if (g->curves.empty() || g->curves.back().first != f[0]) g->curves.emplace_back(std::string(f[0]), RocCurve{});
    g->curves.back().second.points.push_back({*fpr, *tpr, *threshold});
  }
  // Recover each area from its points by the trapezoidal rule.
  for (auto& g : groups) {
    for (auto& [name, curve] : g.curves) {
      double area = 0.0;
      for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
      }
      curve.auc = area;
    }
  }
  return groups;
}

std::pair<double, double> panel_coordinates(double fpr, double tpr) {
  return {kPlotLeft + fpr * kPlotWidth, kPlotTop + (1.0 - tpr) * kPlotHeight};
}

std::string render_roc_svg(std::span<const RocGroup> groups) {
  std::vector<const RocGroup*> panels;
  for (const auto& g : groups) {
    if (g.curves.empty()) {
      spdlog::warn("no valid ROC curve for the {}-min window; panel omitted", g.window_minutes);
      continue;
    }
    panels.push_back(&g);
  }
  const std::size_t columns = std::min(panels.size(), kPanelsPerRow);
  const std::size_t rows = (panels.size() + kPanelsPerRow - 1) / kPanelsPerRow;
  const double width = static_cast<double>(std::max<std::size_t>(columns, 1)) * kPanelWidth;
  const double height = static_cast<double>(std::max<std::size_t>(rows, 1)) * kPanelHeight;

  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out,
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
                 "font-family=\"sans-serif\" font-size=\"12\">\n",
                 width, height);
  fmt::format_to(out, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const RocGroup& g = *panels[p];
    const double x0 = static_cast<double>(p % kPanelsPerRow) * kPanelWidth;
    const double y0 = static_cast<double>(p / kPanelsPerRow) * kPanelHeight;
    fmt::format_to(out,
                   "<svg class=\"panel\" data-window=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" "
                   "viewBox=\"0 0 {} {}\">\n",
                   g.window_minutes, x0, y0, kPanelWidth, kPanelHeight, kPanelWidth, kPanelHeight);
    fmt::format_to(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{} min window</text>\n",
                   kPlotLeft + kPlotWidth / 2, g.window_minutes);
    fmt::format_to(out, "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                   kPlotLeft, kPlotTop, kPlotWidth, kPlotHeight);
    for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto [tx, ty] = panel_coordinates(tick, tick);
      fmt::format_to(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", tx,
                     kPlotTop + kPlotHeight + 16, tick);
      fmt::format_to(out, "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kPlotLeft - 6, ty + 4,
                     tick);
    }
    fmt::format_to(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">False positive rate</text>\n",
                   kPlotLeft + kPlotWidth / 2, kPanelHeight - 12);
    fmt::format_to(out,
                   "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">True "
                   "positive rate</text>\n",
                   kPlotTop + kPlotHeight / 2);
    const auto [cx0, cy0] = panel_coordinates(0.0, 0.0);
    const auto [cx1, cy1] = panel_coordinates(1.0, 1.0);
    fmt::format_to(out,
                   "<line class=\"chance\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#999\" "
                   "stroke-dasharray=\"6 4\"/>\n",
                   cx0, cy0, cx1, cy1);

    for (std::size_t c = 0; c < g.curves.size(); ++c) {
      const auto& [name, curve] = g.curves[c];
      const auto color = kPalette[c % std::size(kPalette)];
      fmt::format_to(out, "<polyline class=\"roc\" data-model=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"",
                     name, color);
      for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const auto [px, py] = panel_coordinates(curve.points[i].fpr, curve.points[i].tpr);
        fmt::format_to(out, "{}{:.2f},{:.2f}", i == 0 ? "" : " ", px, py);
      }
      fmt::format_to(out, "\"/>\n");
      const double ly = kPlotTop + kPlotHeight - 12 - static_cast<double>(g.curves.size() - 1 - c) * 16;
      const double lx = kPlotLeft + kPlotWidth - 210;
      fmt::format_to(out, "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n", lx,
                     ly - 4, lx + 18, ly - 4, color);
      fmt::format_to(out, "<text class=\"legend\" x=\"{}\" y=\"{}\">{} (AUC {:.3f})</text>\n", lx + 24, ly, name,
                     curve.auc);
    }
    fmt::format_to(out, "</svg>\n");
  }
  fmt::format_to(out, "</svg>\n");
  return fmt::to_string(buf);
}

void render_roc_svg(std::span<const RocGroup> groups, const std::filesystem::path& path) {
  const auto svg = render_roc_svg(groups);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  out << svg;
  const auto points_path = path.parent_path() / "roc_points.csv";
  std::ofstream points(points_path, std::ios::binary);
  if (!points) throw Error(ErrorKind::IoFailure, "cannot write " + points_path.string());
  write_roc_points_csv(groups, points);
  if (!out || !points) throw Error(ErrorKind::IoFailure, "write failed under " + path.parent_path().string());
}

}  // namespace limbsense
