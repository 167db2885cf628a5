#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "limbsense/features.hpp"

namespace limbsense {

enum class ModelKind { logistic_regression, naive_bayes, knn, random_forest, gradient_boosting, linear_svm };

inline constexpr ModelKind kAllModelKinds[] = {
    ModelKind::logistic_regression, ModelKind::naive_bayes,       ModelKind::knn,
    ModelKind::random_forest,       ModelKind::gradient_boosting, ModelKind::linear_svm};

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

/// Hyperparameter names a kind accepts.
std::span<const std::string_view> hyperparameter_names(ModelKind kind);

/// label: 0 = moderate, 1 = severe.
struct LabeledRow {
  std::string patient_id;
  std::vector<double> x;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledRow> rows;
  int window_minutes = 0;

  std::vector<std::string> patients() const;
};

Dataset make_dataset(std::span<const WindowFeatureVector> vectors, int window_minutes);

class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> scale)
      : mean_(std::move(mean)), scale_(std::move(scale)) {}

  /// Population statistics; zero-variance columns keep divisor 1.
  static Standardizer fit(std::span<const LabeledRow> rows);
  static Standardizer identity(std::size_t dimension);

  std::vector<double> apply(std::span<const double> x) const;
  std::size_t dimension() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

inline Standardizer standardize_fit(std::span<const LabeledRow> rows) { return Standardizer::fit(rows); }

inline std::vector<double> standardize_apply(const Standardizer& s, std::span<const double> x) {
  return s.apply(x);
}

using Hyperparameters = std::map<std::string, double>;

struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  Hyperparameters params;

  /// `name=value` pairs joined by ';' in name order, e.g. "depth=1;learning_rate=0.1".
  std::string describe() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

Hyperparameters parse_hyperparameters(std::string_view text);

/// Cartesian grid over per-parameter value lists; combinations enumerate with
/// the last axis varying fastest.
struct ParamGrid {
  ModelKind kind = ModelKind::logistic_regression;
  std::vector<std::pair<std::string, std::vector<double>>> axes;

  std::vector<Hyperparameters> combinations() const;
};

ParamGrid default_grid(ModelKind kind);

struct LogisticParams {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

struct NaiveBayesParams {
  std::array<double, 2> log_prior{};
  std::array<std::vector<double>, 2> mean;
  std::array<std::vector<double>, 2> variance;

  friend bool operator==(const NaiveBayesParams&, const NaiveBayesParams&) = default;
};

struct KnnParams {
  std::size_t k = 1;
  std::vector<std::vector<double>> points;
  std::vector<int> labels;

  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

/// Flat binary tree; feature < 0 marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct ForestParams {
  std::vector<Tree> trees;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct BoostingParams {
  double init = 0.0;
  std::vector<Tree> trees;  // leaf values already include shrinkage
  std::vector<double> loss_history;  // training log-loss after init and after each round

  friend bool operator==(const BoostingParams&, const BoostingParams&) = default;
};

struct SvmParams {
  std::vector<double> weights;
  double bias = 0.0;

  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

using ModelParams =
    std::variant<LogisticParams, NaiveBayesParams, KnnParams, ForestParams, BoostingParams, SvmParams>;

struct TrainedModel {
  ModelSpec spec;
  Standardizer standardizer;
  ModelParams params;
  std::uint64_t seed = 0;
  std::vector<double> fold_aucs;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

inline constexpr double kDefaultTrainFraction = 0.8;

/// Shuffles the sorted distinct ids and returns (first floor(f*n), rest).
std::pair<std::vector<std::string>, std::vector<std::string>> split_patients(
    std::vector<std::string> patients, double train_fraction, std::uint64_t seed);

std::pair<Dataset, Dataset> patient_split(const Dataset& dataset, double train_fraction,
                                          std::uint64_t seed);

/// Keeps the rows whose patient is in `patients`.
Dataset select_patients(const Dataset& dataset, std::span<const std::string> patients);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Partitions patients (or rows when ungrouped) into k near-equal folds;
/// the first n % k folds get the extra member.
std::vector<Fold> kfold(std::span<const LabeledRow> rows, std::size_t k, std::uint64_t seed,
                        bool group_by_patient = true);

TrainedModel train_model(const ModelSpec& spec, std::span<const LabeledRow> rows, std::uint64_t seed);

/// Higher means more severe. Applies the stored standardizer first.
double score(const TrainedModel& model, std::span<const double> x);

std::vector<double> score_rows(const TrainedModel& model, std::span<const LabeledRow> rows);

struct GridEntry {
  Hyperparameters params;
  std::vector<double> fold_aucs;  // NaN where a validation fold held a single class
  double mean_auc = 0.0;          // -inf when the combination failed
  std::string error;
};

struct GridSearchResult {
  ModelSpec best;
  double best_mean_auc = 0.0;
  std::vector<GridEntry> table;
};

/// Mean validation AUC over the folds for every combination; first maximum
/// in grid order wins.
GridSearchResult grid_search(const ParamGrid& grid, std::span<const LabeledRow> rows, std::size_t k,
                             std::uint64_t seed, bool group_by_patient = true);

// Logistic objective on already standardized inputs:
// mean log-loss + reg/2 * |w|^2 (bias unpenalized).
double logistic_objective(std::span<const LabeledRow> rows, std::span<const double> weights,
                          double bias, double reg);

/// Gradient of logistic_objective; the last entry is the bias component.
std::vector<double> logistic_gradient(std::span<const LabeledRow> rows, std::span<const double> weights,
                                      double bias, double reg);

inline constexpr std::string_view kModelFormatTag = "limbsense-model";
inline constexpr int kModelFormatVersion = 1;

void write_model(const TrainedModel& model, std::ostream& out);
TrainedModel parse_model(std::string_view text);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace limbsense
