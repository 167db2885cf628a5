#include "limbsense/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "limbsense/error.hpp"
#include "limbsense/eval.hpp"
#include "limbsense/random.hpp"
#include "text.hpp"

namespace limbsense {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::string_view kLogisticNames[] = {"reg", "max_iter"};
constexpr std::string_view kKnnNames[] = {"k"};
constexpr std::string_view kForestNames[] = {"n_trees", "max_depth", "bootstrap"};
constexpr std::string_view kBoostingNames[] = {"n_rounds", "learning_rate", "depth"};
constexpr std::string_view kSvmNames[] = {"reg", "epochs"};

double param_or(const Hyperparameters& params, const std::string& name, double fallback) {
  const auto it = params.find(name);
  return it == params.end() ? fallback : it->second;
}

std::size_t count_param(const Hyperparameters& params, const std::string& name, double fallback) {
  const double v = param_or(params, name, fallback);
  if (!(v >= 0.0) || std::isinf(v)) {
    throw Error(ErrorKind::ConfigError, fmt::format("{} must be a non-negative integer, got {}", name, v));
  }
  return static_cast<std::size_t>(std::llround(v));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_rows(std::span<const LabeledRow> rows, bool need_both_classes) {
  if (rows.empty()) throw Error(ErrorKind::SingleClassTraining, "no training rows");
  const std::size_t d = rows.front().x.size();
  std::size_t positives = 0;
  for (const auto& r : rows) {
    if (r.x.size() != d) throw Error(ErrorKind::DimensionMismatch, "training rows differ in dimension");
    for (double v : r.x) {
      if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteFeature, "patient " + r.patient_id);
    }
    positives += r.label == 1 ? 1 : 0;
  }
  if (need_both_classes && (positives == 0 || positives == rows.size())) {
    throw Error(ErrorKind::SingleClassTraining,
                fmt::format("{} rows, {} severe", rows.size(), positives));
  }
}

std::vector<LabeledRow> standardized(const Standardizer& s, std::span<const LabeledRow> rows) {
  std::vector<LabeledRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.patient_id, s.apply(r.x), r.label});
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticParams fit_logistic(std::span<const LabeledRow> rows, double reg, std::size_t max_iter) {
  const std::size_t d = rows.front().x.size();
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  double loss = logistic_objective(rows, w, b, reg);
  double step = 1.0;
  LogisticParams out;
  std::size_t iter = 0;
  std::vector<double> trial_w(d);
  for (; iter < max_iter; ++iter) {
    const auto g = logistic_gradient(rows, w, b, reg);
    double max_norm = 0.0;
    double sq_norm = 0.0;
    for (double gi : g) {
      max_norm = std::max(max_norm, std::abs(gi));
      sq_norm += gi * gi;
    }
    if (max_norm < 1e-6) {
      out.converged = true;
      break;
    }
    // Armijo backtracking; the step grows again after every accepted move.
    while (true) {
      for (std::size_t j = 0; j < d; ++j) trial_w[j] = w[j] - step * g[j];
      const double trial_b = b - step * g[d];
      const double trial_loss = logistic_objective(rows, trial_w, trial_b, reg);
      if (trial_loss <= loss - 0.5 * step * sq_norm || step < 1e-12) {
        w = trial_w;
        b = trial_b;
        loss = trial_loss;
        break;
      }
      step *= 0.5;
    }
    step = std::min(step * 2.0, 1e3);
  }
  out.weights = std::move(w);
  out.bias = b;
  out.iterations = iter;
  if (!out.converged) {
    spdlog::warn("logistic regression hit the {} iteration cap before the gradient fell below 1e-6",
                 max_iter);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

constexpr double kVarianceFloor = 1e-9;

NaiveBayesParams fit_naive_bayes(std::span<const LabeledRow> rows) {
  const std::size_t d = rows.front().x.size();
  NaiveBayesParams p;
  std::array<std::size_t, 2> counts{};
  for (int c = 0; c < 2; ++c) {
    p.mean[c].assign(d, 0.0);
    p.variance[c].assign(d, 0.0);
  }
  for (const auto& r : rows) {
    ++counts[r.label];
    for (std::size_t j = 0; j < d; ++j) p.mean[r.label][j] += r.x[j];
  }
  for (int c = 0; c < 2; ++c) {
    for (auto& m : p.mean[c]) m /= static_cast<double>(counts[c]);
  }
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = r.x[j] - p.mean[r.label][j];
      p.variance[r.label][j] += dev * dev;
    }
  }
  for (int c = 0; c < 2; ++c) {
    for (auto& v : p.variance[c]) v = std::max(v / static_cast<double>(counts[c]), kVarianceFloor);
    p.log_prior[c] = std::log(static_cast<double>(counts[c]) / static_cast<double>(rows.size()));
  }
  return p;
}

double naive_bayes_score(const NaiveBayesParams& p, std::span<const double> x) {
  std::array<double, 2> log_joint = p.log_prior;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double dev = x[j] - p.mean[c][j];
      log_joint[c] += -0.5 * std::log(2.0 * M_PI * p.variance[c][j]) - 0.5 * dev * dev / p.variance[c][j];
    }
  }
  return sigmoid(log_joint[1] - log_joint[0]);
}

// ---------------------------------------------------------------------------
// k nearest neighbours

double knn_score(const KnnParams& p, std::span<const double> x) {
  std::vector<std::pair<double, std::size_t>> dist(p.points.size());
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - p.points[i][j];
      s += diff * diff;
    }
    dist[i] = {s, i};
  }
  const std::size_t k = std::min(p.k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::size_t severe = 0;
  for (std::size_t i = 0; i < k; ++i) severe += p.labels[dist[i].second] == 1 ? 1 : 0;
  return static_cast<double>(severe) / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Trees

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double cost = kInf;
};

// Midpoint that still separates a < b.
double split_point(double a, double b) {
  const double mid = a + (b - a) * 0.5;
  return mid < b ? mid : a;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const LabeledRow> rows, const std::vector<double>& targets,
              const std::vector<double>& hessians)
      : rows_(rows), targets_(targets), hessians_(hessians) {}

  // CART classification tree on Gini impurity. `members` may repeat rows
  // (bootstrap multiplicity).
  Tree grow_classifier(std::vector<std::size_t> members, std::size_t max_depth, std::size_t features_per_split,
                       Rng& rng) {
    Tree tree;
    grow_gini(tree, std::move(members), 0, max_depth, features_per_split, rng);
    return tree;
  }

  // Least-squares regression tree on targets_, leaves hold Newton steps.
  Tree grow_regressor(std::vector<std::size_t> members, std::size_t max_depth) {
    Tree tree;
    grow_squared(tree, std::move(members), 0, max_depth);
    return tree;
  }

 private:
  int add_leaf(Tree& tree, double value) {
    tree.nodes.push_back({-1, 0.0, -1, -1, value});
    return static_cast<int>(tree.nodes.size() - 1);
  }

  std::vector<std::size_t> sorted_by(const std::vector<std::size_t>& members, int feature) const {
    std::vector<std::size_t> order = members;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return rows_[a].x[static_cast<std::size_t>(feature)] < rows_[b].x[static_cast<std::size_t>(feature)];
    });
    return order;
  }

  SplitChoice best_gini_split(const std::vector<std::size_t>& members, int feature) const {
    const auto order = sorted_by(members, feature);
    const auto f = static_cast<std::size_t>(feature);
    const double n = static_cast<double>(order.size());
    double total_pos = 0.0;
    for (auto i : order) total_pos += rows_[i].label;
    SplitChoice best;
    double left_pos = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      left_pos += rows_[order[i]].label;
      const double a = rows_[order[i]].x[f];
      const double b = rows_[order[i + 1]].x[f];
      if (!(a < b)) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = n - nl;
      const double right_pos = total_pos - left_pos;
      const double gl = 1.0 - (left_pos / nl) * (left_pos / nl) - ((nl - left_pos) / nl) * ((nl - left_pos) / nl);
      const double gr = 1.0 - (right_pos / nr) * (right_pos / nr) - ((nr - right_pos) / nr) * ((nr - right_pos) / nr);
      const double cost = nl * gl + nr * gr;
      if (cost < best.cost) best = {feature, split_point(a, b), cost};
    }
    return best;
  }

  int grow_gini(Tree& tree, std::vector<std::size_t> members, std::size_t depth, std::size_t max_depth,
                std::size_t features_per_split, Rng& rng) {
    double positives = 0.0;
    for (auto i : members) positives += rows_[i].label;
    const double fraction = positives / static_cast<double>(members.size());
    if (positives == 0.0 || positives == static_cast<double>(members.size()) || depth >= max_depth) {
      return add_leaf(tree, fraction);
    }

    const std::size_t d = rows_.front().x.size();
    std::vector<int> features(d);
    std::iota(features.begin(), features.end(), 0);
    rng.shuffle(std::span(features));

    // Look at features_per_split candidates; keep drawing only if none of
    // them can separate the node.
    SplitChoice best;
    for (std::size_t c = 0; c < d; ++c) {
      if (c >= features_per_split && best.feature >= 0) break;
      const auto s = best_gini_split(members, features[c]);
      if (s.cost < best.cost) best = s;
    }
    if (best.feature < 0) return add_leaf(tree, fraction);

    return attach(tree, members, best, [&](std::vector<std::size_t> side) {
      return grow_gini(tree, std::move(side), depth + 1, max_depth, features_per_split, rng);
    });
  }

  int grow_squared(Tree& tree, std::vector<std::size_t> members, std::size_t depth, std::size_t max_depth) {
    double g_sum = 0.0;
    double h_sum = 0.0;
    for (auto i : members) {
      g_sum += targets_[i];
      h_sum += hessians_[i];
    }
    const double leaf_value = g_sum / std::max(h_sum, 1e-12);
    if (depth >= max_depth || members.size() < 2) return add_leaf(tree, leaf_value);

    SplitChoice best;
    const double n = static_cast<double>(members.size());
    const double parent = g_sum * g_sum / n;
    for (std::size_t f = 0; f < rows_.front().x.size(); ++f) {
      const auto order = sorted_by(members, static_cast<int>(f));
      double left = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left += targets_[order[i]];
        const double a = rows_[order[i]].x[f];
        const double b = rows_[order[i + 1]].x[f];
        if (!(a < b)) continue;
        const double nl = static_cast<double>(i + 1);
        const double right = g_sum - left;
        // Negative reduction in squared error.
        const double cost = -(left * left / nl + right * right / (n - nl) - parent);
        if (cost < best.cost) best = {static_cast<int>(f), split_point(a, b), cost};
      }
    }
    if (best.feature < 0 || !(best.cost < -1e-15)) return add_leaf(tree, leaf_value);

    return attach(tree, members, best, [&](std::vector<std::size_t> side) {
      return grow_squared(tree, std::move(side), depth + 1, max_depth);
    });
  }

  template <typename Grow>
  int attach(Tree& tree, const std::vector<std::size_t>& members, const SplitChoice& split, Grow grow) {
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : members) {
      (rows_[i].x[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(i);
    }
    const int node = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({split.feature, split.threshold, -1, -1, 0.0});
    const int l = grow(std::move(left));
    const int r = grow(std::move(right));
    tree.nodes[static_cast<std::size_t>(node)].left = l;
    tree.nodes[static_cast<std::size_t>(node)].right = r;
    return node;
  }

  std::span<const LabeledRow> rows_;
  const std::vector<double>& targets_;
  const std::vector<double>& hessians_;
};

std::size_t depth_param(const Hyperparameters& params, const std::string& name, double fallback) {
  const double v = param_or(params, name, fallback);
  if (std::isinf(v) && v > 0.0) return std::numeric_limits<std::size_t>::max();
  return count_param(params, name, fallback);
}

ForestParams fit_forest(std::span<const LabeledRow> rows, const Hyperparameters& hp, Rng& rng) {
  const std::size_t n_trees = count_param(hp, "n_trees", 100);
  const std::size_t max_depth = depth_param(hp, "max_depth", kInf);
  const bool bootstrap = param_or(hp, "bootstrap", 1.0) != 0.0;
  if (n_trees == 0) throw Error(ErrorKind::ConfigError, "n_trees must be positive");
  const std::size_t d = rows.front().x.size();
  const auto per_split = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

  const std::vector<double> unused;
  TreeBuilder builder(rows, unused, unused);
  ForestParams forest;
  for (std::size_t t = 0; t < n_trees; ++t) {
    std::vector<std::size_t> members(rows.size());
    if (bootstrap) {
      for (auto& m : members) m = rng.below(rows.size());
    } else {
      std::iota(members.begin(), members.end(), 0);
    }
    forest.trees.push_back(builder.grow_classifier(std::move(members), max_depth, per_split, rng));
  }
  return forest;
}

double mean_log_loss(std::span<const LabeledRow> rows, std::span<const double> raw) {
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) loss += softplus(raw[i]) - rows[i].label * raw[i];
  return loss / static_cast<double>(rows.size());
}

BoostingParams fit_boosting(std::span<const LabeledRow> rows, const Hyperparameters& hp) {
  const std::size_t rounds = count_param(hp, "n_rounds", 100);
  const double rate = param_or(hp, "learning_rate", 0.1);
  const std::size_t depth = depth_param(hp, "depth", 1);
  if (!(rate > 0.0)) throw Error(ErrorKind::ConfigError, "learning_rate must be positive");

  const std::size_t n = rows.size();
  double positives = 0.0;
  for (const auto& r : rows) positives += r.label;
  const double base = positives / static_cast<double>(n);

  BoostingParams out;
  out.init = std::log(base / (1.0 - base));
  std::vector<double> raw(n, out.init);
  std::vector<double> residual(n);
  std::vector<double> hessian(n);
  out.loss_history.push_back(mean_log_loss(rows, raw));

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t round = 0; round < rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      residual[i] = rows[i].label - p;
      hessian[i] = p * (1.0 - p);
    }
    TreeBuilder builder(rows, residual, hessian);
    Tree tree = builder.grow_regressor(all, depth);

    // Shrink each leaf, then halve it until the loss on its rows does not rise.
    std::vector<std::vector<std::size_t>> by_leaf(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t node = 0;
      while (tree.nodes[node].feature >= 0) {
        const auto& nd = tree.nodes[node];
        node = static_cast<std::size_t>(rows[i].x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
      }
      by_leaf[node].push_back(i);
    }
    for (std::size_t leaf = 0; leaf < tree.nodes.size(); ++leaf) {
      if (tree.nodes[leaf].feature >= 0) continue;
      const auto& members = by_leaf[leaf];
      double step = rate * tree.nodes[leaf].value;
      auto leaf_loss = [&](double shift) {
        double s = 0.0;
        for (auto i : members) s += softplus(raw[i] + shift) - rows[i].label * (raw[i] + shift);
        return s;
      };
      const double before = leaf_loss(0.0);
      int halvings = 0;
      while (step != 0.0 && leaf_loss(step) > before) {
        step = ++halvings > 60 ? 0.0 : step * 0.5;
      }
      tree.nodes[leaf].value = step;
      for (auto i : members) raw[i] += step;
    }
    out.trees.push_back(std::move(tree));
    out.loss_history.push_back(mean_log_loss(rows, raw));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear SVM, Pegasos subgradient steps. The bias is an extra weight on a
// constant input and is regularized with the rest.

SvmParams fit_svm(std::span<const LabeledRow> rows, const Hyperparameters& hp, Rng& rng) {
  const double lambda = param_or(hp, "reg", 0.1);
  const std::size_t epochs = count_param(hp, "epochs", 50);
  if (!(lambda > 0.0)) throw Error(ErrorKind::ConfigError, "svm reg must be positive");
  const std::size_t d = rows.front().x.size();
  const std::size_t n = rows.size();
  std::vector<double> w(d + 1, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double radius = 1.0 / std::sqrt(lambda);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (auto i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double y = rows[i].label == 1 ? 1.0 : -1.0;
      const double margin = y * (dot(std::span(w).first(d), rows[i].x) + w[d]);
      for (auto& wj : w) wj *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * rows[i].x[j];
        w[d] += eta * y;
      }
      const double norm = std::sqrt(dot(w, w));
      if (norm > radius) {
        for (auto& wj : w) wj *= radius / norm;
      }
    }
  }
  SvmParams out;
  out.bias = w[d];
  w.pop_back();
  out.weights = std::move(w);
  return out;
}

bool uses_standardizer(ModelKind kind) {
  return kind != ModelKind::random_forest && kind != ModelKind::gradient_boosting;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::naive_bayes: return "naive_bayes";
    case ModelKind::knn: return "knn";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::gradient_boosting: return "gradient_boosting";
    case ModelKind::linear_svm: return "linear_svm";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  for (auto kind : kAllModelKinds) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::span<const std::string_view> hyperparameter_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic_regression: return kLogisticNames;
    case ModelKind::naive_bayes: return {};
    case ModelKind::knn: return kKnnNames;
    case ModelKind::random_forest: return kForestNames;
    case ModelKind::gradient_boosting: return kBoostingNames;
    case ModelKind::linear_svm: return kSvmNames;
  }
  return {};
}

std::vector<std::string> Dataset::patients() const {
  std::set<std::string> ids;
  for (const auto& r : rows) ids.insert(r.patient_id);
  return {ids.begin(), ids.end()};
}

Dataset make_dataset(std::span<const WindowFeatureVector> vectors, int window_minutes) {
  Dataset ds;
  ds.window_minutes = window_minutes;
  for (const auto& v : vectors) {
    if (v.window_minutes != window_minutes) continue;
    ds.rows.push_back({v.patient_id, {v.features.begin(), v.features.end()},
                       v.label == Severity::severe ? 1 : 0});
  }
  return ds;
}

Standardizer Standardizer::fit(std::span<const LabeledRow> rows) {
  if (rows.empty()) throw Error(ErrorKind::EmptyInput, "cannot standardize zero rows");
  const std::size_t d = rows.front().x.size();
  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += r.x[j];
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) scale[j] += (r.x[j] - mean[j]) * (r.x[j] - mean[j]);
  }
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(rows.size()));
    if (!(s > 0.0)) s = 1.0;
  }
  return {std::move(mean), std::move(scale)};
}

Standardizer Standardizer::identity(std::size_t dimension) {
  return {std::vector<double>(dimension, 0.0), std::vector<double>(dimension, 1.0)};
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean_.size()) {
    throw Error(ErrorKind::DimensionMismatch, fmt::format("row has {} values, expected {}", x.size(), mean_.size()));
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean_[j]) / scale_[j];
  return out;
}

std::string ModelSpec::describe() const {
  std::string out;
  for (const auto& [name, value] : params) {
    if (!out.empty()) out += ';';
    out += fmt::format("{}={}", name, value);
  }
  return out;
}

Hyperparameters parse_hyperparameters(std::string_view text) {
  Hyperparameters params;
  text = text::trim(text);
  if (text.empty()) return params;
  for (auto item : text::split(text, ';')) {
    const auto eq = item.find('=');
    const auto value = eq == std::string_view::npos ? std::nullopt : text::parse_double(item.substr(eq + 1));
    if (!value) throw Error(ErrorKind::ConfigError, fmt::format("bad hyperparameter '{}'", item));
    params[std::string(text::trim(item.substr(0, eq)))] = *value;
  }
  return params;
}

std::vector<Hyperparameters> ParamGrid::combinations() const {
  std::vector<Hyperparameters> out{Hyperparameters{}};
  for (const auto& [name, values] : axes) {
    if (values.empty()) throw Error(ErrorKind::ConfigError, "grid axis '" + name + "' has no values");
    std::vector<Hyperparameters> next;
    for (const auto& partial : out) {
      for (double v : values) {
        auto combo = partial;
        combo[name] = v;
        next.push_back(std::move(combo));
      }
    }
    out = std::move(next);
  }
  return out;
}

ParamGrid default_grid(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic_regression: return {kind, {{"reg", {0.01, 0.1, 1.0}}}};
    case ModelKind::naive_bayes: return {kind, {}};
    case ModelKind::knn: return {kind, {{"k", {3, 5, 7, 9}}}};
    case ModelKind::random_forest: return {kind, {{"n_trees", {50, 100}}, {"max_depth", {3, 5, kInf}}}};
    case ModelKind::gradient_boosting:
      return {kind, {{"n_rounds", {50, 100}}, {"learning_rate", {0.05, 0.1}}, {"depth", {1, 2}}}};
    case ModelKind::linear_svm: return {kind, {{"reg", {0.01, 0.1, 1.0}}}};
  }
  return {kind, {}};
}

double Tree::predict(std::span<const double> x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const auto& nd = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
  }
  return nodes[node].value;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_patients(
    std::vector<std::string> patients, double train_fraction, std::uint64_t seed) {
  std::sort(patients.begin(), patients.end());
  patients.erase(std::unique(patients.begin(), patients.end()), patients.end());
  if (patients.size() < 2) {
    throw Error(ErrorKind::DegenerateSplit, fmt::format("{} distinct patients", patients.size()));
  }
  Rng rng(seed);
  rng.shuffle(std::span(patients));
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(patients.size())));
  std::vector<std::string> train(patients.begin(), patients.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::string> test(patients.begin() + static_cast<std::ptrdiff_t>(n_train), patients.end());
  return {std::move(train), std::move(test)};
}

Dataset select_patients(const Dataset& dataset, std::span<const std::string> patients) {
  const std::set<std::string> keep(patients.begin(), patients.end());
  Dataset out;
  out.window_minutes = dataset.window_minutes;
  for (const auto& r : dataset.rows) {
    if (keep.contains(r.patient_id)) out.rows.push_back(r);
  }
  return out;
}

std::pair<Dataset, Dataset> patient_split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  auto [train_ids, test_ids] = split_patients(dataset.patients(), train_fraction, seed);
  Dataset train = select_patients(dataset, train_ids);
  Dataset test = select_patients(dataset, test_ids);
  if (train.rows.empty() || test.rows.empty()) {
    throw Error(ErrorKind::DegenerateSplit,
                fmt::format("{} train rows, {} test rows", train.rows.size(), test.rows.size()));
  }
  const auto severe = std::count_if(train.rows.begin(), train.rows.end(), [](const LabeledRow& r) { return r.label == 1; });
  if (severe == 0 || static_cast<std::size_t>(severe) == train.rows.size()) {
    throw Error(ErrorKind::DegenerateSplit, "training side holds a single class");
  }
  return {std::move(train), std::move(test)};
}

std::vector<Fold> kfold(std::span<const LabeledRow> rows, std::size_t k, std::uint64_t seed, bool group_by_patient) {
  if (k < 2) throw Error(ErrorKind::ConfigError, "k_folds must be at least 2");
  // Group key per row: the patient id, or the row's own index when ungrouped.
  std::vector<std::string> groups;
  if (group_by_patient) {
    std::set<std::string> ids;
    for (const auto& r : rows) ids.insert(r.patient_id);
    groups.assign(ids.begin(), ids.end());
  } else {
    for (std::size_t i = 0; i < rows.size(); ++i) groups.push_back(std::to_string(i));
  }
  if (groups.size() < k) {
    throw Error(ErrorKind::TooFewGroups, fmt::format("{} groups for {} folds", groups.size(), k));
  }
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  std::map<std::string, std::size_t> fold_of;
  const std::size_t base = groups.size() / k;
  const std::size_t extra = groups.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold_of[groups[order[pos++]]] = f;
  }

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t f = fold_of.at(group_by_patient ? rows[i].patient_id : std::to_string(i));
    for (std::size_t g = 0; g < k; ++g) (g == f ? folds[g].validation : folds[g].train).push_back(i);
  }
  return folds;
}

double logistic_objective(std::span<const LabeledRow> rows, std::span<const double> weights, double bias, double reg) {
  double loss = 0.0;
  for (const auto& r : rows) {
    const double z = dot(weights, r.x) + bias;
    loss += softplus(z) - r.label * z;
  }
  return loss / static_cast<double>(rows.size()) + 0.5 * reg * dot(weights, weights);
}

std::vector<double> logistic_gradient(std::span<const LabeledRow> rows, std::span<const double> weights, double bias,
                                      double reg) {
  const std::size_t d = weights.size();
  std::vector<double> g(d + 1, 0.0);
  for (const auto& r : rows) {
    const double err = sigmoid(dot(weights, r.x) + bias) - r.label;
    for (std::size_t j = 0; j < d; ++j) g[j] += err * r.x[j];
    g[d] += err;
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (std::size_t j = 0; j < d; ++j) g[j] = g[j] * inv_n + reg * weights[j];
  g[d] *= inv_n;
  return g;
}

TrainedModel train_model(const ModelSpec& spec, std::span<const LabeledRow> rows, std::uint64_t seed) {
  check_rows(rows, spec.kind != ModelKind::knn);
  const auto allowed = hyperparameter_names(spec.kind);
  for (const auto& [name, value] : spec.params) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw Error(ErrorKind::ConfigError,
                  fmt::format("{} has no hyperparameter '{}'", to_string(spec.kind), name));
    }
  }

  TrainedModel model;
  model.spec = spec;
  model.seed = seed;
  const std::size_t d = rows.front().x.size();
  model.standardizer = uses_standardizer(spec.kind) ? Standardizer::fit(rows) : Standardizer::identity(d);
  const auto prepared = standardized(model.standardizer, rows);
  Rng rng(seed);

  switch (spec.kind) {
    case ModelKind::logistic_regression:
      model.params = fit_logistic(prepared, param_or(spec.params, "reg", 0.1),
                                  count_param(spec.params, "max_iter", 10000));
      break;
    case ModelKind::naive_bayes:
      model.params = fit_naive_bayes(prepared);
      break;
    case ModelKind::knn: {
      KnnParams p;
      p.k = count_param(spec.params, "k", 5);
      if (p.k == 0) throw Error(ErrorKind::ConfigError, "knn k must be positive");
      for (const auto& r : prepared) {
        p.points.push_back(r.x);
        p.labels.push_back(r.label);
      }
      model.params = std::move(p);
      break;
    }
    case ModelKind::random_forest:
      model.params = fit_forest(prepared, spec.params, rng);
      break;
    case ModelKind::gradient_boosting:
      model.params = fit_boosting(prepared, spec.params);
      break;
    case ModelKind::linear_svm:
      model.params = fit_svm(prepared, spec.params, rng);
      break;
  }
  return model;
}

double score(const TrainedModel& model, std::span<const double> x) {
  const auto z = model.standardizer.apply(x);
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) {
          return sigmoid(dot(p.weights, z) + p.bias);
        } else if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          return naive_bayes_score(p, z);
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          return knn_score(p, z);
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          double s = 0.0;
          for (const auto& tree : p.trees) s += tree.predict(z);
          return s / static_cast<double>(p.trees.size());
        } else if constexpr (std::is_same_v<P, BoostingParams>) {
          double raw = p.init;
          for (const auto& tree : p.trees) raw += tree.predict(z);
          return sigmoid(raw);
        } else {
          return dot(p.weights, z) + p.bias;
        }
      },
      model.params);
}

std::vector<double> score_rows(const TrainedModel& model, std::span<const LabeledRow> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(score(model, r.x));
  return out;
}

GridSearchResult grid_search(const ParamGrid& grid, std::span<const LabeledRow> rows, std::size_t k,
                             std::uint64_t seed, bool group_by_patient) {
  const auto combos = grid.combinations();
  if (combos.empty()) throw Error(ErrorKind::ConfigError, "empty hyperparameter grid");
  const auto folds = kfold(rows, k, seed, group_by_patient);

  GridSearchResult result;
  result.best_mean_auc = -kInf;
  for (const auto& params : combos) {
    GridEntry entry{params, {}, -kInf, {}};
    const ModelSpec spec{grid.kind, params};
    try {
      double sum = 0.0;
      std::size_t valid = 0;
      for (const auto& fold : folds) {
        std::vector<LabeledRow> train;
        std::vector<LabeledRow> validation;
        for (auto i : fold.train) train.push_back(rows[i]);
        for (auto i : fold.validation) validation.push_back(rows[i]);
        const auto model = train_model(spec, train, seed);
        std::vector<int> labels;
        for (const auto& r : validation) labels.push_back(r.label);
        try {
          const double a = auc(score_rows(model, validation), labels);
          entry.fold_aucs.push_back(a);
          sum += a;
          ++valid;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::SingleClassLabels) throw;
          entry.fold_aucs.push_back(std::numeric_limits<double>::quiet_NaN());
        }
      }
      if (valid == 0) throw Error(ErrorKind::SingleClassLabels, "every validation fold held one class");
      entry.mean_auc = sum / static_cast<double>(valid);
    } catch (const Error& e) {
      entry.error = e.what();
      entry.mean_auc = -kInf;
      spdlog::warn("grid search {} [{}]: {}", to_string(grid.kind), spec.describe(), e.what());
    }
    if (result.table.empty() || entry.mean_auc > result.best_mean_auc) {
      result.best = spec;
      result.best_mean_auc = entry.mean_auc;
    }
    result.table.push_back(std::move(entry));
  }
  return result;
}

}  // namespace limbsense
