// Text serialization of trained models. Every double is written in its
// shortest round-trip form, so write -> parse -> write is byte-identical.
//
//   limbsense-model 1
//   kind <kind>
//   params <name=value;...>        ("-" when empty)
//   seed <n>
//   fold_aucs <count> <values...>
//   standardizer <d>
//   mean <d values>
//   scale <d values>
//   <kind block>
//   end
//
// Kind blocks:
//   logistic_regression: weights <d> <values>; bias <v>; iterations <n> <converged 0|1>
//   naive_bayes:         prior <log p0> <log p1>; mean0/var0/mean1/var1 <d> <values>
//   knn:                 k <k>; points <n> <d>, then n lines "<label> <values>"
//   random_forest:       trees <count>, then per tree "tree <nodes>" and one
//                        "<feature> <threshold> <left> <right> <value>" line per node
//   gradient_boosting:   init <v>; loss_history <n> <values>; trees as above
//   linear_svm:          weights <d> <values>; bias <v>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "limbsense/error.hpp"
#include "limbsense/models.hpp"
#include "text.hpp"

namespace limbsense {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void line(std::string_view key) { out_ << key; }
  void value(double v) { out_ << ' ' << text::shortest(v); }
  void value(std::uint64_t v) { out_ << ' ' << v; }
  void value(std::string_view v) { out_ << ' ' << v; }
  void end_line() { out_ << '\n'; }

  void vector(std::string_view key, const std::vector<double>& v) {
    line(key);
    value(static_cast<std::uint64_t>(v.size()));
    for (double x : v) value(x);
    end_line();
  }

  void trees(const std::vector<Tree>& trees) {
    line("trees");
    value(static_cast<std::uint64_t>(trees.size()));
    end_line();
    for (const auto& tree : trees) {
      line("tree");
      value(static_cast<std::uint64_t>(tree.nodes.size()));
      end_line();
      for (const auto& n : tree.nodes) {
        out_ << n.feature << ' ' << text::shortest(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
             << text::shortest(n.value) << '\n';
      }
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::string_view token() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ >= text_.size()) fail("unexpected end of model file");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view key) {
    const auto got = token();
    if (got != key) fail(fmt::format("expected '{}', found '{}'", key, got));
  }

  double real() {
    const auto t = token();
    const auto v = text::parse_double(t);
    if (!v) fail(fmt::format("bad number '{}'", t));
    return *v;
  }

  long long integer() {
    const auto t = token();
    const auto v = text::parse_int(t);
    if (!v) fail(fmt::format("bad integer '{}'", t));
    return *v;
  }

  std::size_t count() {
    const auto v = integer();
    if (v < 0) fail("negative count");
    return static_cast<std::size_t>(v);
  }

  std::vector<double> vector(std::string_view key) {
    expect(key);
    std::vector<double> v(count());
    for (auto& x : v) x = real();
    return v;
  }

  std::vector<Tree> trees() {
    expect("trees");
    std::vector<Tree> out(count());
    for (auto& tree : out) {
      expect("tree");
      tree.nodes.resize(count());
      for (auto& n : tree.nodes) {
        n.feature = static_cast<int>(integer());
        n.threshold = real();
        n.left = static_cast<int>(integer());
        n.right = static_cast<int>(integer());
        n.value = real();
      }
      validate(tree);
    }
    return out;
  }

  [[noreturn]] static void fail(const std::string& what) { throw Error(ErrorKind::ModelFormat, what); }

 private:
  static void validate(const Tree& tree) {
    const auto size = static_cast<int>(tree.nodes.size());
    if (size == 0) fail("empty tree");
    for (int i = 0; i < size; ++i) {
      const auto& n = tree.nodes[static_cast<std::size_t>(i)];
      if (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= size || n.right >= size)) {
        fail("tree child index out of range");
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_model(const TrainedModel& model, std::ostream& out) {
  Writer w(out);
  w.line(kModelFormatTag);
  w.value(static_cast<std::uint64_t>(kModelFormatVersion));
  w.end_line();
  w.line("kind");
  w.value(to_string(model.spec.kind));
  w.end_line();
  w.line("params");
  const auto params = model.spec.describe();
  w.value(params.empty() ? std::string_view("-") : std::string_view(params));
  w.end_line();
  w.line("seed");
  w.value(model.seed);
  w.end_line();
  w.vector("fold_aucs", model.fold_aucs);
  w.line("standardizer");
  w.value(static_cast<std::uint64_t>(model.standardizer.dimension()));
  w.end_line();
  w.vector("mean", model.standardizer.mean());
  w.vector("scale", model.standardizer.scale());

  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) {
          w.vector("weights", p.weights);
          w.line("bias");
          w.value(p.bias);
          w.end_line();
          w.line("iterations");
          w.value(static_cast<std::uint64_t>(p.iterations));
          w.value(static_cast<std::uint64_t>(p.converged ? 1 : 0));
          w.end_line();
        } else if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          w.line("prior");
          w.value(p.log_prior[0]);
          w.value(p.log_prior[1]);
          w.end_line();
          w.vector("mean0", p.mean[0]);
          w.vector("var0", p.variance[0]);
          w.vector("mean1", p.mean[1]);
          w.vector("var1", p.variance[1]);
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          w.line("k");
          w.value(static_cast<std::uint64_t>(p.k));
          w.end_line();
          w.line("points");
          w.value(static_cast<std::uint64_t>(p.points.size()));
          w.value(static_cast<std::uint64_t>(p.points.empty() ? 0 : p.points.front().size()));
          w.end_line();
          for (std::size_t i = 0; i < p.points.size(); ++i) {
            out << p.labels[i];
            for (double v : p.points[i]) w.value(v);
            w.end_line();
          }
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          w.trees(p.trees);
        } else if constexpr (std::is_same_v<P, BoostingParams>) {
          w.line("init");
          w.value(p.init);
          w.end_line();
          w.vector("loss_history", p.loss_history);
          w.trees(p.trees);
        } else {
          w.vector("weights", p.weights);
          w.line("bias");
          w.value(p.bias);
          w.end_line();
        }
      },
      model.params);
  w.line("end");
  w.end_line();
}

TrainedModel parse_model(std::string_view content) {
  Reader r(content);
  r.expect(kModelFormatTag);
  if (r.integer() != kModelFormatVersion) Reader::fail("unsupported model format version");
  TrainedModel model;
  r.expect("kind");
  const auto kind_name = r.token();
  const auto kind = parse_model_kind(kind_name);
  if (!kind) Reader::fail(fmt::format("unknown model kind '{}'", kind_name));
  model.spec.kind = *kind;
  r.expect("params");
  const auto params = r.token();
  if (params != "-") model.spec.params = parse_hyperparameters(params);
  r.expect("seed");
  const auto seed = r.token();
  const auto seed_value = text::parse_int<std::uint64_t>(seed);
  if (!seed_value) Reader::fail("bad seed");
  model.seed = *seed_value;
  model.fold_aucs = r.vector("fold_aucs");
  r.expect("standardizer");
  const std::size_t d = r.count();
  auto mean = r.vector("mean");
  auto scale = r.vector("scale");
  if (mean.size() != d || scale.size() != d) Reader::fail("standardizer dimension mismatch");
  model.standardizer = Standardizer(std::move(mean), std::move(scale));

  auto check_dim = [d](const std::vector<double>& v) {
    if (v.size() != d) Reader::fail("parameter dimension mismatch");
  };

  switch (model.spec.kind) {
    case ModelKind::logistic_regression: {
      LogisticParams p;
      p.weights = r.vector("weights");
      check_dim(p.weights);
      r.expect("bias");
      p.bias = r.real();
      r.expect("iterations");
      p.iterations = r.count();
      p.converged = r.integer() != 0;
      model.params = std::move(p);
      break;
    }
    case ModelKind::naive_bayes: {
      NaiveBayesParams p;
      r.expect("prior");
      p.log_prior = {r.real(), r.real()};
      p.mean[0] = r.vector("mean0");
      p.variance[0] = r.vector("var0");
      p.mean[1] = r.vector("mean1");
      p.variance[1] = r.vector("var1");
      for (int c = 0; c < 2; ++c) {
        check_dim(p.mean[c]);
        check_dim(p.variance[c]);
      }
      model.params = std::move(p);
      break;
    }
    case ModelKind::knn: {
      KnnParams p;
      r.expect("k");
      p.k = r.count();
      r.expect("points");
      const std::size_t n = r.count();
      if (r.count() != d && n > 0) Reader::fail("neighbour dimension mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        p.labels.push_back(static_cast<int>(r.integer()));
        std::vector<double> point(d);
        for (auto& v : point) v = r.real();
        p.points.push_back(std::move(point));
      }
      model.params = std::move(p);
      break;
    }
    case ModelKind::random_forest: {
      ForestParams p;
      p.trees = r.trees();
      model.params = std::move(p);
      break;
    }
    case ModelKind::gradient_boosting: {
      BoostingParams p;
      r.expect("init");
      p.init = r.real();
      p.loss_history = r.vector("loss_history");
      p.trees = r.trees();
      model.params = std::move(p);
      break;
    }
    case ModelKind::linear_svm: {
      SvmParams p;
      p.weights = r.vector("weights");
      check_dim(p.weights);
      r.expect("bias");
      p.bias = r.real();
      model.params = std::move(p);
      break;
    }
  }
  r.expect("end");
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  write_model(model, out);
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace limbsense
