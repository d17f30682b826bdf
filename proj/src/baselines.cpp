#include "contfood/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <unordered_set>

#include "contfood/error.hpp"
#include "contfood/kernels.hpp"
#include "contfood/rng.hpp"

namespace contfood {

namespace {

void require_two_classes(const LabeledMatrix& data, std::string_view who) {
  data.validate();
  const auto veg = data.count(1);
  if (veg == 0 || veg == data.size()) throw DataError(std::string(who) + ": both classes must be present");
}

double sparse_dot_dense(const SparseVector& x, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    if (x.indices[k] < w.size()) s += x.values[k] * w[x.indices[k]];
  }
  return s;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(order));
  return order;
}

}  // namespace

std::vector<double> Classifier::score_batch(std::span<const SparseVector> rows) const {
  std::vector<double> out(rows.size());
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static) num_threads(kernels::threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score(rows[i]);
  return out;
}

std::vector<int> Classifier::predict_batch(std::span<const SparseVector> rows) const {
  std::vector<int> out(rows.size());
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static) num_threads(kernels::threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = predict(rows[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

double LogisticRegression::score(const SparseVector& x) const { return sigmoid(sparse_dot_dense(x, weights) + bias); }

LogisticRegression train_logreg(const LabeledMatrix& data, const LogRegOptions& options) {
  require_two_classes(data, "logistic regression");
  if (options.batch_size == 0) throw UsageError("logistic regression: batch_size must be >= 1");
  LogisticRegression model;
  model.weights.assign(data.dim, 0.0);

  std::vector<double> grad(data.dim), m(data.dim, 0.0), v(data.dim, 0.0);
  std::vector<double> gb(1), mb(1, 0.0), vb(1, 0.0), b(1, 0.0);
  kernels::AdamCoefficients c;
  c.learning_rate = options.learning_rate;
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto order = shuffled_order(data.size(), derive_seed(options.seed, "logreg-shuffle", epoch));
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double inv_m = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = 2.0 * options.l2 * model.weights[i];
      gb[0] = 0.0;
      for (std::size_t t = start; t < end; ++t) {
        const auto& x = data.rows[order[t]];
        const double err = (sigmoid(sparse_dot_dense(x, model.weights) + b[0]) - data.labels[order[t]]) * inv_m;
        for (std::size_t k = 0; k < x.nnz(); ++k) grad[x.indices[k]] += err * x.values[k];
        gb[0] += err;
      }
      ++step;
      c.bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
      c.bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
      kernels::parallel::adam_update(model.weights, grad, m, v, c);
      kernels::serial::adam_update(b, gb, mb, vb, c);
      model.bias = b[0];
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Linear SVM (Pegasos)

double LinearSvm::score(const SparseVector& x) const { return sparse_dot_dense(x, weights) + bias; }

LinearSvm train_linear_svm(const LabeledMatrix& data, const SvmOptions& options) {
  require_two_classes(data, "linear svm");
  if (!(options.lambda > 0.0)) throw UsageError("linear svm: lambda must be > 0");
  // w = scale * v; v[dim] is the bias coordinate (its feature is always 1).
  const std::size_t d = data.dim;
  std::vector<double> v(d + 1, 0.0);
  double scale = 1.0;
  std::uint64_t t = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto order = shuffled_order(data.size(), derive_seed(options.seed, "svm-shuffle", epoch));
    for (auto i : order) {
      ++t;
      const auto& x = data.rows[i];
      const double y = data.labels[i] == 1 ? 1.0 : -1.0;
      double wx = v[d];
      for (std::size_t k = 0; k < x.nnz(); ++k) wx += x.values[k] * v[x.indices[k]];
      const double margin = y * scale * wx;
      const double eta = 1.0 / (options.lambda * static_cast<double>(t));
      const double shrink = 1.0 - eta * options.lambda;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        const double step = eta * y / scale;
        for (std::size_t k = 0; k < x.nnz(); ++k) v[x.indices[k]] += step * x.values[k];
        v[d] += step;
      }
      if (scale < 1e-9) {
        for (double& e : v) e *= scale;
        scale = 1.0;
      }
    }
  }
  LinearSvm model;
  model.weights.resize(d);
  for (std::size_t j = 0; j < d; ++j) model.weights[j] = scale * v[j];
  model.bias = scale * v[d];
  return model;
}

// ---------------------------------------------------------------------------
// KNN

Knn train_knn(const LabeledMatrix& data, std::size_t k) {
  data.validate();
  if (data.size() == 0) throw DataError("knn: empty training data");
  if (k == 0 || k > data.size()) throw UsageError("knn: k must lie in [1, number of rows]");
  Knn model;
  model.memory = data;
  model.k = k;
  return model;
}

std::vector<std::uint32_t> Knn::neighbors(const SparseVector& x) const {
  const auto top = kernels::parallel::cosine_top_k(memory.rows, std::span(&x, 1), k);
  std::vector<std::uint32_t> out;
  for (const auto& n : top.front()) out.push_back(n.index);
  return out;
}

double Knn::score(const SparseVector& x) const { return score_batch(std::span(&x, 1)).front(); }

std::vector<double> Knn::score_batch(std::span<const SparseVector> rows) const {
  const auto top = kernels::parallel::cosine_top_k(memory.rows, rows, k);
  std::vector<double> out(rows.size());
  for (std::size_t q = 0; q < rows.size(); ++q) {
    std::size_t veg = 0;
    for (const auto& n : top[q]) veg += memory.labels[n.index] == 1;
    out[q] = static_cast<double>(veg) / static_cast<double>(top[q].size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random forest

double DecisionTree::leaf_fraction(const SparseVector& x) const {
  std::int32_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = x.at(static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left : n.right;
  }
  return nodes[i].veg_fraction;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[i].feature >= 0) {
      stack.push_back({nodes[i].left, d + 1});
      stack.push_back({nodes[i].right, d + 1});
    }
  }
  return best;
}

namespace {

struct Valued {
  double value;
  std::uint32_t row;
};

double gini(double w0, double w1) {
  const double w = w0 + w1;
  if (w <= 0.0) return 0.0;
  const double p0 = w0 / w, p1 = w1 / w;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitChoice {
  bool found = false;
  double gain = -1.0;
  std::uint32_t feature = 0;
  double threshold = 0.0;
};

}  // namespace

DecisionTree grow_tree(const LabeledMatrix& data, std::span<const std::uint32_t> weights,
                       const ForestOptions& options, std::uint64_t seed) {
  const std::size_t d = data.dim;
  const std::size_t n = data.size();
  const std::size_t m_try = options.max_features == 0
                                ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                                : std::min(options.max_features, d);
  const std::size_t max_depth = options.max_depth == 0 ? SIZE_MAX : options.max_depth;
  const kernels::PostingIndex columns(data.rows, d);
  Rng rng(seed);

  DecisionTree tree;
  struct Pending {
    std::int32_t node;
    std::size_t depth;
    std::vector<std::uint32_t> rows;
  };
  std::vector<Pending> stack;
  {
    std::vector<std::uint32_t> root;
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] > 0) root.push_back(static_cast<std::uint32_t>(i));
    }
    tree.nodes.emplace_back();
    stack.push_back({0, 0, std::move(root)});
  }
  std::vector<std::int32_t> stamp(n, -1);
  std::vector<std::uint32_t> all_features;
  if (m_try == d) {
    all_features.resize(d);
    for (std::size_t f = 0; f < d; ++f) all_features[f] = static_cast<std::uint32_t>(f);
  }
  std::vector<Valued> vals;

  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    double w0 = 0.0, w1 = 0.0;
    for (auto r : p.rows) (data.labels[r] == 1 ? w1 : w0) += weights[r];
    tree.nodes[p.node].veg_fraction = w1 / (w0 + w1);
    if (w0 == 0.0 || w1 == 0.0 || p.depth >= max_depth || p.rows.size() < 2) continue;

    for (auto r : p.rows) stamp[r] = p.node;
    std::vector<std::uint32_t> candidates;
    if (m_try == d) {
      candidates = all_features;
    } else {
      std::unordered_set<std::uint32_t> seen;
      while (candidates.size() < m_try) {
        const auto f = static_cast<std::uint32_t>(rng.below(d));
        if (seen.insert(f).second) candidates.push_back(f);
      }
    }

    const double parent = gini(w0, w1);
    const double total = w0 + w1;
    SplitChoice best;
    for (auto f : candidates) {
      vals.clear();
      const auto col = columns.column(f);
      if (col.size() <= p.rows.size() * 4) {
        for (const auto& post : col) {
          if (stamp[post.row] == p.node) vals.push_back({post.value, post.row});
        }
      } else {
        for (auto r : p.rows) {
          if (const double x = data.rows[r].at(f); x != 0.0) vals.push_back({x, r});
        }
      }
      if (vals.empty()) continue;  // constant zero in this node
      std::sort(vals.begin(), vals.end(),
                [](const Valued& a, const Valued& b) { return a.value != b.value ? a.value < b.value : a.row < b.row; });
      double nz0 = 0.0, nz1 = 0.0;
      for (const auto& e : vals) (data.labels[e.row] == 1 ? nz1 : nz0) += weights[e.row];
      const double z0 = w0 - nz0, z1 = w1 - nz1;
      const bool has_zero = z0 + z1 > 0.0;

      // Sweep distinct values ascending, with the zero group slotted in place.
      double l0 = 0.0, l1 = 0.0;
      bool zero_done = !has_zero;
      auto consider = [&](double threshold) {
        const double lw = l0 + l1, rw = total - lw;
        if (lw <= 0.0 || rw <= 0.0) return;
        const double g = parent - (lw / total) * gini(l0, l1) - (rw / total) * gini(w0 - l0, w1 - l1);
        if (!best.found || g > best.gain) best = {true, g, f, threshold};
      };
      for (std::size_t i = 0; i < vals.size();) {
        if (!zero_done && vals[i].value > 0.0) {
          l0 += z0;
          l1 += z1;
          zero_done = true;
          consider(0.0);
          continue;
        }
        const double v = vals[i].value;
        while (i < vals.size() && vals[i].value == v) {
          (data.labels[vals[i].row] == 1 ? l1 : l0) += weights[vals[i].row];
          ++i;
        }
        consider(v);
      }
      if (!zero_done) {
        l0 += z0;
        l1 += z1;
        consider(0.0);
      }
    }
    // Zero-gain splits are allowed (an XOR-like node has no positive-gain
    // split); numerically negative gains are not.
    if (!best.found || best.gain < -1e-12) continue;

    std::vector<std::uint32_t> left, right;
    for (auto r : p.rows) (data.rows[r].at(best.feature) <= best.threshold ? left : right).push_back(r);
    const auto li = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[p.node];
    node.feature = static_cast<std::int32_t>(best.feature);
    node.threshold = best.threshold;
    node.left = li;
    node.right = li + 1;
    stack.push_back({li + 1, p.depth + 1, std::move(right)});
    stack.push_back({li, p.depth + 1, std::move(left)});
  }
  return tree;
}

RandomForest train_random_forest(const LabeledMatrix& data, const ForestOptions& options) {
  require_two_classes(data, "random forest");
  if (options.n_trees == 0) throw UsageError("random forest: n_trees must be >= 1");
  RandomForest forest;
  forest.trees.resize(options.n_trees);
  std::vector<std::exception_ptr> errors(options.n_trees);
  const auto nt = static_cast<std::ptrdiff_t>(options.n_trees);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, options.jobs))
  for (std::ptrdiff_t t = 0; t < nt; ++t) {
    try {
      const auto seed = derive_seed(options.seed, "tree", static_cast<std::uint64_t>(t));
      std::vector<std::uint32_t> weights(data.size(), options.bootstrap ? 0 : 1);
      if (options.bootstrap) {
        Rng rng(derive_seed(seed, "bootstrap"));
        for (std::size_t i = 0; i < data.size(); ++i) ++weights[rng.below(data.size())];
      }
      forest.trees[t] = grow_tree(data, weights, options, derive_seed(seed, "features"));
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return forest;
}

double RandomForest::score(const SparseVector& x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.leaf_fraction(x);
  return sum / static_cast<double>(trees.size());
}

// ---------------------------------------------------------------------------
// MLP adapter

double MlpClassifier::score(const SparseVector& x) const { return forward(params, x); }

std::vector<double> MlpClassifier::score_batch(std::span<const SparseVector> rows) const {
  return kernels::parallel::predict_batch(params, rows);
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

const std::vector<std::string>& model_order() {
  static const std::vector<std::string> order{"logistic_regression", "random_forest", "svm", "knn", "proposed_mlp"};
  return order;
}

MetricMap score_model(const Classifier& model, const LabeledMatrix& test, double loss_override = -1.0) {
  const auto scores = model.score_batch(test.rows);
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = model.predict(test.rows[i]);
  const auto cm = confusion(pred, test.labels);
  MetricMap m;
  m["accuracy"] = accuracy(cm);
  m["mae"] = mae(pred, test.labels);
  m["loss"] = loss_override >= 0.0 ? loss_override : m["mae"];
  m["precision"] = precision(cm);
  m["recall"] = recall(cm);
  m["f1"] = f1(cm);
  m["auc"] = auc(scores, test.labels);
  return m;
}

MetricMap run_one(std::size_t model, std::uint64_t seed, const LabeledMatrix& train, const LabeledMatrix& test,
                  const CompareOptions& o) {
  switch (model) {
    case 0: {
      auto opt = o.logreg;
      opt.seed = seed;
      return score_model(train_logreg(train, opt), test);
    }
    case 1: {
      auto opt = o.forest;
      opt.seed = seed;
      return score_model(train_random_forest(train, opt), test);
    }
    case 2: {
      auto opt = o.svm;
      opt.seed = seed;
      return score_model(train_linear_svm(train, opt), test);
    }
    case 3:
      return score_model(train_knn(train, o.knn_k), test);
    default: {
      auto cfg = o.mlp;
      cfg.seed = seed;
      MlpClassifier clf;
      clf.params = contfood::train(train, cfg).params;
      clf.threshold = cfg.threshold;
      const auto probs = clf.score_batch(test.rows);
      const double l = loss(probs, test.labels, clf.params, cfg.l2_lambda);
      return score_model(clf, test, l);
    }
  }
}

}  // namespace

std::vector<ComparisonRow> compare_all(const LabeledMatrix& train, const LabeledMatrix& test,
                                       const CompareOptions& options) {
  if (options.runs < 1) throw UsageError("compare: runs must be >= 1");
  require_two_classes(train, "compare (train)");
  require_two_classes(test, "compare (test)");
  const std::size_t n_models = model_order().size();
  const std::size_t n_tasks = n_models * options.runs;
  std::vector<MetricMap> results(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);
  const auto nt = static_cast<std::ptrdiff_t>(n_tasks);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, options.jobs))
  for (std::ptrdiff_t t = 0; t < nt; ++t) {
    const std::size_t model = static_cast<std::size_t>(t) / options.runs;
    const std::size_t run = static_cast<std::size_t>(t) % options.runs;
    try {
      results[t] = run_one(model, derive_seed(options.base_seed, "run", run), train, test, options);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<ComparisonRow> rows;
  for (std::size_t m = 0; m < n_models; ++m) {
    std::span<const MetricMap> runs(results.data() + m * options.runs, options.runs);
    rows.push_back({model_order()[m], aggregate_runs(runs)});
  }
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "model";
  for (const auto& k : comparison_metrics()) out += "," + k + "_mean," + k + "_std";
  out += '\n';
  char buf[64];
  for (const auto& row : rows) {
    out += row.model;
    for (const auto& k : comparison_metrics()) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", row.summary.mean.at(k), row.summary.stddev.at(k));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

nlohmann::json comparison_json(const std::vector<ComparisonRow>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json j;
    j["model"] = row.model;
    j["runs"] = row.summary.runs;
    for (const auto& k : comparison_metrics()) {
      j[k + "_mean"] = row.summary.mean.at(k);
      j[k + "_std"] = row.summary.stddev.at(k);
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace contfood
