#include <doctest.h>

#include <cmath>
#include <set>

#include "contfood/baselines.hpp"
#include "contfood/error.hpp"
#include "support.hpp"

using namespace contfood;

namespace {

SparseVector dense(std::vector<double> v) { return SparseVector::from_dense(v); }

LabeledMatrix two_points() {
  LabeledMatrix m;
  m.dim = 2;
  m.push_back(dense({1, 0}), 1);
  m.push_back(dense({0, 1}), 0);
  return m;
}

/// Rows are L2-normalized so cosine similarity is a plain dot product.
LabeledMatrix normalized(LabeledMatrix m) {
  for (auto& r : m.rows) {
    const double n = std::sqrt(squared_norm(r));
    for (double& v : r.values) v /= n;
  }
  return m;
}

/// Two noisy clusters: label 1 rows load on the first half of the features.
LabeledMatrix clusters(Rng& rng, std::size_t n, std::size_t dim) {
  LabeledMatrix m;
  m.dim = dim;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    std::vector<double> d(dim, 0.0);
    for (std::size_t f = 0; f < dim; ++f) {
      const bool home = (f < dim / 2) == (y == 1);
      if (rng.uniform01() < (home ? 0.5 : 0.1)) d[f] = rng.uniform(0.1, 1.0);
    }
    d[y == 1 ? 0 : dim - 1] = 1.0;
    m.push_back(SparseVector::from_dense(d), y);
  }
  return normalized(m);
}

LabeledMatrix flip(LabeledMatrix m) {
  for (int& y : m.labels) y = 1 - y;
  return m;
}

double training_accuracy(const Classifier& c, const LabeledMatrix& m) {
  const auto p = c.predict_batch(m.rows);
  return accuracy(p, m.labels);
}

}  // namespace

TEST_CASE("logistic regression") {
  const auto m = two_points();
  CHECK(training_accuracy(train_logreg(m), m) == 1.0);
  LogRegOptions none;
  none.epochs = 0;
  const auto zero = train_logreg(m, none);
  CHECK(zero.score(dense({1, 0})) == 0.5);
  CHECK(zero.score(dense({0, 1})) == 0.5);
  LabeledMatrix single = m;
  single.labels = {1, 1};
  CHECK_THROWS_AS(train_logreg(single), DataError);
}

TEST_CASE("linear SVM") {
  const auto m = two_points();
  const auto svm = train_linear_svm(m);
  CHECK(svm.score(m.rows[0]) > 0.0);
  CHECK(svm.score(m.rows[1]) < 0.0);
  LinearSvm zero;
  zero.weights.assign(2, 0.0);
  CHECK(zero.score(dense({3, 4})) == 0.0);
  CHECK(zero.predict(dense({3, 4})) == 1);
  CHECK(zero.predict(dense({0, 0})) == 1);
  LabeledMatrix single = m;
  single.labels = {0, 0};
  CHECK_THROWS_AS(train_linear_svm(single), DataError);
}

TEST_CASE("KNN examples") {
  const auto m = normalized(two_points());
  const auto k1 = train_knn(m, 1);
  CHECK(k1.score(m.rows[0]) == 1.0);
  CHECK(k1.predict(m.rows[0]) == 1);
  const auto k2 = train_knn(m, 2);
  CHECK(k2.score(dense({0.6, 0.8})) == 0.5);
  CHECK(k2.predict(dense({0.6, 0.8})) == 1);

  LabeledMatrix five;
  five.dim = 3;
  for (int i = 0; i < 5; ++i) five.push_back(dense({1, 0, 0}), i < 2 ? 1 : 0);
  const auto k3 = train_knn(five, 3);
  const SparseVector oov{3, {}, {}};
  CHECK(k3.neighbors(oov) == std::vector<std::uint32_t>{0, 1, 2});
  CHECK(std::abs(k3.score(oov) - 2.0 / 3.0) < 1e-15);

  CHECK_THROWS_AS(train_knn(LabeledMatrix{}, 1), DataError);
  CHECK_THROWS_AS(train_knn(m, 3), UsageError);
  CHECK_THROWS_AS(train_knn(m, 0), UsageError);
}

TEST_CASE("property: KNN with k = |data| predicts the global majority") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n0 = 3 + rng.below(10), n1 = 3 + rng.below(10);
    if (n0 == n1) continue;
    const auto m = normalized(testing::random_matrix(rng, n0, n1, 15, 0.5));
    const auto knn = train_knn(m, m.size());
    const int majority = n1 > n0 ? 1 : 0;
    for (int q = 0; q < 10; ++q) CHECK(knn.predict(testing::random_sparse(rng, 15, 0.4)) == majority);
  }
}

TEST_CASE("forest: a pure bootstrap grows a single leaf") {
  Rng rng(2);
  const auto m = clusters(rng, 20, 8);
  std::vector<std::uint32_t> weights(m.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) weights[i] = m.labels[i] == 1 ? 1 : 0;
  const auto tree = grow_tree(m, weights, ForestOptions{}, 5);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].feature == -1);
  CHECK(tree.nodes[0].veg_fraction == 1.0);
  for (const auto& r : m.rows) CHECK(tree.leaf_fraction(r) == 1.0);
}

TEST_CASE("forest: one perfectly splitting feature at depth 1") {
  LabeledMatrix m;
  m.dim = 3;
  m.push_back(dense({0.9, 0.2, 0.0}), 1);
  m.push_back(dense({0.7, 0.0, 0.3}), 1);
  m.push_back(dense({0.0, 0.2, 0.4}), 0);
  m.push_back(dense({0.0, 0.5, 0.0}), 0);
  ForestOptions o;
  o.n_trees = 1;
  o.max_depth = 1;
  o.max_features = 3;
  o.bootstrap = false;
  const auto forest = train_random_forest(m, o);
  REQUIRE(forest.trees.size() == 1);
  CHECK(forest.trees[0].depth() == 1);
  CHECK(forest.trees[0].nodes[0].feature == 0);
  CHECK(training_accuracy(forest, m) == 1.0);
}

TEST_CASE("property: one unbootstrapped full-depth tree fits any consistent data") {
  Rng rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const auto m = testing::random_matrix(rng, 10 + rng.below(30), 10 + rng.below(30), 12, 0.4);
    std::set<std::vector<double>> seen;
    bool consistent = true;
    for (const auto& r : m.rows) consistent = consistent && seen.insert(r.to_dense()).second;
    if (!consistent) continue;
    ForestOptions o;
    o.n_trees = 1;
    o.max_depth = 0;
    o.max_features = m.dim;
    o.bootstrap = false;
    o.seed = rng.next();
    CHECK(training_accuracy(train_random_forest(m, o), m) == 1.0);
  }
}

TEST_CASE("forest is identical for any number of jobs and rejects one class") {
  Rng rng(4);
  const auto m = clusters(rng, 60, 10);
  ForestOptions o;
  o.n_trees = 7;
  o.seed = 9;
  const auto a = train_random_forest(m, o);
  o.jobs = 3;
  const auto b = train_random_forest(m, o);
  const auto sa = a.score_batch(m.rows), sb = b.score_batch(m.rows);
  CHECK(sa == sb);
  LabeledMatrix single = m;
  std::fill(single.labels.begin(), single.labels.end(), 1);
  CHECK_THROWS_AS(train_random_forest(single, o), DataError);
}

TEST_CASE("property: training on flipped labels mirrors the ranking") {
  Rng rng(77);
  const auto m = clusters(rng, 80, 12);
  const auto flipped = flip(m);
  auto mirrored = [&](const Classifier& a, const Classifier& b, double tol) {
    const auto sa = a.score_batch(m.rows), sb = b.score_batch(m.rows);
    CHECK(std::abs(auc(sb, m.labels) - (1.0 - auc(sa, m.labels))) <= tol);
  };
  mirrored(train_logreg(m), train_logreg(flipped), 1e-9);
  mirrored(train_linear_svm(m), train_linear_svm(flipped), 1e-9);
  mirrored(train_knn(m, 5), train_knn(flipped, 5), 0.0);
  ForestOptions o;
  o.n_trees = 9;
  o.seed = 3;
  mirrored(train_random_forest(m, o), train_random_forest(flipped, o), 1e-9);
}

TEST_CASE("scores are oriented towards Veg") {
  Rng rng(5);
  const auto m = clusters(rng, 100, 12);
  ForestOptions o;
  o.n_trees = 10;
  const auto lr = train_logreg(m);
  const auto svm = train_linear_svm(m);
  const auto knn = train_knn(m, 5);
  const auto forest = train_random_forest(m, o);
  for (const Classifier* c : {static_cast<const Classifier*>(&lr), static_cast<const Classifier*>(&svm),
                              static_cast<const Classifier*>(&knn), static_cast<const Classifier*>(&forest)}) {
    CHECK_MESSAGE(auc(c->score_batch(m.rows), m.labels) > 0.9, c->name());
    CHECK(c->predict_batch(m.rows) == [&] {
      std::vector<int> p;
      for (const auto& r : m.rows) p.push_back(c->predict(r));
      return p;
    }());
  }
}

TEST_CASE("compare_all: table shape, single-run std, deterministic KNN") {
  Rng rng(8);
  const auto train = clusters(rng, 120, 12);
  const auto test = clusters(rng, 60, 12);
  CompareOptions o;
  o.runs = 1;
  o.mlp.hidden = {8, 4};
  o.mlp.max_epochs = 5;
  o.forest.n_trees = 5;
  const auto one = compare_all(train, test, o);
  REQUIRE(one.size() == 5);
  const std::vector<std::string> order{"logistic_regression", "random_forest", "svm", "knn", "proposed_mlp"};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(one[i].model == order[i]);
    for (const auto& k : comparison_metrics()) CHECK(one[i].summary.stddev.at(k) == 0.0);
  }
  // Baseline loss is the error rate.
  CHECK(one[0].summary.mean.at("loss") == one[0].summary.mean.at("mae"));

  o.runs = 3;
  o.jobs = 2;
  const auto three = compare_all(train, test, o);
  for (const auto& k : comparison_metrics()) CHECK(three[3].summary.stddev.at(k) == 0.0);
  o.jobs = 1;
  const auto serial = compare_all(train, test, o);
  CHECK(comparison_csv(serial) == comparison_csv(three));

  const auto csv = comparison_csv(three);
  CHECK(csv.rfind("model,accuracy_mean,accuracy_std,loss_mean,loss_std,mae_mean,mae_std,precision_mean,"
                  "precision_std,recall_mean,recall_std,f1_mean,f1_std,auc_mean,auc_std\n",
                  0) == 0);
  const auto j = comparison_json(three);
  REQUIRE(j.size() == 5);
  CHECK(j[3].at("model") == "knn");
  CHECK(j[3].at("accuracy_std") == 0.0);

  o.runs = 0;
  CHECK_THROWS_AS(compare_all(train, test, o), UsageError);
}
