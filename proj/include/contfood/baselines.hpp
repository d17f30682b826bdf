#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "contfood/metrics.hpp"
#include "contfood/nnet.hpp"
#include "contfood/sparse.hpp"

namespace contfood {

/// Uniform scoring contract shared by the comparison models. Scores are
/// oriented so that higher means more Veg; predict() returns 1 for Veg and
/// every tie convention resolves to Veg.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string_view name() const = 0;
  virtual double score(const SparseVector& x) const = 0;
  virtual int predict(const SparseVector& x) const = 0;
  virtual std::vector<double> score_batch(std::span<const SparseVector> rows) const;
  virtual std::vector<int> predict_batch(std::span<const SparseVector> rows) const;
};

class LogisticRegression final : public Classifier {
 public:
  std::vector<double> weights;
  double bias = 0.0;

  std::string_view name() const override { return "logistic_regression"; }
  /// Probability of Veg.
  double score(const SparseVector& x) const override;
  int predict(const SparseVector& x) const override { return score(x) >= 0.5 ? 1 : 0; }
};

struct LogRegOptions {
  std::size_t epochs = 10;
  double l2 = 1e-4;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

/// Zero-initialized sigmoid unit trained with Adam on BCE + l2 * ||w||^2.
LogisticRegression train_logreg(const LabeledMatrix& data, const LogRegOptions& options = {});

class LinearSvm final : public Classifier {
 public:
  std::vector<double> weights;
  double bias = 0.0;

  std::string_view name() const override { return "svm"; }
  /// Signed margin w.x + b.
  double score(const SparseVector& x) const override;
  int predict(const SparseVector& x) const override { return score(x) >= 0.0 ? 1 : 0; }
};

struct SvmOptions {
  std::size_t epochs = 5;
  double lambda = 1e-4;
  std::uint64_t seed = 0;
};

/// Pegasos stochastic subgradient descent on the hinge loss with step
/// 1/(lambda t). The bias is an extra always-one feature.
LinearSvm train_linear_svm(const LabeledMatrix& data, const SvmOptions& options = {});

class Knn final : public Classifier {
 public:
  LabeledMatrix memory;
  std::size_t k = 5;

  std::string_view name() const override { return "knn"; }
  /// Fraction of Veg among the k most cosine-similar stored rows (ties by
  /// lower row index).
  double score(const SparseVector& x) const override;
  int predict(const SparseVector& x) const override { return score(x) >= 0.5 ? 1 : 0; }
  std::vector<double> score_batch(std::span<const SparseVector> rows) const override;
  /// Stored row indices of the k neighbors of x, best first.
  std::vector<std::uint32_t> neighbors(const SparseVector& x) const;
};

Knn train_knn(const LabeledMatrix& data, std::size_t k = 5);

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double veg_fraction = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double leaf_fraction(const SparseVector& x) const;
  std::size_t depth() const;
};

struct ForestOptions {
  std::size_t n_trees = 100;
  std::size_t max_depth = 20;     // 0 = unlimited
  std::size_t max_features = 0;   // candidates per node; 0 = ceil(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  int jobs = 1;
};

class RandomForest final : public Classifier {
 public:
  std::vector<DecisionTree> trees;

  std::string_view name() const override { return "random_forest"; }
  /// Mean leaf Veg fraction over trees.
  double score(const SparseVector& x) const override;
  int predict(const SparseVector& x) const override { return score(x) >= 0.5 ? 1 : 0; }
};

/// Bagged CART trees with Gini splits. Tree t uses derive_seed(seed, "tree", t),
/// so the forest is identical for any `jobs`.
RandomForest train_random_forest(const LabeledMatrix& data, const ForestOptions& options = {});
/// One tree over the given bootstrap weights (row -> multiplicity).
DecisionTree grow_tree(const LabeledMatrix& data, std::span<const std::uint32_t> weights,
                       const ForestOptions& options, std::uint64_t seed);

/// The network wrapped in the same contract (score = probability).
class MlpClassifier final : public Classifier {
 public:
  MlpParams params;
  double threshold = 0.5;

  std::string_view name() const override { return "proposed_mlp"; }
  double score(const SparseVector& x) const override;
  int predict(const SparseVector& x) const override { return score(x) >= threshold ? 1 : 0; }
  std::vector<double> score_batch(std::span<const SparseVector> rows) const override;
};

// ---------------------------------------------------------------------------

struct CompareOptions {
  std::size_t runs = 3;
  std::uint64_t base_seed = 0;
  TrainConfig mlp;
  LogRegOptions logreg;
  SvmOptions svm;
  std::size_t knn_k = 5;
  ForestOptions forest;
  int jobs = 1;
};

struct ComparisonRow {
  std::string model;
  RunSummary summary;
};

inline const std::vector<std::string>& comparison_metrics() {
  static const std::vector<std::string> keys{"accuracy", "loss", "mae", "precision", "recall", "f1", "auc"};
  return keys;
}

/// Trains each model `runs` times (run r uses derive_seed(base_seed, "run", r))
/// and reports mean and sample std of the seven metrics on `test`, in the
/// order logistic_regression, random_forest, svm, knn, proposed_mlp.
std::vector<ComparisonRow> compare_all(const LabeledMatrix& train, const LabeledMatrix& test,
                                       const CompareOptions& options);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);
nlohmann::json comparison_json(const std::vector<ComparisonRow>& rows);

}  // namespace contfood
