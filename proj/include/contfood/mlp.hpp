#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contfood/sparse.hpp"

namespace contfood {

/// Fully connected layer; weights are row-major rows x cols (input x output).
struct DenseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t r, std::size_t c) : rows(r), cols(c), weights(r * c, 0.0), bias(c, 0.0) {}

  double& w(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
  double w(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
};

/// ReLU hidden layers followed by a single sigmoid output unit. The first
/// layer consumes sparse TF-IDF input.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().rows; }
  /// {input, hidden..., 1}
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;
  /// "W1", "b1", ... in layer order.
  static std::string weight_name(std::size_t layer) { return "W" + std::to_string(layer + 1); }
  static std::string bias_name(std::size_t layer) { return "b" + std::to_string(layer + 1); }

  static MlpParams zeros(std::span<const std::size_t> dims);
  static MlpParams zeros_like(const MlpParams& p);
  void set_zero();
  /// Throws NumericError naming the first tensor holding NaN/Inf.
  void check_finite() const;

  /// Bitwise comparison of every tensor.
  bool operator==(const MlpParams& other) const;
};

/// He-uniform for the hidden layers, Glorot-uniform for the output layer,
/// zero biases.
MlpParams init_params(std::size_t input_dim, std::span<const std::size_t> hidden, std::uint64_t seed);

double sigmoid(double z);

struct ForwardCache {
  /// pre[l], post[l]: pre-activation and activation of layer l.
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  double probability = 0.5;
};

/// Probability of Veg. Cost is O(nnz(x) * width of the first layer) for the
/// input layer. Throws UsageError on dimension mismatch.
double forward(const MlpParams& params, const SparseVector& x, ForwardCache* cache = nullptr);

inline constexpr double kProbClamp = 1e-12;

/// Mean binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].
double binary_cross_entropy(std::span<const double> probs, std::span<const int> labels);
/// Sum of squared weights over every layer; biases excluded.
double l2_penalty(const MlpParams& params);
/// Data term plus lambda * l2_penalty.
double loss(std::span<const double> probs, std::span<const int> labels, const MlpParams& params, double lambda);

/// grad += scale * d(BCE)/d(params) for one example.
void accumulate_backward(const ForwardCache& cache, const SparseVector& x, int y, const MlpParams& params,
                         MlpParams& grad, double scale = 1.0);
/// grad += 2 * lambda * W for every weight tensor.
void add_l2_gradient(const MlpParams& params, double lambda, MlpParams& grad);

/// Full single-example gradient of BCE + lambda * ||W||^2.
MlpParams backward(const ForwardCache& cache, const SparseVector& x, int y, const MlpParams& params,
                   double lambda);

struct Prediction {
  int label = 1;
  double probability = 0.5;
};

/// label = 1 iff probability >= threshold.
Prediction predict(const MlpParams& params, const SparseVector& x, double threshold = 0.5);

}  // namespace contfood
