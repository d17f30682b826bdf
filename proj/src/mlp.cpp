#include "contfood/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "contfood/error.hpp"
#include "contfood/rng.hpp"

namespace contfood {

namespace {

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

}  // namespace

std::vector<std::size_t> MlpParams::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().rows);
  for (const auto& l : layers) d.push_back(l.cols);
  return d;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

MlpParams MlpParams::zeros(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw UsageError("network needs at least an input and an output dimension");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] == 0 || dims[i + 1] == 0) throw UsageError("layer dimensions must be positive");
    p.layers.emplace_back(dims[i], dims[i + 1]);
  }
  if (dims.back() != 1) throw UsageError("output layer must have exactly one unit");
  return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& p) {
  const auto d = p.dims();
  return zeros(d);
}

void MlpParams::set_zero() {
  for (auto& l : layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void MlpParams::check_finite() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (double w : layers[i].weights) {
      if (!std::isfinite(w)) throw NumericError("non-finite value in " + weight_name(i));
    }
    for (double b : layers[i].bias) {
      if (!std::isfinite(b)) throw NumericError("non-finite value in " + bias_name(i));
    }
  }
}

bool MlpParams::operator==(const MlpParams& o) const {
  if (layers.size() != o.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = o.layers[i];
    if (a.rows != b.rows || a.cols != b.cols || !bitwise_equal(a.weights, b.weights) ||
        !bitwise_equal(a.bias, b.bias)) {
      return false;
    }
  }
  return true;
}

MlpParams init_params(std::size_t input_dim, std::span<const std::size_t> hidden, std::uint64_t seed) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  MlpParams p = MlpParams::zeros(dims);
  Rng rng(derive_seed(seed, "init"));
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const bool output = i + 1 == p.layers.size();
    const double fan_in = static_cast<double>(l.rows);
    const double limit = output ? std::sqrt(6.0 / (fan_in + static_cast<double>(l.cols))) : std::sqrt(6.0 / fan_in);
    for (double& w : l.weights) w = rng.uniform(-limit, limit);
  }
  return p;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double forward(const MlpParams& params, const SparseVector& x, ForwardCache* cache) {
  if (params.layers.empty()) throw UsageError("forward: empty network");
  if (x.dim != params.input_dim()) {
    throw UsageError("forward: input dim " + std::to_string(x.dim) + " does not match network input " +
                     std::to_string(params.input_dim()));
  }
  const std::size_t n_layers = params.layers.size();
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.pre.resize(n_layers);
  c.post.resize(n_layers);

  const auto& first = params.layers[0];
  auto& z0 = c.pre[0];
  z0.assign(first.bias.begin(), first.bias.end());
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    const double xv = x.values[k];
    const double* row = &first.weights[static_cast<std::size_t>(x.indices[k]) * first.cols];
    for (std::size_t j = 0; j < first.cols; ++j) z0[j] += xv * row[j];
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (l > 0) {
      const auto& layer = params.layers[l];
      const auto& in = c.post[l - 1];
      auto& z = c.pre[l];
      z.assign(layer.bias.begin(), layer.bias.end());
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const double a = in[r];
        if (a == 0.0) continue;
        const double* row = &layer.weights[r * layer.cols];
        for (std::size_t j = 0; j < layer.cols; ++j) z[j] += a * row[j];
      }
    }
    auto& a = c.post[l];
    a.resize(c.pre[l].size());
    if (l + 1 == n_layers) {
      for (std::size_t j = 0; j < a.size(); ++j) a[j] = sigmoid(c.pre[l][j]);
    } else {
      for (std::size_t j = 0; j < a.size(); ++j) a[j] = c.pre[l][j] > 0.0 ? c.pre[l][j] : 0.0;
    }
  }
  c.probability = c.post.back()[0];
  return c.probability;
}

double binary_cross_entropy(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw UsageError("loss: probability/label length mismatch");
  if (probs.empty()) throw UsageError("loss: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    sum += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -sum / static_cast<double>(probs.size());
}

double l2_penalty(const MlpParams& params) {
  double sum = 0.0;
  for (const auto& l : params.layers) {
    for (double w : l.weights) sum += w * w;
  }
  return sum;
}

double loss(std::span<const double> probs, std::span<const int> labels, const MlpParams& params, double lambda) {
  const double data = binary_cross_entropy(probs, labels);
  return lambda == 0.0 ? data : data + lambda * l2_penalty(params);
}

void accumulate_backward(const ForwardCache& cache, const SparseVector& x, int y, const MlpParams& params,
                         MlpParams& grad, double scale) {
  const std::size_t n_layers = params.layers.size();
  std::vector<double> delta{(cache.probability - static_cast<double>(y)) * scale};
  std::vector<double> prev;
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& g = grad.layers[l];
    for (std::size_t j = 0; j < layer.cols; ++j) g.bias[j] += delta[j];
    if (l == 0) {
      for (std::size_t k = 0; k < x.nnz(); ++k) {
        const double xv = x.values[k];
        double* row = &g.weights[static_cast<std::size_t>(x.indices[k]) * layer.cols];
        for (std::size_t j = 0; j < layer.cols; ++j) row[j] += xv * delta[j];
      }
      break;
    }
    const auto& in = cache.post[l - 1];
    const auto& in_pre = cache.pre[l - 1];
    prev.assign(layer.rows, 0.0);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double* wrow = &layer.weights[r * layer.cols];
      double* grow = &g.weights[r * layer.cols];
      const double a = in[r];
      double back = 0.0;
      for (std::size_t j = 0; j < layer.cols; ++j) {
        grow[j] += a * delta[j];
        back += wrow[j] * delta[j];
      }
      // ReLU derivative, zero at exactly zero pre-activation.
      prev[r] = in_pre[r] > 0.0 ? back : 0.0;
    }
    delta.swap(prev);
  }
}

void add_l2_gradient(const MlpParams& params, double lambda, MlpParams& grad) {
  if (lambda == 0.0) return;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& w = params.layers[l].weights;
    auto& g = grad.layers[l].weights;
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += 2.0 * lambda * w[i];
  }
}

MlpParams backward(const ForwardCache& cache, const SparseVector& x, int y, const MlpParams& params,
                   double lambda) {
  MlpParams grad = MlpParams::zeros_like(params);
  accumulate_backward(cache, x, y, params, grad);
  add_l2_gradient(params, lambda, grad);
  return grad;
}

Prediction predict(const MlpParams& params, const SparseVector& x, double threshold) {
  const double p = forward(params, x);
  return {p >= threshold ? 1 : 0, p};
}

}  // namespace contfood
