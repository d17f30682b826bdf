#pragma once

// Data-parallel hot loops. Each kernel has a straightforward serial reference
// in `serial::` and an OpenMP version in `parallel::`; the two produce
// bitwise-identical results for any thread count (the tests check this), so
// callers use `parallel::` unconditionally.

#include <cstdint>
#include <span>
#include <vector>

#include "contfood/mlp.hpp"
#include "contfood/sparse.hpp"

namespace contfood::kernels {

/// Worker count for `parallel::` kernels. Defaults to 1 (single-threaded).
void set_threads(int n);
int threads();

struct AdamCoefficients {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// 1 - beta1^t and 1 - beta2^t for the current step.
  double bias1 = 1.0;
  double bias2 = 1.0;
};

struct Neighbor {
  std::uint32_t index = 0;
  double key = 0.0;  // similarity (cosine) or squared distance (euclidean)
  bool operator==(const Neighbor&) const = default;
};

/// Column-major view of a row set: for each feature, (row, value) pairs in
/// ascending row order.
class PostingIndex {
 public:
  PostingIndex() = default;
  PostingIndex(std::span<const SparseVector> rows, std::size_t dim);

  struct Posting {
    std::uint32_t row;
    double value;
  };
  std::span<const Posting> column(std::uint32_t feature) const {
    return {postings_.data() + offsets_[feature], offsets_[feature + 1] - offsets_[feature]};
  }
  std::size_t rows() const { return n_rows_; }
  std::size_t dim() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Posting> postings_;
  std::size_t n_rows_ = 0;
};

namespace serial {

/// m, v and theta updated in place with the bias-corrected Adam rule.
void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c);

std::vector<double> predict_batch(const MlpParams& params, std::span<const SparseVector> rows);

/// For each query, the k rows with the highest cosine similarity (ties: lower
/// row index first). Zero vectors have similarity 0 to everything.
std::vector<std::vector<Neighbor>> cosine_top_k(std::span<const SparseVector> rows,
                                                std::span<const SparseVector> queries, std::size_t k);

/// For each query row id, its k nearest other rows by squared Euclidean
/// distance |a|^2 + |b|^2 - 2 a.b (ties: lower row index first).
std::vector<std::vector<Neighbor>> euclidean_neighbors(std::span<const SparseVector> rows,
                                                       std::span<const std::uint32_t> query_ids, std::size_t k);

}  // namespace serial

namespace parallel {

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c);

std::vector<double> predict_batch(const MlpParams& params, std::span<const SparseVector> rows);

std::vector<std::vector<Neighbor>> cosine_top_k(std::span<const SparseVector> rows,
                                                std::span<const SparseVector> queries, std::size_t k);

std::vector<std::vector<Neighbor>> euclidean_neighbors(std::span<const SparseVector> rows,
                                                       std::span<const std::uint32_t> query_ids, std::size_t k);

}  // namespace parallel

}  // namespace contfood::kernels
