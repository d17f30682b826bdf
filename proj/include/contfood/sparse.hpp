#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace contfood {

/// Index-sorted sparse vector; zero values are never stored.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  /// Value at `index`, 0 when absent (binary search).
  double at(std::uint32_t index) const;
  std::vector<double> to_dense() const;

  static SparseVector from_dense(std::span<const double> dense);

  bool operator==(const SparseVector&) const = default;
};

double dot(const SparseVector& a, const SparseVector& b);
double squared_norm(const SparseVector& v);
double squared_distance(const SparseVector& a, const SparseVector& b);

/// a + lambda * (b - a) over the union of supports; exact zeros are dropped.
SparseVector interpolate(const SparseVector& a, const SparseVector& b, double lambda);

/// Throws UsageError unless indices are strictly increasing, < dim, values non-zero.
void check_sparse(const SparseVector& v);

/// Rows with binary labels (1 = Veg, 0 = NonVeg) sharing one dimensionality.
struct LabeledMatrix {
  std::size_t dim = 0;
  std::vector<SparseVector> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  std::size_t count(int label) const;
  void push_back(SparseVector row, int label);
  /// Throws UsageError on size mismatch, a row of the wrong dim, or a label outside {0,1}.
  void validate() const;
  LabeledMatrix subset(std::span<const std::size_t> idx) const;

  bool operator==(const LabeledMatrix&) const = default;
};

}  // namespace contfood
