#include "contfood/sparse.hpp"

#include <algorithm>
#include <string>

#include "contfood/error.hpp"

namespace contfood {

double SparseVector::at(std::uint32_t index) const {
  const auto it = std::lower_bound(indices.begin(), indices.end(), index);
  if (it == indices.end() || *it != index) return 0.0;
  return values[static_cast<std::size_t>(it - indices.begin())];
}

std::vector<double> SparseVector::to_dense() const {
  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) out[indices[i]] = values[i];
  return out;
}

SparseVector SparseVector::from_dense(std::span<const double> dense) {
  SparseVector v;
  v.dim = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      v.indices.push_back(static_cast<std::uint32_t>(i));
      v.values.push_back(dense[i]);
    }
  }
  return v;
}

double dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] < b.indices[j]) {
      ++i;
    } else if (a.indices[i] > b.indices[j]) {
      ++j;
    } else {
      sum += a.values[i] * b.values[j];
      ++i;
      ++j;
    }
  }
  return sum;
}

double squared_norm(const SparseVector& v) {
  double sum = 0.0;
  for (double x : v.values) sum += x * x;
  return sum;
}

double squared_distance(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() || j < b.indices.size()) {
    double d;
    if (j == b.indices.size() || (i < a.indices.size() && a.indices[i] < b.indices[j])) {
      d = a.values[i++];
    } else if (i == a.indices.size() || b.indices[j] < a.indices[i]) {
      d = b.values[j++];
    } else {
      d = a.values[i++] - b.values[j++];
    }
    sum += d * d;
  }
  return sum;
}

SparseVector interpolate(const SparseVector& a, const SparseVector& b, double lambda) {
  SparseVector out;
  out.dim = a.dim;
  out.indices.reserve(a.nnz() + b.nnz());
  out.values.reserve(a.nnz() + b.nnz());
  auto emit = [&](std::uint32_t idx, double va, double vb) {
    const double v = va + lambda * (vb - va);
    if (v != 0.0) {
      out.indices.push_back(idx);
      out.values.push_back(v);
    }
  };
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() || j < b.indices.size()) {
    if (j == b.indices.size() || (i < a.indices.size() && a.indices[i] < b.indices[j])) {
      emit(a.indices[i], a.values[i], 0.0);
      ++i;
    } else if (i == a.indices.size() || b.indices[j] < a.indices[i]) {
      emit(b.indices[j], 0.0, b.values[j]);
      ++j;
    } else {
      emit(a.indices[i], a.values[i], b.values[j]);
      ++i;
      ++j;
    }
  }
  return out;
}

void check_sparse(const SparseVector& v) {
  if (v.indices.size() != v.values.size()) throw UsageError("sparse vector: index/value length mismatch");
  for (std::size_t i = 0; i < v.indices.size(); ++i) {
    if (v.indices[i] >= v.dim) throw UsageError("sparse vector: index out of range");
    if (i > 0 && v.indices[i] <= v.indices[i - 1]) throw UsageError("sparse vector: indices not strictly increasing");
    if (v.values[i] == 0.0) throw UsageError("sparse vector: stored zero");
  }
}

std::size_t LabeledMatrix::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void LabeledMatrix::push_back(SparseVector row, int label) {
  rows.push_back(std::move(row));
  labels.push_back(label);
}

void LabeledMatrix::validate() const {
  if (rows.size() != labels.size()) throw UsageError("labeled matrix: rows/labels length mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim != dim) {
      throw UsageError("labeled matrix: row " + std::to_string(i) + " has dim " +
                       std::to_string(rows[i].dim) + ", expected " + std::to_string(dim));
    }
    if (labels[i] != 0 && labels[i] != 1) throw UsageError("labeled matrix: label outside {0,1}");
  }
}

LabeledMatrix LabeledMatrix::subset(std::span<const std::size_t> idx) const {
  LabeledMatrix out;
  out.dim = dim;
  out.rows.reserve(idx.size());
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(rows[i], labels[i]);
  return out;
}

}  // namespace contfood
