#include "contfood/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>

#include "contfood/error.hpp"

namespace contfood::kernels {

namespace {

std::atomic<int> g_threads{1};

bool better_similarity(const Neighbor& a, const Neighbor& b) {
  return a.key != b.key ? a.key > b.key : a.index < b.index;
}

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.key != b.key ? a.key < b.key : a.index < b.index;
}

template <typename Less>
std::vector<Neighbor> select_top(std::vector<Neighbor>& all, std::size_t k, Less less) {
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k)};
}

double cosine_from(double dot_ab, double norm_a, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return dot_ab / (norm_a * norm_b);
}

double euclid_from(double dot_ab, double sq_a, double sq_b) {
  return std::max(0.0, sq_a + sq_b - 2.0 * dot_ab);
}

// Dot products of `q` against every indexed row, summed in ascending feature
// order so the result matches dot() bit for bit.
void accumulate_dots(const PostingIndex& index, const SparseVector& q, std::vector<double>& acc) {
  std::fill(acc.begin(), acc.end(), 0.0);
  for (std::size_t k = 0; k < q.nnz(); ++k) {
    if (q.indices[k] >= index.dim()) continue;
    const double qv = q.values[k];
    for (const auto& p : index.column(q.indices[k])) acc[p.row] += p.value * qv;
  }
}

std::size_t common_dim(std::span<const SparseVector> rows) {
  std::size_t dim = 0;
  for (const auto& r : rows) dim = std::max(dim, r.dim);
  return dim;
}

}  // namespace

void set_threads(int n) { g_threads = std::max(1, n); }
int threads() { return g_threads; }

PostingIndex::PostingIndex(std::span<const SparseVector> rows, std::size_t dim) : n_rows_(rows.size()) {
  offsets_.assign(dim + 1, 0);
  for (const auto& r : rows) {
    for (auto idx : r.indices) {
      if (idx >= dim) throw UsageError("posting index: feature out of range");
      ++offsets_[idx + 1];
    }
  }
  for (std::size_t f = 0; f < dim; ++f) offsets_[f + 1] += offsets_[f];
  postings_.resize(offsets_[dim]);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < rows[r].nnz(); ++k) {
      postings_[fill[rows[r].indices[k]]++] = {static_cast<std::uint32_t>(r), rows[r].values[k]};
    }
  }
}

// ---------------------------------------------------------------------------

namespace serial {

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c.bias1;
    const double v_hat = v[i] / c.bias2;
    theta[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

std::vector<double> predict_batch(const MlpParams& params, std::span<const SparseVector> rows) {
  std::vector<double> out(rows.size());
  ForwardCache cache;
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = forward(params, rows[i], &cache);
  return out;
}

std::vector<std::vector<Neighbor>> cosine_top_k(std::span<const SparseVector> rows,
                                                std::span<const SparseVector> queries, std::size_t k) {
  std::vector<double> norms(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) norms[r] = std::sqrt(squared_norm(rows[r]));
  std::vector<std::vector<Neighbor>> out(queries.size());
  std::vector<Neighbor> all(rows.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double qn = std::sqrt(squared_norm(queries[q]));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      all[r] = {static_cast<std::uint32_t>(r), cosine_from(dot(rows[r], queries[q]), norms[r], qn)};
    }
    out[q] = select_top(all, k, better_similarity);
  }
  return out;
}

std::vector<std::vector<Neighbor>> euclidean_neighbors(std::span<const SparseVector> rows,
                                                       std::span<const std::uint32_t> query_ids, std::size_t k) {
  std::vector<double> sq(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) sq[r] = squared_norm(rows[r]);
  std::vector<std::vector<Neighbor>> out(query_ids.size());
  std::vector<Neighbor> all;
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    const auto qi = query_ids[q];
    all.clear();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == qi) continue;
      all.push_back({static_cast<std::uint32_t>(r), euclid_from(dot(rows[r], rows[qi]), sq[r], sq[qi])});
    }
    out[q] = select_top(all, k, closer);
  }
  return out;
}

}  // namespace serial

// ---------------------------------------------------------------------------

namespace parallel {

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c) {
  const auto n = static_cast<std::ptrdiff_t>(theta.size());
  // Small tensors are not worth a fork/join.
  const int nt = n < 16384 ? 1 : threads();
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c.bias1;
    const double v_hat = v[i] / c.bias2;
    theta[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

std::vector<double> predict_batch(const MlpParams& params, std::span<const SparseVector> rows) {
  std::vector<double> out(rows.size());
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel num_threads(threads())
  {
    ForwardCache cache;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = forward(params, rows[i], &cache);
  }
  return out;
}

std::vector<std::vector<Neighbor>> cosine_top_k(std::span<const SparseVector> rows,
                                                std::span<const SparseVector> queries, std::size_t k) {
  const PostingIndex index(rows, std::max(common_dim(rows), common_dim(queries)));
  std::vector<double> norms(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) norms[r] = std::sqrt(squared_norm(rows[r]));
  std::vector<std::vector<Neighbor>> out(queries.size());
  const auto nq = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel num_threads(threads())
  {
    std::vector<double> acc(rows.size());
    std::vector<Neighbor> all(rows.size());
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t q = 0; q < nq; ++q) {
      accumulate_dots(index, queries[q], acc);
      const double qn = std::sqrt(squared_norm(queries[q]));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        all[r] = {static_cast<std::uint32_t>(r), cosine_from(acc[r], norms[r], qn)};
      }
      out[q] = select_top(all, k, better_similarity);
    }
  }
  return out;
}

std::vector<std::vector<Neighbor>> euclidean_neighbors(std::span<const SparseVector> rows,
                                                       std::span<const std::uint32_t> query_ids, std::size_t k) {
  const PostingIndex index(rows, common_dim(rows));
  std::vector<double> sq(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) sq[r] = squared_norm(rows[r]);
  std::vector<std::vector<Neighbor>> out(query_ids.size());
  const auto nq = static_cast<std::ptrdiff_t>(query_ids.size());
#pragma omp parallel num_threads(threads())
  {
    std::vector<double> acc(rows.size());
    std::vector<Neighbor> all;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t q = 0; q < nq; ++q) {
      const auto qi = query_ids[q];
      accumulate_dots(index, rows[qi], acc);
      all.clear();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == qi) continue;
        all.push_back({static_cast<std::uint32_t>(r), euclid_from(acc[r], sq[r], sq[qi])});
      }
      out[q] = select_top(all, k, closer);
    }
  }
  return out;
}

}  // namespace parallel

}  // namespace contfood::kernels
