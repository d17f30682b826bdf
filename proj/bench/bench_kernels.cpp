// Serial reference vs OpenMP kernels. Parallel variants take the thread count
// as their argument, e.g.
//   bench_kernels --benchmark_filter='CosineTopK'

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "contfood/kernels.hpp"
#include "contfood/mlp.hpp"
#include "contfood/rng.hpp"

namespace {

using namespace contfood;

constexpr std::size_t kDim = 5000;

// TF-IDF-like rows: a handful of non-zeros out of kDim, unit norm.
std::vector<SparseVector> make_rows(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SparseVector> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> dense(kDim, 0.0);
    const auto nnz = 3 + rng.below(4);
    double norm = 0.0;
    for (std::size_t j = 0; j < nnz; ++j) {
      auto& v = dense[rng.below(kDim / 10)];  // a skewed vocabulary, as in dish names
      v = 0.2 + rng.uniform01();
      norm += v * v;
    }
    for (double& v : dense) v /= std::sqrt(norm);
    rows.push_back(SparseVector::from_dense(dense));
  }
  return rows;
}

const std::vector<SparseVector>& corpus_rows() {
  static const auto rows = make_rows(20000, 1);
  return rows;
}

const std::vector<SparseVector>& query_rows() {
  static const auto rows = make_rows(500, 2);
  return rows;
}

void set_threads(const benchmark::State& state) { kernels::set_threads(static_cast<int>(state.range(0))); }

// --- Adam over the full 5000-64-32-1 parameter vector -----------------------

struct AdamFixture {
  std::vector<double> theta, grad, m, v;
  kernels::AdamCoefficients c;
  AdamFixture() {
    const std::size_t n = kDim * 64 + 64 + 64 * 32 + 32 + 32 + 1;
    Rng rng(3);
    theta.resize(n);
    grad.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      theta[i] = rng.uniform(-0.05, 0.05);
      grad[i] = rng.uniform(-1, 1);
    }
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    c.bias1 = 0.1;
    c.bias2 = 0.001;
  }
};

void BM_AdamSerial(benchmark::State& state) {
  AdamFixture f;
  for (auto _ : state) {
    kernels::serial::adam_update(f.theta, f.grad, f.m, f.v, f.c);
    benchmark::DoNotOptimize(f.theta.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.theta.size()));
}
BENCHMARK(BM_AdamSerial);

void BM_AdamParallel(benchmark::State& state) {
  set_threads(state);
  AdamFixture f;
  for (auto _ : state) {
    kernels::parallel::adam_update(f.theta, f.grad, f.m, f.v, f.c);
    benchmark::DoNotOptimize(f.theta.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.theta.size()));
}
BENCHMARK(BM_AdamParallel)->Arg(1)->Arg(2)->Arg(4);

// --- Batched inference ------------------------------------------------------

const MlpParams& network() {
  static const auto p = init_params(kDim, std::vector<std::size_t>{64, 32}, 4);
  return p;
}

void BM_PredictSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::predict_batch(network(), corpus_rows()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus_rows().size()));
}
BENCHMARK(BM_PredictSerial)->Unit(benchmark::kMillisecond);

void BM_PredictParallel(benchmark::State& state) {
  set_threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::predict_batch(network(), corpus_rows()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus_rows().size()));
}
BENCHMARK(BM_PredictParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

// --- KNN scoring: cosine top-k ----------------------------------------------

void BM_CosineTopKSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::cosine_top_k(corpus_rows(), query_rows(), 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(query_rows().size()));
}
BENCHMARK(BM_CosineTopKSerial)->Unit(benchmark::kMillisecond);

void BM_CosineTopKParallel(benchmark::State& state) {
  set_threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::cosine_top_k(corpus_rows(), query_rows(), 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(query_rows().size()));
}
BENCHMARK(BM_CosineTopKParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

// --- SMOTE neighbor search: Euclidean k-NN within the minority class --------

const std::vector<SparseVector>& minority_rows() {
  static const auto rows = make_rows(3000, 5);
  return rows;
}

std::vector<std::uint32_t> minority_queries() {
  std::vector<std::uint32_t> ids(300);
  for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i * 10;
  return ids;
}

void BM_EuclideanSerial(benchmark::State& state) {
  const auto q = minority_queries();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::euclidean_neighbors(minority_rows(), q, 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.size()));
}
BENCHMARK(BM_EuclideanSerial)->Unit(benchmark::kMillisecond);

void BM_EuclideanParallel(benchmark::State& state) {
  set_threads(state);
  const auto q = minority_queries();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::euclidean_neighbors(minority_rows(), q, 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.size()));
}
BENCHMARK(BM_EuclideanParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
