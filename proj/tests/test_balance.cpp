#include <doctest.h>

#include <algorithm>

#include "contfood/balance.hpp"
#include "contfood/error.hpp"
#include "contfood/kernels.hpp"
#include "support.hpp"

using namespace contfood;

namespace {

LabeledMatrix dense_matrix(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  LabeledMatrix m;
  m.dim = rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) m.push_back(SparseVector::from_dense(rows[i]), labels[i]);
  return m;
}

}  // namespace

TEST_CASE("two-point minority: synthetic rows lie on the segment between the parents") {
  const auto m = dense_matrix({{0, 0}, {1, 1}, {5, 0}, {5, 1}, {6, 0}}, {1, 1, 0, 0, 0});
  const auto r = smote_detailed(m, 1, 42);
  REQUIRE(r.data.size() == 6);
  REQUIRE(r.lambdas.size() == 1);
  const double l = r.lambdas[0];
  const auto& [base, nn] = r.parents[0];
  const auto expected = interpolate(m.rows[base], m.rows[nn], l);
  CHECK(r.data.rows[5] == expected);
  // Two minority rows can only pair with each other.
  CHECK(((base == 0 && nn == 1) || (base == 1 && nn == 0)));
  const double x = r.data.rows[5].at(0);
  CHECK(x == r.data.rows[5].at(1));
  CHECK(x >= 0.0);
  CHECK(x <= 1.0);
}

TEST_CASE("balanced input is returned unchanged") {
  const auto m = dense_matrix({{1, 0}, {0, 1}, {1, 1}, {2, 2}}, {1, 0, 1, 0});
  CHECK(smote(m, 5, 1) == m);
}

TEST_CASE("550 / 450 becomes 550 / 550 with 100 synthetic rows") {
  Rng rng(5);
  const auto m = testing::random_matrix(rng, 550, 450, 40, 0.1);
  const auto out = smote(m, 5, 9);
  CHECK(out.size() == 1100);
  CHECK(out.count(0) == 550);
  CHECK(out.count(1) == 550);
}

TEST_CASE("error cases") {
  CHECK_THROWS_AS(smote(dense_matrix({{1, 0}, {0, 1}}, {1, 1}), 5, 0), DataError);
  CHECK_THROWS_AS(smote(dense_matrix({{1, 0}, {0, 1}, {1, 1}}, {1, 0, 0}), 5, 0), DataError);
  CHECK_THROWS_AS(smote(dense_matrix({{1, 0}, {0, 1}, {1, 1}, {2, 1}}, {1, 1, 0, 0}), 0, 0), UsageError);
}

TEST_CASE("randomized property check: convexity, equal counts, prefix, determinism, thread independence") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n_min = 2 + rng.below(30);
    const auto n_maj = n_min + 1 + rng.below(60);
    const auto dim = 5 + rng.below(40);
    const bool veg_minority = rng.below(2) == 0;
    const auto m = veg_minority ? testing::random_matrix(rng, n_maj, n_min, dim, 0.3)
                                : testing::random_matrix(rng, n_min, n_maj, dim, 0.3);
    const int minority = veg_minority ? 1 : 0;
    const auto k = 1 + rng.below(6);
    const auto seed = rng.next();
    const auto r = smote_detailed(m, k, seed);

    REQUIRE(r.data.count(0) == r.data.count(1));
    for (std::size_t i = 0; i < m.size(); ++i) {
      REQUIRE(r.data.rows[i] == m.rows[i]);
      REQUIRE(r.data.labels[i] == m.labels[i]);
    }
    for (std::size_t s = 0; s < r.parents.size(); ++s) {
      const auto& row = r.data.rows[m.size() + s];
      const auto& a = m.rows[r.parents[s].first];
      const auto& b = m.rows[r.parents[s].second];
      REQUIRE(r.data.labels[m.size() + s] == minority);
      REQUIRE(m.labels[r.parents[s].first] == minority);
      REQUIRE(m.labels[r.parents[s].second] == minority);
      REQUIRE(r.parents[s].first != r.parents[s].second);
      REQUIRE(r.lambdas[s] >= 0.0);
      REQUIRE(r.lambdas[s] < 1.0);
      for (std::uint32_t f = 0; f < dim; ++f) {
        const double lo = std::min(a.at(f), b.at(f)), hi = std::max(a.at(f), b.at(f));
        REQUIRE(row.at(f) >= lo);
        REQUIRE(row.at(f) <= hi);
      }
      for (auto idx : row.indices) REQUIRE((a.at(idx) != 0.0 || b.at(idx) != 0.0));
    }
    const auto again = smote_detailed(m, k, seed);
    REQUIRE(again.data == r.data);
    kernels::set_threads(3);
    const auto threaded = smote_detailed(m, k, seed);
    kernels::set_threads(1);
    REQUIRE(threaded.data == r.data);
  }
}

TEST_CASE("neighbor choice is one of the k nearest minority rows") {
  // Minority points on a line; the neighbor of each base must be adjacent when k = 1.
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    rows.push_back({static_cast<double>(i * i), 1.0});  // increasing gaps keep the nearest unique
    labels.push_back(1);
  }
  for (int i = 0; i < 20; ++i) {
    rows.push_back({-100.0 - i, 2.0});
    labels.push_back(0);
  }
  const auto r = smote_detailed(dense_matrix(rows, labels), 1, 3);
  for (const auto& [base, nn] : r.parents) {
    const std::uint32_t expected = base == 0 ? 1 : base - 1;  // the gap to the left is smaller
    CHECK(nn == expected);
  }
}
