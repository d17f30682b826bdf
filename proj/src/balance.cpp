#include "contfood/balance.hpp"

#include <algorithm>

#include "contfood/error.hpp"
#include "contfood/kernels.hpp"
#include "contfood/rng.hpp"

namespace contfood {

SmoteResult smote_detailed(const LabeledMatrix& data, std::size_t k, std::uint64_t seed) {
  data.validate();
  if (k == 0) throw UsageError("smote: k must be at least 1");
  const std::size_t n_veg = data.count(1);
  const std::size_t n_nonveg = data.size() - n_veg;
  if (n_veg == 0 || n_nonveg == 0) throw DataError("smote: both classes must be present");

  SmoteResult result;
  result.data = data;
  if (n_veg == n_nonveg) return result;

  const int minority_label = n_veg < n_nonveg ? 1 : 0;
  const std::size_t deficit = std::max(n_veg, n_nonveg) - std::min(n_veg, n_nonveg);
  std::vector<std::uint32_t> minority_ids;
  std::vector<SparseVector> minority;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == minority_label) {
      minority_ids.push_back(static_cast<std::uint32_t>(i));
      minority.push_back(data.rows[i]);
    }
  }
  if (minority.size() < 2) throw DataError("smote: minority class needs at least 2 rows to have a neighbor");
  const std::size_t k_eff = std::min(k, minority.size() - 1);

  // Draw every base row up front, then resolve neighbors only for distinct bases.
  std::vector<std::uint32_t> base(deficit);
  std::vector<std::uint64_t> pick(deficit);
  std::vector<double> lambda(deficit);
  for (std::size_t s = 0; s < deficit; ++s) {
    Rng rng(derive_seed(seed, "smote", s));
    base[s] = static_cast<std::uint32_t>(rng.below(minority.size()));
    pick[s] = rng.below(k_eff);
    lambda[s] = rng.uniform01();
  }
  std::vector<std::uint32_t> distinct(base);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const auto neighbors = kernels::parallel::euclidean_neighbors(minority, distinct, k_eff);

  result.data.rows.reserve(data.size() + deficit);
  result.data.labels.reserve(data.size() + deficit);
  for (std::size_t s = 0; s < deficit; ++s) {
    const auto slot = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), base[s]) -
                                               distinct.begin());
    const auto nb = neighbors[slot][pick[s]].index;
    result.data.push_back(interpolate(minority[base[s]], minority[nb], lambda[s]), minority_label);
    result.parents.emplace_back(minority_ids[base[s]], minority_ids[nb]);
    result.lambdas.push_back(lambda[s]);
  }
  return result;
}

LabeledMatrix smote(const LabeledMatrix& data, std::size_t k, std::uint64_t seed) {
  return smote_detailed(data, k, seed).data;
}

}  // namespace contfood
