#pragma once

#include <cstdint>

#include "contfood/sparse.hpp"

namespace contfood {

struct SmoteResult {
  LabeledMatrix data;
  /// Parent row ids (base, neighbor) for each appended synthetic row, in order.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> parents;
  std::vector<double> lambdas;
};

/// SMOTE: appends synthetic minority rows x_i + lambda * (x_nn - x_i) until
/// both classes have equal counts. Originals are kept as a prefix; k is
/// clamped to minority_size - 1. Synthetic sample s draws from the sub-seed
/// derive_seed(seed, "smote", s), so the output does not depend on the
/// thread count.
SmoteResult smote_detailed(const LabeledMatrix& data, std::size_t k = 5, std::uint64_t seed = 0);

LabeledMatrix smote(const LabeledMatrix& data, std::size_t k = 5, std::uint64_t seed = 0);

}  // namespace contfood
