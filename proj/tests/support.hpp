#pragma once

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <string>
#include <vector>

#include "contfood/rng.hpp"
#include "contfood/sparse.hpp"

namespace contfood::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("contfood-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Sparse row with roughly `density * dim` non-zeros drawn from [lo, hi).
inline SparseVector random_sparse(Rng& rng, std::size_t dim, double density, double lo = 0.0, double hi = 1.0) {
  std::vector<double> dense(dim, 0.0);
  for (auto& v : dense) {
    if (rng.uniform01() < density) {
      v = rng.uniform(lo, hi);
      if (v == 0.0) v = hi;
    }
  }
  return SparseVector::from_dense(dense);
}

/// Imbalanced labeled matrix: `n1` rows labeled 1, `n0` labeled 0, interleaved.
inline LabeledMatrix random_matrix(Rng& rng, std::size_t n0, std::size_t n1, std::size_t dim, double density) {
  LabeledMatrix m;
  m.dim = dim;
  std::vector<int> labels(n0, 0);
  labels.insert(labels.end(), n1, 1);
  rng.shuffle(std::span(labels));
  for (int y : labels) m.push_back(random_sparse(rng, dim, density), y);
  return m;
}

}  // namespace contfood::testing
