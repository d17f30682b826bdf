#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "contfood/mlp.hpp"
#include "contfood/vectorizer.hpp"

namespace contfood {

/// Self-contained inference bundle: vectorizer plus network weights.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  TfidfModel vectorizer;
  MlpParams params;
  std::uint64_t increments_applied = 0;
  std::string created_at;

  SparseVector featurize(std::string_view item_name) const { return vectorizer.transform(item_name); }
  Prediction classify(std::string_view item_name, double threshold = 0.5) const {
    return predict(params, featurize(item_name), threshold);
  }

  /// JSON envelope with base64 little-endian weights and a CRC-32 over the
  /// canonical payload. Byte-identical for identical content.
  std::string save() const;
  /// Throws DataError on version mismatch, checksum failure, or malformed layers.
  static Checkpoint load(std::string_view bytes);

  static Checkpoint read(const std::string& path);
  void write(const std::string& path) const;

  bool operator==(const Checkpoint&) const = default;
};

}  // namespace contfood
