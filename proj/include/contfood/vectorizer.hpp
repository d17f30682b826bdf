#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "contfood/sparse.hpp"

namespace contfood {

inline constexpr std::size_t kDefaultMaxFeatures = 5000;

/// Identifier of the pinned English stop list: "<name>:<crc32 hex of the list>".
const std::string& stop_list_id();
bool is_stop_word(std::string_view token);
const std::vector<std::string_view>& stop_words();

/// Lowercase, split on every non-alphanumeric byte, drop tokens shorter than
/// two bytes and stop words. Order and duplicates are preserved.
std::vector<std::string> tokenize(std::string_view text);

/// Frozen TF-IDF vocabulary: raw counts times idf = ln((1+N)/(1+df)) + 1,
/// then L2 row normalization.
class TfidfModel {
 public:
  static constexpr int kFormatVersion = 1;

  TfidfModel() = default;

  /// Keeps the `max_features` terms with the highest total count (ties
  /// lexicographic). Throws UsageError on empty input, DataError when nothing
  /// survives tokenization.
  static TfidfModel fit(const std::vector<std::string>& docs,
                        std::size_t max_features = kDefaultMaxFeatures);

  SparseVector transform(std::string_view text) const;

  std::size_t dim() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::uint64_t>& doc_freq() const { return doc_freq_; }
  const std::vector<double>& idf() const { return idf_; }
  std::uint64_t n_docs() const { return n_docs_; }
  std::size_t max_features() const { return max_features_; }
  const std::string& stop_list() const { return stop_list_id_; }
  /// -1 when the term is not in the vocabulary.
  std::int64_t index_of(std::string_view term) const;
  double idf_of(std::string_view term) const;

  /// SHA-256 over terms and stop list id; changes iff the feature space changes.
  std::string vocabulary_hash() const;

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);
  std::string save() const;
  static TfidfModel load(std::string_view bytes);

  bool operator==(const TfidfModel& other) const;

 private:
  void build_index();

  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> term_index_;
  std::vector<std::uint64_t> doc_freq_;
  std::vector<double> idf_;
  std::uint64_t n_docs_ = 0;
  std::size_t max_features_ = kDefaultMaxFeatures;
  std::string stop_list_id_;
};

/// Canonical form used for CRC-32 checks: the object without its "crc32" key,
/// dumped compactly with sorted keys.
std::uint32_t payload_crc(const nlohmann::json& j);
/// Throws DataError when "crc32" is missing or does not match.
void verify_payload_crc(const nlohmann::json& j, std::string_view what);

}  // namespace contfood
