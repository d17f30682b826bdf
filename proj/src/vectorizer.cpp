#include "contfood/vectorizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "contfood/codec.hpp"
#include "contfood/error.hpp"

namespace contfood {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2 && !is_stop_word(current)) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

TfidfModel TfidfModel::fit(const std::vector<std::string>& docs, std::size_t max_features) {
  if (docs.empty()) throw UsageError("tfidf fit: no documents");
  if (max_features == 0) throw UsageError("tfidf fit: max_features must be positive");

  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> stats;  // term -> (count, df)
  for (const auto& doc : docs) {
    auto tokens = tokenize(doc);
    for (const auto& t : tokens) ++stats[t].first;
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (const auto& t : tokens) ++stats[t].second;
  }
  if (stats.empty()) throw DataError("tfidf fit: every document tokenized to nothing");

  std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> ranked(stats.begin(),
                                                                                     stats.end());
  // stats is lexicographically ordered, so a stable sort by count keeps ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second.first > b.second.first; });
  if (ranked.size() > max_features) ranked.resize(max_features);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  TfidfModel m;
  m.n_docs_ = docs.size();
  m.max_features_ = max_features;
  m.stop_list_id_ = stop_list_id();
  const double n = static_cast<double>(m.n_docs_);
  for (const auto& [term, cs] : ranked) {
    m.terms_.push_back(term);
    m.doc_freq_.push_back(cs.second);
    m.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(cs.second))) + 1.0);
  }
  m.build_index();
  return m;
}

void TfidfModel::build_index() {
  term_index_.clear();
  term_index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!term_index_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second) {
      throw DataError("tfidf model: duplicate term '" + terms_[i] + "'");
    }
  }
}

SparseVector TfidfModel::transform(std::string_view text) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : tokenize(text)) {
    if (auto it = term_index_.find(t); it != term_index_.end()) counts[it->second] += 1.0;
  }
  SparseVector v;
  v.dim = terms_.size();
  double norm2 = 0.0;
  for (const auto& [idx, c] : counts) {
    const double w = c * idf_[idx];
    v.indices.push_back(idx);
    v.values.push_back(w);
    norm2 += w * w;
  }
  if (norm2 > 0.0) {
    const double norm = std::sqrt(norm2);
    for (double& x : v.values) x /= norm;
  }
  return v;
}

std::int64_t TfidfModel::index_of(std::string_view term) const {
  auto it = term_index_.find(std::string(term));
  return it == term_index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

double TfidfModel::idf_of(std::string_view term) const {
  const auto i = index_of(term);
  if (i < 0) throw UsageError("term not in vocabulary: " + std::string(term));
  return idf_[static_cast<std::size_t>(i)];
}

std::string TfidfModel::vocabulary_hash() const {
  std::string buf = stop_list_id_;
  buf += '\n';
  for (const auto& t : terms_) {
    buf += t;
    buf += '\n';
  }
  return codec::sha256_hex(buf);
}

bool TfidfModel::operator==(const TfidfModel& o) const {
  if (terms_ != o.terms_ || doc_freq_ != o.doc_freq_ || n_docs_ != o.n_docs_ ||
      max_features_ != o.max_features_ || stop_list_id_ != o.stop_list_id_ || idf_.size() != o.idf_.size()) {
    return false;
  }
  // Bitwise, so NaN payloads or signed zeros would not compare equal by accident.
  return std::equal(idf_.begin(), idf_.end(), o.idf_.begin(), [](double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
  });
}

std::uint32_t payload_crc(const nlohmann::json& j) {
  nlohmann::json copy = j;
  copy.erase("crc32");
  return codec::crc32(copy.dump());
}

void verify_payload_crc(const nlohmann::json& j, std::string_view what) {
  if (!j.contains("crc32") || !j["crc32"].is_number_unsigned()) {
    throw DataError(std::string(what) + ": missing crc32 field");
  }
  if (j["crc32"].get<std::uint32_t>() != payload_crc(j)) {
    throw DataError(std::string(what) + ": checksum mismatch");
  }
}

nlohmann::json TfidfModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["n_docs"] = n_docs_;
  j["max_features"] = max_features_;
  j["stop_list_id"] = stop_list_id_;
  j["terms"] = terms_;
  j["doc_freq"] = doc_freq_;
  j["idf_b64"] = codec::encode_f64(idf_);
  j["crc32"] = payload_crc(j);
  return j;
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("tfidf model: payload is not an object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw DataError("tfidf model: missing format_version");
  }
  if (const int v = j["format_version"].get<int>(); v != kFormatVersion) {
    throw DataError("tfidf model: unsupported format_version " + std::to_string(v) + " (expected " +
                    std::to_string(kFormatVersion) + ")");
  }
  verify_payload_crc(j, "tfidf model");
  TfidfModel m;
  try {
    m.n_docs_ = j.at("n_docs").get<std::uint64_t>();
    m.max_features_ = j.at("max_features").get<std::size_t>();
    m.stop_list_id_ = j.at("stop_list_id").get<std::string>();
    m.terms_ = j.at("terms").get<std::vector<std::string>>();
    m.doc_freq_ = j.at("doc_freq").get<std::vector<std::uint64_t>>();
    m.idf_ = codec::decode_f64(j.at("idf_b64").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tfidf model: ") + e.what());
  }
  if (m.doc_freq_.size() != m.terms_.size() || m.idf_.size() != m.terms_.size()) {
    throw DataError("tfidf model: terms/doc_freq/idf lengths differ");
  }
  if (m.terms_.size() > m.max_features_) throw DataError("tfidf model: vocabulary exceeds max_features");
  m.build_index();
  return m;
}

std::string TfidfModel::save() const { return to_json().dump(); }

TfidfModel TfidfModel::load(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tfidf model: unreadable payload: ") + e.what());
  }
  return from_json(j);
}

}  // namespace contfood
