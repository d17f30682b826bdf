#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "contfood/error.hpp"
#include "contfood/rng.hpp"
#include "contfood/vectorizer.hpp"

using namespace contfood;

namespace {

const std::vector<std::string> kThreeDocs{"chicken curry", "paneer curry", "chicken tikka"};

}  // namespace

TEST_CASE("tokenizer lowercases, splits on punctuation and drops stop words and short tokens") {
  CHECK(tokenize("Chicken-Tikka, with RICE & a Naan!") == std::vector<std::string>{"chicken", "tikka", "rice", "naan"});
  CHECK(tokenize("  ").empty());
  CHECK(tokenize("of the and") .empty());
  CHECK(tokenize("x 7up") == std::vector<std::string>{"7up"});
  CHECK(tokenize("Crème brûlée") == std::vector<std::string>{"crème", "brûlée"});
}

TEST_CASE("stop list is sorted, lowercase and pinned by id") {
  const auto& words = stop_words();
  CHECK(std::is_sorted(words.begin(), words.end()));
  CHECK(std::adjacent_find(words.begin(), words.end()) == words.end());
  CHECK(is_stop_word("the"));
  CHECK_FALSE(is_stop_word("curry"));
  CHECK(stop_list_id().rfind("en-function-words-v1:", 0) == 0);
}

TEST_CASE("three-document oracle: document frequencies and idf") {
  const auto m = TfidfModel::fit(kThreeDocs);
  CHECK(m.n_docs() == 3);
  CHECK(m.dim() == 4);
  std::map<std::string, std::uint64_t> df;
  for (std::size_t i = 0; i < m.dim(); ++i) df[m.terms()[i]] = m.doc_freq()[i];
  CHECK(df == std::map<std::string, std::uint64_t>{{"chicken", 2}, {"curry", 2}, {"paneer", 1}, {"tikka", 1}});
  // idf = ln((1 + N) / (1 + df)) + 1 with N = 3.
  CHECK(m.idf_of("chicken") == doctest::Approx(std::log(4.0 / 3.0) + 1.0).epsilon(1e-15));
  CHECK(m.idf_of("chicken") == doctest::Approx(1.287682).epsilon(1e-6));
  CHECK(m.idf_of("paneer") == doctest::Approx(std::log(2.0) + 1.0).epsilon(1e-15));
  CHECK(m.idf_of("paneer") == doctest::Approx(1.693147).epsilon(1e-6));
  CHECK_THROWS_AS(m.idf_of("quinoa"), UsageError);
}

TEST_CASE("three-document oracle: normalized vectors") {
  const auto m = TfidfModel::fit(kThreeDocs);
  const auto cc = m.transform("chicken curry");
  REQUIRE(cc.nnz() == 2);
  CHECK(std::abs(cc.at(m.index_of("chicken")) - 1.0 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(cc.at(m.index_of("curry")) - 1.0 / std::sqrt(2.0)) < 1e-12);

  const double a = std::log(4.0 / 3.0) + 1.0, b = std::log(2.0) + 1.0;
  const double norm = std::sqrt(a * a + b * b);
  const auto pc = m.transform("paneer curry");
  CHECK(std::abs(pc.at(m.index_of("curry")) - a / norm) < 1e-12);
  CHECK(std::abs(pc.at(m.index_of("paneer")) - b / norm) < 1e-12);
  CHECK(std::abs(pc.at(m.index_of("curry")) - 0.605349) < 1e-6);
  CHECK(std::abs(pc.at(m.index_of("paneer")) - 0.795961) < 1e-6);

  const auto oov = m.transform("quinoa");
  CHECK(oov.empty());
  CHECK(oov.dim == 4);
  CHECK(m.transform("").empty());
}

TEST_CASE("term frequency is the raw count") {
  const auto m = TfidfModel::fit(kThreeDocs);
  const auto v = m.transform("curry curry paneer");
  const double a = 2.0 * (std::log(4.0 / 3.0) + 1.0), b = std::log(2.0) + 1.0;
  const double norm = std::hypot(a, b);
  CHECK(std::abs(v.at(m.index_of("curry")) - a / norm) < 1e-12);
  CHECK(std::abs(v.at(m.index_of("paneer")) - b / norm) < 1e-12);
}

TEST_CASE("feature cap keeps the most frequent terms, ties lexicographic") {
  const auto m = TfidfModel::fit(kThreeDocs, 2);
  CHECK(m.terms() == std::vector<std::string>{"chicken", "curry"});
  const auto one = TfidfModel::fit({"dosa"});
  CHECK(one.idf_of("dosa") == 1.0);
  const auto tie = TfidfModel::fit({"bb aa", "cc"}, 2);
  CHECK(tie.terms() == std::vector<std::string>{"aa", "bb"});
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(TfidfModel::fit({}), UsageError);
  CHECK_THROWS_AS(TfidfModel::fit({"the of", "a"}), DataError);
  CHECK_THROWS_AS(TfidfModel::fit({"x y"}, 0), UsageError);
}

TEST_CASE("random corpora: unit norms, cap respected, idf monotone, order independence") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> docs;
    const auto n_docs = 5 + rng.below(40);
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::string doc;
      const auto len = 1 + rng.below(6);
      for (std::size_t t = 0; t < len; ++t) doc += "w" + std::to_string(rng.below(60)) + " ";
      docs.push_back(doc);
    }
    const auto cap = 5 + rng.below(50);
    const auto m = TfidfModel::fit(docs, cap);
    CHECK(m.dim() <= cap);
    for (const auto& d : docs) {
      const auto v = m.transform(d);
      if (!v.empty()) CHECK(std::abs(std::sqrt(squared_norm(v)) - 1.0) < 1e-9);
    }
    for (std::size_t i = 0; i < m.dim(); ++i) {
      for (std::size_t j = 0; j < m.dim(); ++j) {
        if (m.doc_freq()[i] < m.doc_freq()[j]) CHECK(m.idf()[i] > m.idf()[j]);
      }
    }
    auto shuffled = docs;
    rng.shuffle(std::span(shuffled));
    CHECK(TfidfModel::fit(shuffled, cap) == m);
  }
}

TEST_CASE("vocabulary never exceeds 5000 terms") {
  std::vector<std::string> docs;
  for (int i = 0; i < 6000; ++i) docs.push_back("term" + std::to_string(i) + " common");
  const auto m = TfidfModel::fit(docs);
  CHECK(m.dim() == 5000);
  CHECK(m.index_of("common") >= 0);
}

TEST_CASE("save/load round-trip is exact; corruption and versions are rejected") {
  const auto m = TfidfModel::fit(kThreeDocs);
  const auto bytes = m.save();
  const auto back = TfidfModel::load(bytes);
  CHECK(back == m);
  CHECK(back.vocabulary_hash() == m.vocabulary_hash());
  CHECK(back.save() == bytes);

  CHECK_THROWS_AS(TfidfModel::load(bytes.substr(0, bytes.size() / 2)), DataError);

  auto j = nlohmann::json::parse(bytes);
  j["format_version"] = 2;
  try {
    TfidfModel::load(j.dump());
    FAIL("expected a version error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("format_version") != std::string::npos);
  }

  j = nlohmann::json::parse(bytes);
  j["doc_freq"][0] = 3;
  try {
    TfidfModel::load(j.dump());
    FAIL("expected a checksum error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
}

TEST_CASE("vocabulary hash depends on the terms") {
  const auto a = TfidfModel::fit(kThreeDocs);
  const auto b = TfidfModel::fit({"chicken curry", "paneer curry", "chicken kebab"});
  CHECK(a.vocabulary_hash() != b.vocabulary_hash());
  CHECK(a.vocabulary_hash().size() == 64);
}
