#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "contfood/balance.hpp"
#include "contfood/continual.hpp"
#include "contfood/error.hpp"
#include "support.hpp"

using namespace contfood;

namespace {

struct Fixture {
  Corpus train_corpus, test_corpus, fresh;
  Checkpoint checkpoint;
  ReplayBuffer buffer{200, 5};
  LabeledMatrix old_test;

  Fixture() {
    const auto corpus = generate_synthetic(900, 3, KeywordRules::defaults());
    const auto parts = split(corpus, 0.8, 3);
    train_corpus = parts.train;
    test_corpus = parts.test;
    std::vector<std::string> names;
    for (const auto& r : train_corpus.records) names.push_back(r.item_name);
    checkpoint.vectorizer = TfidfModel::fit(names);
    TrainConfig config;
    config.hidden = {16, 8};
    config.max_epochs = 15;
    config.seed = 3;
    const auto train_m = vectorize_corpus(checkpoint.vectorizer, train_corpus);
    checkpoint.params = train(train_m, config).params;
    for (const auto& r : train_corpus.records) buffer.add(checkpoint.vectorizer, r);
    old_test = vectorize_corpus(checkpoint.vectorizer, test_corpus);
    fresh = generate_synthetic(60, 44, KeywordRules::defaults());
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

BufferItem tagged(std::uint64_t n) { return {SparseVector{}, static_cast<int>(n % 2), std::to_string(n)}; }

}  // namespace

TEST_CASE("reservoir: under capacity everything is kept and the counter tracks inserts") {
  ReplayBuffer b(2, 1);
  b.add(tagged(1));
  b.add(tagged(2));
  CHECK(b.size() == 2);
  CHECK(b.items()[0].item_name == "1");
  CHECK(b.items()[1].item_name == "2");
  for (int i = 3; i <= 50; ++i) b.add(tagged(i));
  CHECK(b.size() == 2);
  CHECK(b.items_seen() == 50);
}

TEST_CASE("reservoir: capacity 1 keeps the first of 10,000 items about once per 10,000 trials") {
  std::size_t kept_first = 0;
  std::map<std::string, std::size_t> survivors;
  for (std::uint64_t trial = 0; trial < 10000; ++trial) {
    ReplayBuffer b(1, trial);
    for (std::uint64_t n = 1; n <= 10000; ++n) b.add(BufferItem{{}, 0, n == 1 ? "first" : ""});
    kept_first += b.items()[0].item_name == "first";
  }
  // Binomial(10000, 1e-4): mean 1, sigma ~ 1.
  const double sigma = std::sqrt(10000 * 1e-4 * (1 - 1e-4));
  CHECK(std::abs(static_cast<double>(kept_first) - 1.0) <= 3.0 * sigma);
}

TEST_CASE("property: every item survives with probability capacity / n") {
  const std::size_t capacity = 10, n = 100, trials = 4000;
  std::vector<std::size_t> kept(n, 0);
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    ReplayBuffer b(capacity, 1000 + trial);
    for (std::uint64_t i = 0; i < n; ++i) {
      b.add(tagged(i));
      CHECK_LE(b.size(), capacity);
    }
    for (const auto& it : b.items()) ++kept[std::stoul(it.item_name)];
  }
  const double p = static_cast<double>(capacity) / n;
  const double mean = trials * p, sigma = std::sqrt(trials * p * (1 - p));
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(static_cast<double>(kept[i]) - mean) <= 4.0 * sigma);
}

TEST_CASE("buffer sampling and JSONL round-trip") {
  const auto& f = fixture();
  const auto s = f.buffer.sample(30, 9);
  CHECK(s.size() == 30);
  CHECK(f.buffer.sample(30, 9) == s);
  // A full-size sample is a permutation of the stored items.
  auto keys = [](const std::vector<BufferItem>& items) {
    std::vector<std::string> k;
    for (const auto& it : items) k.push_back(it.item_name + "/" + std::to_string(it.label));
    std::sort(k.begin(), k.end());
    return k;
  };
  CHECK(keys(f.buffer.sample(f.buffer.size(), 1)) == keys(f.buffer.items()));
  CHECK_THROWS_AS(f.buffer.sample(f.buffer.size() + 1, 1), UsageError);

  const auto text = f.buffer.to_jsonl();
  const auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(header.at("capacity") == 200);
  CHECK(header.at("items_seen") == f.train_corpus.size());
  const auto back = ReplayBuffer::from_jsonl(text, f.checkpoint.vectorizer);
  CHECK(back == f.buffer);
  testing::TempDir dir("buffer");
  f.buffer.save(dir.file("buffer.jsonl"));
  CHECK(ReplayBuffer::load(dir.file("buffer.jsonl"), f.checkpoint.vectorizer) == f.buffer);
}

TEST_CASE("novelty detection") {
  const auto& f = fixture();
  const auto oov = detect_novel(f.checkpoint, "zzqx blorf");
  CHECK(oov.flagged);
  CHECK(oov.reason == "all_oov");
  CHECK(oov.to_json().at("reason") == "all_oov");

  Checkpoint undecided = f.checkpoint;
  undecided.params.set_zero();
  const auto known = f.train_corpus.records.front().item_name;
  const auto half = detect_novel(undecided, known, 1e-9);
  CHECK(half.probability == 0.5);
  CHECK(half.flagged);
  CHECK(half.reason == "low_confidence");

  Checkpoint confident = undecided;
  confident.params.layers.back().bias[0] = std::log(0.99 / 0.01);
  const auto sure = detect_novel(confident, known, 0.15);
  CHECK(std::abs(sure.probability - 0.99) < 1e-12);
  CHECK_FALSE(sure.flagged);
  CHECK_FALSE(sure.reason.has_value());
  CHECK(sure.to_json().at("reason").is_null());

  CHECK_THROWS_AS(detect_novel(f.checkpoint, known, 0.5), UsageError);
  CHECK_THROWS_AS(detect_novel(f.checkpoint, known, -0.1), UsageError);
}

TEST_CASE("strategy names") {
  for (auto s : {Strategy::replay, Strategy::naive, Strategy::full_retrain}) CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK_THROWS_AS(parse_strategy("ewc"), UsageError);
}

TEST_CASE("increment: counters, buffer growth, frozen vocabulary, replay count") {
  const auto& f = fixture();
  auto buffer = f.buffer;
  IncrementConfig cfg;
  cfg.seed = 4;
  cfg.epochs = 3;
  const auto r = increment(f.checkpoint, buffer, f.fresh, Strategy::replay, cfg);
  CHECK(r.checkpoint.increments_applied == f.checkpoint.increments_applied + 1);
  CHECK(r.new_items_count == f.fresh.size());
  CHECK(r.replayed_count == std::min(f.buffer.size(), f.fresh.size()));
  CHECK(r.history.size() == 3);
  CHECK(r.outcomes.size() == f.fresh.size());
  CHECK(buffer.items_seen() == f.buffer.items_seen() + f.fresh.size());
  CHECK(r.checkpoint.vectorizer.vocabulary_hash() == f.checkpoint.vectorizer.vocabulary_hash());
  CHECK_FALSE(r.checkpoint.params == f.checkpoint.params);

  // Several increments in a row never touch the vocabulary.
  auto ckpt = r.checkpoint;
  for (int i = 0; i < 3; ++i) ckpt = increment(ckpt, buffer, f.fresh, Strategy::naive, cfg).checkpoint;
  CHECK(ckpt.increments_applied == f.checkpoint.increments_applied + 4);
  CHECK(ckpt.vectorizer.vocabulary_hash() == f.checkpoint.vectorizer.vocabulary_hash());

  cfg.replay_ratio = 0.5;
  auto b2 = f.buffer;
  CHECK(increment(f.checkpoint, b2, f.fresh, Strategy::replay, cfg).replayed_count == f.fresh.size() / 2);
}

TEST_CASE("increment is deterministic, and replay with ratio 0 equals naive bitwise") {
  const auto& f = fixture();
  IncrementConfig cfg;
  cfg.seed = 11;
  cfg.epochs = 4;
  auto b1 = f.buffer, b2 = f.buffer;
  const auto a = increment(f.checkpoint, b1, f.fresh, Strategy::replay, cfg);
  const auto b = increment(f.checkpoint, b2, f.fresh, Strategy::replay, cfg);
  CHECK(a.checkpoint.params == b.checkpoint.params);
  CHECK(b1 == b2);

  cfg.replay_ratio = 0.0;
  auto b3 = f.buffer, b4 = f.buffer;
  const auto zero = increment(f.checkpoint, b3, f.fresh, Strategy::replay, cfg);
  const auto naive = increment(f.checkpoint, b4, f.fresh, Strategy::naive, cfg);
  CHECK(zero.replayed_count == 0);
  CHECK(zero.checkpoint.params == naive.checkpoint.params);
  CHECK(zero.history == naive.history);
}

TEST_CASE("increment rejects empty and unlabeled batches") {
  const auto& f = fixture();
  auto buffer = f.buffer;
  CHECK_THROWS_AS(increment(f.checkpoint, buffer, Corpus{}, Strategy::naive, IncrementConfig{}), DataError);
  Corpus unlabeled = f.fresh;
  unlabeled.records[3].label.reset();
  CHECK_THROWS_AS(increment(f.checkpoint, buffer, unlabeled, Strategy::naive, IncrementConfig{}), DataError);
  CHECK(buffer == f.buffer);
}

TEST_CASE("naive update on in-distribution items barely moves old-test accuracy") {
  const auto& f = fixture();
  auto buffer = f.buffer;
  IncrementConfig cfg;
  cfg.seed = 2;
  const auto r = increment(f.checkpoint, buffer, f.fresh, Strategy::naive, cfg);
  const auto rep = forgetting_report(f.checkpoint, r.checkpoint, f.old_test, Strategy::naive, f.fresh.size());
  CHECK(std::abs(rep.accuracy_drop) <= 0.02);
}

TEST_CASE("forgetting report arithmetic, vocabulary guard and JSON round-trip") {
  const auto& f = fixture();
  const auto same = forgetting_report(f.checkpoint, f.checkpoint, f.old_test, Strategy::replay, 0);
  CHECK(same.accuracy_drop == 0.0);
  CHECK(same.old_test_accuracy_before == same.old_test_accuracy_after);

  Checkpoint degraded = f.checkpoint;
  degraded.params.set_zero();  // predicts Veg everywhere
  const auto r = forgetting_report(f.checkpoint, degraded, f.old_test, Strategy::naive, 7);
  CHECK(r.accuracy_drop == r.old_test_accuracy_before - r.old_test_accuracy_after);
  CHECK(r.old_test_accuracy_after ==
        static_cast<double>(f.old_test.count(1)) / static_cast<double>(f.old_test.size()));
  CHECK(r.new_items_count == 7);

  ForgettingReport manual;
  manual.old_test_accuracy_before = 0.98;
  manual.old_test_accuracy_after = 0.95;
  manual.accuracy_drop = manual.old_test_accuracy_before - manual.old_test_accuracy_after;
  CHECK(std::abs(manual.accuracy_drop - 0.03) < 1e-12);

  auto full = r;
  full.seconds = 1.25;
  full.started_at = "2023-11-14T22:13:20Z";
  full.finished_at = "2023-11-14T22:13:21Z";
  full.items.push_back({"Prawn Curry", 0, {1, 0.51}, {0, 0.2}});
  const auto j = full.to_json();
  for (const char* k : {"old_test_accuracy_before", "old_test_accuracy_after", "accuracy_drop", "new_items_count",
                        "strategy"}) {
    CHECK(j.contains(k));
  }
  CHECK(ForgettingReport::from_json(j).to_json() == j);
  CHECK(ForgettingReport::from_json(nlohmann::json::parse(j.dump())).to_json().dump() == j.dump());

  Checkpoint other = f.checkpoint;
  other.vectorizer = TfidfModel::fit({"entirely different words", "another vocabulary"});
  other.params = init_params(other.vectorizer.dim(), std::vector<std::size_t>{4, 2}, 1);
  CHECK_THROWS_AS(forgetting_report(f.checkpoint, other, f.old_test, Strategy::replay, 0), DataError);
  CHECK_THROWS_AS(forgetting_report(f.checkpoint, f.checkpoint, LabeledMatrix{}, Strategy::replay, 0), DataError);
}

TEST_CASE("full retrain on the original data equals plain training") {
  const auto& f = fixture();
  const auto data = vectorize_corpus(f.checkpoint.vectorizer, f.train_corpus);
  TrainConfig config;
  config.hidden = {16, 8};
  config.max_epochs = 4;
  config.seed = 6;
  const auto retrained = full_retrain_baseline(f.checkpoint, data, config);
  CHECK(retrained.params == train(data, config).params);
  CHECK(retrained.vectorizer.vocabulary_hash() == f.checkpoint.vectorizer.vocabulary_hash());
}

TEST_CASE("increment config validation and JSON") {
  IncrementConfig c;
  c.replay_ratio = 2.5;
  c.seed = 77;
  CHECK(IncrementConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.replay_ratio = -1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("vectorize_corpus names the unlabeled record") {
  const auto& f = fixture();
  Corpus c = f.fresh;
  c.records[2].label.reset();
  try {
    vectorize_corpus(f.checkpoint.vectorizer, c);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(c.records[2].item_name) != std::string::npos);
  }
}
