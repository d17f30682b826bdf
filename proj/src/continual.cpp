#include "contfood/continual.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "contfood/codec.hpp"
#include "contfood/error.hpp"
#include "contfood/metrics.hpp"
#include "contfood/rng.hpp"

namespace contfood {

LabeledMatrix vectorize_corpus(const TfidfModel& vectorizer, const Corpus& corpus) {
  LabeledMatrix m;
  m.dim = vectorizer.dim();
  m.rows.reserve(corpus.size());
  m.labels.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& r = corpus.records[i];
    if (!r.label) {
      throw DataError(corpus.source + ": record " + std::to_string(i + 1) + " (\"" + r.item_name +
                      "\") has no label");
    }
    m.push_back(vectorizer.transform(r.item_name), to_int(*r.label));
  }
  return m;
}

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), seed_(seed) {
  if (capacity == 0) throw UsageError("replay buffer: capacity must be >= 1");
}

void ReplayBuffer::add(BufferItem item) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(item));
  } else {
    const auto j = stateless_below(derive_seed(seed_, "reservoir", items_seen_), items_seen_ + 1);
    if (j < capacity_) items_[j] = std::move(item);
  }
  ++items_seen_;
}

void ReplayBuffer::add(const TfidfModel& vectorizer, const DishRecord& record) {
  if (!record.label) throw DataError("replay buffer: \"" + record.item_name + "\" has no label");
  add(BufferItem{vectorizer.transform(record.item_name), to_int(*record.label), record.item_name});
}

std::vector<BufferItem> ReplayBuffer::sample(std::size_t count, std::uint64_t seed) const {
  if (count > items_.size()) throw UsageError("replay buffer: sample larger than buffer");
  std::vector<std::size_t> idx(items_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates: the first `count` slots become the sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<BufferItem> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(items_[idx[i]]);
  return out;
}

std::string ReplayBuffer::to_jsonl() const {
  std::string out = nlohmann::json{{"capacity", capacity_}, {"items_seen", items_seen_}, {"seed", seed_}}.dump();
  out += '\n';
  for (const auto& it : items_) {
    out += nlohmann::json{{"item_name", it.item_name}, {"type", label_token(label_from_int(it.label))}}.dump();
    out += '\n';
  }
  return out;
}

ReplayBuffer ReplayBuffer::from_jsonl(std::string_view text, const TfidfModel& vectorizer) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::optional<ReplayBuffer> buffer;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("replay buffer line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!buffer) {
        buffer.emplace(j.at("capacity").get<std::size_t>(), j.at("seed").get<std::uint64_t>());
        buffer->items_seen_ = j.at("items_seen").get<std::uint64_t>();
        continue;
      }
      const auto label = parse_label_token(j.at("type").get<std::string>());
      if (!label) throw DataError("bad type");
      const auto name = j.at("item_name").get<std::string>();
      buffer->items_.push_back({vectorizer.transform(name), to_int(*label), name});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("replay buffer line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("replay buffer line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!buffer) throw DataError("replay buffer: missing header line");
  if (buffer->items_.size() > buffer->capacity_ || buffer->items_.size() > buffer->items_seen_) {
    throw DataError("replay buffer: stored items exceed capacity or items_seen");
  }
  return std::move(*buffer);
}

void ReplayBuffer::save(const std::string& path) const { codec::write_file_atomic(path, to_jsonl()); }

ReplayBuffer ReplayBuffer::load(const std::string& path, const TfidfModel& vectorizer) {
  return from_jsonl(codec::read_file(path), vectorizer);
}

// ---------------------------------------------------------------------------
// Novelty

nlohmann::json NoveltyVerdict::to_json() const {
  nlohmann::json j{{"item_name", item_name}, {"flagged", flagged}, {"probability", probability}};
  j["reason"] = reason ? nlohmann::json(*reason) : nlohmann::json(nullptr);
  return j;
}

NoveltyVerdict detect_novel(const Checkpoint& checkpoint, std::string_view item_name, double tau) {
  if (!(tau >= 0.0 && tau < 0.5)) throw UsageError("novelty margin tau must lie in [0, 0.5)");
  NoveltyVerdict v;
  v.item_name = std::string(item_name);
  const auto x = checkpoint.featurize(item_name);
  v.probability = forward(checkpoint.params, x);
  if (x.empty()) {
    v.flagged = true;
    v.reason = "all_oov";
  } else if (std::abs(v.probability - 0.5) < tau) {
    v.flagged = true;
    v.reason = "low_confidence";
  }
  return v;
}

// ---------------------------------------------------------------------------
// Increments

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::replay:
      return "replay";
    case Strategy::naive:
      return "naive";
    case Strategy::full_retrain:
      return "full_retrain";
  }
  return "replay";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "replay") return Strategy::replay;
  if (name == "naive") return Strategy::naive;
  if (name == "full_retrain") return Strategy::full_retrain;
  throw UsageError("unknown strategy \"" + std::string(name) + "\" (allowed: replay, naive, full_retrain)");
}

void IncrementConfig::validate() const {
  if (epochs == 0) throw UsageError("increment: epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("increment: learning_rate must be > 0");
  if (batch_size == 0) throw UsageError("increment: batch_size must be >= 1");
  if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) throw UsageError("increment: l2_lambda must be >= 0");
  if (!(replay_ratio >= 0.0) || !std::isfinite(replay_ratio)) throw UsageError("increment: replay_ratio must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("increment: threshold must lie in (0, 1)");
}

nlohmann::json IncrementConfig::to_json() const {
  return {{"epochs", epochs},       {"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"l2_lambda", l2_lambda}, {"replay_ratio", replay_ratio},   {"threshold", threshold},
          {"seed", seed}};
}

IncrementConfig IncrementConfig::from_json(const nlohmann::json& j) {
  IncrementConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.l2_lambda = j.value("l2_lambda", c.l2_lambda);
    c.replay_ratio = j.value("replay_ratio", c.replay_ratio);
    c.threshold = j.value("threshold", c.threshold);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("increment config: ") + e.what());
  }
  return c;
}

IncrementResult increment(const Checkpoint& checkpoint, ReplayBuffer& buffer, const Corpus& new_items,
                          Strategy strategy, const IncrementConfig& config) {
  config.validate();
  if (strategy == Strategy::full_retrain) throw UsageError("increment: full_retrain is not an increment strategy");
  if (new_items.size() == 0) throw DataError("increment: no new items");
  const auto start = std::chrono::steady_clock::now();
  const LabeledMatrix fresh = vectorize_corpus(checkpoint.vectorizer, new_items);

  IncrementResult result;
  result.new_items_count = fresh.size();
  LabeledMatrix set = fresh;
  if (strategy == Strategy::replay) {
    const auto wanted = static_cast<std::size_t>(std::floor(config.replay_ratio * static_cast<double>(fresh.size())));
    const auto count = std::min(buffer.size(), wanted);
    for (auto& item : buffer.sample(count, derive_seed(config.seed, "replay"))) set.push_back(item.vector, item.label);
    result.replayed_count = count;
  }

  result.checkpoint = checkpoint;
  auto& params = result.checkpoint.params;
  result.history = fine_tune(params, set, config.epochs, config.learning_rate, config.batch_size, config.l2_lambda,
                             derive_seed(config.seed, "increment"), config.threshold);
  result.checkpoint.increments_applied = checkpoint.increments_applied + 1;
  result.checkpoint.created_at = codec::utc_timestamp();

  for (std::size_t i = 0; i < fresh.size(); ++i) {
    result.outcomes.push_back({new_items.records[i].item_name, fresh.labels[i],
                               predict(checkpoint.params, fresh.rows[i], config.threshold),
                               predict(params, fresh.rows[i], config.threshold)});
    buffer.add({fresh.rows[i], fresh.labels[i], new_items.records[i].item_name});
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Checkpoint full_retrain_baseline(const Checkpoint& base, const LabeledMatrix& all_data, const TrainConfig& config) {
  if (all_data.dim != base.vectorizer.dim()) throw UsageError("full retrain: data dim does not match vocabulary");
  Checkpoint out;
  out.vectorizer = base.vectorizer;
  out.params = train(all_data, config).params;
  out.increments_applied = base.increments_applied;
  out.created_at = codec::utc_timestamp();
  return out;
}

// ---------------------------------------------------------------------------
// Forgetting report

namespace {

nlohmann::json prediction_json(const Prediction& p) {
  return {{"label", label_token(label_from_int(p.label))}, {"probability", p.probability}};
}

Prediction prediction_from_json(const nlohmann::json& j) {
  const auto l = parse_label_token(j.at("label").get<std::string>());
  if (!l) throw DataError("forgetting report: bad label");
  return {to_int(*l), j.at("probability").get<double>()};
}

}  // namespace

nlohmann::json ForgettingReport::to_json() const {
  nlohmann::json j{{"old_test_accuracy_before", old_test_accuracy_before},
                   {"old_test_accuracy_after", old_test_accuracy_after},
                   {"accuracy_drop", accuracy_drop},
                   {"new_items_count", new_items_count},
                   {"strategy", strategy_name(strategy)},
                   {"seed", seed},
                   {"started_at", started_at},
                   {"finished_at", finished_at}};
  if (seconds) j["seconds"] = *seconds;
  if (!items.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& it : items) {
      arr.push_back({{"item_name", it.item_name},
                     {"type", label_token(label_from_int(it.label))},
                     {"before", prediction_json(it.before)},
                     {"after", prediction_json(it.after)}});
    }
    j["items"] = std::move(arr);
  }
  return j;
}

ForgettingReport ForgettingReport::from_json(const nlohmann::json& j) {
  try {
    ForgettingReport r;
    r.old_test_accuracy_before = j.at("old_test_accuracy_before").get<double>();
    r.old_test_accuracy_after = j.at("old_test_accuracy_after").get<double>();
    r.accuracy_drop = j.at("accuracy_drop").get<double>();
    r.new_items_count = j.at("new_items_count").get<std::size_t>();
    r.strategy = parse_strategy(j.at("strategy").get<std::string>());
    r.seed = j.value("seed", std::uint64_t{0});
    r.started_at = j.value("started_at", std::string());
    r.finished_at = j.value("finished_at", std::string());
    if (j.contains("seconds")) r.seconds = j.at("seconds").get<double>();
    if (j.contains("items")) {
      for (const auto& it : j.at("items")) {
        const auto l = parse_label_token(it.at("type").get<std::string>());
        if (!l) throw DataError("forgetting report: bad type");
        r.items.push_back({it.at("item_name").get<std::string>(), to_int(*l), prediction_from_json(it.at("before")),
                           prediction_from_json(it.at("after"))});
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("forgetting report: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("forgetting report: ") + e.what());
  }
}

ForgettingReport forgetting_report(const Checkpoint& before, const Checkpoint& after, const LabeledMatrix& old_test,
                                   Strategy strategy, std::size_t new_count, double threshold) {
  if (before.vectorizer.vocabulary_hash() != after.vectorizer.vocabulary_hash()) {
    throw DataError("forgetting report: checkpoints have different vocabularies");
  }
  if (old_test.size() == 0) throw DataError("forgetting report: empty old test set");
  if (old_test.dim != before.vectorizer.dim()) throw UsageError("forgetting report: test dim does not match vocabulary");
  auto acc = [&](const MlpParams& p) {
    const auto probs = kernels::parallel::predict_batch(p, old_test.rows);
    std::vector<int> pred(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) pred[i] = probs[i] >= threshold ? 1 : 0;
    return accuracy(pred, old_test.labels);
  };
  ForgettingReport r;
  r.started_at = codec::utc_timestamp();
  r.old_test_accuracy_before = acc(before.params);
  r.old_test_accuracy_after = acc(after.params);
  r.accuracy_drop = r.old_test_accuracy_before - r.old_test_accuracy_after;
  r.new_items_count = new_count;
  r.strategy = strategy;
  r.finished_at = codec::utc_timestamp();
  return r;
}

}  // namespace contfood
