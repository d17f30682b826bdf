#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "contfood/checkpoint.hpp"
#include "contfood/corpus.hpp"
#include "contfood/nnet.hpp"
#include "contfood/sparse.hpp"

namespace contfood {

/// Rows for every record of `corpus` under the frozen vocabulary. Throws
/// DataError naming the first unlabeled record.
LabeledMatrix vectorize_corpus(const TfidfModel& vectorizer, const Corpus& corpus);

struct BufferItem {
  SparseVector vector;
  int label = 0;
  std::string item_name;

  bool operator==(const BufferItem&) const = default;
};

/// Reservoir of past labeled examples. The slot drawn for insertion n comes
/// from derive_seed(seed, "reservoir", n), so the buffer carries no RNG state
/// beyond its counter and round-trips through a plain file.
class ReplayBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 2000;

  explicit ReplayBuffer(std::size_t capacity = kDefaultCapacity, std::uint64_t seed = 0);

  void add(BufferItem item);
  void add(const TfidfModel& vectorizer, const DishRecord& record);

  /// `count` distinct stored items, order determined by `seed`.
  std::vector<BufferItem> sample(std::size_t count, std::uint64_t seed) const;

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  std::uint64_t items_seen() const { return items_seen_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<BufferItem>& items() const { return items_; }

  /// JSONL: a header line {capacity, items_seen, seed} followed by one
  /// {item_name, type} line per stored item. Vectors are recomputed from the
  /// vectorizer on load.
  std::string to_jsonl() const;
  static ReplayBuffer from_jsonl(std::string_view text, const TfidfModel& vectorizer);
  void save(const std::string& path) const;
  static ReplayBuffer load(const std::string& path, const TfidfModel& vectorizer);

  bool operator==(const ReplayBuffer&) const = default;

 private:
  std::size_t capacity_;
  std::uint64_t seed_;
  std::uint64_t items_seen_ = 0;
  std::vector<BufferItem> items_;
};

struct NoveltyVerdict {
  bool flagged = false;
  std::optional<std::string> reason;  // "low_confidence" or "all_oov" when flagged
  double probability = 0.5;
  std::string item_name;

  nlohmann::json to_json() const;
};

constexpr double kDefaultNoveltyMargin = 0.15;

/// All-OOV names are flagged outright; otherwise a name is flagged when the
/// probability lies within `tau` of 0.5. Throws UsageError unless tau is in [0, 0.5).
NoveltyVerdict detect_novel(const Checkpoint& checkpoint, std::string_view item_name,
                            double tau = kDefaultNoveltyMargin);

enum class Strategy { replay, naive, full_retrain };
std::string_view strategy_name(Strategy s);
/// Throws UsageError for unknown names.
Strategy parse_strategy(std::string_view name);

struct IncrementConfig {
  std::size_t epochs = 20;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  double l2_lambda = 0.01;
  double replay_ratio = 1.0;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static IncrementConfig from_json(const nlohmann::json& j);
};

/// Prediction for one new item before and after the update.
struct ItemOutcome {
  std::string item_name;
  int label = 0;
  Prediction before;
  Prediction after;
};

struct IncrementResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  std::size_t new_items_count = 0;
  std::size_t replayed_count = 0;
  std::vector<ItemOutcome> outcomes;
  double seconds = 0.0;
};

/// Warm-start fine-tuning on the new items, plus a seeded buffer sample of
/// min(|buffer|, floor(replay_ratio * |new|)) items under Strategy::replay.
/// Adam starts fresh; training runs for exactly `epochs` epochs. Afterwards
/// the new items enter the buffer and the increment counter advances.
/// Throws DataError for an empty batch or an unlabeled item.
IncrementResult increment(const Checkpoint& checkpoint, ReplayBuffer& buffer, const Corpus& new_items,
                          Strategy strategy, const IncrementConfig& config);

/// Fresh initialization and full training on `all_data` under the existing
/// vocabulary; the upper-bound comparator for increments.
Checkpoint full_retrain_baseline(const Checkpoint& base, const LabeledMatrix& all_data, const TrainConfig& config);

struct ForgettingReport {
  double old_test_accuracy_before = 0.0;
  double old_test_accuracy_after = 0.0;
  double accuracy_drop = 0.0;
  std::size_t new_items_count = 0;
  Strategy strategy = Strategy::replay;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::optional<double> seconds;
  std::vector<ItemOutcome> items;

  nlohmann::json to_json() const;
  static ForgettingReport from_json(const nlohmann::json& j);
};

/// Accuracy of both checkpoints on `old_test`. Throws DataError when the
/// vocabularies differ.
ForgettingReport forgetting_report(const Checkpoint& before, const Checkpoint& after, const LabeledMatrix& old_test,
                                   Strategy strategy, std::size_t new_count, double threshold = 0.5);

}  // namespace contfood
