#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "contfood/kernels.hpp"
#include "contfood/mlp.hpp"
#include "contfood/sparse.hpp"

namespace contfood {

/// Per-tensor Adam moments plus the step counter.
struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  MlpParams m;
  MlpParams v;

  static AdamState for_params(const MlpParams& params, double learning_rate = 0.001);
};

/// One Adam step over every tensor. Throws NumericError naming the tensor if
/// an update produces a non-finite value.
void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads);

/// Training hyperparameters. Defaults match data/configs/default.json.
struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  double l2_lambda = 0.01;
  std::size_t patience = 5;
  double validation_fraction = 0.1;
  double threshold = 0.5;
  double learning_rate = 0.001;
  std::vector<std::size_t> hidden{64, 32};
  std::uint64_t seed = 0;

  /// Throws UsageError when a field is out of range.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double train_mae = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);
/// "epoch,train_loss,val_loss,train_acc,val_acc,train_mae" with 17 significant digits.
std::string history_to_csv(const std::vector<EpochRecord>& history);
std::vector<EpochRecord> history_from_csv(std::string_view text);

/// Strict-improvement early stopping on validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Feed the loss of `epoch` (1-based). Returns true when this epoch is the
  /// new best. min_delta is 0: only new < best counts.
  bool observe(std::size_t epoch, double val_loss);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0.0;
};

struct Evaluation {
  double loss = 0.0;      // BCE + lambda * ||W||^2
  double accuracy = 0.0;
};

/// Objective and accuracy of `params` on `data`.
Evaluation evaluate(const MlpParams& params, const LabeledMatrix& data, double lambda, double threshold = 0.5);

struct TrainResult {
  MlpParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

/// Validation hook: returns (loss, accuracy) for a parameter snapshot.
using Validator = std::function<Evaluation(const MlpParams&)>;

/// Epoch loop with early stopping from `initial`. Used by train() with a
/// held-out validation set; tests inject scripted validators.
TrainResult run_training(MlpParams initial, const LabeledMatrix& fit_set, const TrainConfig& config,
                         const Validator& validator);

/// Stratified seeded validation carve-out, then run_training from
/// init_params(config.seed). Requires >= 2 fit rows and >= 1 validation row
/// per class.
TrainResult train(const LabeledMatrix& data, const TrainConfig& config);

struct StratifiedSplit {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> validation;
};
StratifiedSplit stratified_holdout(const std::vector<int>& labels, double fraction, std::uint64_t seed);

/// Fixed-budget continuation from `params` with a fresh Adam state; no
/// validation, no early stopping. Returns per-epoch records (val fields 0).
std::vector<EpochRecord> fine_tune(MlpParams& params, const LabeledMatrix& data, std::size_t epochs,
                                   double learning_rate, std::size_t batch_size, double l2_lambda,
                                   std::uint64_t seed, double threshold = 0.5);

struct GridRow {
  TrainConfig config;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
};

struct GridResult {
  std::size_t best_index = 0;
  TrainConfig best_config;
  std::vector<GridRow> table;
};

/// Trains each config with seed derive_seed(seed, "grid", i); picks minimum
/// best val_loss, earliest on ties. All configs are validated before any
/// training starts. `jobs` > 1 trains configs concurrently.
GridResult grid_search(const LabeledMatrix& data, const std::vector<TrainConfig>& grid, std::uint64_t seed,
                       int jobs = 1);

/// hidden {(64,32), (32,16)} x lambda {0.01, 0.001} on top of `base`.
std::vector<TrainConfig> default_grid(const TrainConfig& base);

}  // namespace contfood
