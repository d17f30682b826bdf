#include "contfood/nnet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>

#include "contfood/error.hpp"
#include "contfood/rng.hpp"

namespace contfood {

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_params(const MlpParams& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.m = MlpParams::zeros_like(params);
  s.v = MlpParams::zeros_like(params);
  return s;
}

void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads) {
  if (state.m.layers.size() != params.layers.size() || grads.layers.size() != params.layers.size()) {
    throw UsageError("adam_step: parameter/gradient/state shapes differ");
  }
  ++state.step;
  kernels::AdamCoefficients c;
  c.learning_rate = state.learning_rate;
  c.beta1 = state.beta1;
  c.beta2 = state.beta2;
  c.epsilon = state.epsilon;
  c.bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  c.bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    if (g.weights.size() != p.weights.size() || g.bias.size() != p.bias.size() ||
        state.m.layers[l].weights.size() != p.weights.size()) {
      throw UsageError("adam_step: shape mismatch in layer " + std::to_string(l + 1));
    }
    kernels::parallel::adam_update(p.weights, g.weights, state.m.layers[l].weights, state.v.layers[l].weights, c);
    kernels::parallel::adam_update(p.bias, g.bias, state.m.layers[l].bias, state.v.layers[l].bias, c);
  }
  params.check_finite();
}

// ---------------------------------------------------------------------------
// Config and records

void TrainConfig::validate() const {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (patience < 1) throw UsageError("patience must be >= 1");
  if (!(l2_lambda >= 0.0)) throw UsageError("l2_lambda must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw UsageError("validation_fraction must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw UsageError("threshold must lie in [0, 1]");
  if (hidden.empty()) throw UsageError("at least one hidden layer is required");
  for (auto h : hidden) {
    if (h == 0) throw UsageError("hidden layer sizes must be positive");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"l2_lambda", l2_lambda},
          {"patience", patience},
          {"validation_fraction", validation_fraction},
          {"threshold", threshold},
          {"learning_rate", learning_rate},
          {"hidden", hidden},
          {"optimizer", "adam"},
          {"loss", "binary_crossentropy"},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.l2_lambda = j.value("l2_lambda", c.l2_lambda);
    c.patience = j.value("patience", c.patience);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.threshold = j.value("threshold", c.threshold);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.hidden = j.value("hidden", c.hidden);
    c.seed = j.value("seed", c.seed);
    if (j.value("optimizer", std::string("adam")) != "adam") throw UsageError("only the adam optimizer is supported");
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("train config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},         {"train_loss", r.train_loss},         {"val_loss", r.val_loss},
          {"train_acc", r.train_accuracy}, {"val_acc", r.val_accuracy}, {"train_mae", r.train_mae}};
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  r.train_accuracy = j.at("train_acc").get<double>();
  r.val_accuracy = j.at("val_acc").get<double>();
  r.train_mae = j.at("train_mae").get<double>();
  return r;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc,train_mae\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss,
                  r.train_accuracy, r.val_accuracy, r.train_mae);
    out += buf;
  }
  return out;
}

std::vector<EpochRecord> history_from_csv(std::string_view text) {
  std::vector<EpochRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf", &r.epoch, &r.train_loss, &r.val_loss,
                    &r.train_accuracy, &r.val_accuracy, &r.train_mae) != 6) {
      throw DataError("history csv: malformed line " + std::to_string(line_no));
    }
    out.push_back(r);
  }
  return out;
}

bool EarlyStopping::observe(std::size_t epoch, double val_loss) {
  if (!std::isfinite(val_loss)) throw NumericError("validation loss is not finite at epoch " + std::to_string(epoch));
  if (best_epoch_ == 0 || val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

// ---------------------------------------------------------------------------
// Training

Evaluation evaluate(const MlpParams& params, const LabeledMatrix& data, double lambda, double threshold) {
  const auto probs = kernels::parallel::predict_batch(params, data.rows);
  Evaluation e;
  e.loss = loss(probs, data.labels, params, lambda);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) correct += ((probs[i] >= threshold ? 1 : 0) == data.labels[i]);
  e.accuracy = static_cast<double>(correct) / static_cast<double>(probs.size());
  return e;
}

namespace {

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

// grad <- 2 * lambda * W (biases 0); returns ||W||^2 as a by-product.
double reset_gradient(const MlpParams& params, double lambda, MlpParams& grad) {
  double penalty = 0.0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& w = params.layers[l].weights;
    auto& g = grad.layers[l].weights;
    for (std::size_t i = 0; i < w.size(); ++i) {
      penalty += w[i] * w[i];
      g[i] = 2.0 * lambda * w[i];
    }
    std::fill(grad.layers[l].bias.begin(), grad.layers[l].bias.end(), 0.0);
  }
  return penalty;
}

EpochStats run_epoch(MlpParams& params, AdamState& adam, MlpParams& grad, const LabeledMatrix& data,
                     std::size_t batch_size, double lambda, double threshold, std::uint64_t shuffle_seed) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(std::span(order));

  ForwardCache cache;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const double m = static_cast<double>(end - start);
    const double penalty = reset_gradient(params, lambda, grad);
    double bce = 0.0;
    for (std::size_t b = start; b < end; ++b) {
      const auto i = order[b];
      const int y = data.labels[i];
      const double p = forward(params, data.rows[i], &cache);
      const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
      bce -= y ? std::log(pc) : std::log(1.0 - pc);
      correct += ((p >= threshold ? 1 : 0) == y);
      accumulate_backward(cache, data.rows[i], y, params, grad, 1.0 / m);
    }
    loss_sum += bce + m * lambda * penalty;
    adam_step(adam, params, grad);
  }
  const double n = static_cast<double>(order.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

}  // namespace

TrainResult run_training(MlpParams initial, const LabeledMatrix& fit_set, const TrainConfig& config,
                         const Validator& validator) {
  config.validate();
  fit_set.validate();
  if (fit_set.size() == 0) throw UsageError("train: empty fit set");
  if (fit_set.dim != initial.input_dim()) throw UsageError("train: data dim does not match network input");

  TrainResult result;
  MlpParams params = std::move(initial);
  AdamState adam = AdamState::for_params(params, config.learning_rate);
  MlpParams grad = MlpParams::zeros_like(params);
  EarlyStopping stopper(config.patience);
  result.params = params;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto stats = run_epoch(params, adam, grad, fit_set, config.batch_size, config.l2_lambda, config.threshold,
                                 derive_seed(config.seed, "shuffle", epoch));
    const auto val = validator(params);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = stats.loss;
    rec.val_loss = val.loss;
    rec.train_accuracy = stats.accuracy;
    rec.val_accuracy = val.accuracy;
    rec.train_mae = 1.0 - stats.accuracy;
    result.history.push_back(rec);
    if (stopper.observe(epoch, val.loss)) result.params = params;
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  if (config.max_epochs == 0) result.params = params;
  return result;
}

StratifiedSplit stratified_holdout(const std::vector<int>& labels, double fraction, std::uint64_t seed) {
  StratifiedSplit s;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    Rng rng(derive_seed(seed, "holdout", static_cast<std::uint64_t>(cls)));
    rng.shuffle(std::span(idx));
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (n_val == 0 && idx.size() >= 3) n_val = 1;
    s.validation.insert(s.validation.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.fit.insert(s.fit.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(s.fit.begin(), s.fit.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

TrainResult train(const LabeledMatrix& data, const TrainConfig& config) {
  config.validate();
  data.validate();
  const auto holdout = stratified_holdout(data.labels, config.validation_fraction, config.seed);
  const auto fit = data.subset(holdout.fit);
  const auto val = data.subset(holdout.validation);
  for (int cls : {0, 1}) {
    if (fit.count(cls) < 2 || val.count(cls) < 1) {
      throw UsageError("train: need at least 2 training and 1 validation example per class after the " +
                       std::to_string(config.validation_fraction) + " validation carve-out");
    }
  }
  auto initial = init_params(data.dim, config.hidden, config.seed);
  const double lambda = config.l2_lambda;
  const double threshold = config.threshold;
  return run_training(std::move(initial), fit, config,
                      [&](const MlpParams& p) { return evaluate(p, val, lambda, threshold); });
}

std::vector<EpochRecord> fine_tune(MlpParams& params, const LabeledMatrix& data, std::size_t epochs,
                                   double learning_rate, std::size_t batch_size, double l2_lambda,
                                   std::uint64_t seed, double threshold) {
  data.validate();
  if (data.size() == 0) throw UsageError("fine_tune: empty data");
  if (batch_size == 0) throw UsageError("fine_tune: batch_size must be >= 1");
  if (data.dim != params.input_dim()) throw UsageError("fine_tune: data dim does not match network input");
  AdamState adam = AdamState::for_params(params, learning_rate);
  MlpParams grad = MlpParams::zeros_like(params);
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto stats =
        run_epoch(params, adam, grad, data, batch_size, l2_lambda, threshold, derive_seed(seed, "shuffle", epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = stats.loss;
    rec.train_accuracy = stats.accuracy;
    rec.train_mae = 1.0 - stats.accuracy;
    history.push_back(rec);
  }
  return history;
}

// ---------------------------------------------------------------------------
// Grid search

GridResult grid_search(const LabeledMatrix& data, const std::vector<TrainConfig>& grid, std::uint64_t seed,
                       int jobs) {
  if (grid.empty()) throw UsageError("grid_search: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      grid[i].validate();
    } catch (const UsageError& e) {
      throw UsageError("grid_search: config " + std::to_string(i) + " invalid: " + e.what());
    }
  }
  GridResult result;
  result.table.resize(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, jobs))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      TrainConfig cfg = grid[i];
      cfg.seed = derive_seed(seed, "grid", static_cast<std::uint64_t>(i));
      const auto r = train(data, cfg);
      result.table[i] = {cfg, r.best_val_loss, r.best_epoch};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    if (result.table[i].best_val_loss < result.table[result.best_index].best_val_loss) result.best_index = i;
  }
  result.best_config = result.table[result.best_index].config;
  return result;
}

std::vector<TrainConfig> default_grid(const TrainConfig& base) {
  std::vector<TrainConfig> grid;
  for (auto hidden : {std::vector<std::size_t>{64, 32}, std::vector<std::size_t>{32, 16}}) {
    for (double lambda : {0.01, 0.001}) {
      TrainConfig c = base;
      c.hidden = hidden;
      c.l2_lambda = lambda;
      grid.push_back(c);
    }
  }
  return grid;
}

}  // namespace contfood
