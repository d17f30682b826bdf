#include "contfood/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "contfood/balance.hpp"
#include "contfood/baselines.hpp"
#include "contfood/checkpoint.hpp"
#include "contfood/codec.hpp"
#include "contfood/continual.hpp"
#include "contfood/corpus.hpp"
#include "contfood/error.hpp"
#include "contfood/kernels.hpp"
#include "contfood/metrics.hpp"
#include "contfood/nnet.hpp"
#include "contfood/rng.hpp"
#include "contfood/service.hpp"
#include "contfood/vectorizer.hpp"

namespace contfood::cli {

namespace fs = std::filesystem;

namespace {

/// Provenance record written next to every artifact-producing command's output.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), started_(codec::utc_timestamp()) {}

  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();

  void input(const std::string& path) { inputs_.push_back(path); }
  void output(const std::string& path) { outputs_.push_back(path); }

  void write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command_;
    j["config"] = config;
    j["seeds"] = seeds;
    j["threads"] = kernels::threads();
    j["started_at"] = started_;
    auto files = [](const std::vector<std::string>& paths) {
      auto arr = nlohmann::json::array();
      for (const auto& p : paths) arr.push_back({{"path", p}, {"sha256", codec::sha256_file(p)}});
      return arr;
    };
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    j["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start_).count();
    codec::write_file_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string started_;
  std::chrono::steady_clock::time_point clock_start_ = std::chrono::steady_clock::now();
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

KeywordRules load_rules(const std::string& path) { return path.empty() ? KeywordRules::defaults() : KeywordRules::load(path); }

nlohmann::json read_json_file(const std::string& path) {
  const auto text = codec::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<std::size_t> parse_hidden(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument(part);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("--hidden expects comma-separated positive integers, got \"" + text + "\"");
    }
  }
  if (out.empty()) throw UsageError("--hidden expects at least one layer size");
  return out;
}

/// Hyperparameters shared by train and compare: a JSON file with flag
/// overrides on top.
struct TrainFlags {
  std::string config_path;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  double learning_rate = 0.001;
  double l2_lambda = 0.01;
  std::size_t patience = 5;
  double validation_fraction = 0.1;
  double threshold = 0.5;
  std::string hidden = "64,32";
  std::size_t max_features = kDefaultMaxFeatures;
  std::size_t smote_k = 5;
  bool no_smote = false;
  std::uint64_t seed = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file; explicit flags override its values");
    cmd->add_option("--batch-size", batch_size, "Mini-batch size");
    cmd->add_option("--epochs", max_epochs, "Maximum training epochs");
    cmd->add_option("--lr", learning_rate, "Adam learning rate");
    cmd->add_option("--l2", l2_lambda, "L2 penalty on weights");
    cmd->add_option("--patience", patience, "Early-stopping patience (epochs)");
    cmd->add_option("--val-fraction", validation_fraction, "Stratified validation carve-out");
    cmd->add_option("--threshold", threshold, "Decision threshold on the Veg probability");
    cmd->add_option("--hidden", hidden, "Hidden layer sizes, comma-separated");
    cmd->add_option("--max-features", max_features, "Vocabulary cap");
    cmd->add_option("--smote-k", smote_k, "SMOTE neighbors");
    cmd->add_flag("--no-smote", no_smote, "Skip SMOTE balancing of the training set");
    cmd->add_option("--seed", seed, "Master seed");
    cmd_ = cmd;
  }

  bool given(const char* flag) const { return cmd_->count(flag) > 0; }

  /// Resolved config plus the vectorizer/balancing knobs.
  TrainConfig resolve(std::size_t& features, std::size_t& k) const {
    nlohmann::json file = nlohmann::json::object();
    if (!config_path.empty()) file = read_json_file(config_path);
    if (!file.is_object()) throw UsageError(config_path + ": config must be a JSON object");
    TrainConfig c = TrainConfig::from_json(file);
    features = file.value("max_features", kDefaultMaxFeatures);
    k = file.value("smote_k", std::size_t{5});
    if (given("--batch-size") || config_path.empty()) c.batch_size = batch_size;
    if (given("--epochs") || config_path.empty()) c.max_epochs = max_epochs;
    if (given("--lr") || config_path.empty()) c.learning_rate = learning_rate;
    if (given("--l2") || config_path.empty()) c.l2_lambda = l2_lambda;
    if (given("--patience") || config_path.empty()) c.patience = patience;
    if (given("--val-fraction") || config_path.empty()) c.validation_fraction = validation_fraction;
    if (given("--threshold") || config_path.empty()) c.threshold = threshold;
    if (given("--hidden") || config_path.empty()) c.hidden = parse_hidden(hidden);
    if (given("--max-features") || config_path.empty()) features = max_features;
    if (given("--smote-k") || config_path.empty()) k = smote_k;
    if (given("--seed") || config_path.empty()) c.seed = seed;
    c.validate();
    if (features == 0) throw UsageError("--max-features must be positive");
    if (k == 0) throw UsageError("--smote-k must be positive");
    return c;
  }

 private:
  CLI::App* cmd_ = nullptr;
};

std::vector<std::string> names_of(const Corpus& c) {
  std::vector<std::string> out;
  out.reserve(c.size());
  for (const auto& r : c.records) out.push_back(r.item_name);
  return out;
}

/// Vectorizer fit on the training names (plus optional extra names), then
/// the labeled training matrix, optionally SMOTE-balanced.
struct Prepared {
  TfidfModel vectorizer;
  LabeledMatrix raw;
  LabeledMatrix balanced;
};

Prepared prepare(const Corpus& train, const std::vector<std::string>& extra_names, std::size_t max_features,
                 bool use_smote, std::size_t k, std::uint64_t seed) {
  auto docs = names_of(train);
  docs.insert(docs.end(), extra_names.begin(), extra_names.end());
  Prepared p;
  p.vectorizer = TfidfModel::fit(docs, max_features);
  p.raw = vectorize_corpus(p.vectorizer, train);
  p.balanced = use_smote ? smote(p.raw, k, derive_seed(seed, "smote")) : p.raw;
  return p;
}

std::vector<int> hard_labels(std::span<const double> probs, double threshold) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1 : 0;
  return out;
}

std::vector<std::string> read_names(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".csv" || ext == ".jsonl" || ext == ".json") return names_of(ingest(path));
  std::istringstream in(codec::read_file(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!normalize_name(line).empty()) names.push_back(line);
  }
  return names;
}

}  // namespace

std::string render_key_values(const nlohmann::json& j, const std::string& prefix) {
  std::string out;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) out += render_key_values(v, prefix.empty() ? k : prefix + "." + k);
  } else if (j.is_array()) {
    if (j.empty()) out += prefix + ": []\n";
    for (std::size_t i = 0; i < j.size(); ++i) out += render_key_values(j[i], prefix + "." + std::to_string(i));
  } else {
    out += prefix + ": " + (j.is_string() ? j.get<std::string>() : j.dump()) + "\n";
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual Veg/NonVeg dish-name classifier"};
  app.name("contfood");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for parallel kernels")->check(CLI::PositiveNumber);

  std::function<void()> action;

  // gen ----------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Write a seeded synthetic corpus");
  struct {
    std::size_t n = 25192;
    std::uint64_t seed = 0;
    std::string rules, profile, out = "corpus.csv";
    double veg_fraction = 0.45;
    bool unlabeled = false, ingredients = false;
  } g;
  gen->add_option("--n", g.n, "Number of records");
  gen->add_option("--seed", g.seed, "Seed");
  gen->add_option("--rules", g.rules, "Keyword rules JSON (default: built-in list)");
  gen->add_option("--profile", g.profile, "Generator profile JSON");
  gen->add_option("--veg-fraction", g.veg_fraction, "Fraction of Veg records");
  gen->add_flag("--unlabeled", g.unlabeled, "Omit the type column values");
  gen->add_flag("--with-ingredients", g.ingredients, "Emit ingredient lists");
  gen->add_option("--out", g.out, "Output corpus (.csv or .jsonl)");
  gen->callback([&] {
    action = [&] {
      Manifest m("gen");
      const auto rules = load_rules(g.rules);
      SyntheticProfile profile;
      if (!g.profile.empty()) {
        profile = SyntheticProfile::from_json(read_json_file(g.profile));
        m.input(g.profile);
      }
      if (gen->count("--veg-fraction") || g.profile.empty()) profile.veg_fraction = g.veg_fraction;
      if (g.unlabeled) profile.unlabeled = true;
      if (g.ingredients) profile.with_ingredients = true;
      if (!g.rules.empty()) m.input(g.rules);
      const auto corpus = generate_synthetic(g.n, g.seed, rules, profile);
      save_corpus(corpus, g.out);
      m.config = {{"n", g.n}, {"profile", profile.to_json()}, {"rules", rules.to_json()}};
      m.seeds["seed"] = g.seed;
      m.output(g.out);
      m.write(g.out + ".manifest.json");
      out << "records: " << corpus.size() << "\nout: " << g.out << "\n";
    };
  });

  // ingest / autolabel / dedupe ---------------------------------------------
  auto* ing = app.add_subcommand("ingest", "Validate a CSV/JSONL corpus and rewrite it canonically");
  struct {
    std::string in, out, rules;
  } io;
  ing->add_option("--in", io.in, "Input corpus")->required();
  ing->add_option("--out", io.out, "Output corpus")->required();
  ing->callback([&] {
    action = [&] {
      Manifest m("ingest");
      const auto corpus = ingest(io.in);
      save_corpus(corpus, io.out);
      std::size_t labeled = 0;
      for (const auto& r : corpus.records) labeled += r.label.has_value();
      m.input(io.in);
      m.output(io.out);
      m.write(io.out + ".manifest.json");
      out << "records: " << corpus.size() << "\nlabeled: " << labeled << "\n";
    };
  });

  auto* al = app.add_subcommand("autolabel", "Label records by keyword rules");
  al->add_option("--in", io.in, "Input corpus")->required();
  al->add_option("--out", io.out, "Output corpus")->required();
  al->add_option("--rules", io.rules, "Keyword rules JSON (default: built-in list)");
  al->callback([&] {
    action = [&] {
      Manifest m("autolabel");
      const auto rules = load_rules(io.rules);
      const auto [corpus, counts] = autolabel(ingest(io.in), rules);
      save_corpus(corpus, io.out);
      m.config = {{"rules", rules.to_json()}};
      m.input(io.in);
      if (!io.rules.empty()) m.input(io.rules);
      m.output(io.out);
      m.write(io.out + ".manifest.json");
      out << "veg: " << counts.veg << "\nnonveg: " << counts.nonveg << "\nunmatched: " << counts.unmatched << "\n";
    };
  });

  auto* dd = app.add_subcommand("dedupe", "Drop records whose normalized name repeats");
  dd->add_option("--in", io.in, "Input corpus")->required();
  dd->add_option("--out", io.out, "Output corpus")->required();
  dd->callback([&] {
    action = [&] {
      Manifest m("dedupe");
      const auto in_corpus = ingest(io.in);
      const auto corpus = dedupe(in_corpus);
      save_corpus(corpus, io.out);
      m.input(io.in);
      m.output(io.out);
      m.write(io.out + ".manifest.json");
      out << "records: " << corpus.size() << "\nremoved: " << in_corpus.size() - corpus.size() << "\n";
    };
  });

  // split --------------------------------------------------------------------
  auto* sp = app.add_subcommand("split", "Seeded train/test split");
  struct {
    std::string in = "corpus.csv", train = "train.csv", test = "test.csv";
    double ratio = 0.8;
    std::uint64_t seed = 0;
  } s;
  sp->add_option("--in", s.in, "Input corpus");
  sp->add_option("--ratio", s.ratio, "Training fraction");
  sp->add_option("--seed", s.seed, "Seed");
  sp->add_option("--train-out", s.train, "Training split output");
  sp->add_option("--test-out", s.test, "Test split output");
  sp->callback([&] {
    action = [&] {
      Manifest m("split");
      const auto parts = split(ingest(s.in), s.ratio, s.seed);
      save_corpus(parts.train, s.train);
      save_corpus(parts.test, s.test);
      m.config = {{"ratio", s.ratio}};
      m.seeds["seed"] = s.seed;
      m.input(s.in);
      m.output(s.train);
      m.output(s.test);
      m.write(s.train + ".manifest.json");
      out << "train: " << parts.train.size() << "\ntest: " << parts.test.size() << "\n";
    };
  });

  // train --------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Fit the vectorizer and train the network");
  TrainFlags tf;
  struct {
    std::string data = "train.csv", out_dir = "model", vocab_extra;
    bool grid = false;
    int jobs = 1;
    std::size_t buffer_capacity = ReplayBuffer::kDefaultCapacity;
  } t;
  tr->add_option("--data", t.data, "Labeled training corpus");
  tr->add_option("--out-dir", t.out_dir, "Output directory");
  tr->add_option("--vocab-extra", t.vocab_extra, "Extra (possibly unlabeled) names included in the vocabulary fit");
  tr->add_flag("--grid", t.grid, "Grid-search hidden sizes and L2 strength first");
  tr->add_option("--jobs", t.jobs, "Parallel grid configurations")->check(CLI::PositiveNumber);
  tr->add_option("--buffer-capacity", t.buffer_capacity, "Replay buffer capacity");
  tf.add(tr);
  tr->callback([&] {
    action = [&] {
      Manifest m("train");
      std::size_t features = 0, k = 0;
      auto config = tf.resolve(features, k);
      const auto corpus = ingest(t.data);
      m.input(t.data);
      std::vector<std::string> extra;
      if (!t.vocab_extra.empty()) {
        extra = read_names(t.vocab_extra);
        m.input(t.vocab_extra);
      }
      auto prep = prepare(corpus, extra, features, !tf.no_smote, k, config.seed);

      nlohmann::json summary;
      if (t.grid) {
        const auto grid = grid_search(prep.balanced, default_grid(config), config.seed, t.jobs);
        auto table = nlohmann::json::array();
        for (const auto& row : grid.table) {
          table.push_back({{"hidden", row.config.hidden},
                           {"l2_lambda", row.config.l2_lambda},
                           {"best_val_loss", row.best_val_loss},
                           {"best_epoch", row.best_epoch}});
        }
        summary["grid"] = table;
        const auto& best = grid.table[grid.best_index].config;
        config.hidden = best.hidden;
        config.l2_lambda = best.l2_lambda;
      }
      const auto result = train(prep.balanced, config);

      Checkpoint ckpt{prep.vectorizer, result.params, 0, codec::utc_timestamp()};
      ReplayBuffer buffer(t.buffer_capacity, derive_seed(config.seed, "buffer"));
      for (std::size_t i = 0; i < prep.raw.size(); ++i) {
        buffer.add({prep.raw.rows[i], prep.raw.labels[i], corpus.records[i].item_name});
      }
      const auto ckpt_path = join_path(t.out_dir, "model.ckpt.json");
      const auto hist_path = join_path(t.out_dir, "history.csv");
      const auto buf_path = join_path(t.out_dir, "buffer.jsonl");
      const auto sum_path = join_path(t.out_dir, "train_summary.json");
      ckpt.write(ckpt_path);
      codec::write_file_atomic(hist_path, history_to_csv(result.history));
      buffer.save(buf_path);
      summary["config"] = config.to_json();
      summary["max_features"] = features;
      summary["smote"] = tf.no_smote ? nlohmann::json(nullptr) : nlohmann::json({{"k", k}});
      summary["train_rows"] = prep.raw.size();
      summary["balanced_rows"] = prep.balanced.size();
      summary["vocab_size"] = prep.vectorizer.dim();
      summary["best_epoch"] = result.best_epoch;
      summary["best_val_loss"] = result.best_val_loss;
      summary["epochs_run"] = result.history.size();
      summary["stopped_early"] = result.stopped_early;
      codec::write_file_atomic(sum_path, summary.dump(2) + "\n");

      m.config = summary;
      m.seeds = {{"seed", config.seed},
                 {"smote", derive_seed(config.seed, "smote")},
                 {"buffer", derive_seed(config.seed, "buffer")}};
      for (const auto& p : {ckpt_path, hist_path, buf_path, sum_path}) m.output(p);
      m.write(join_path(t.out_dir, "manifest.json"));
      const auto& last = result.history.back();
      out << "checkpoint: " << ckpt_path << "\nepochs_run: " << result.history.size()
          << "\nbest_epoch: " << result.best_epoch << "\nbest_val_loss: " << format_double(result.best_val_loss)
          << "\ntrain_acc: " << format_double(last.train_accuracy) << "\nval_acc: " << format_double(last.val_accuracy)
          << "\n";
    };
  });

  // eval ---------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Metrics JSON for a checkpoint on data, or for predicted vs true labels");
  struct {
    std::string checkpoint, data, pred, truth, out = "metrics.json";
    double threshold = 0.5;
  } e;
  ev->add_option("--checkpoint", e.checkpoint, "Checkpoint to evaluate");
  ev->add_option("--data", e.data, "Labeled corpus to evaluate on");
  ev->add_option("--pred", e.pred, "Corpus of predicted labels");
  ev->add_option("--truth", e.truth, "Corpus of true labels");
  ev->add_option("--threshold", e.threshold, "Decision threshold");
  ev->add_option("--out", e.out, "Metrics JSON output");
  ev->callback([&] {
    action = [&] {
      Manifest m("eval");
      nlohmann::json report;
      if (!e.checkpoint.empty() && !e.data.empty() && e.pred.empty() && e.truth.empty()) {
        const auto ckpt = Checkpoint::read(e.checkpoint);
        const auto data = vectorize_corpus(ckpt.vectorizer, ingest(e.data));
        if (data.size() == 0) throw DataError(e.data + ": no records");
        const auto probs = kernels::parallel::predict_batch(ckpt.params, data.rows);
        const auto pred = hard_labels(probs, e.threshold);
        report = metrics_report(pred, data.labels, probs);
        report["loss"] = loss(probs, data.labels, ckpt.params, 0.0);
        m.input(e.checkpoint);
        m.input(e.data);
      } else if (e.checkpoint.empty() && e.data.empty() && !e.pred.empty() && !e.truth.empty()) {
        const auto pc = ingest(e.pred), tc = ingest(e.truth);
        if (pc.size() != tc.size()) throw DataError("--pred and --truth have different record counts");
        std::vector<int> pred, truth;
        for (std::size_t i = 0; i < pc.size(); ++i) {
          const auto& p = pc.records[i];
          const auto& q = tc.records[i];
          if (normalize_name(p.item_name) != normalize_name(q.item_name)) {
            throw DataError("record " + std::to_string(i + 1) + ": names differ between --pred and --truth");
          }
          if (!p.label || !q.label) throw DataError("record " + std::to_string(i + 1) + ": missing label");
          pred.push_back(to_int(*p.label));
          truth.push_back(to_int(*q.label));
        }
        if (pred.empty()) throw DataError("no records to evaluate");
        const std::vector<double> scores(pred.begin(), pred.end());
        report = metrics_report(pred, truth, scores);
        m.input(e.pred);
        m.input(e.truth);
      } else {
        throw UsageError("eval needs either --checkpoint with --data, or --pred with --truth");
      }
      codec::write_file_atomic(e.out, report.dump(2) + "\n");
      m.config = {{"threshold", e.threshold}};
      m.output(e.out);
      m.write(e.out + ".manifest.json");
      out << render_key_values(report);
    };
  });

  // compare ------------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "Baseline comparison table (mean and std over runs)");
  TrainFlags cf;
  struct {
    std::string train = "train.csv", test = "test.csv", out_csv = "comparison.csv", out_json = "comparison.json";
    std::size_t runs = 3, knn_k = 5, trees = 100, depth = 20;
    int jobs = 1;
  } c;
  cmp->add_option("--train", c.train, "Labeled training corpus");
  cmp->add_option("--test", c.test, "Labeled test corpus");
  cmp->add_option("--runs", c.runs, "Runs per model")->check(CLI::PositiveNumber);
  cmp->add_option("--knn-k", c.knn_k, "KNN neighbors");
  cmp->add_option("--trees", c.trees, "Random forest size");
  cmp->add_option("--max-depth", c.depth, "Random forest depth limit (0 = unlimited)");
  cmp->add_option("--jobs", c.jobs, "Parallel model runs")->check(CLI::PositiveNumber);
  cmp->add_option("--out-csv", c.out_csv, "Comparison CSV");
  cmp->add_option("--out-json", c.out_json, "Comparison JSON");
  cf.add(cmp);
  cmp->callback([&] {
    action = [&] {
      Manifest m("compare");
      std::size_t features = 0, k = 0;
      const auto config = cf.resolve(features, k);
      const auto train_corpus = ingest(c.train);
      const auto test_corpus = ingest(c.test);
      auto prep = prepare(train_corpus, {}, features, !cf.no_smote, k, config.seed);
      const auto test = vectorize_corpus(prep.vectorizer, test_corpus);
      CompareOptions o;
      o.runs = c.runs;
      o.base_seed = config.seed;
      o.mlp = config;
      o.knn_k = c.knn_k;
      o.forest.n_trees = c.trees;
      o.forest.max_depth = c.depth;
      o.jobs = c.jobs;
      const auto rows = compare_all(prep.balanced, test, o);
      codec::write_file_atomic(c.out_csv, comparison_csv(rows));
      codec::write_file_atomic(c.out_json, comparison_json(rows).dump(2) + "\n");
      m.config = {{"mlp", config.to_json()},
                  {"runs", c.runs},
                  {"knn_k", c.knn_k},
                  {"trees", c.trees},
                  {"max_depth", c.depth},
                  {"smote", !cf.no_smote}};
      m.seeds["base_seed"] = config.seed;
      m.input(c.train);
      m.input(c.test);
      m.output(c.out_csv);
      m.output(c.out_json);
      m.write(c.out_json + ".manifest.json");
      for (const auto& row : rows) {
        out << row.model << ": accuracy " << format_double(row.summary.mean.at("accuracy")) << " +- "
            << format_double(row.summary.stddev.at("accuracy")) << "\n";
      }
    };
  });

  // increment ----------------------------------------------------------------
  auto* inc = app.add_subcommand("increment", "Apply a labeled JSONL batch to a checkpoint");
  struct {
    std::string checkpoint, batch, buffer, old_test, out_dir = "increment", strategy = "replay", retrain_data;
    IncrementConfig cfg;
  } in;
  inc->add_option("--checkpoint", in.checkpoint, "Current checkpoint")->required();
  inc->add_option("--batch", in.batch, "JSONL batch of {item_name, type} records")->required();
  inc->add_option("--strategy", in.strategy, "replay or naive")->check(CLI::IsMember({"replay", "naive"}));
  inc->add_option("--buffer", in.buffer, "Replay buffer (default: buffer.jsonl next to the checkpoint)");
  inc->add_option("--old-test", in.old_test, "Labeled old test set (default: the replay buffer contents)");
  inc->add_option("--out-dir", in.out_dir, "Output directory");
  inc->add_option("--epochs", in.cfg.epochs, "Increment epochs");
  inc->add_option("--lr", in.cfg.learning_rate, "Increment learning rate");
  inc->add_option("--batch-size", in.cfg.batch_size, "Mini-batch size");
  inc->add_option("--l2", in.cfg.l2_lambda, "L2 penalty on weights");
  inc->add_option("--replay-ratio", in.cfg.replay_ratio, "Replayed items per new item");
  inc->add_option("--seed", in.cfg.seed, "Seed");
  inc->add_option("--full-retrain-data", in.retrain_data,
                  "Original training corpus; also trains from scratch on it plus the batch for comparison");
  inc->callback([&] {
    action = [&] {
      Manifest m("increment");
      in.cfg.validate();
      const auto before = Checkpoint::read(in.checkpoint);
      const auto batch = ingest(in.batch);
      m.input(in.checkpoint);
      m.input(in.batch);
      std::string buffer_path = in.buffer;
      if (buffer_path.empty()) {
        const auto sibling = fs::path(in.checkpoint).parent_path() / "buffer.jsonl";
        if (fs::exists(sibling)) buffer_path = sibling.string();
      }
      ReplayBuffer buffer(ReplayBuffer::kDefaultCapacity, in.cfg.seed);
      if (!buffer_path.empty()) {
        buffer = ReplayBuffer::load(buffer_path, before.vectorizer);
        m.input(buffer_path);
      } else {
        err << "warning: no replay buffer found; starting an empty one\n";
      }
      LabeledMatrix old_test;
      if (!in.old_test.empty()) {
        old_test = vectorize_corpus(before.vectorizer, ingest(in.old_test));
        m.input(in.old_test);
      } else if (buffer.size() > 0) {
        old_test.dim = before.vectorizer.dim();
        for (const auto& item : buffer.items()) old_test.push_back(item.vector, item.label);
      } else {
        old_test = vectorize_corpus(before.vectorizer, batch);
      }
      const auto strategy = parse_strategy(in.strategy);
      const auto started = codec::utc_timestamp();
      auto result = increment(before, buffer, batch, strategy, in.cfg);
      auto report = forgetting_report(before, result.checkpoint, old_test, strategy, result.new_items_count);
      report.seed = in.cfg.seed;
      report.started_at = started;
      report.seconds = result.seconds;
      report.items = result.outcomes;
      auto report_json = report.to_json();
      report_json["replayed_count"] = result.replayed_count;

      if (!in.retrain_data.empty()) {
        auto union_corpus = ingest(in.retrain_data);
        m.input(in.retrain_data);
        union_corpus.records.insert(union_corpus.records.end(), batch.records.begin(), batch.records.end());
        TrainConfig rc;
        rc.hidden.clear();
        for (std::size_t i = 0; i + 1 < before.params.layers.size(); ++i) {
          rc.hidden.push_back(before.params.layers[i].cols);
        }
        rc.seed = in.cfg.seed;
        const auto t0 = std::chrono::steady_clock::now();
        const auto full = full_retrain_baseline(before, vectorize_corpus(before.vectorizer, union_corpus), rc);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto fr = forgetting_report(before, full, old_test, Strategy::full_retrain, result.new_items_count);
        report_json["full_retrain"] = {{"old_test_accuracy_after", fr.old_test_accuracy_after},
                                       {"accuracy_drop", fr.accuracy_drop},
                                       {"seconds", secs}};
      }

      const auto ckpt_path = join_path(in.out_dir, "model.ckpt.json");
      const auto buf_path = join_path(in.out_dir, "buffer.jsonl");
      const auto report_path = join_path(in.out_dir, "report.json");
      const auto hist_path = join_path(in.out_dir, "history.csv");
      result.checkpoint.write(ckpt_path);
      buffer.save(buf_path);
      codec::write_file_atomic(report_path, report_json.dump(2) + "\n");
      codec::write_file_atomic(hist_path, history_to_csv(result.history));
      m.config = {{"increment", in.cfg.to_json()}, {"strategy", in.strategy}};
      m.seeds["seed"] = in.cfg.seed;
      for (const auto& p : {ckpt_path, buf_path, report_path, hist_path}) m.output(p);
      m.write(join_path(in.out_dir, "manifest.json"));
      out << "strategy: " << in.strategy << "\nnew_items: " << result.new_items_count
          << "\nreplayed: " << result.replayed_count
          << "\nold_test_accuracy_before: " << format_double(report.old_test_accuracy_before)
          << "\nold_test_accuracy_after: " << format_double(report.old_test_accuracy_after)
          << "\naccuracy_drop: " << format_double(report.accuracy_drop) << "\n";
    };
  });

  // detect -------------------------------------------------------------------
  auto* det = app.add_subcommand("detect", "Score names for novelty");
  struct {
    std::string checkpoint, in, out;
    double tau = kDefaultNoveltyMargin;
  } d;
  det->add_option("--checkpoint", d.checkpoint, "Checkpoint")->required();
  det->add_option("--in", d.in, "Names: one per line, or a CSV/JSONL corpus")->required();
  det->add_option("--tau", d.tau, "Confidence margin around 0.5");
  det->add_option("--out", d.out, "JSONL verdicts (default: standard output)");
  det->callback([&] {
    action = [&] {
      Manifest m("detect");
      const auto ckpt = Checkpoint::read(d.checkpoint);
      const auto names = read_names(d.in);
      std::string text;
      std::size_t flagged = 0;
      for (const auto& name : names) {
        const auto v = detect_novel(ckpt, name, d.tau);
        flagged += v.flagged;
        text += v.to_json().dump() + "\n";
      }
      if (d.out.empty()) {
        out << text;
      } else {
        codec::write_file_atomic(d.out, text);
        m.config = {{"tau", d.tau}};
        m.input(d.checkpoint);
        m.input(d.in);
        m.output(d.out);
        m.write(d.out + ".manifest.json");
      }
      err << "flagged: " << flagged << " of " << names.size() << "\n";
    };
  });

  // serve --------------------------------------------------------------------
  auto* sv = app.add_subcommand("serve", "Run the HTTP labeling service");
  ServiceOptions so;
  sv->add_option("--checkpoint", so.checkpoint_path, "Initial checkpoint");
  sv->add_option("--data-dir", so.data_dir, "State directory (env CONTFOOD_DATA_DIR)");
  sv->add_option("--host", so.host, "Bind address (env CONTFOOD_ADDR=host:port)");
  sv->add_option("--port", so.port, "Port");
  sv->add_option("--tau", so.tau, "Novelty margin (env CONTFOOD_TAU)");
  sv->add_option("--old-test", so.old_test_path, "Labeled old test set for forgetting reports");
  sv->add_option("--static", so.static_dir, "Directory served at /");
  sv->add_option("--timeout", so.request_timeout_seconds, "Request timeout in seconds");
  sv->add_option("--inc-epochs", so.increment.epochs, "Epochs per increment");
  sv->add_option("--replay-ratio", so.increment.replay_ratio, "Replayed items per new item");
  sv->add_option("--seed", so.increment.seed, "Seed for increments");
  sv->callback([&] {
    action = [&] {
      ServiceOptions opts = so;
      opts.apply_environment();
      if (sv->count("--data-dir")) opts.data_dir = so.data_dir;
      if (sv->count("--host")) opts.host = so.host;
      if (sv->count("--port")) opts.port = so.port;
      if (sv->count("--tau")) opts.tau = so.tau;
      Service service(opts);
      service.listen();
    };
  });

  // report -------------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "Render JSON artifacts as key: value lines");
  std::vector<std::string> report_inputs;
  std::string report_out;
  rep->add_option("inputs", report_inputs, "JSON files or directories of them")->required();
  rep->add_option("--out", report_out, "Output file (default: standard output)");
  rep->callback([&] {
    action = [&] {
      std::vector<std::string> files;
      for (const auto& p : report_inputs) {
        if (fs::is_directory(p)) {
          std::vector<std::string> found;
          for (const auto& entry : fs::directory_iterator(p)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") found.push_back(entry.path().string());
          }
          std::sort(found.begin(), found.end());
          files.insert(files.end(), found.begin(), found.end());
        } else {
          files.push_back(p);
        }
      }
      std::string text;
      for (const auto& f : files) {
        if (!text.empty()) text += "\n";
        text += "file: " + f + "\n" + render_key_values(read_json_file(f));
      }
      if (report_out.empty()) {
        out << text;
      } else {
        codec::write_file_atomic(report_out, text);
        Manifest m("report");
        for (const auto& f : files) m.input(f);
        m.output(report_out);
        m.write(report_out + ".manifest.json");
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    // Subcommand --help arrives here as CallForHelp from the subcommand.
    err << "error: " << ex.what() << "\n";
    err << "run 'contfood --help' or 'contfood <command> --help' for usage\n";
    return kUsage;
  }

  try {
    kernels::set_threads(threads);
    if (action) action();
    return kOk;
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const NumericError& ex) {
    err << "numeric failure: " << ex.what() << "\n";
    return kNumeric;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kData;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace contfood::cli
