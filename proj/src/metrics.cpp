#include "contfood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "contfood/error.hpp"

namespace contfood {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw UsageError("predicted and true label vectors differ in length");
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth) {
  check_lengths(predicted.size(), truth.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1)) throw UsageError("labels must be 0 or 1");
    if (p == 1 && t == 1) ++cm.tp;
    else if (p == 1) ++cm.fp;
    else if (t == 1) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

double precision(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fp); }
double recall(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn); }

double f1(const ConfusionMatrix& cm) {
  const double p = precision(cm), r = recall(cm);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total()); }

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  check_lengths(predicted.size(), truth.size());
  if (predicted.empty()) throw UsageError("accuracy: empty input");
  std::size_t same = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) same += predicted[i] == truth[i];
  return static_cast<double>(same) / static_cast<double>(predicted.size());
}

double mae(std::span<const int> predicted, std::span<const int> truth) {
  check_lengths(predicted.size(), truth.size());
  if (predicted.empty()) throw UsageError("mae: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += std::abs(predicted[i] - truth[i]);
  return sum / static_cast<double>(predicted.size());
}

double auc(std::span<const double> scores, std::span<const int> truth) {
  check_lengths(scores.size(), truth.size());
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (truth[order[t]] == 1) {
        rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::uint64_t neg = n - pos;
  if (pos == 0 || neg == 0) throw DataError("AUC undefined: only one class present");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

nlohmann::json RunSummary::to_json() const {
  nlohmann::json j;
  j["runs"] = runs;
  for (const auto& [k, v] : mean) {
    j["metrics"][k] = {{"mean", v}, {"std", stddev.at(k)}};
  }
  return j;
}

RunSummary aggregate_runs(std::span<const MetricMap> runs) {
  if (runs.empty()) throw UsageError("aggregate_runs: no runs");
  RunSummary s;
  s.runs = runs.size();
  for (const auto& run : runs) {
    if (run.size() != runs.front().size() ||
        !std::equal(run.begin(), run.end(), runs.front().begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw UsageError("aggregate_runs: runs report different metric keys");
    }
  }
  const double n = static_cast<double>(runs.size());
  for (const auto& [key, unused] : runs.front()) {
    double sum = 0.0;
    for (const auto& run : runs) sum += run.at(key);
    const bool constant = std::all_of(runs.begin(), runs.end(),
                                      [&](const MetricMap& r) { return r.at(key) == runs.front().at(key); });
    // Identical samples report their exact value with zero spread (no rounding residue).
    const double mean = constant ? runs.front().at(key) : sum / n;
    double sq = 0.0;
    for (const auto& run : runs) sq += (run.at(key) - mean) * (run.at(key) - mean);
    s.mean[key] = mean;
    s.stddev[key] = runs.size() > 1 && !constant ? std::sqrt(sq / (n - 1.0)) : 0.0;
  }
  return s;
}

nlohmann::json metrics_report(std::span<const int> predicted, std::span<const int> truth,
                              std::span<const double> scores) {
  const auto cm = confusion(predicted, truth);
  nlohmann::json j;
  j["n"] = cm.total();
  j["accuracy"] = accuracy(cm);
  j["mae"] = mae(predicted, truth);
  j["precision"] = precision(cm);
  j["recall"] = recall(cm);
  j["f1"] = f1(cm);
  try {
    j["auc"] = auc(scores, truth);
  } catch (const DataError&) {
    j["auc"] = nullptr;
  }
  j["confusion"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}, {"positive_class", "veg"}};
  return j;
}

}  // namespace contfood
