#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace contfood {

/// Binary confusion counts with Veg (label 1) as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth);

/// 0/0 ratios are 0.
double precision(const ConfusionMatrix& cm);
double recall(const ConfusionMatrix& cm);
double f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

double accuracy(std::span<const int> predicted, std::span<const int> truth);
/// Mean |pred - truth| over hard labels, i.e. 1 - accuracy.
double mae(std::span<const int> predicted, std::span<const int> truth);

/// Mann-Whitney AUC with average ranks for ties. Throws DataError when only
/// one class is present.
double auc(std::span<const double> scores, std::span<const int> truth);

using MetricMap = std::map<std::string, double>;

struct RunSummary {
  std::size_t runs = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // sample std, n - 1 divisor; 0 for one run

  nlohmann::json to_json() const;
};

/// Throws UsageError on zero runs or differing key sets.
RunSummary aggregate_runs(std::span<const MetricMap> runs);

/// accuracy, precision, recall, f1, mae, auc (when defined) and the
/// confusion counts.
nlohmann::json metrics_report(std::span<const int> predicted, std::span<const int> truth,
                              std::span<const double> scores);

}  // namespace contfood
