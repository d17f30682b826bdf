#include <doctest.h>

#include <cmath>
#include <vector>

#include "contfood/error.hpp"
#include "contfood/metrics.hpp"
#include "contfood/rng.hpp"

using namespace contfood;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
  }
  return wins / pairs;
}

ConfusionMatrix counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  ConfusionMatrix cm;
  cm.tp = tp;
  cm.fp = fp;
  cm.fn = fn;
  cm.tn = tn;
  return cm;
}

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector<int> truth{1, 0, 1, 0};
  CHECK(confusion(truth, truth) == counts(2, 0, 0, 2));
  const std::vector<int> inverted{0, 1, 0, 1};
  CHECK(confusion(inverted, truth) == counts(0, 2, 2, 0));
  const std::vector<int> pred{1, 1, 0, 0, 1};
  const std::vector<int> t2{1, 0, 1, 0, 1};
  CHECK(confusion(pred, t2) == counts(2, 1, 1, 1));
  const std::vector<int> shorter{1};
  CHECK_THROWS(confusion(shorter, truth));
}

TEST_CASE("precision, recall and F1 on the large-corpus counts") {
  const auto cm = counts(12496, 451, 100, 12145);
  CHECK(std::abs(precision(cm) - 0.965166) < 1e-6);
  CHECK(std::abs(recall(cm) - 0.992061) < 1e-6);
  CHECK(std::abs(f1(cm) - 0.978429) < 1e-6);
  CHECK(precision(cm) == 12496.0 / 12947.0);
  CHECK(recall(cm) == 12496.0 / 12596.0);
  CHECK(std::abs(accuracy(cm) - 24641.0 / 25192.0) < 1e-15);
}

TEST_CASE("F1 edge cases") {
  const auto even = counts(30, 10, 10, 50);
  CHECK(std::abs(f1(even) - 0.75) < 1e-15);
  CHECK(f1(counts(0, 3, 4, 5)) == 0.0);
  CHECK(precision(counts(0, 3, 4, 5)) == 0.0);
  CHECK(recall(counts(0, 3, 4, 5)) == 0.0);
  CHECK(precision(counts(0, 0, 0, 5)) == 0.0);
  const auto base = counts(7, 3, 2, 11);
  const auto scaled = counts(21, 9, 6, 33);
  CHECK(std::abs(f1(base) - f1(scaled)) < 1e-15);
}

TEST_CASE("swapping the positive class maps precision to negative predictive value") {
  const auto cm = counts(40, 5, 8, 30);
  const auto flipped = counts(cm.tn, cm.fn, cm.fp, cm.tp);
  CHECK(precision(flipped) == 30.0 / 38.0);
  CHECK(recall(flipped) == 30.0 / 35.0);
}

TEST_CASE("accuracy and MAE") {
  const std::vector<int> t{1, 0, 1, 1};
  CHECK(accuracy(t, t) == 1.0);
  CHECK(mae(t, t) == 0.0);
  const std::vector<int> p{1, 0, 0, 1};
  CHECK(accuracy(p, t) == 0.75);
  CHECK(mae(p, t) == 0.25);
  const std::vector<int> empty;
  CHECK_THROWS(accuracy(empty, empty));
  CHECK_THROWS(mae(empty, empty));

  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng.below(50);
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(2));
      b[i] = static_cast<int>(rng.below(2));
    }
    CHECK(std::abs(accuracy(a, b) + mae(a, b) - 1.0) < 1e-12);
    CHECK(std::abs(accuracy(confusion(a, b)) - accuracy(a, b)) < 1e-15);
  }
}

TEST_CASE("AUC examples") {
  const std::vector<double> s{0.9, 0.8, 0.85, 0.7};
  const std::vector<int> y{1, 1, 0, 0};
  CHECK(auc(s, y) == 0.75);
  const std::vector<double> sep{0.9, 0.8, 0.1, 0.2};
  CHECK(auc(sep, y) == 1.0);
  const std::vector<double> same{0.3, 0.3, 0.3, 0.3};
  CHECK(auc(same, y) == 0.5);
  const std::vector<int> one_class{1, 1, 1, 1};
  CHECK_THROWS_AS(auc(s, one_class), DataError);
}

TEST_CASE("property: rank AUC equals pairwise counting, ties included") {
  Rng rng(1234);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = 2 + rng.below(120);
    const auto levels = trial % 2 == 0 ? 2 + rng.below(4) : 0;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = levels ? static_cast<double>(rng.below(levels)) : rng.uniform01();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(std::abs(auc(s, y) - pairwise_auc(s, y)) < 1e-12);
    // Flipping the labels mirrors the statistic.
    std::vector<int> flipped(y);
    for (int& v : flipped) v = 1 - v;
    CHECK(std::abs(auc(s, flipped) - (1.0 - auc(s, y))) < 1e-12);
  }
}

TEST_CASE("aggregate_runs") {
  const std::vector<MetricMap> flat{{{"accuracy", 0.98}}, {{"accuracy", 0.98}}, {{"accuracy", 0.98}}};
  const auto a = aggregate_runs(flat);
  CHECK(a.runs == 3);
  CHECK(std::abs(a.mean.at("accuracy") - 0.98) < 1e-15);
  CHECK(a.stddev.at("accuracy") == doctest::Approx(0.0).epsilon(1e-15));

  const std::vector<MetricMap> two{{{"accuracy", 0.96}}, {{"accuracy", 1.00}}};
  const auto b = aggregate_runs(two);
  CHECK(std::abs(b.mean.at("accuracy") - 0.98) < 1e-15);
  CHECK(std::abs(b.stddev.at("accuracy") - 0.028284) < 1e-6);
  CHECK(std::abs(b.stddev.at("accuracy") - std::sqrt(0.0008)) < 1e-15);

  const std::vector<MetricMap> single{{{"accuracy", 0.5}, {"f1", 0.4}}};
  const auto c = aggregate_runs(single);
  CHECK(c.stddev.at("accuracy") == 0.0);
  CHECK(c.stddev.at("f1") == 0.0);

  const std::vector<MetricMap> mismatched{{{"accuracy", 0.5}}, {{"f1", 0.5}}};
  CHECK_THROWS_AS(aggregate_runs(mismatched), UsageError);
  CHECK_THROWS_AS(aggregate_runs(std::vector<MetricMap>{}), UsageError);
}

TEST_CASE("metrics report") {
  const std::vector<int> pred{1, 0, 1, 1};
  const std::vector<int> truth{1, 0, 0, 1};
  const std::vector<double> scores{0.9, 0.2, 0.6, 0.7};
  const auto j = metrics_report(pred, truth, scores);
  CHECK(j.at("accuracy") == 0.75);
  CHECK(j.at("mae") == 0.25);
  CHECK(j.at("auc") == 1.0);
  CHECK(j.at("confusion").at("tp") == 2);
  CHECK(j.at("confusion").at("fp") == 1);
  CHECK(j.at("confusion").at("tn") == 1);
  CHECK(j.at("confusion").at("fn") == 0);
  const std::vector<int> ones{1, 1, 1, 1};
  CHECK(metrics_report(pred, ones, scores).at("auc").is_null());
}
