#include "loblab/evaluation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "loblab/rng.hpp"

namespace loblab {
namespace {

// Pair-counting reference: positives beating negatives, ties worth 1/2.
double auroc_oracle(const std::vector<double>& s, const std::vector<uint8_t>& y) {
  double wins = 0;
  int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) {
        wins += 1;
      } else if (s[i] == s[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

// Average precision from the PR-curve side: sum of recall increments times
// the precision at each distinct threshold.
double auc_pr_oracle(const std::vector<double>& s, const std::vector<uint8_t>& y) {
  std::vector<double> cuts = s;
  std::sort(cuts.begin(), cuts.end(), std::greater<>());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  int64_t positives = 0;
  for (uint8_t v : y) positives += v;
  double ap = 0, prev_recall = 0;
  for (double cut : cuts) {
    int64_t tp = 0, predicted = 0;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= cut) {
        ++predicted;
        tp += y[i];
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

TEST(Auroc, HandExamples) {
  std::vector<double> scores = {0.9, 0.8, 0.7, 0.6};
  EXPECT_DOUBLE_EQ(auroc(scores, {1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(scores, {1, 0, 1, 0}), 0.75);
  EXPECT_DOUBLE_EQ(auroc(scores, {0, 0, 1, 1}), 0.0);
  // Complementarity under score inversion.
  std::vector<double> neg = {-0.9, -0.8, -0.7, -0.6};
  EXPECT_DOUBLE_EQ(auroc(neg, {1, 0, 1, 0}), 1.0 - 0.75);
  // All tied scores rank at one half.
  EXPECT_DOUBLE_EQ(auroc({2, 2, 2, 2}, {1, 0, 1, 0}), 0.5);
}

TEST(Auroc, MatchesPairCountingOracle) {
  Rng rng(101);
  for (int round = 0; round < 8; ++round) {
    const int64_t n = 50 + static_cast<int64_t>(rng.uniform_int(950));
    std::vector<double> s(n);
    std::vector<uint8_t> y(n);
    for (int64_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.normal() * 20) / 20.0;  // coarse grid forces ties
      y[i] = rng.uniform() < 0.2 ? 1 : 0;
    }
    y[0] = 0;  // guarantee both classes
    y[1] = 1;
    EXPECT_NEAR(auroc(s, y), auroc_oracle(s, y), 1e-9);
  }
}

TEST(Auroc, RandomScoresScoreHalf) {
  Rng rng(102);
  const int64_t n = 10000;
  std::vector<double> s(n);
  std::vector<uint8_t> y(n);
  for (int64_t i = 0; i < n; ++i) {
    s[i] = rng.uniform();
    y[i] = i % 2 == 0 ? 1 : 0;
  }
  EXPECT_NEAR(auroc(s, y), 0.5, 0.02);
}

TEST(Auroc, IgnoredAndDegenerateInputs) {
  std::vector<double> s = {0.9, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(auroc(s, {1, kIgnore, 0}), 1.0);
  EXPECT_THROW(auroc(s, {0, 0, 0}), ConfigError);
  EXPECT_THROW(auroc(s, {1, 1, 1}), ConfigError);
}

TEST(AucPr, HandEnumeration) {
  std::vector<double> scores = {0.9, 0.8, 0.7, 0.6};
  EXPECT_DOUBLE_EQ(auc_pr(scores, {1, 1, 0, 0}), 1.0);
  EXPECT_NEAR(auc_pr(scores, {1, 0, 1, 0}), (1.0 + 2.0 / 3.0) / 2.0, 1e-12);
  EXPECT_THROW(auc_pr(scores, {0, 0, 0, 0}), ConfigError);
  // A tie group is credited at its end precision: the two tied entries hold
  // one positive, giving 1 * (1/2) for that group.
  EXPECT_NEAR(auc_pr({0.9, 0.9, 0.1}, {1, 0, 1}), (0.5 + 2.0 / 3.0) / 2.0, 1e-12);
}

TEST(AucPr, MatchesCurveOracle) {
  Rng rng(103);
  for (int round = 0; round < 8; ++round) {
    const int64_t n = 50 + static_cast<int64_t>(rng.uniform_int(950));
    std::vector<double> s(n);
    std::vector<uint8_t> y(n);
    for (int64_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.normal() * 20) / 20.0;
      y[i] = rng.uniform() < 0.15 ? 1 : 0;
    }
    y[0] = 1;
    EXPECT_NEAR(auc_pr(s, y), auc_pr_oracle(s, y), 1e-9);
  }
}

TEST(FBeta, PaperStyleTriples) {
  EXPECT_NEAR(f_beta(0.402, 0.952, 4.0), 0.881, 0.001);
  EXPECT_NEAR(f_beta(0.160, 0.739, 4.0), 0.609, 0.001);
  for (double x : {0.1, 0.5, 0.93}) {
    EXPECT_NEAR(f_beta(x, x, 4.0), x, 1e-12);
    EXPECT_NEAR(f_beta(x, x, 1.0), x, 1e-12);
  }
  EXPECT_DOUBLE_EQ(f_beta(0.0, 0.0, 4.0), 0.0);
  EXPECT_THROW(f_beta(0.5, 0.5, 0.0), ConfigError);
}

TEST(Evaluate, FiveMetricsWithIgnoredSteps) {
  std::vector<double> scores = {9.0, 0.9, 0.8, 0.3, 0.2, 0.1};
  std::vector<uint8_t> labels = {kIgnore, 1, 0, 1, 0, 0};
  MetricReport r = evaluate(scores, labels, 0.5, EvalSubset::levels_2_5);
  EXPECT_EQ(r.positives, 2);
  EXPECT_EQ(r.subset, EvalSubset::levels_2_5);
  // Decisions above 0.5: scores 0.9 (pos) and 0.8 (neg).
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f4, f_beta(0.5, 0.5, 4.0));
  EXPECT_DOUBLE_EQ(r.auroc, auroc(scores, labels));
  EXPECT_DOUBLE_EQ(r.auc_pr, auc_pr(scores, labels));

  // A perfect detector maxes every metric.
  MetricReport perfect = evaluate({5, 4, 1, 0}, {1, 1, 0, 0}, 2.0);
  EXPECT_DOUBLE_EQ(perfect.auroc, 1.0);
  EXPECT_DOUBLE_EQ(perfect.auc_pr, 1.0);
  EXPECT_DOUBLE_EQ(perfect.precision, 1.0);
  EXPECT_DOUBLE_EQ(perfect.recall, 1.0);
  EXPECT_DOUBLE_EQ(perfect.f4, 1.0);
}

TEST(Evaluate, JsonCarriesAllFields) {
  MetricReport r = evaluate({3, 2, 1}, {1, 0, 0}, 2.5);
  nlohmann::json j = to_json(r);
  EXPECT_EQ(j.at("subset"), "all_levels");
  EXPECT_DOUBLE_EQ(j.at("f4").get<double>(), r.f4);
  EXPECT_EQ(j.at("positives").get<int64_t>(), 1);
}

}  // namespace
}  // namespace loblab
