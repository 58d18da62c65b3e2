// Ranking and classification metrics for per-step anomaly scores.  Steps
// labeled kIgnore are excluded everywhere; ties are handled by fixed rules
// (rank averaging for AUROC, group averaging for average precision) so
// results are reproducible bit-for-bit.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "loblab/lob_model.hpp"

namespace loblab {

namespace detail {

struct ScoredLabels {
  std::vector<double> scores;
  std::vector<uint8_t> labels;  // 0 or 1 after filtering
  int64_t positives = 0;
};

inline ScoredLabels filter_ignored(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) {
    throw ConfigError("metrics: one label per score required");
  }
  ScoredLabels out;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == kIgnore) continue;
    out.scores.push_back(scores[i]);
    out.labels.push_back(labels[i] == kAnomaly ? 1 : 0);
    out.positives += labels[i] == kAnomaly ? 1 : 0;
  }
  if (out.scores.empty()) throw ConfigError("metrics: no scored steps");
  return out;
}

}  // namespace detail

// Probability that a random positive outranks a random negative, ties at 1/2,
// computed from average ranks.
inline double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  detail::ScoredLabels in = detail::filter_ignored(scores, labels);
  const int64_t n = static_cast<int64_t>(in.scores.size());
  const int64_t pos = in.positives, neg = n - pos;
  if (pos == 0 || neg == 0) throw ConfigError("auroc: needs both classes");
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return in.scores[a] < in.scores[b]; });
  double rank_sum = 0;
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j < n && in.scores[order[j]] == in.scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
    for (int64_t k = i; k < j; ++k) {
      if (in.labels[order[k]] == 1) rank_sum += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Average precision in descending score order.  Tied scores form one group
// credited at the group-end precision, which equals the average over all
// within-group orderings.
inline double auc_pr(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  detail::ScoredLabels in = detail::filter_ignored(scores, labels);
  if (in.positives == 0) throw ConfigError("auc_pr: no positives");
  const int64_t n = static_cast<int64_t>(in.scores.size());
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return in.scores[a] > in.scores[b]; });
  double sum = 0;
  int64_t seen = 0, tp = 0, i = 0;
  while (i < n) {
    int64_t j = i, group_pos = 0;
    while (j < n && in.scores[order[j]] == in.scores[order[i]]) {
      group_pos += in.labels[order[j]];
      ++j;
    }
    seen += j - i;
    tp += group_pos;
    sum += static_cast<double>(group_pos) * static_cast<double>(tp) /
           static_cast<double>(seen);
    i = j;
  }
  return sum / static_cast<double>(in.positives);
}

inline double f_beta(double precision, double recall, double beta) {
  if (!(beta > 0.0)) throw ConfigError("f_beta: beta must be positive");
  if (precision == 0.0 && recall == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

enum class EvalSubset { all_levels, levels_2_5 };

inline std::string to_string(EvalSubset s) {
  return s == EvalSubset::all_levels ? "all_levels" : "levels_2_5";
}

struct MetricReport {
  double auc_pr = 0;
  double auroc = 0;
  double f4 = 0;
  double precision = 0;
  double recall = 0;
  int64_t positives = 0;
  EvalSubset subset = EvalSubset::all_levels;
};

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"auc_pr", r.auc_pr},       {"auroc", r.auroc},
          {"f4", r.f4},               {"precision", r.precision},
          {"recall", r.recall},       {"positives", r.positives},
          {"subset", to_string(r.subset)}};
}

inline MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.auc_pr = j.at("auc_pr").get<double>();
  r.auroc = j.at("auroc").get<double>();
  r.f4 = j.at("f4").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.positives = j.at("positives").get<int64_t>();
  r.subset = j.at("subset").get<std::string>() == "levels_2_5" ? EvalSubset::levels_2_5
                                                               : EvalSubset::all_levels;
  return r;
}

// All five metrics at a fixed decision threshold.  The subset tag records
// which label masking was applied upstream; kIgnore steps drop out here.
inline MetricReport evaluate(const std::vector<double>& point_scores,
                             const std::vector<uint8_t>& labels, double threshold,
                             EvalSubset subset = EvalSubset::all_levels) {
  detail::ScoredLabels in = detail::filter_ignored(point_scores, labels);
  MetricReport r;
  r.subset = subset;
  r.positives = in.positives;
  r.auroc = auroc(point_scores, labels);
  r.auc_pr = auc_pr(point_scores, labels);
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < in.scores.size(); ++i) {
    if (in.scores[i] > threshold) (in.labels[i] == 1 ? tp : fp) += 1;
  }
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = static_cast<double>(tp) / static_cast<double>(in.positives);
  r.f4 = f_beta(r.precision, r.recall, 4.0);
  return r;
}

}  // namespace loblab
