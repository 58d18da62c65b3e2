#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loblab/lob_model.hpp"

namespace loblab {

// Per-step feature table: the raw 4*l LOB block next to m engineered
// microstructure features, with point labels carried along. Downstream code
// slices this table into windows by index instead of copying it.
struct FeatureFrame {
  int levels = 0;
  std::vector<std::string> names;               // lob block first, then manual
  std::vector<std::vector<double>> rows;        // steps x (4*levels + manual)
  std::vector<uint8_t> labels;

  int64_t size() const { return static_cast<int64_t>(rows.size()); }
  int dim() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
  int lob_dim() const { return 4 * levels; }
  int manual_dim() const { return dim() - lob_dim(); }
};

struct FeatureConfig {
  int rolling_window = 50;  // trailing span for volatility/intensity/ratio

  void validate() const {
    if (rolling_window < 1) throw ConfigError("features: rolling_window must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = nlohmann::json{{"rolling_window", c.rolling_window}};
}
inline void from_json(const nlohmann::json& j, FeatureConfig& c) {
  c = FeatureConfig{};
  c.rolling_window = j.value("rolling_window", c.rolling_window);
}

inline const std::vector<std::string>& manual_feature_names() {
  static const std::vector<std::string> names = {
      "midprice",        "spread",           "log_return",       "return_volatility",
      "bid_depth",       "ask_depth",        "volume_imbalance", "level1_imbalance",
      "bid_depth_slope", "ask_depth_slope",  "trade_intensity",  "cancel_submit_ratio"};
  return names;
}

namespace detail {

// Least-squares slope of volume against level index 1..l; flat when l == 1.
inline double depth_slope(const std::vector<int64_t>& volumes) {
  int l = static_cast<int>(volumes.size());
  if (l < 2) return 0;
  double xbar = 0.5 * (l + 1);
  double vbar = 0;
  for (int64_t v : volumes) vbar += static_cast<double>(v);
  vbar /= l;
  double num = 0, den = 0;
  for (int i = 0; i < l; ++i) {
    double dx = (i + 1) - xbar;
    num += dx * (static_cast<double>(volumes[i]) - vbar);
    den += dx * dx;
  }
  return num / den;
}

inline double safe_ratio(double num, double den) { return den == 0 ? 0 : num / den; }

}  // namespace detail

// Builds the m=12 manual features per step. Rolling statistics use a trailing
// window of `rolling_window` steps including the current one; before enough
// history exists the window is the partial prefix. Events are attributed to
// the first snapshot at or after their timestamp; events after the last
// snapshot are dropped.
inline FeatureFrame build_manual_features(const LabeledSeries& series,
                                          const FeatureConfig& cfg = {}) {
  cfg.validate();
  if (std::string err = series.check(); !err.empty()) {
    throw ValidationError("features: " + err);
  }
  int64_t n = static_cast<int64_t>(series.snapshots.size());
  if (n == 0) throw ValidationError("features: empty series");
  if (n < cfg.rolling_window) {
    throw ValidationError("features: series shorter than the rolling window");
  }
  int l = series.snapshots[0].levels;
  const int w = cfg.rolling_window;

  std::vector<int64_t> n_events(n, 0), n_submit(n, 0), n_cancel(n, 0);
  {
    int64_t row = 0;
    for (const TradeEvent& e : series.events) {
      while (row < n && series.snapshots[row].time_ns < e.time_ns) ++row;
      if (row >= n) break;
      ++n_events[row];
      if (e.kind == EventKind::submission) ++n_submit[row];
      if (e.kind == EventKind::partial_cancel || e.kind == EventKind::full_delete) {
        ++n_cancel[row];
      }
    }
  }

  FeatureFrame frame;
  frame.levels = l;
  frame.labels = series.labels;
  for (int i = 1; i <= l; ++i) {
    frame.names.push_back("ask_price_" + std::to_string(i));
    frame.names.push_back("ask_size_" + std::to_string(i));
    frame.names.push_back("bid_price_" + std::to_string(i));
    frame.names.push_back("bid_size_" + std::to_string(i));
  }
  for (const std::string& name : manual_feature_names()) frame.names.push_back(name);

  std::vector<double> returns(n, 0);
  for (int64_t t = 1; t < n; ++t) {
    returns[t] = std::log(series.snapshots[t].mid()) - std::log(series.snapshots[t - 1].mid());
  }

  // Prefix sums make every rolling statistic O(1) per step.
  auto prefix = [n](auto&& value) {
    std::vector<double> p(n + 1, 0);
    for (int64_t t = 0; t < n; ++t) p[t + 1] = p[t] + value(t);
    return p;
  };
  std::vector<double> pref_r = prefix([&](int64_t t) { return returns[t]; });
  std::vector<double> pref_r2 = prefix([&](int64_t t) { return returns[t] * returns[t]; });
  std::vector<double> pref_ev = prefix([&](int64_t t) { return static_cast<double>(n_events[t]); });
  std::vector<double> pref_sub = prefix([&](int64_t t) { return static_cast<double>(n_submit[t]); });
  std::vector<double> pref_can = prefix([&](int64_t t) { return static_cast<double>(n_cancel[t]); });

  frame.rows.resize(n);
  for (int64_t t = 0; t < n; ++t) {
    const LobSnapshot& s = series.snapshots[t];
    std::vector<double>& row = frame.rows[t];
    row.reserve(4 * l + 12);
    for (int i = 0; i < l; ++i) {
      row.push_back(static_cast<double>(s.ask_price[i]));
      row.push_back(static_cast<double>(s.ask_volume[i]));
      row.push_back(static_cast<double>(s.bid_price[i]));
      row.push_back(static_cast<double>(s.bid_volume[i]));
    }

    int64_t lo = std::max<int64_t>(0, t - w + 1);
    double span = static_cast<double>(t - lo + 1);
    double r_mean = (pref_r[t + 1] - pref_r[lo]) / span;
    double r_var = (pref_r2[t + 1] - pref_r2[lo]) / span - r_mean * r_mean;
    double bid_depth = 0, ask_depth = 0;
    for (int i = 0; i < l; ++i) {
      bid_depth += static_cast<double>(s.bid_volume[i]);
      ask_depth += static_cast<double>(s.ask_volume[i]);
    }
    double submits = pref_sub[t + 1] - pref_sub[lo];
    double cancels = pref_can[t + 1] - pref_can[lo];

    row.push_back(s.mid());
    row.push_back(static_cast<double>(s.spread()));
    row.push_back(returns[t]);
    row.push_back(std::sqrt(std::max(0.0, r_var)));
    row.push_back(bid_depth);
    row.push_back(ask_depth);
    row.push_back(detail::safe_ratio(bid_depth - ask_depth, bid_depth + ask_depth));
    row.push_back(detail::safe_ratio(static_cast<double>(s.bid_volume[0] - s.ask_volume[0]),
                                     static_cast<double>(s.bid_volume[0] + s.ask_volume[0])));
    row.push_back(detail::depth_slope(s.bid_volume));
    row.push_back(detail::depth_slope(s.ask_volume));
    row.push_back((pref_ev[t + 1] - pref_ev[lo]) / span);
    row.push_back(detail::safe_ratio(cancels, submits));
  }
  return frame;
}

// Per-feature z-score parameters fitted on the training range. Features whose
// std falls below the floor are recorded and normalized to zero.
struct NormStats {
  std::vector<std::string> names;
  std::vector<double> mean, std_dev;
  std::vector<std::string> floored;

  int find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

inline void to_json(nlohmann::json& j, const NormStats& s) {
  j = nlohmann::json::object();
  for (size_t i = 0; i < s.names.size(); ++i) {
    j[s.names[i]] = {{"mean", s.mean[i]}, {"std", s.std_dev[i]}};
  }
}

inline void from_json(const nlohmann::json& j, NormStats& s) {
  s = NormStats{};
  for (auto it = j.begin(); it != j.end(); ++it) {
    s.names.push_back(it.key());
    s.mean.push_back(it.value().at("mean").get<double>());
    s.std_dev.push_back(it.value().at("std").get<double>());
    if (it.value().at("std").get<double>() < 1e-8) s.floored.push_back(it.key());
  }
}

constexpr double kStdFloor = 1e-8;

inline NormStats fit_norm_stats(const FeatureFrame& frame, int64_t train_begin,
                                int64_t train_end) {
  if (train_begin < 0 || train_end > frame.size() || train_begin >= train_end) {
    throw ConfigError("normalize: empty training range");
  }
  NormStats stats;
  stats.names = frame.names;
  int d = frame.dim();
  stats.mean.assign(d, 0);
  stats.std_dev.assign(d, 0);
  double n = static_cast<double>(train_end - train_begin);
  for (int64_t t = train_begin; t < train_end; ++t) {
    for (int f = 0; f < d; ++f) stats.mean[f] += frame.rows[t][f];
  }
  for (int f = 0; f < d; ++f) stats.mean[f] /= n;
  for (int64_t t = train_begin; t < train_end; ++t) {
    for (int f = 0; f < d; ++f) {
      double dev = frame.rows[t][f] - stats.mean[f];
      stats.std_dev[f] += dev * dev;
    }
  }
  for (int f = 0; f < d; ++f) {
    stats.std_dev[f] = std::sqrt(stats.std_dev[f] / n);
    if (stats.std_dev[f] < kStdFloor) {
      stats.floored.push_back(stats.names[f]);
      std::cerr << "warning: feature '" << stats.names[f]
                << "' has no variance in the training range, normalizing to 0\n";
    }
  }
  return stats;
}

// Applies stored stats; every frame feature must be present in the stats.
inline FeatureFrame apply_norm_stats(const FeatureFrame& frame, const NormStats& stats) {
  FeatureFrame out = frame;
  int d = frame.dim();
  std::vector<int> idx(d);
  for (int f = 0; f < d; ++f) {
    idx[f] = stats.find(frame.names[f]);
    if (idx[f] < 0) {
      throw ConfigError("normalize: no stats for feature '" + frame.names[f] + "'");
    }
  }
  for (auto& row : out.rows) {
    for (int f = 0; f < d; ++f) {
      double sd = stats.std_dev[idx[f]];
      row[f] = sd < kStdFloor ? 0.0 : (row[f] - stats.mean[idx[f]]) / sd;
      if (!std::isfinite(row[f])) throw ValidationError("normalize: non-finite feature value");
    }
  }
  return out;
}

inline std::pair<FeatureFrame, NormStats> normalize(const FeatureFrame& frame,
                                                    int64_t train_begin, int64_t train_end) {
  NormStats stats = fit_norm_stats(frame, train_begin, train_end);
  return {apply_norm_stats(frame, stats), std::move(stats)};
}

// Sliding windows over the frame, referenced by anchor (start step). The
// window label is the OR of covered point labels; windows touching any
// `ignore` step keep their label for training but are flagged so evaluation
// can skip them.
struct WindowBatch {
  int T = 0;
  std::vector<int64_t> anchors;
  std::vector<uint8_t> labels;
  std::vector<uint8_t> eval_ignore;

  int64_t count() const { return static_cast<int64_t>(anchors.size()); }
};

inline WindowBatch make_windows(const FeatureFrame& frame, int T, int stride) {
  if (T < 2) throw ConfigError("windows: T must be >= 2");
  if (stride < 1) throw ConfigError("windows: stride must be >= 1");
  if (T > frame.size()) throw ConfigError("windows: T exceeds series length");
  WindowBatch batch;
  batch.T = T;
  for (int64_t a = 0; a + T <= frame.size(); a += stride) {
    uint8_t label = 0, ignore = 0;
    for (int64_t t = a; t < a + T; ++t) {
      if (frame.labels[t] == kAnomaly) label = 1;
      if (frame.labels[t] == kIgnore) ignore = 1;
    }
    batch.anchors.push_back(a);
    batch.labels.push_back(label);
    batch.eval_ignore.push_back(ignore);
  }
  return batch;
}

enum class SplitMode { traditional, proposed };
enum class TrainAnomalyPolicy { exclude, include };

inline const char* to_string(SplitMode m) {
  return m == SplitMode::traditional ? "traditional" : "proposed";
}

// Time-ordered three-way partition by step index; [train_begin, train_end),
// [train_end, val_end), [val_end, test_end). Windows that straddle a boundary
// belong to no split. The traditional mode trains on normal data only; the
// proposed mode lets labeled anomalies into the training batches.
struct SplitSpec {
  SplitMode mode = SplitMode::proposed;
  TrainAnomalyPolicy train_anomaly_policy = TrainAnomalyPolicy::include;
  int64_t train_begin = 0;
  int64_t train_end = 0;
  int64_t val_end = 0;
  int64_t test_end = 0;

  void validate(int64_t n) const {
    if (train_begin < 0 || train_begin >= train_end || train_end > val_end ||
        val_end > test_end || test_end > n) {
      throw ConfigError("split: ranges must be ordered within the series");
    }
    if (mode == SplitMode::traditional && train_anomaly_policy != TrainAnomalyPolicy::exclude) {
      throw ConfigError("split: traditional mode requires the exclude policy");
    }
  }

  static SplitSpec by_fraction(int64_t n, SplitMode mode, double train_frac = 0.6,
                               double val_frac = 0.2) {
    if (train_frac <= 0 || val_frac < 0 || train_frac + val_frac >= 1) {
      throw ConfigError("split: fractions must be positive and sum below 1");
    }
    SplitSpec spec;
    spec.mode = mode;
    spec.train_anomaly_policy = mode == SplitMode::traditional ? TrainAnomalyPolicy::exclude
                                                               : TrainAnomalyPolicy::include;
    spec.train_end = static_cast<int64_t>(static_cast<double>(n) * train_frac);
    spec.val_end = spec.train_end + static_cast<int64_t>(static_cast<double>(n) * val_frac);
    spec.test_end = n;
    return spec;
  }
};

struct SplitBatches {
  WindowBatch train, val, test;
  std::vector<std::string> warnings;
};

inline SplitBatches split_windows(const FeatureFrame& frame, int T, int stride,
                                  const SplitSpec& spec) {
  spec.validate(frame.size());
  WindowBatch all = make_windows(frame, T, stride);
  SplitBatches out;
  out.train.T = out.val.T = out.test.T = T;
  auto push = [](WindowBatch& b, const WindowBatch& src, int64_t i) {
    b.anchors.push_back(src.anchors[i]);
    b.labels.push_back(src.labels[i]);
    b.eval_ignore.push_back(src.eval_ignore[i]);
  };
  for (int64_t i = 0; i < all.count(); ++i) {
    int64_t a = all.anchors[i];
    int64_t b = a + T;
    if (a >= spec.train_begin && b <= spec.train_end) {
      if (spec.train_anomaly_policy == TrainAnomalyPolicy::exclude && all.labels[i] == 1) {
        continue;
      }
      push(out.train, all, i);
    } else if (a >= spec.train_end && b <= spec.val_end) {
      push(out.val, all, i);
    } else if (a >= spec.val_end && b <= spec.test_end) {
      push(out.test, all, i);
    }
  }
  if (spec.mode == SplitMode::proposed) {
    bool any = std::any_of(out.train.labels.begin(), out.train.labels.end(),
                           [](uint8_t l) { return l == 1; });
    if (!any) {
      out.warnings.push_back(
          "proposed split has no anomalous training windows; the contrastive term is inert");
      std::cerr << "warning: " << out.warnings.back() << "\n";
    }
  }
  return out;
}

}  // namespace loblab
