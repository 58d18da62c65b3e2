#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include <json.hpp>

#include "loblab/lob_model.hpp"
#include "loblab/rng.hpp"

namespace loblab {

// Spoofing is injected as phantom volume riding an existing ladder level:
// the 4*l shape stays fixed, prices never move, and subtracting the recorded
// volume restores the input bit for bit. Episode sizing follows the trailing
// average depth at the chosen level so the fake order dominates typical size
// by a factor kappa.

// Synthetic spoof events get order ids from here upward so they can be
// stripped out again; real LOBSTER ids stay far below this.
constexpr int64_t kSpoofOrderIdBase = 9000000000000LL;

struct InjectConfig {
  uint64_t seed = 1;
  double episode_rate = 10.0;  // expected episodes per 10^4 steps
  // Probability of starting at level 1..l; empty means uniform over the
  // book's levels.
  std::vector<double> level_distribution;
  double side_probability = 0.5;  // probability of the bid side
  double kappa_min = 3.0;
  double kappa_max = 5.0;
  double duration_mean = 20.0;  // geometric, support {1, 2, ...}
  double reposition_probability = 0.1;
  int trailing_window = 100;

  void validate(int levels) const {
    if (episode_rate < 0) throw ConfigError("inject: episode_rate must be >= 0");
    if (!level_distribution.empty()) {
      if (level_distribution.size() != static_cast<size_t>(levels)) {
        throw ConfigError("inject: level_distribution must have one entry per level");
      }
      double sum = 0;
      for (double p : level_distribution) {
        if (p < 0) throw ConfigError("inject: level_distribution entries must be >= 0");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("inject: level_distribution must sum to 1");
      }
    }
    if (side_probability < 0 || side_probability > 1) {
      throw ConfigError("inject: side_probability must be in [0,1]");
    }
    if (kappa_min < 1) throw ConfigError("inject: kappa_min must be >= 1");
    if (kappa_max < kappa_min) throw ConfigError("inject: kappa_max must be >= kappa_min");
    if (duration_mean < 1) throw ConfigError("inject: duration_mean must be >= 1");
    if (reposition_probability < 0 || reposition_probability > 1) {
      throw ConfigError("inject: reposition_probability must be in [0,1]");
    }
    if (trailing_window < 1) throw ConfigError("inject: trailing_window must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const InjectConfig& c) {
  j = nlohmann::json{{"seed", c.seed},
                     {"episode_rate", c.episode_rate},
                     {"level_distribution", c.level_distribution},
                     {"side_probability", c.side_probability},
                     {"kappa_min", c.kappa_min},
                     {"kappa_max", c.kappa_max},
                     {"duration_mean", c.duration_mean},
                     {"reposition_probability", c.reposition_probability},
                     {"trailing_window", c.trailing_window}};
}

inline void from_json(const nlohmann::json& j, InjectConfig& c) {
  c = InjectConfig{};
  c.seed = j.value("seed", c.seed);
  c.episode_rate = j.value("episode_rate", c.episode_rate);
  if (j.contains("level_distribution")) {
    c.level_distribution = j.at("level_distribution").get<std::vector<double>>();
  }
  c.side_probability = j.value("side_probability", c.side_probability);
  c.kappa_min = j.value("kappa_min", c.kappa_min);
  c.kappa_max = j.value("kappa_max", c.kappa_max);
  c.duration_mean = j.value("duration_mean", c.duration_mean);
  c.reposition_probability = j.value("reposition_probability", c.reposition_probability);
  c.trailing_window = j.value("trailing_window", c.trailing_window);
}

namespace detail {

inline std::vector<int64_t>& side_volumes(LobSnapshot& s, BookSide side) {
  return side == BookSide::ask ? s.ask_volume : s.bid_volume;
}
inline const std::vector<int64_t>& side_volumes(const LobSnapshot& s, BookSide side) {
  return side == BookSide::ask ? s.ask_volume : s.bid_volume;
}
inline const std::vector<int64_t>& side_prices(const LobSnapshot& s, BookSide side) {
  return side == BookSide::ask ? s.ask_price : s.bid_price;
}

// Average volume at (side, level) over the `window` steps before `start`;
// at the very first step the current volume stands in for history.
inline double trailing_mean_volume(const LabeledSeries& series, int64_t start, BookSide side,
                                   int level, int window) {
  if (start == 0) return static_cast<double>(side_volumes(series.snapshots[0], side)[level - 1]);
  int64_t lo = std::max<int64_t>(0, start - window);
  double sum = 0;
  for (int64_t t = lo; t < start; ++t) {
    sum += static_cast<double>(side_volumes(series.snapshots[t], side)[level - 1]);
  }
  return sum / static_cast<double>(start - lo);
}

}  // namespace detail

// Applies one fully specified episode: adds `ep.volume` phantom shares at the
// recorded level for every covered step, flips labels, records the span, and
// appends the submit/delete events a chasing spoof order would emit. Events
// are appended unsorted; callers merge once at the end.
inline void apply_episode(LabeledSeries& series, const AnomalySpan& ep,
                          int64_t& next_order_id) {
  int64_t steps = static_cast<int64_t>(series.snapshots.size());
  if (ep.start < 0 || ep.end >= steps || ep.start > ep.end) {
    throw ValidationError("apply_episode: span out of range");
  }
  if (ep.volume < 1) throw ValidationError("apply_episode: volume must be >= 1");
  if (static_cast<int64_t>(ep.levels.size()) != ep.end - ep.start + 1) {
    throw ValidationError("apply_episode: level path length must match span length");
  }
  int book_levels = series.snapshots[ep.start].levels;
  for (int lvl : ep.levels) {
    if (lvl < 1 || lvl > book_levels) {
      throw ValidationError("apply_episode: level path outside book");
    }
  }
  for (int64_t t = ep.start; t <= ep.end; ++t) {
    if (series.labels[t] != kNormal) throw ValidationError("apply_episode: episodes overlap");
  }

  Side side = ep.side == BookSide::bid ? Side::buy : Side::sell;
  auto price_at = [&](int64_t t, int lvl) {
    return detail::side_prices(series.snapshots[t], ep.side)[lvl - 1];
  };
  auto emit = [&](int64_t t, EventKind kind, int64_t price) {
    series.events.push_back(
        {series.snapshots[t].time_ns, kind, next_order_id++, ep.volume, price, side});
  };

  emit(ep.start, EventKind::submission, price_at(ep.start, ep.levels[0]));
  for (int64_t t = ep.start; t <= ep.end; ++t) {
    int lvl = ep.levels[t - ep.start];
    detail::side_volumes(series.snapshots[t], ep.side)[lvl - 1] += ep.volume;
    series.labels[t] = kAnomaly;
    // The order chases its level: whenever the resting price differs from the
    // previous step (reposition or ladder move) it is cancelled and resubmitted.
    if (t > ep.start) {
      int64_t prev_price = price_at(t - 1, ep.levels[t - 1 - ep.start]);
      int64_t cur_price = price_at(t, lvl);
      if (cur_price != prev_price) {
        emit(t, EventKind::full_delete, prev_price);
        emit(t, EventKind::submission, cur_price);
      }
    }
  }
  if (ep.end + 1 < steps) {
    emit(ep.end + 1, EventKind::full_delete, price_at(ep.end, ep.levels.back()));
  }
  series.spans.push_back(ep);
}

// Draws Poisson(episode_rate * steps / 1e4) non-overlapping episodes and
// applies them. Per episode the draw order is fixed: duration, start, side,
// level, kappa, then one reposition coin per covered step after the first.
inline LabeledSeries inject(const LabeledSeries& input, const InjectConfig& cfg) {
  if (input.snapshots.empty()) return input;
  int levels = input.snapshots[0].levels;
  cfg.validate(levels);
  if (std::string err = input.check(); !err.empty()) throw ValidationError("inject: " + err);
  for (uint8_t l : input.labels) {
    if (l != kNormal) throw ValidationError("inject: input must be unlabeled");
  }
  for (const TradeEvent& e : input.events) {
    if (e.order_id >= kSpoofOrderIdBase) {
      throw ValidationError("inject: input order ids collide with the spoof id range");
    }
  }

  Rng rng(cfg.seed);
  int64_t steps = static_cast<int64_t>(input.snapshots.size());
  int64_t n_episodes = rng.poisson(cfg.episode_rate * static_cast<double>(steps) / 1e4);

  std::vector<uint8_t> occupied(steps, 0);
  std::vector<AnomalySpan> drawn;
  std::vector<double> kappas;
  for (int64_t i = 0; i < n_episodes; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
      int64_t duration = rng.geometric_from_one(1.0 / cfg.duration_mean);
      if (duration > steps) continue;
      int64_t start = static_cast<int64_t>(rng.uniform_int(steps - duration + 1));
      BookSide side = rng.bernoulli(cfg.side_probability) ? BookSide::bid : BookSide::ask;
      int level = levels;
      double u = rng.uniform();
      double cum = 0;
      for (int lvl = 1; lvl <= levels; ++lvl) {
        cum += cfg.level_distribution.empty() ? 1.0 / levels : cfg.level_distribution[lvl - 1];
        if (u < cum) {
          level = lvl;
          break;
        }
      }
      double kappa = cfg.kappa_min + (cfg.kappa_max - cfg.kappa_min) * rng.uniform();
      std::vector<int> path(duration);
      path[0] = level;
      for (int64_t k = 1; k < duration; ++k) {
        path[k] = path[k - 1];
        if (path[k] > 1 && rng.bernoulli(cfg.reposition_probability)) --path[k];
      }
      bool free = true;
      for (int64_t t = start; t < start + duration && free; ++t) free = !occupied[t];
      if (!free) continue;
      for (int64_t t = start; t < start + duration; ++t) occupied[t] = 1;
      drawn.push_back({start, start + duration - 1, side, std::move(path), 0});
      kappas.push_back(kappa);
      placed = true;
    }
    if (!placed) throw Error("injection density too high");
  }

  // Volumes are sized from the clean input book, so episodes stay independent
  // of one another even when an earlier episode falls inside the window.
  for (size_t i = 0; i < drawn.size(); ++i) {
    double mean = detail::trailing_mean_volume(input, drawn[i].start, drawn[i].side,
                                               drawn[i].levels[0], cfg.trailing_window);
    drawn[i].volume = std::max<int64_t>(1, std::llround(kappas[i] * mean));
  }
  std::sort(drawn.begin(), drawn.end(),
            [](const AnomalySpan& a, const AnomalySpan& b) { return a.start < b.start; });

  LabeledSeries out = input;
  int64_t next_order_id = kSpoofOrderIdBase;
  for (const AnomalySpan& ep : drawn) apply_episode(out, ep, next_order_id);
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const TradeEvent& a, const TradeEvent& b) { return a.time_ns < b.time_ns; });
  return out;
}

// Inverse of inject: subtracts recorded phantom volume, clears labels and
// spans, and strips the synthetic spoof events.
inline LabeledSeries remove_injection(const LabeledSeries& input) {
  LabeledSeries out = input;
  for (const AnomalySpan& ep : out.spans) {
    for (int64_t t = ep.start; t <= ep.end; ++t) {
      int64_t& vol = detail::side_volumes(out.snapshots[t], ep.side)[ep.levels[t - ep.start] - 1];
      vol -= ep.volume;
      if (vol < 0) throw ValidationError("remove_injection: span volume exceeds book volume");
      out.labels[t] = kNormal;
    }
  }
  out.spans.clear();
  std::erase_if(out.events,
                [](const TradeEvent& e) { return e.order_id >= kSpoofOrderIdBase; });
  return out;
}

// Evaluation view for per-level breakdowns: episodes whose whole path stays
// inside keep_levels remain positives, all other episodes' steps become
// `ignore` so metrics skip them. Spans are kept for bookkeeping, which means
// LabeledSeries::check does not apply to views.
inline LabeledSeries level_restricted_view(const LabeledSeries& input,
                                           const std::set<int>& keep_levels) {
  if (keep_levels.empty()) throw ConfigError("level_restricted_view: keep_levels is empty");
  int levels = input.snapshots.empty() ? 0 : input.snapshots[0].levels;
  for (int lvl : keep_levels) {
    if (lvl < 1 || lvl > levels) {
      throw ConfigError("level_restricted_view: level " + std::to_string(lvl) +
                        " outside book");
    }
  }
  LabeledSeries out = input;
  for (const AnomalySpan& ep : out.spans) {
    bool inside = std::all_of(ep.levels.begin(), ep.levels.end(),
                              [&](int lvl) { return keep_levels.count(lvl) > 0; });
    if (!inside) {
      for (int64_t t = ep.start; t <= ep.end; ++t) out.labels[t] = kIgnore;
    }
  }
  return out;
}

}  // namespace loblab
