#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "loblab/lob_model.hpp"
#include "loblab/rng.hpp"

namespace loblab {

// Seeded stand-in for a real tick stream: an Ornstein-Uhlenbeck-style integer
// midprice, sticky ladder gaps, and per-level volumes that persist with
// probability (1 - event_rate / (2*levels)) and are otherwise redrawn from a
// negative-binomial law. Strong autocorrelation without an agent simulation.
struct SynthConfig {
  uint64_t seed = 1;
  int64_t steps = 10000;
  int levels = 5;
  int64_t tick_size = 1;
  int64_t base_price = 5850000;
  double midprice_volatility = 1.5;  // ticks per step
  double mean_reversion = 0.02;      // 0 disables the pull toward base_price
  std::vector<double> depth_mean = {120, 160, 200, 240, 280};
  std::vector<int> depth_dispersion = {4, 4, 4, 4, 4};
  double event_rate = 1.0;  // expected volume redraws per step over the book
  int64_t start_time_ns = 34200LL * 1000000000LL;  // 09:30:00
  int64_t mean_dt_ns = 100000000LL;                // 0.1 s between snapshots

  void validate() const {
    if (steps < 1) throw ConfigError("synth: steps must be >= 1");
    if (levels < 1) throw ConfigError("synth: levels must be >= 1");
    if (tick_size != 1) throw ConfigError("synth: tick_size must be 1");
    if (base_price < 4 * levels + 4) throw ConfigError("synth: base_price too small");
    if (midprice_volatility < 0) throw ConfigError("synth: volatility must be >= 0");
    if (mean_reversion < 0 || mean_reversion >= 1) {
      throw ConfigError("synth: mean_reversion must be in [0,1)");
    }
    if (depth_mean.size() != static_cast<size_t>(levels) ||
        depth_dispersion.size() != static_cast<size_t>(levels)) {
      throw ConfigError("synth: depth parameters must have one entry per level");
    }
    for (double m : depth_mean) {
      if (m <= 0) throw ConfigError("synth: depth_mean must be positive");
    }
    for (int d : depth_dispersion) {
      if (d < 1) throw ConfigError("synth: depth_dispersion must be >= 1");
    }
    if (event_rate < 0) throw ConfigError("synth: event_rate must be >= 0");
    if (mean_dt_ns < 1) throw ConfigError("synth: mean_dt_ns must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"seed", c.seed},
                     {"steps", c.steps},
                     {"levels", c.levels},
                     {"tick_size", c.tick_size},
                     {"base_price", c.base_price},
                     {"midprice_volatility", c.midprice_volatility},
                     {"mean_reversion", c.mean_reversion},
                     {"depth_mean", c.depth_mean},
                     {"depth_dispersion", c.depth_dispersion},
                     {"event_rate", c.event_rate},
                     {"start_time_ns", c.start_time_ns},
                     {"mean_dt_ns", c.mean_dt_ns}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  c = SynthConfig{};
  c.seed = j.value("seed", c.seed);
  c.steps = j.value("steps", c.steps);
  c.levels = j.value("levels", c.levels);
  c.tick_size = j.value("tick_size", c.tick_size);
  c.base_price = j.value("base_price", c.base_price);
  c.midprice_volatility = j.value("midprice_volatility", c.midprice_volatility);
  c.mean_reversion = j.value("mean_reversion", c.mean_reversion);
  if (j.contains("depth_mean")) c.depth_mean = j.at("depth_mean").get<std::vector<double>>();
  if (j.contains("depth_dispersion")) {
    c.depth_dispersion = j.at("depth_dispersion").get<std::vector<int>>();
  }
  c.event_rate = j.value("event_rate", c.event_rate);
  c.start_time_ns = j.value("start_time_ns", c.start_time_ns);
  c.mean_dt_ns = j.value("mean_dt_ns", c.mean_dt_ns);
  if (static_cast<int>(c.depth_mean.size()) != c.levels && c.depth_mean.size() == 1) {
    c.depth_mean.assign(c.levels, c.depth_mean[0]);
  }
  if (static_cast<int>(c.depth_dispersion.size()) != c.levels && c.depth_dispersion.size() == 1) {
    c.depth_dispersion.assign(c.levels, c.depth_dispersion[0]);
  }
}

namespace detail {

// Net per-price volume changes between consecutive snapshots, emitted as
// synthetic order-flow events stamped with the new snapshot's time. Decreases
// at the touch become visible executions, deeper decreases cancels.
inline void diff_to_events(const LobSnapshot* prev, const LobSnapshot& cur,
                           std::vector<TradeEvent>& out, int64_t& next_order_id) {
  auto side_pass = [&](bool is_ask) {
    std::map<int64_t, int64_t> before, after;
    if (prev) {
      const auto& pp = is_ask ? prev->ask_price : prev->bid_price;
      const auto& pv = is_ask ? prev->ask_volume : prev->bid_volume;
      for (int i = 0; i < prev->levels; ++i) {
        if (pv[i] > 0) before[pp[i]] = pv[i];
      }
    }
    const auto& cp = is_ask ? cur.ask_price : cur.bid_price;
    const auto& cv = is_ask ? cur.ask_volume : cur.bid_volume;
    for (int i = 0; i < cur.levels; ++i) {
      if (cv[i] > 0) after[cp[i]] = cv[i];
    }
    Side side = is_ask ? Side::sell : Side::buy;
    int64_t touch = is_ask ? cur.best_ask() : cur.best_bid();
    auto emit = [&](EventKind kind, int64_t size, int64_t price) {
      out.push_back({cur.time_ns, kind, next_order_id++, size, price, side});
    };
    for (const auto& [price, vol] : before) {
      auto it = after.find(price);
      if (it == after.end()) emit(EventKind::full_delete, vol, price);
    }
    for (const auto& [price, vol] : after) {
      auto it = before.find(price);
      int64_t prev_vol = it == before.end() ? 0 : it->second;
      if (vol > prev_vol) {
        emit(EventKind::submission, vol - prev_vol, price);
      } else if (vol < prev_vol) {
        emit(price == touch ? EventKind::execute_visible : EventKind::partial_cancel,
             prev_vol - vol, price);
      }
    }
  };
  side_pass(true);
  side_pass(false);
}

}  // namespace detail

inline LabeledSeries generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int l = cfg.levels;
  const bool moving = cfg.midprice_volatility > 0;
  const double redraw_p = std::min(1.0, cfg.event_rate / (2.0 * l));

  auto draw_volume = [&](int level) {
    return 1 + rng.neg_binomial(std::max(0.0, cfg.depth_mean[level] - 1.0),
                                cfg.depth_dispersion[level]);
  };
  auto draw_gap = [&]() { return rng.bernoulli(0.2) ? 2 : 1; };

  int64_t bid = cfg.base_price - 1;
  int64_t spread = 1;
  std::vector<int64_t> ask_gap(l, 1), bid_gap(l, 1);
  std::vector<int64_t> ask_vol(l), bid_vol(l);
  if (moving) {
    for (int i = 1; i < l; ++i) ask_gap[i] = draw_gap();
    for (int i = 1; i < l; ++i) bid_gap[i] = draw_gap();
  }
  for (int i = 0; i < l; ++i) ask_vol[i] = draw_volume(i);
  for (int i = 0; i < l; ++i) bid_vol[i] = draw_volume(i);

  LabeledSeries series;
  series.snapshots.reserve(cfg.steps);
  series.labels.assign(cfg.steps, 0);
  int64_t time_ns = cfg.start_time_ns;
  int64_t next_order_id = 1;

  for (int64_t t = 0; t < cfg.steps; ++t) {
    if (t > 0) {
      double mid = static_cast<double>(bid) + 0.5 * static_cast<double>(spread);
      double drift = cfg.mean_reversion * (static_cast<double>(cfg.base_price) - mid);
      int64_t delta = std::llround(drift + cfg.midprice_volatility * rng.normal());
      bid += delta;
      spread = moving ? 1 + std::min<int64_t>(2, std::llabs(delta)) : 1;
      if (moving) {
        for (int i = 1; i < l; ++i) {
          if (rng.bernoulli(0.05)) ask_gap[i] = draw_gap();
        }
        for (int i = 1; i < l; ++i) {
          if (rng.bernoulli(0.05)) bid_gap[i] = draw_gap();
        }
      }
      for (int i = 0; i < l; ++i) {
        if (rng.bernoulli(redraw_p)) ask_vol[i] = draw_volume(i);
      }
      for (int i = 0; i < l; ++i) {
        if (rng.bernoulli(redraw_p)) bid_vol[i] = draw_volume(i);
      }
      time_ns += std::max<int64_t>(
          1, std::llround(rng.exponential(static_cast<double>(cfg.mean_dt_ns))));
    }

    LobSnapshot s = LobSnapshot::empty(l);
    s.time_ns = time_ns;
    s.ask_price[0] = bid + spread;
    s.bid_price[0] = bid;
    for (int i = 1; i < l; ++i) {
      s.ask_price[i] = s.ask_price[i - 1] + ask_gap[i];
      s.bid_price[i] = s.bid_price[i - 1] - bid_gap[i];
    }
    s.ask_volume = ask_vol;
    s.bid_volume = bid_vol;

    detail::diff_to_events(series.snapshots.empty() ? nullptr : &series.snapshots.back(), s,
                           series.events, next_order_id);
    series.snapshots.push_back(std::move(s));
  }
  return series;
}

}  // namespace loblab
