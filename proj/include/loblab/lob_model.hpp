#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace loblab {

// Prices are integer ticks (1 tick = 1e-4 currency units, LOBSTER scaling),
// volumes integer shares, timestamps integer nanoseconds after midnight.
// Keeping everything integral makes file round-trips and spoof arithmetic
// exact.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

enum class EventKind : int {
  submission = 1,
  partial_cancel = 2,
  full_delete = 3,
  execute_visible = 4,
  execute_hidden = 5,
  halt = 7,
};

enum class Side : int { sell = -1, buy = 1 };
enum class BookSide : int { bid = 0, ask = 1 };

inline const char* to_string(BookSide s) { return s == BookSide::bid ? "bid" : "ask"; }

// Point labels; `ignore` only appears in evaluation views, never on disk.
enum Label : uint8_t { kNormal = 0, kAnomaly = 1, kIgnore = 2 };

struct LobSnapshot {
  int levels = 0;
  // Index 0 is level 1 (the touch). A volume of 0 marks missing depth; its
  // price is still kept strictly monotone so the 4*l shape is preserved.
  std::vector<int64_t> ask_price, ask_volume, bid_price, bid_volume;
  int64_t time_ns = 0;

  static LobSnapshot empty(int levels) {
    LobSnapshot s;
    s.levels = levels;
    s.ask_price.resize(levels);
    s.ask_volume.resize(levels);
    s.bid_price.resize(levels);
    s.bid_volume.resize(levels);
    return s;
  }

  int64_t best_bid() const { return bid_price[0]; }
  int64_t best_ask() const { return ask_price[0]; }
  double mid() const { return 0.5 * static_cast<double>(best_bid() + best_ask()); }
  int64_t spread() const { return best_ask() - best_bid(); }

  // Returns an empty string when all ordering/sign invariants hold, else a
  // description of the first violation (callers attach row context).
  std::string check() const {
    if (levels <= 0) return "levels must be positive";
    for (int i = 0; i < levels; ++i) {
      if (ask_volume[i] < 0 || bid_volume[i] < 0) {
        return "negative volume at level " + std::to_string(i + 1);
      }
      if (i > 0 && ask_price[i] <= ask_price[i - 1]) {
        return "ask prices not strictly increasing at level " + std::to_string(i + 1);
      }
      if (i > 0 && bid_price[i] >= bid_price[i - 1]) {
        return "bid prices not strictly decreasing at level " + std::to_string(i + 1);
      }
    }
    if (bid_price[0] >= ask_price[0]) return "spread not positive";
    return {};
  }

  bool operator==(const LobSnapshot&) const = default;
};

struct TradeEvent {
  int64_t time_ns = 0;
  EventKind kind = EventKind::submission;
  int64_t order_id = 0;
  int64_t size = 0;
  int64_t price = 0;
  Side side = Side::buy;

  bool operator==(const TradeEvent&) const = default;
};

// One injected spoofing episode; `end` inclusive. `levels[k]` is the level
// occupied at step start+k, `volume` the phantom shares added per step.
struct AnomalySpan {
  int64_t start = 0;
  int64_t end = 0;
  BookSide side = BookSide::bid;
  std::vector<int> levels;
  int64_t volume = 0;

  bool operator==(const AnomalySpan&) const = default;
};

struct LabeledSeries {
  std::vector<LobSnapshot> snapshots;
  std::vector<TradeEvent> events;
  std::vector<uint8_t> labels;  // aligned with snapshots
  std::vector<AnomalySpan> spans;

  size_t size() const { return snapshots.size(); }

  std::string check() const {
    if (labels.size() != snapshots.size()) return "labels/snapshots length mismatch";
    for (size_t i = 1; i < snapshots.size(); ++i) {
      if (snapshots[i].time_ns < snapshots[i - 1].time_ns) {
        return "snapshot times decrease at row " + std::to_string(i);
      }
    }
    std::vector<uint8_t> covered(snapshots.size(), 0);
    for (const auto& sp : spans) {
      if (sp.start > sp.end || sp.start < 0 ||
          sp.end >= static_cast<int64_t>(snapshots.size())) {
        return "span out of range";
      }
      for (int64_t t = sp.start; t <= sp.end; ++t) covered[t] = 1;
    }
    for (size_t i = 0; i < labels.size(); ++i) {
      if ((labels[i] == kAnomaly) != (covered[i] == 1)) {
        return "label/span mismatch at row " + std::to_string(i);
      }
    }
    return {};
  }
};

namespace detail {

inline int64_t parse_int(std::string_view field, size_t line_no, const char* what) {
  int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad integer " +
                     std::string(what) + " '" + std::string(field) + "'");
  }
  return value;
}

// "34200.004241176" -> nanoseconds after midnight. LOBSTER carries at most
// nine fractional digits; anything beyond is rejected rather than rounded.
inline int64_t parse_time_ns(std::string_view field, size_t line_no) {
  size_t dot = field.find('.');
  std::string_view whole = field.substr(0, dot);
  int64_t secs = parse_int(whole, line_no, "time");
  if (secs < 0) throw ValidationError("line " + std::to_string(line_no) + ": negative time");
  int64_t frac = 0;
  if (dot != std::string_view::npos) {
    std::string_view digits = field.substr(dot + 1);
    if (digits.empty() || digits.size() > 9) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": time must have 1..9 fractional digits");
    }
    frac = parse_int(digits, line_no, "time fraction");
    for (size_t i = digits.size(); i < 9; ++i) frac *= 10;
  }
  return secs * 1000000000LL + frac;
}

inline std::string format_time_ns(int64_t t) {
  int64_t secs = t / 1000000000LL;
  int64_t frac = t % 1000000000LL;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%09lld", static_cast<long long>(secs),
                static_cast<long long>(frac));
  return buf;
}

inline void split_csv(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Missing depth arrives from LOBSTER as duplicate extreme dummy prices with
// volume 0. Rewrite each volume-0 tail level to one tick beyond its
// predecessor so the stored book stays strictly monotone; live levels after a
// missing one are rejected. Idempotent on already-canonical snapshots, so
// valid files still round-trip byte-exactly.
inline void canonicalize_placeholders(LobSnapshot& s, size_t line_no) {
  bool ask_missing = false, bid_missing = false;
  for (int i = 0; i < s.levels; ++i) {
    if (s.ask_volume[i] == 0) {
      s.ask_price[i] = i > 0 ? s.ask_price[i - 1] + 1
                             : (s.bid_volume[0] > 0 ? s.bid_price[0] + 1 : 1);
      ask_missing = true;
    } else if (ask_missing) {
      throw ValidationError("line " + std::to_string(line_no) + ": live ask level " +
                            std::to_string(i + 1) + " after missing depth");
    }
    if (s.bid_volume[i] == 0) {
      s.bid_price[i] = i > 0 ? s.bid_price[i - 1] - 1
                             : (s.ask_volume[0] > 0 ? s.ask_price[0] - 1 : -1);
      bid_missing = true;
    } else if (bid_missing) {
      throw ValidationError("line " + std::to_string(line_no) + ": live bid level " +
                            std::to_string(i + 1) + " after missing depth");
    }
  }
}

}  // namespace detail

// LOBSTER orderbook CSV: per row 4*levels integers in the order
// ask_price_1, ask_size_1, bid_price_1, bid_size_1, ... Timestamps are not
// part of this file; they default to the row index (in seconds) and are
// replaced when a message file is attached.
inline std::vector<LobSnapshot> parse_orderbook_file(std::istream& in, int levels) {
  if (levels <= 0) throw ConfigError("parse_orderbook_file: levels must be positive");
  std::vector<LobSnapshot> out;
  std::string line;
  size_t line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::strip_cr(line);
    if (sv.empty()) continue;
    detail::split_csv(sv, fields);
    if (fields.size() != static_cast<size_t>(4 * levels)) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(4 * levels) + " columns, got " +
                       std::to_string(fields.size()));
    }
    LobSnapshot s = LobSnapshot::empty(levels);
    for (int i = 0; i < levels; ++i) {
      s.ask_price[i] = detail::parse_int(fields[4 * i + 0], line_no, "ask price");
      s.ask_volume[i] = detail::parse_int(fields[4 * i + 1], line_no, "ask size");
      s.bid_price[i] = detail::parse_int(fields[4 * i + 2], line_no, "bid price");
      s.bid_volume[i] = detail::parse_int(fields[4 * i + 3], line_no, "bid size");
    }
    s.time_ns = static_cast<int64_t>(out.size()) * 1000000000LL;
    detail::canonicalize_placeholders(s, line_no);
    if (std::string err = s.check(); !err.empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + err);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// LOBSTER message CSV: time, type, order_id, size, price, direction.
inline std::vector<TradeEvent> parse_message_file(std::istream& in) {
  std::vector<TradeEvent> out;
  std::string line;
  size_t line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::strip_cr(line);
    if (sv.empty()) continue;
    detail::split_csv(sv, fields);
    if (fields.size() != 6) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 6 columns, got " +
                       std::to_string(fields.size()));
    }
    TradeEvent ev;
    ev.time_ns = detail::parse_time_ns(fields[0], line_no);
    int64_t type = detail::parse_int(fields[1], line_no, "type");
    switch (type) {
      case 1: ev.kind = EventKind::submission; break;
      case 2: ev.kind = EventKind::partial_cancel; break;
      case 3: ev.kind = EventKind::full_delete; break;
      case 4: ev.kind = EventKind::execute_visible; break;
      case 5: ev.kind = EventKind::execute_hidden; break;
      case 7: ev.kind = EventKind::halt; break;
      default:
        throw ParseError("line " + std::to_string(line_no) + ": unknown event kind " +
                         std::to_string(type));
    }
    ev.order_id = detail::parse_int(fields[2], line_no, "order_id");
    ev.size = detail::parse_int(fields[3], line_no, "size");
    if (ev.size < 0) {
      throw ValidationError("line " + std::to_string(line_no) + ": negative size");
    }
    ev.price = detail::parse_int(fields[4], line_no, "price");
    int64_t dir = detail::parse_int(fields[5], line_no, "direction");
    if (dir != 1 && dir != -1) {
      throw ParseError("line " + std::to_string(line_no) + ": direction must be 1 or -1");
    }
    ev.side = dir == 1 ? Side::buy : Side::sell;
    if (!out.empty() && ev.time_ns < out.back().time_ns) {
      throw ValidationError("line " + std::to_string(line_no) + ": event times decrease");
    }
    out.push_back(ev);
  }
  return out;
}

inline void write_orderbook_file(const std::vector<LobSnapshot>& series, std::ostream& out) {
  for (size_t row = 0; row < series.size(); ++row) {
    const LobSnapshot& s = series[row];
    if (s.levels != series[0].levels) {
      throw ValidationError("write_orderbook_file: mixed level counts at row " +
                            std::to_string(row));
    }
    for (int i = 0; i < s.levels; ++i) {
      if (i) out << ',';
      out << s.ask_price[i] << ',' << s.ask_volume[i] << ',' << s.bid_price[i] << ','
          << s.bid_volume[i];
    }
    out << '\n';
  }
}

inline void write_message_file(const std::vector<TradeEvent>& events, std::ostream& out) {
  for (const TradeEvent& e : events) {
    out << detail::format_time_ns(e.time_ns) << ',' << static_cast<int>(e.kind) << ','
        << e.order_id << ',' << e.size << ',' << e.price << ',' << static_cast<int>(e.side)
        << '\n';
  }
}

// Pairs an orderbook file with its message file: rows must match 1:1 and the
// snapshot timestamps are taken from the messages.
inline void attach_message_times(std::vector<LobSnapshot>& snapshots,
                                 const std::vector<TradeEvent>& events) {
  if (snapshots.size() != events.size()) {
    throw ValidationError("orderbook rows (" + std::to_string(snapshots.size()) +
                          ") != message rows (" + std::to_string(events.size()) + ")");
  }
  for (size_t i = 0; i < snapshots.size(); ++i) snapshots[i].time_ns = events[i].time_ns;
}

// Sidecar labels file: one 0/1 per orderbook row.
inline void write_labels_file(const std::vector<uint8_t>& labels, std::ostream& out) {
  for (uint8_t l : labels) out << static_cast<int>(l) << '\n';
}

inline std::vector<uint8_t> parse_labels_file(std::istream& in) {
  std::vector<uint8_t> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::strip_cr(line);
    if (sv.empty()) continue;
    if (sv == "0") {
      out.push_back(0);
    } else if (sv == "1") {
      out.push_back(1);
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
  }
  return out;
}

// Sidecar anomaly spans, one JSON object per line:
// {"start":..,"end":..,"side":"bid","levels":[..],"volume":..}
inline void write_spans_file(const std::vector<AnomalySpan>& spans, std::ostream& out) {
  for (const AnomalySpan& sp : spans) {
    nlohmann::json j;
    j["start"] = sp.start;
    j["end"] = sp.end;
    j["side"] = to_string(sp.side);
    j["levels"] = sp.levels;
    j["volume"] = sp.volume;
    out << j.dump() << '\n';
  }
}

inline std::vector<AnomalySpan> parse_spans_file(std::istream& in) {
  std::vector<AnomalySpan> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    AnomalySpan sp;
    sp.start = j.at("start").get<int64_t>();
    sp.end = j.at("end").get<int64_t>();
    std::string side = j.at("side").get<std::string>();
    if (side == "bid") {
      sp.side = BookSide::bid;
    } else if (side == "ask") {
      sp.side = BookSide::ask;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": side must be bid or ask");
    }
    sp.levels = j.at("levels").get<std::vector<int>>();
    sp.volume = j.at("volume").get<int64_t>();
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace loblab
