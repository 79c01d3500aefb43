#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asyncev/event_model/types.hpp"

namespace asyncev {

/// Polarity grid of all events sharing one timestamp.
///
/// Stored column-major in image terms: entry (x, y) lives at x * height + y,
/// so row x of the matrix is image column x. This is the layout the event
/// feature extractor multiplies against its height-indexed parameters.
struct EventMatrix {
  int width = 0;
  int height = 0;
  Timestamp t = 0;
  std::vector<std::int8_t> data;

  EventMatrix() = default;
  EventMatrix(int w, int h, Timestamp ts)
      : width(w), height(h), t(ts), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  std::int8_t at(int x, int y) const { return data[static_cast<std::size_t>(x) * height + y]; }
  std::int8_t& at(int x, int y) { return data[static_cast<std::size_t>(x) * height + y]; }

  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }

  /// Nonzero entries read back as events, ordered by (x, y).
  EventStream to_events() const {
    EventStream out;
    for (int x = 0; x < width; ++x) {
      for (int y = 0; y < height; ++y) {
        if (const int p = at(x, y); p != 0) out.push_back({x, y, t, p});
      }
    }
    return out;
  }
};

/// Builds the polarity matrix of events that share a timestamp. When two
/// events hit the same pixel the later one in stream order wins.
inline EventMatrix build_event_matrix(std::span<const Event> events_at_t, int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidInput("event matrix resolution must be positive");
  const Timestamp t = events_at_t.empty() ? 0 : events_at_t.front().t;
  EventMatrix m(width, height, t);
  for (const auto& e : events_at_t) {
    validate_event(e, width, height);
    if (e.t != t) throw InvalidInput("build_event_matrix: events do not share one timestamp");
    m.at(e.x, e.y) = static_cast<std::int8_t>(e.p);
  }
  return m;
}

/// A run of events belonging to one (possibly coarsened) timestamp bin.
struct TimestampGroup {
  Timestamp t = 0;  // bin key: original t divided by the bin width
  std::span<const Event> events;
};

/// Splits a time-ordered stream into runs of identical timestamp bins.
/// With bin_width = 1 each run is exactly one distinct timestamp.
inline std::vector<TimestampGroup> group_by_timestamp(std::span<const Event> events, Timestamp bin_width = 1) {
  if (bin_width <= 0) throw ConfigError("timestamp bin width must be positive");
  std::vector<TimestampGroup> groups;
  std::size_t begin = 0;
  while (begin < events.size()) {
    const Timestamp key = events[begin].t / bin_width;
    std::size_t end = begin + 1;
    while (end < events.size() && events[end].t / bin_width == key) ++end;
    groups.push_back({key, events.subspan(begin, end - begin)});
    begin = end;
  }
  return groups;
}

/// Like build_event_matrix but accepts events whose raw timestamps differ
/// inside one bin; the matrix carries the bin key as its timestamp.
inline EventMatrix build_binned_event_matrix(const TimestampGroup& group, int width, int height) {
  EventMatrix m(width, height, group.t);
  for (const auto& e : group.events) {
    validate_event(e, width, height);
    m.at(e.x, e.y) = static_cast<std::int8_t>(e.p);
  }
  return m;
}

}  // namespace asyncev
