#pragma once

#include <span>

#include "asyncev/event_model/types.hpp"

namespace asyncev {

/// Half-open-on-the-left time window (begin, end].
struct TimeWindow {
  Timestamp begin = 0;
  Timestamp end = 0;

  bool contains(Timestamp t) const { return t > begin && t <= end; }
};

inline void check_window(const TimeWindow& window) {
  if (!(window.end > window.begin)) throw InvalidInput("accumulation window must have positive length");
}

/// Synchronous event frame: per-pixel sum of polarities inside the window.
inline CountImage accumulate_event_frame(std::span<const Event> events, const TimeWindow& window, int width,
                                         int height) {
  check_window(window);
  CountImage img(width, height);
  for (const auto& e : events) {
    if (!window.contains(e.t)) continue;
    validate_event(e, width, height);
    img.at(e.x, e.y) += e.p;
  }
  return img;
}

struct SplitHistograms {
  CountImage positive;
  CountImage negative;

  /// h+ - h-
  CountImage difference() const {
    CountImage d(positive.width, positive.height);
    for (std::size_t i = 0; i < d.counts.size(); ++i) d.counts[i] = positive.counts[i] - negative.counts[i];
    return d;
  }
};

/// Separate per-pixel counts of positive and negative events in the window.
inline SplitHistograms accumulate_split_histograms(std::span<const Event> events, const TimeWindow& window,
                                                   int width, int height) {
  check_window(window);
  SplitHistograms h{CountImage(width, height), CountImage(width, height)};
  for (const auto& e : events) {
    if (!window.contains(e.t)) continue;
    validate_event(e, width, height);
    (e.p > 0 ? h.positive : h.negative).at(e.x, e.y) += 1;
  }
  return h;
}

}  // namespace asyncev
