#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "asyncev/event_model/types.hpp"

namespace asyncev {

/// Number of events a log-intensity change of `delta` produces at threshold C.
/// Strictly above C is required for the first event.
inline int threshold_crossings(double delta, double threshold) {
  const double mag = std::abs(delta);
  if (!(mag > threshold)) return 0;
  return static_cast<int>(std::floor(mag / threshold));
}

/// Timestamp of the k-th (1-based) of n events emitted in the gap (t0, t1].
/// Events sit at k/(n+1) of the gap, rounded up to the integer clock so that
/// every event lands strictly after t0.
inline Timestamp interpolated_time(Timestamp t0, Timestamp t1, int k, int n) {
  const Timestamp gap = t1 - t0;
  const Timestamp num = static_cast<Timestamp>(k) * gap;
  const Timestamp den = static_cast<Timestamp>(n) + 1;
  return t0 + (num + den - 1) / den;
}

/*
 * Idealized event camera driven by a sequence of intensity frames.
 *
 * Every pixel keeps a reference log intensity. When the log intensity of a new
 * frame differs from the reference by more than C, floor(|delta| / C) events of
 * polarity sign(delta) are emitted and the reference moves by that many
 * thresholds. With carry_residual off the reference is reset to the previous
 * frame for every pair.
 */
inline EventStream simulate_events(std::span<const Image> frames, const SimulatorConfig& config,
                                   std::span<const Timestamp> timestamps) {
  config.validate();
  if (frames.size() < 2) throw InvalidInput("simulate_events needs at least two frames");
  if (timestamps.size() != frames.size()) throw InvalidInput("one timestamp per frame is required");
  const int w = frames[0].width;
  const int h = frames[0].height;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.width != w || f.height != h || f.pixels.size() != static_cast<std::size_t>(w) * h) {
      throw InvalidInput("frame resolutions do not match");
    }
    for (double v : f.pixels) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("pixel values must lie in [0, 1]");
    }
    if (i > 0 && timestamps[i] <= timestamps[i - 1]) throw InvalidInput("frame timestamps must increase");
  }
  if (timestamps[0] < 0) throw InvalidInput("frame timestamps must be non-negative");

  auto log_of = [&](double v) { return std::log(v + config.intensity_floor); };

  std::vector<double> reference(frames[0].pixels.size());
  std::transform(frames[0].pixels.begin(), frames[0].pixels.end(), reference.begin(), log_of);

  EventStream out;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const Timestamp t0 = timestamps[i - 1];
    const Timestamp t1 = timestamps[i];
    EventStream gap_events;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        const double current = log_of(frames[i].pixels[idx]);
        if (!config.carry_residual) reference[idx] = log_of(frames[i - 1].pixels[idx]);
        const double delta = current - reference[idx];
        const int n = threshold_crossings(delta, config.threshold);
        const int p = delta > 0.0 ? 1 : -1;
        for (int k = 1; k <= n; ++k) gap_events.push_back({x, y, interpolated_time(t0, t1, k, n), p});
        if (config.carry_residual) {
          reference[idx] += p * n * config.threshold;
        } else {
          reference[idx] = current;
        }
      }
    }
    // generation order is row-major, so a stable sort breaks time ties by pixel
    std::stable_sort(gap_events.begin(), gap_events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    out.insert(out.end(), gap_events.begin(), gap_events.end());
  }
  return out;
}

}  // namespace asyncev
