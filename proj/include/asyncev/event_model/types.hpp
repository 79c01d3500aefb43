#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "asyncev/errors.hpp"

namespace asyncev {

/// Timestamps are integer microseconds.
using Timestamp = std::int64_t;

/// One asynchronous sensor output.
struct Event {
  int x = 0;  // column, 0 <= x < width
  int y = 0;  // row, 0 <= y < height
  Timestamp t = 0;
  int p = 1;  // polarity, exactly -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

using EventStream = std::vector<Event>;

/// Gray-scale image, row-major, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Per-pixel integer image (event counts, signed sums). Row-major.
struct CountImage {
  int width = 0;
  int height = 0;
  std::vector<int> counts;

  CountImage() = default;
  CountImage(int w, int h)
      : width(w), height(h), counts(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  int& at(int x, int y) { return counts[static_cast<std::size_t>(y) * width + x]; }
  int at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const CountImage&, const CountImage&) = default;
};

struct SimulatorConfig {
  double threshold = 0.2;               // contrast threshold C, log-intensity units
  double intensity_floor = 1.0 / 255.0; // added before taking logarithms
  bool carry_residual = true;           // sub-threshold change persists across frame pairs

  void validate() const {
    if (!(threshold > 0.0)) throw ConfigError("simulator threshold must be positive");
    if (!(intensity_floor > 0.0)) throw ConfigError("simulator intensity_floor must be positive");
  }
};

/// Aligned frames, ground-truth angles and the event stream between frames.
///
/// Frame i is captured at timestamp i * frame_interval. The events that belong
/// to the gap ending at frame i+1 are those with t in (t_i, t_{i+1}].
struct Sequence {
  int width = 0;
  int height = 0;
  Timestamp frame_interval = 10;
  std::vector<Image> frames;
  std::vector<double> angles;  // degrees, one per frame
  EventStream events;
  std::uint64_t seed = 0;      // scene seed, used for dataset splits

  Timestamp frame_time(std::size_t i) const { return static_cast<Timestamp>(i) * frame_interval; }

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

inline void validate_event(const Event& e, int width, int height) {
  if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
    throw InvalidInput("event (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                       ") outside " + std::to_string(width) + "x" + std::to_string(height));
  }
  if (e.p != 1 && e.p != -1) throw InvalidInput("event polarity must be -1 or +1");
  if (e.t < 0) throw InvalidInput("event timestamp must be non-negative");
}

inline void validate_stream(const EventStream& events, int width, int height) {
  Timestamp last = 0;
  for (const auto& e : events) {
    validate_event(e, width, height);
    if (e.t < last) throw InvalidInput("event stream is not time-ordered");
    last = e.t;
  }
}

inline void validate_sequence(const Sequence& seq) {
  if (seq.width <= 0 || seq.height <= 0) throw InvalidInput("sequence resolution must be positive");
  if (seq.frame_interval <= 0) throw InvalidInput("frame_interval must be positive");
  if (seq.frames.size() != seq.angles.size()) {
    throw InvalidInput("sequence has " + std::to_string(seq.frames.size()) + " frames but " +
                       std::to_string(seq.angles.size()) + " angles");
  }
  for (const auto& f : seq.frames) {
    if (f.width != seq.width || f.height != seq.height) throw InvalidInput("frame resolution differs from sequence");
  }
  validate_stream(seq.events, seq.width, seq.height);
  if (!seq.events.empty() && !seq.frames.empty()) {
    const Timestamp end = seq.frame_time(seq.frames.size() - 1);
    if (seq.events.back().t > end) throw InvalidInput("event timestamp beyond the last frame");
  }
}

}  // namespace asyncev
