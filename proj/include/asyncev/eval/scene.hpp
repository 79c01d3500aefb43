#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "asyncev/event_model/simulator.hpp"
#include "asyncev/nn/param_set.hpp"

namespace asyncev::eval {

enum class ScheduleKind { zero, constant, step, sine, random };

inline std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::zero: return "zero";
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::step: return "step";
    case ScheduleKind::sine: return "sine";
    case ScheduleKind::random: return "random";
  }
  return "?";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "zero") return ScheduleKind::zero;
  if (s == "constant") return ScheduleKind::constant;
  if (s == "step") return ScheduleKind::step;
  if (s == "sine") return ScheduleKind::sine;
  if (s == "random") return ScheduleKind::random;
  throw ConfigError("unknown curvature schedule '" + s + "'");
}

/// Road curvature over time, expressed directly as the steering angle in
/// degrees that follows the road at each frame.
struct CurvatureSchedule {
  ScheduleKind kind = ScheduleKind::random;
  double value = 0.0;          // constant
  std::size_t step_frame = 0;  // step: angle is `after` from this frame on
  double before = 0.0;
  double after = 0.0;
  double amplitude = 10.0;     // sine, random
  double period = 16.0;        // sine, in frames
  double phase = 0.0;          // sine, radians
  int knot_spacing = 1;        // random: frames between independent knots

  void validate() const {
    if (kind == ScheduleKind::sine && !(period > 0.0)) throw ConfigError("sine schedule period must be positive");
    if (kind == ScheduleKind::random && knot_spacing <= 0) throw ConfigError("random schedule knot_spacing must be positive");
    if (!(amplitude >= 0.0)) throw ConfigError("schedule amplitude must be non-negative");
  }

  /// Angle at a (possibly fractional) time measured in frames. `knots` are the
  /// random-schedule knot values from draw_knots.
  double angle_at(double frame, const std::vector<double>& knots) const {
    switch (kind) {
      case ScheduleKind::zero:
        return 0.0;
      case ScheduleKind::constant:
        return value;
      case ScheduleKind::step:
        return frame < static_cast<double>(step_frame) ? before : after;
      case ScheduleKind::sine:
        return amplitude * std::sin(6.283185307179586 * frame / period + phase);
      case ScheduleKind::random: {
        // cosine interpolation between independent uniform knots
        const double pos = std::max(0.0, frame) / static_cast<double>(knot_spacing);
        const auto j = std::min(static_cast<std::size_t>(pos), knots.size() - 2);
        const double f = std::min(1.0, pos - static_cast<double>(j));
        const double w = 0.5 - 0.5 * std::cos(3.141592653589793 * f);
        return knots[j] * (1.0 - w) + knots[j + 1] * w;
      }
    }
    return 0.0;
  }

  std::vector<double> draw_knots(std::size_t frames, nn::Rng& rng) const {
    if (kind != ScheduleKind::random) return {};
    std::vector<double> knots(frames / static_cast<std::size_t>(knot_spacing) + 2);
    for (auto& k : knots) k = rng.uniform(-amplitude, amplitude);
    return knots;
  }

  /// Angles at integer frame times.
  std::vector<double> angles(std::size_t frames, nn::Rng& rng) const {
    const auto knots = draw_knots(frames, rng);
    std::vector<double> out(frames);
    for (std::size_t i = 0; i < frames; ++i) out[i] = angle_at(static_cast<double>(i), knots);
    return out;
  }
};

struct SceneConfig {
  int width = 64;
  int height = 48;
  std::size_t frames = 8;
  Timestamp frame_interval = 10;
  int substeps = 10;               // event-rendering steps per frame interval (must divide it)
  CurvatureSchedule schedule;
  double pixels_per_degree = 0.3;  // horizontal image shift per frame per degree of steering
  double horizon = 0.4;            // fraction of rows above the horizon
  double brightness = 1.0;         // global illumination factor
  double road_half_width = 20.0;   // in bottom-row pixels
  double lateral_jitter = 4.0;     // max random lateral offset of the road at frame 0, pixels
  double texture_amplitude = 0.08;
  double noise_amplitude = 0.0;    // per-frame pixel noise
  int cloud_count = 3;
  double cloud_amplitude = 0.25;
  double cloud_drift = 1.5;        // max cloud speed, pixels per frame
  double cloud_flicker = 0.6;      // relative brightness modulation of clouds
  double threshold = 0.2;          // event contrast threshold C
  std::uint64_t seed = 1;

  void validate() const {
    if (width < 8 || height < 8) throw ConfigError("scene resolution must be at least 8x8");
    if (frames < 2) throw ConfigError("scene needs at least two frames");
    if (frame_interval <= 0) throw ConfigError("frame_interval must be positive");
    if (substeps <= 0 || frame_interval % substeps != 0) throw ConfigError("substeps must divide frame_interval");
    if (!(horizon > 0.0 && horizon < 1.0)) throw ConfigError("horizon must lie in (0, 1)");
    if (!(brightness > 0.0)) throw ConfigError("brightness must be positive");
    if (!(road_half_width > 0.0)) throw ConfigError("road_half_width must be positive");
    if (cloud_count < 0) throw ConfigError("cloud_count must be non-negative");
    for (double v : {pixels_per_degree, lateral_jitter, texture_amplitude, noise_amplitude, cloud_amplitude, cloud_drift,
                     cloud_flicker}) {
      if (!(v >= 0.0)) throw ConfigError("scene amplitudes must be non-negative");
    }
    if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");
    schedule.validate();
  }
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Smooth value noise in [-1, 1] on a lattice of the given spacing.
class ValueNoise {
public:
  ValueNoise(std::uint64_t seed, double spacing) : seed_(seed), spacing_(spacing) {}

  double operator()(double x, double y) const {
    const double gx = x / spacing_, gy = y / spacing_;
    const double fx = std::floor(gx), fy = std::floor(gy);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double sx = smooth(gx - fx), sy = smooth(gy - fy);
    const double a = lattice(ix, iy), b = lattice(ix + 1, iy);
    const double c = lattice(ix, iy + 1), d = lattice(ix + 1, iy + 1);
    return (a * (1 - sx) + b * sx) * (1 - sy) + (c * (1 - sx) + d * sx) * sy;
  }

private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

  double lattice(std::int64_t x, std::int64_t y) const {
    const std::uint64_t h = splitmix(seed_ ^ splitmix(static_cast<std::uint64_t>(x) * 0x632be59bd9b4e019ULL +
                                                      static_cast<std::uint64_t>(y)));
    return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
  }

  std::uint64_t seed_;
  double spacing_;
};

struct Cloud {
  double x0, y, radius, amplitude, speed, omega, phi;
};

}  // namespace detail

/*
 * Renders a road scene seen from a car and simulates its event stream.
 *
 * The ground below the horizon is dark grass on the left, a mid-gray road with
 * a bright centre marking, and a light shoulder on the right, in perspective.
 * Steering at angle a(t) turns the view horizontally at pixels_per_degree * a(t)
 * pixels per frame interval; positive angles (right turns) move the view to
 * the left. The sky carries a static vertical gradient and drifting,
 * flickering cloud blobs as distractors.
 *
 * The scene is rendered `substeps` times per frame interval and the events are
 * simulated from those renders, so event timestamps follow the motion inside a
 * gap while gray-scale frames are only delivered every frame_interval. The
 * angle keeps changing inside a gap; the label of frame i is a(i).
 *
 * All renders are quantized to 8-bit levels so frames survive PGM storage.
 */
inline Sequence generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  nn::Rng schedule_rng(detail::splitmix(cfg.seed * 4 + 0));
  nn::Rng layout_rng(detail::splitmix(cfg.seed * 4 + 1));
  nn::Rng noise_rng(detail::splitmix(cfg.seed * 4 + 2));
  const detail::ValueNoise texture(detail::splitmix(cfg.seed * 4 + 3), 2.5);

  Sequence seq;
  seq.width = cfg.width;
  seq.height = cfg.height;
  seq.frame_interval = cfg.frame_interval;
  seq.seed = cfg.seed;
  const auto knots = cfg.schedule.draw_knots(cfg.frames, schedule_rng);
  for (std::size_t i = 0; i < cfg.frames; ++i) seq.angles.push_back(cfg.schedule.angle_at(static_cast<double>(i), knots));

  const double W = cfg.width, H = cfg.height;
  const double horizon = std::round(cfg.horizon * H);
  const double x0 = cfg.lateral_jitter > 0.0 ? layout_rng.uniform(-cfg.lateral_jitter, cfg.lateral_jitter) : 0.0;

  std::vector<detail::Cloud> clouds(static_cast<std::size_t>(cfg.cloud_count));
  for (auto& c : clouds) {
    c.x0 = layout_rng.uniform(0.0, W);
    c.y = layout_rng.uniform(1.0, std::max(1.0, horizon - 1.0));
    c.radius = layout_rng.uniform(3.0, 7.0);
    c.amplitude = layout_rng.uniform(0.5, 1.0) * cfg.cloud_amplitude;
    c.speed = layout_rng.uniform(-cfg.cloud_drift, cfg.cloud_drift);
    c.omega = layout_rng.uniform(0.5, 2.0);
    c.phi = layout_rng.uniform(0.0, 6.283185307179586);
  }

  const double grass = 0.12, road = 0.42, marking = 0.85, shoulder = 0.72;
  auto ground = [&](double x, double y, double shift) {
    const double depth = (y - horizon) / (H - horizon);
    const double u = (x - 0.5 * W - shift) / depth;
    double v;
    if (u < -cfg.road_half_width) {
      v = grass;
    } else if (u >= cfg.road_half_width) {
      v = shoulder;
    } else if (std::abs(u) < 1.5) {
      v = marking;
    } else {
      v = road;
    }
    return v * (1.0 + cfg.texture_amplitude * texture(x - shift, y));
  };
  auto sky = [&](double x, double y, double time, double shift) {
    double v = 0.9 - 0.25 * y / horizon;
    const double wrap = W + 16.0;
    for (const auto& c : clouds) {
      const double cx = c.x0 + c.speed * time + shift;
      double dx = std::fmod(x - cx, wrap);
      if (dx < -0.5 * wrap) dx += wrap;
      if (dx > 0.5 * wrap) dx -= wrap;
      const double dy = y - c.y;
      const double sigma = 0.5 * c.radius;
      const double level = c.amplitude * (1.0 + cfg.cloud_flicker * std::sin(c.omega * time + c.phi));
      v -= level * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
    return v;
  };
  // time in frame units, shift in pixels
  auto render = [&](double time, double shift) {
    Image img;
    img.width = cfg.width;
    img.height = cfg.height;
    img.pixels.resize(static_cast<std::size_t>(cfg.width) * cfg.height);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        double acc = 0.0;
        for (double sy : {0.25, 0.75}) {
          for (double sx : {0.25, 0.75}) {
            const double px = x + sx, py = y + sy;
            acc += py < horizon ? sky(px, py, time, shift) : ground(px, py, shift);
          }
        }
        double v = cfg.brightness * acc / 4.0;
        if (cfg.noise_amplitude > 0.0) v += noise_rng.uniform(-cfg.noise_amplitude, cfg.noise_amplitude);
        v = std::clamp(v, 0.0, 1.0);
        img.pixels[static_cast<std::size_t>(y) * cfg.width + x] = std::round(v * 255.0) / 255.0;
      }
    }
    return img;
  };

  const auto steps = static_cast<std::size_t>(cfg.substeps);
  const Timestamp dt = cfg.frame_interval / cfg.substeps;
  const std::size_t renders = (cfg.frames - 1) * steps + 1;
  std::vector<Image> fine;
  std::vector<Timestamp> times;
  fine.reserve(renders);
  double shift = x0;
  for (std::size_t g = 0; g < renders; ++g) {
    const double time = static_cast<double>(g) / static_cast<double>(steps);
    if (g > 0) shift -= cfg.pixels_per_degree * cfg.schedule.angle_at(time, knots) / static_cast<double>(steps);
    fine.push_back(render(time, shift));
    times.push_back(static_cast<Timestamp>(g) * dt);
    if (g % steps == 0) seq.frames.push_back(fine.back());
  }

  SimulatorConfig sim;
  sim.threshold = cfg.threshold;
  seq.events = simulate_events(fine, sim, times);
  return seq;
}

}  // namespace asyncev::eval
