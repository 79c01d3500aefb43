#pragma once

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "asyncev/eval/benchmark.hpp"
#include "asyncev/event_model/io.hpp"

namespace asyncev::cli {

/*
 * Everything a command needs, settable from a key=value file and from
 * command-line overrides. Keys:
 *
 *   model      width height channels q hidden attention_hidden mask_hidden
 *              regressor_channels residual_blocks time_bin model
 *   scene      Z frames substeps scenes schedule amplitude value step_frame
 *              before after period phase knot_spacing pixels_per_degree
 *              horizon brightness road_half_width lateral_jitter
 *              texture_amplitude noise_amplitude cloud_count cloud_amplitude
 *              cloud_drift cloud_flicker threshold
 *   training   lr beta1 beta2 epsilon epochs batch_size teacher_forcing seed
 *              workers
 *   benchmark  bench_sequences bench_first_scene_seed bench_seeds
 *   paths      data checkpoint out
 *
 * `seed` is the first scene seed for simulate and the initialization and
 * shuffle seed for train.
 */
struct RunConfig {
  pipeline::ModelConfig model;
  eval::SceneConfig scene;
  eval::TrainConfig train;
  eval::ModelKind kind = eval::ModelKind::asynchronous;
  std::uint64_t seed = 1;
  std::size_t scenes = 1;
  std::size_t bench_sequences = 286;
  std::uint64_t bench_first_scene_seed = 1000;
  std::vector<std::uint64_t> bench_seeds = {1, 2, 3};
  std::string data, checkpoint, out;

  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_key_values() const;

  void validate() const {
    model.validate();
    scene.validate();
    train.validate();
    if (scene.width != model.width || scene.height != model.height) throw ConfigError("scene and model resolutions differ");
    if (scenes == 0) throw ConfigError("scenes must be positive");
    if (bench_seeds.empty()) throw ConfigError("bench_seeds must list at least one seed");
  }

  eval::BenchmarkConfig benchmark() const {
    eval::BenchmarkConfig b;
    b.scene = scene;
    b.model = model;
    b.train = train;
    b.sequences = bench_sequences;
    b.first_scene_seed = bench_first_scene_seed;
    b.model_seeds = bench_seeds;
    return b;
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::string fmt(double v) { return io::format_double(v); }

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T, class Field>
Setter number(Field field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = parse_number<T>(k, v); };
}

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    // resolution is shared by scene and model
    t["width"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.width = c.scene.width = parse_number<int>(k, v); };
    t["height"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.model.height = c.scene.height = parse_number<int>(k, v); };
    t["channels"] = number<int>([](RunConfig& c) -> int& { return c.model.channels; });
    t["q"] = number<int>([](RunConfig& c) -> int& { return c.model.q; });
    t["hidden"] = number<int>([](RunConfig& c) -> int& { return c.model.hidden; });
    t["attention_hidden"] = number<int>([](RunConfig& c) -> int& { return c.model.attention_hidden; });
    t["mask_hidden"] = number<int>([](RunConfig& c) -> int& { return c.model.mask_hidden; });
    t["regressor_channels"] = number<int>([](RunConfig& c) -> int& { return c.model.regressor_channels; });
    t["residual_blocks"] = number<int>([](RunConfig& c) -> int& { return c.model.residual_blocks; });
    t["time_bin"] = number<Timestamp>([](RunConfig& c) -> Timestamp& { return c.model.time_bin; });
    t["model"] = [](RunConfig& c, const std::string&, const std::string& v) { c.kind = eval::parse_model_kind(v); };

    t["Z"] = number<Timestamp>([](RunConfig& c) -> Timestamp& { return c.scene.frame_interval; });
    t["frames"] = number<std::size_t>([](RunConfig& c) -> std::size_t& { return c.scene.frames; });
    t["substeps"] = number<int>([](RunConfig& c) -> int& { return c.scene.substeps; });
    t["scenes"] = number<std::size_t>([](RunConfig& c) -> std::size_t& { return c.scenes; });
    t["schedule"] = [](RunConfig& c, const std::string&, const std::string& v) { c.scene.schedule.kind = eval::parse_schedule_kind(v); };
    t["amplitude"] = number<double>([](RunConfig& c) -> double& { return c.scene.schedule.amplitude; });
    t["value"] = number<double>([](RunConfig& c) -> double& { return c.scene.schedule.value; });
    t["step_frame"] = number<std::size_t>([](RunConfig& c) -> std::size_t& { return c.scene.schedule.step_frame; });
    t["before"] = number<double>([](RunConfig& c) -> double& { return c.scene.schedule.before; });
    t["after"] = number<double>([](RunConfig& c) -> double& { return c.scene.schedule.after; });
    t["period"] = number<double>([](RunConfig& c) -> double& { return c.scene.schedule.period; });
    t["phase"] = number<double>([](RunConfig& c) -> double& { return c.scene.schedule.phase; });
    t["knot_spacing"] = number<int>([](RunConfig& c) -> int& { return c.scene.schedule.knot_spacing; });
    t["pixels_per_degree"] = number<double>([](RunConfig& c) -> double& { return c.scene.pixels_per_degree; });
    t["horizon"] = number<double>([](RunConfig& c) -> double& { return c.scene.horizon; });
    t["brightness"] = number<double>([](RunConfig& c) -> double& { return c.scene.brightness; });
    t["road_half_width"] = number<double>([](RunConfig& c) -> double& { return c.scene.road_half_width; });
    t["lateral_jitter"] = number<double>([](RunConfig& c) -> double& { return c.scene.lateral_jitter; });
    t["texture_amplitude"] = number<double>([](RunConfig& c) -> double& { return c.scene.texture_amplitude; });
    t["noise_amplitude"] = number<double>([](RunConfig& c) -> double& { return c.scene.noise_amplitude; });
    t["cloud_count"] = number<int>([](RunConfig& c) -> int& { return c.scene.cloud_count; });
    t["cloud_amplitude"] = number<double>([](RunConfig& c) -> double& { return c.scene.cloud_amplitude; });
    t["cloud_drift"] = number<double>([](RunConfig& c) -> double& { return c.scene.cloud_drift; });
    t["cloud_flicker"] = number<double>([](RunConfig& c) -> double& { return c.scene.cloud_flicker; });
    t["threshold"] = number<double>([](RunConfig& c) -> double& { return c.scene.threshold; });

    t["lr"] = number<double>([](RunConfig& c) -> double& { return c.train.adam.learning_rate; });
    t["beta1"] = number<double>([](RunConfig& c) -> double& { return c.train.adam.beta1; });
    t["beta2"] = number<double>([](RunConfig& c) -> double& { return c.train.adam.beta2; });
    t["epsilon"] = number<double>([](RunConfig& c) -> double& { return c.train.adam.epsilon; });
    t["epochs"] = number<int>([](RunConfig& c) -> int& { return c.train.epochs; });
    t["batch_size"] = number<int>([](RunConfig& c) -> int& { return c.train.batch_size; });
    t["teacher_forcing"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.teacher_forcing = parse_bool(k, v); };
    t["seed"] = number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.seed; });
    t["workers"] = number<int>([](RunConfig& c) -> int& { return c.train.workers; });

    t["bench_sequences"] = number<std::size_t>([](RunConfig& c) -> std::size_t& { return c.bench_sequences; });
    t["bench_first_scene_seed"] = number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.bench_first_scene_seed; });
    t["bench_seeds"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.bench_seeds.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) c.bench_seeds.push_back(parse_number<std::uint64_t>(k, item));
    };

    t["data"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data = v; };
    t["checkpoint"] = [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; };
    t["out"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; };
    return t;
  }();
  return table;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& t = detail::setters();
  const auto it = t.find(key);
  if (it == t.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

inline std::map<std::string, std::string> RunConfig::to_key_values() const {
  using detail::fmt;
  std::map<std::string, std::string> m = {
      {"width", std::to_string(model.width)},
      {"height", std::to_string(model.height)},
      {"channels", std::to_string(model.channels)},
      {"q", std::to_string(model.q)},
      {"hidden", std::to_string(model.hidden)},
      {"attention_hidden", std::to_string(model.attention_hidden)},
      {"mask_hidden", std::to_string(model.mask_hidden)},
      {"regressor_channels", std::to_string(model.regressor_channels)},
      {"residual_blocks", std::to_string(model.residual_blocks)},
      {"time_bin", std::to_string(model.time_bin)},
      {"model", eval::to_string(kind)},
      {"Z", std::to_string(scene.frame_interval)},
      {"frames", std::to_string(scene.frames)},
      {"substeps", std::to_string(scene.substeps)},
      {"scenes", std::to_string(scenes)},
      {"schedule", eval::to_string(scene.schedule.kind)},
      {"amplitude", fmt(scene.schedule.amplitude)},
      {"value", fmt(scene.schedule.value)},
      {"step_frame", std::to_string(scene.schedule.step_frame)},
      {"before", fmt(scene.schedule.before)},
      {"after", fmt(scene.schedule.after)},
      {"period", fmt(scene.schedule.period)},
      {"phase", fmt(scene.schedule.phase)},
      {"knot_spacing", std::to_string(scene.schedule.knot_spacing)},
      {"pixels_per_degree", fmt(scene.pixels_per_degree)},
      {"horizon", fmt(scene.horizon)},
      {"brightness", fmt(scene.brightness)},
      {"road_half_width", fmt(scene.road_half_width)},
      {"lateral_jitter", fmt(scene.lateral_jitter)},
      {"texture_amplitude", fmt(scene.texture_amplitude)},
      {"noise_amplitude", fmt(scene.noise_amplitude)},
      {"cloud_count", std::to_string(scene.cloud_count)},
      {"cloud_amplitude", fmt(scene.cloud_amplitude)},
      {"cloud_drift", fmt(scene.cloud_drift)},
      {"cloud_flicker", fmt(scene.cloud_flicker)},
      {"threshold", fmt(scene.threshold)},
      {"lr", fmt(train.adam.learning_rate)},
      {"beta1", fmt(train.adam.beta1)},
      {"beta2", fmt(train.adam.beta2)},
      {"epsilon", fmt(train.adam.epsilon)},
      {"epochs", std::to_string(train.epochs)},
      {"batch_size", std::to_string(train.batch_size)},
      {"teacher_forcing", train.teacher_forcing ? "true" : "false"},
      {"seed", std::to_string(seed)},
      {"workers", std::to_string(train.workers)},
      {"bench_sequences", std::to_string(bench_sequences)},
      {"bench_first_scene_seed", std::to_string(bench_first_scene_seed)},
      {"data", data},
      {"checkpoint", checkpoint},
      {"out", out},
  };
  std::string seeds;
  for (std::size_t i = 0; i < bench_seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(bench_seeds[i]);
  m["bench_seeds"] = seeds;
  return m;
}

/// Applies every key of a key=value file; unknown keys are errors.
inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  for (const auto& [k, v] : io::read_key_values(path)) cfg.set(k, v);
}

/// Applies "key=value" override strings, in order.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
}

inline std::string to_config_text(const RunConfig& cfg) {
  std::string s;
  for (const auto& [k, v] : cfg.to_key_values()) s += k + "=" + v + "\n";
  return s;
}

}  // namespace asyncev::cli
