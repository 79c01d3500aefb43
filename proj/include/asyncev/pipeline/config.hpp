#pragma once

#include <map>
#include <string>

#include "asyncev/event_model/types.hpp"

namespace asyncev::pipeline {

/// Shapes of the asynchronous model. Everything is config-driven, so the
/// full-resolution setting (w=260, h=346, q=256) is expressible; the defaults
/// are the desk-scale working point.
struct ModelConfig {
  int width = 64;             // w', image columns
  int height = 48;            // h', image rows
  int channels = 4;           // c, encoder output channels
  int q = 32;                 // angle history length and timestamp-vector size
  int hidden = 64;            // d_h, GRU state size (defaults to w')
  int attention_hidden = 16;  // hidden units of both attention maps
  int mask_hidden = 32;       // hidden units of the mask MLP
  int regressor_channels = 8;
  int residual_blocks = 4;
  Timestamp time_bin = 1;     // event timestamps are grouped by t / time_bin

  std::size_t positions() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v <= 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
    };
    positive(width, "width");
    positive(height, "height");
    positive(channels, "channels");
    positive(q, "q");
    positive(hidden, "hidden");
    positive(attention_hidden, "attention_hidden");
    positive(mask_hidden, "mask_hidden");
    positive(regressor_channels, "regressor_channels");
    if (residual_blocks < 0) throw ConfigError("model config: residual_blocks must be non-negative");
    if (time_bin <= 0) throw ConfigError("model config: time_bin must be positive");
  }

  std::map<std::string, std::string> to_metadata() const {
    return {{"width", std::to_string(width)},
            {"height", std::to_string(height)},
            {"channels", std::to_string(channels)},
            {"q", std::to_string(q)},
            {"hidden", std::to_string(hidden)},
            {"attention_hidden", std::to_string(attention_hidden)},
            {"mask_hidden", std::to_string(mask_hidden)},
            {"regressor_channels", std::to_string(regressor_channels)},
            {"residual_blocks", std::to_string(residual_blocks)},
            {"time_bin", std::to_string(time_bin)}};
  }

  static ModelConfig from_metadata(const std::map<std::string, std::string>& m) {
    ModelConfig c;
    auto get = [&](const char* k, auto& field) {
      if (const auto it = m.find(k); it != m.end()) field = static_cast<std::remove_reference_t<decltype(field)>>(std::stoll(it->second));
    };
    get("width", c.width);
    get("height", c.height);
    get("channels", c.channels);
    get("q", c.q);
    get("hidden", c.hidden);
    get("attention_hidden", c.attention_hidden);
    get("mask_hidden", c.mask_hidden);
    get("regressor_channels", c.regressor_channels);
    get("residual_blocks", c.residual_blocks);
    get("time_bin", c.time_bin);
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace asyncev::pipeline
