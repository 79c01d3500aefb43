#pragma once

#include <cmath>
#include <cstdint>

#include "asyncev/nn/param_set.hpp"

namespace asyncev::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("adam: learning rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  }
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  ParamSet first_moment;
  ParamSet second_moment;

  AdamState() = default;
  AdamState(const ParamSet& params, AdamConfig cfg)
      : config(cfg), first_moment(params.zeros_like()), second_moment(params.zeros_like()) {
    config.validate();
  }
};

/// One bias-corrected Adam update. A non-finite gradient leaves parameters and
/// state untouched and throws.
inline void adam_step(ParamSet& params, const GradSet& grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw ShapeError("adam: parameter, gradient and moment layouts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params.arrays()[k];
    const auto& g = grads.arrays()[k];
    if (g.name != p.name || g.values.size() != p.values.size()) throw ShapeError("adam: gradient layout mismatch at " + p.name);
    for (double v : g.values) {
      if (!std::isfinite(v)) throw NumericalError("adam: non-finite gradient in " + p.name);
    }
  }

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params.arrays()[k].values;
    const auto& g = grads.arrays()[k].values;
    auto& m = state.first_moment.arrays()[k].values;
    auto& v = state.second_moment.arrays()[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace asyncev::nn
