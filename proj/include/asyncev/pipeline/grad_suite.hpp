#pragma once

#include <string>
#include <vector>

#include "asyncev/nn/grad_check.hpp"
#include "asyncev/pipeline/run_sequence.hpp"

namespace asyncev::pipeline {

struct GradSuiteEntry {
  std::string name;
  double tolerance = 0.0;
  nn::GradCheckReport report;
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;

  bool passed() const {
    for (const auto& e : entries) {
      if (!e.report.passed) return false;
    }
    return !entries.empty();
  }
};

namespace detail {

/// Replaces every value (biases included) with a uniform draw in +-scale so
/// that no gradient is trivially zero.
inline void randomize(nn::ParamSet& ps, nn::Rng& rng, double scale) {
  for (auto& a : ps.arrays()) {
    for (auto& v : a.values) v = rng.uniform(-scale, scale);
  }
}

/// Fixed random projection of a tensor to a scalar: sum(x * R).
inline Tensor probe(const Tensor& x, nn::Rng& rng) {
  std::vector<double> r(x.size());
  for (auto& v : r) v = rng.uniform(-1.0, 1.0);
  return nn::sum(nn::mul(x, Tensor::from(x.shape(), std::move(r))));
}

inline std::vector<double> uniform_values(nn::Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline GradSuiteEntry check(std::string name, const nn::ScalarFunction& f, const nn::ParamSet& ps,
                            nn::GradCheckOptions opt) {
  GradSuiteEntry e;
  e.name = std::move(name);
  e.tolerance = opt.tolerance;
  e.report = nn::grad_check(f, ps, opt);
  return e;
}

}  // namespace detail

/// Finite-difference checks of every layer type on small random instances.
/// Layer inputs are registered as parameters too, so input gradients are
/// checked alongside weight gradients.
inline GradSuiteReport run_layer_grad_checks(std::uint64_t seed = 1, double tolerance = 1e-4) {
  nn::GradCheckOptions opt;
  opt.tolerance = tolerance;
  GradSuiteReport out;
  const std::uint64_t base = seed * 101;

  {
    nn::Rng rng(base + 1);
    nn::ParamSet ps;
    ps.add("input", {3, 5}, detail::uniform_values(rng, 15, -1, 1));
    nn::add_linear_params(ps, rng, "linear", 5, 4);
    detail::randomize(ps, rng, 1.0);
    out.entries.push_back(detail::check("linear", [&](const Binding& b) {
      nn::Rng p(base + 2);
      return detail::probe(nn::apply_linear(b, "linear", b["input"]), p);
    }, ps, opt));
  }

  {
    nn::Rng rng(base + 3);
    nn::ParamSet ps;
    ps.add("input", {2, 6, 7}, detail::uniform_values(rng, 84, -1, 1));
    nn::add_conv_params(ps, rng, "conv", 2, 3, 3);
    detail::randomize(ps, rng, 1.0);
    for (const nn::Conv2dSpec spec : {nn::Conv2dSpec{1, 1}, nn::Conv2dSpec{2, 1}, nn::Conv2dSpec{1, 0}}) {
      const std::string name = "conv2d stride " + std::to_string(spec.stride) + " pad " + std::to_string(spec.padding);
      out.entries.push_back(detail::check(name, [&](const Binding& b) {
        nn::Rng p(base + 4);
        return detail::probe(nn::apply_conv(b, "conv", b["input"], spec), p);
      }, ps, opt));
    }
  }

  {
    nn::Rng rng(base + 5);
    nn::ParamSet ps;
    ps.add("x", {3}, detail::uniform_values(rng, 3, -1, 1));
    ps.add("h", {4}, detail::uniform_values(rng, 4, -0.9, 0.9));
    nn::add_gru_params(ps, rng, "gru", 3, 4);
    detail::randomize(ps, rng, 1.0);
    out.entries.push_back(detail::check("gru_cell", [&](const Binding& b) {
      nn::Rng p(base + 6);
      // two steps so the recurrent path is exercised
      const Tensor h1 = nn::gru_cell(b, "gru", b["x"], b["h"]);
      return detail::probe(nn::gru_cell(b, "gru", nn::scale(b["x"], -0.5), h1), p);
    }, ps, opt));
  }

  {
    nn::Rng rng(base + 7);
    nn::ParamSet ps;
    ps.add("a", {3, 4}, detail::uniform_values(rng, 12, -2, 2));
    ps.add("b", {4, 2}, detail::uniform_values(rng, 8, -2, 2));
    ps.add("s", {3}, detail::uniform_values(rng, 3, -2, 2));
    out.entries.push_back(detail::check("elementwise and reduction ops", [&](const Binding& b) {
      nn::Rng p(base + 8);
      const Tensor& a = b["a"];
      const Tensor m = nn::matmul(nn::tanh(a), b["b"]);                    // [3 x 2]
      const Tensor s = nn::softmax(b["s"]);
      const Tensor rows = nn::mul_rows(nn::sigmoid(m), s);
      const Tensor cols = nn::mul_cols(nn::transpose(nn::square(a)), nn::softmax(nn::row_mean(a)));
      const Tensor pooled = nn::one_minus(nn::global_avg_pool(nn::reshape(a, {1, 3, 4})));
      const Tensor mixed = nn::concat({nn::flatten(rows), nn::flatten(cols), nn::relu(nn::select(nn::flatten(a), 5)), pooled});
      return nn::add(detail::probe(mixed, p), nn::mean(nn::sub(s, nn::scale(nn::sigmoid(b["s"]), 0.5))));
    }, ps, opt));
  }

  {
    nn::Rng rng(base + 9);
    nn::ParamSet ps;
    std::vector<double> m(4 * 3);
    for (auto& v : m) v = static_cast<double>(static_cast<int>(rng.index(3)) - 1);
    ps.add("M", {4, 3}, m);
    ps.add("a", {2}, detail::uniform_values(rng, 2, -1, 1));
    ps.add("efe.A1", {3, 2}, detail::uniform_values(rng, 6, -1, 1));
    ps.add("efe.A2", {3, 2}, detail::uniform_values(rng, 6, -1, 1));
    out.entries.push_back(detail::check("event_feature_extract", [&](const Binding& b) {
      nn::Rng p(base + 10);
      return detail::probe(event_feature_extract(b["M"], b["a"], b["efe.A1"], b["efe.A2"]), p);
    }, ps, opt));
  }

  {
    ModelConfig cfg;
    cfg.width = 16;
    cfg.height = 12;
    cfg.channels = 2;
    nn::Rng rng(base + 11);
    nn::ParamSet ps;
    nn::add_conv_params(ps, rng, "encoder.conv1", 1, 8, 3);
    nn::add_conv_params(ps, rng, "encoder.conv2", 8, 16, 3);
    nn::add_conv_params(ps, rng, "encoder.conv3", 16, 2, 3);
    detail::randomize(ps, rng, 0.3);
    Image g;
    g.width = 16;
    g.height = 12;
    g.pixels = detail::uniform_values(rng, 192, 0, 1);
    out.entries.push_back(detail::check("aps_encode", [&](const Binding& b) {
      nn::Rng p(base + 12);
      return detail::probe(aps_encode(b, cfg, g), p);
    }, ps, opt));
  }

  {
    nn::Rng rng(base + 13);
    const std::size_t c = 2, dh = 3, k = 4;
    nn::ParamSet ps;
    ps.add("I", {c, 3, 4}, detail::uniform_values(rng, c * 12, -1, 1));
    ps.add("h", {dh}, detail::uniform_values(rng, dh, -1, 1));
    nn::add_linear_params(ps, rng, "attention.channel.hidden", c + dh, k);
    nn::add_linear_params(ps, rng, "attention.channel.out", k, c);
    nn::add_linear_params(ps, rng, "attention.spatial.feature", c, k);
    nn::add_linear_params(ps, rng, "attention.spatial.state", dh, k, false);
    nn::add_linear_params(ps, rng, "attention.spatial.out", k, 1);
    detail::randomize(ps, rng, 1.0);
    out.entries.push_back(detail::check("cs_attention", [&](const Binding& b) {
      nn::Rng p(base + 14);
      return detail::probe(cs_attention(b, b["I"], b["h"]).FT, p);
    }, ps, opt));
  }

  {
    nn::Rng rng(base + 15);
    const std::size_t c = 2, H = 3, W = 4, q = 2, hidden = 5;
    nn::ParamSet ps;
    ps.add("FT", {c, H, W}, detail::uniform_values(rng, c * H * W, -1, 1));
    ps.add("T", {q}, detail::uniform_values(rng, q, -1, 1));
    nn::add_linear_params(ps, rng, "mask.hidden", c * H * W + q, hidden);
    nn::add_linear_params(ps, rng, "mask.out", hidden, H * W);
    detail::randomize(ps, rng, 0.5);
    Image g;
    g.width = static_cast<int>(W);
    g.height = static_cast<int>(H);
    g.pixels = detail::uniform_values(rng, H * W, 0, 1);
    out.entries.push_back(detail::check("generate_mask", [&](const Binding& b) {
      nn::Rng p(base + 16);
      return detail::probe(generate_mask(b, b["FT"], b["T"], g).Y, p);
    }, ps, opt));
  }

  {
    ModelConfig cfg;
    cfg.regressor_channels = 3;
    cfg.residual_blocks = 1;
    nn::Rng rng(base + 17);
    nn::ParamSet ps;
    ps.add("Y", {2, 6, 5}, detail::uniform_values(rng, 60, 0, 1));
    add_regressor_params(ps, rng, "regressor", 2, cfg);
    detail::randomize(ps, rng, 0.5);
    out.entries.push_back(detail::check("regress_angle (one residual block)", [&](const Binding& b) {
      return nn::square(regress_angle(b, "regressor", b["Y"], cfg));
    }, ps, opt));
  }
  return out;
}

/// Toy configuration for the full unrolled check: 16x12 frames, q = 4.
inline ModelConfig grad_check_toy_config() {
  ModelConfig cfg;
  cfg.width = 16;
  cfg.height = 12;
  cfg.channels = 2;
  cfg.q = 4;
  cfg.hidden = 6;
  cfg.attention_hidden = 4;
  cfg.mask_hidden = 6;
  cfg.regressor_channels = 3;
  cfg.residual_blocks = 2;
  return cfg;
}

/*
 * Finite-difference check of the whole unrolled model on one sequence: MSE
 * loss over all frames, teacher forcing on (with self-fed angles the numeric
 * derivative would also see the detached feedback path). Large tensors are
 * sampled, `entries_per_tensor` entries each.
 */
inline GradSuiteEntry run_pipeline_grad_check(const Sequence& seq, const ModelConfig& cfg, std::uint64_t seed,
                                              double tolerance = 1e-3, std::size_t entries_per_tensor = 24) {
  nn::ParamSet ps = init_pipeline_params(cfg, seed);
  nn::Rng rng(seed * 7 + 3);
  detail::randomize(ps, rng, 0.3);
  nn::GradCheckOptions opt;
  opt.tolerance = tolerance;
  opt.max_entries_per_tensor = entries_per_tensor;
  opt.seed = seed;
  RunOptions run;
  run.mode = Mode::train;
  run.teacher_forcing = true;
  return detail::check("full pipeline", [&](const Binding& b) {
    Tensor loss;
    run_sequence_bound(seq, b, cfg, run, &loss);
    return loss;
  }, ps, opt);
}

}  // namespace asyncev::pipeline
