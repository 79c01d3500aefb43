#pragma once

#include <string>
#include <vector>

#include "asyncev/event_model/types.hpp"
#include "asyncev/nn/layers.hpp"
#include "asyncev/pipeline/config.hpp"
#include "asyncev/pipeline/efe.hpp"

namespace asyncev::pipeline {

using nn::Binding;
using nn::ParamSet;
using nn::Rng;

// ---------------------------------------------------------------------------
// Parameter layout

/// Residual regressor: 3x3 stem, `blocks` stride-2 residual blocks with 1x1
/// projection shortcuts, global average pool, linear head to one angle.
inline void add_regressor_params(ParamSet& ps, Rng& rng, const std::string& prefix, std::size_t in_channels,
                                 const ModelConfig& cfg) {
  const auto r = static_cast<std::size_t>(cfg.regressor_channels);
  nn::add_conv_params(ps, rng, prefix + ".stem", in_channels, r, 3);
  for (int b = 0; b < cfg.residual_blocks; ++b) {
    const std::string blk = prefix + ".block" + std::to_string(b);
    nn::add_conv_params(ps, rng, blk + ".conv1", r, r, 3);
    nn::add_conv_params(ps, rng, blk + ".conv2", r, r, 3);
    nn::add_conv_params(ps, rng, blk + ".proj", r, r, 1);
  }
  nn::add_linear_params(ps, rng, prefix + ".head", r, 1);
}

/// All learned tensors of the asynchronous pipeline, deterministic in `seed`.
inline ParamSet init_pipeline_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamSet ps;
  const auto c = static_cast<std::size_t>(cfg.channels);
  const auto q = static_cast<std::size_t>(cfg.q);
  const auto h = static_cast<std::size_t>(cfg.height);
  const auto dh = static_cast<std::size_t>(cfg.hidden);
  const auto k = static_cast<std::size_t>(cfg.attention_hidden);
  const auto P = cfg.positions();

  nn::add_conv_params(ps, rng, "encoder.conv1", 1, 8, 3);
  nn::add_conv_params(ps, rng, "encoder.conv2", 8, 16, 3);
  nn::add_conv_params(ps, rng, "encoder.conv3", 16, c, 3);

  ps.add("efe.A1", {h, q}, nn::glorot_uniform(rng, h * q, h, q));
  ps.add("efe.A2", {h, q}, nn::glorot_uniform(rng, h * q, h, q));

  nn::add_gru_params(ps, rng, "gru", q, dh);

  nn::add_linear_params(ps, rng, "attention.channel.hidden", c + dh, k);
  nn::add_linear_params(ps, rng, "attention.channel.out", k, c);
  nn::add_linear_params(ps, rng, "attention.spatial.feature", c, k);
  nn::add_linear_params(ps, rng, "attention.spatial.state", dh, k, false);
  nn::add_linear_params(ps, rng, "attention.spatial.out", k, 1);

  nn::add_linear_params(ps, rng, "mask.hidden", c * P + q, static_cast<std::size_t>(cfg.mask_hidden));
  nn::add_linear_params(ps, rng, "mask.out", static_cast<std::size_t>(cfg.mask_hidden), P);

  add_regressor_params(ps, rng, "regressor", 1, cfg);
  return ps;
}

// ---------------------------------------------------------------------------
// Stages

inline void require_resolution(const Image& g, const ModelConfig& cfg) {
  if (g.width != cfg.width || g.height != cfg.height) {
    throw InvalidInput("image is " + std::to_string(g.width) + "x" + std::to_string(g.height) + ", model expects " +
                       std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
  }
}

/// Gray-scale frame as a [1 x H x W] constant tensor.
inline Tensor image_tensor(const Image& g) {
  return Tensor::from({1, static_cast<std::size_t>(g.height), static_cast<std::size_t>(g.width)}, g.pixels);
}

/// APS encoder: three same-padded 3x3 convolutions (1 -> 8 -> 16 -> c), ReLU
/// after the first two. Output I is [c x H x W].
inline Tensor aps_encode(const Binding& b, const ModelConfig& cfg, const Image& g) {
  require_resolution(g, cfg);
  const nn::Conv2dSpec same{1, 1};
  Tensor x = nn::relu(nn::apply_conv(b, "encoder.conv1", image_tensor(g), same));
  x = nn::relu(nn::apply_conv(b, "encoder.conv2", x, same));
  return nn::apply_conv(b, "encoder.conv3", x, same);
}

struct PipelineState {
  Tensor gru_hidden;                // [d_h]
  std::vector<double> angle_history;  // q angles, oldest first
  Tensor last_T;                    // [q], zeros until the first event timestamp
  std::size_t gru_steps = 0;

  static PipelineState initial(const ModelConfig& cfg) {
    PipelineState s;
    s.gru_hidden = Tensor::zeros({static_cast<std::size_t>(cfg.hidden)});
    s.angle_history.assign(static_cast<std::size_t>(cfg.q), 0.0);
    s.last_T = Tensor::zeros({static_cast<std::size_t>(cfg.q)});
    return s;
  }

  void push_angle(double degrees) {
    angle_history.erase(angle_history.begin());
    angle_history.push_back(degrees);
  }

  Tensor angle_tensor() const { return Tensor::from({angle_history.size()}, angle_history); }
};

/// One GRU step for one event timestamp.
inline PipelineState advance_timestamp(PipelineState state, const Tensor& T, const Binding& b) {
  state.gru_hidden = nn::gru_cell(b, "gru", T, state.gru_hidden);
  state.last_T = T;
  state.gru_steps += 1;
  return state;
}

struct AttentionOutput {
  Tensor FT;     // [c x H x W]
  Tensor beta;   // [c], channel weights
  Tensor alpha;  // [H*W], spatial weights
};

/*
 * Channel-then-spatial attention on the encoder features, conditioned on the
 * GRU state h.
 *
 *   beta  = softmax_c( W2 tanh(W1 [gap(I); h] + b1) + b2 )
 *   alpha = softmax_p( w tanh(U I[:,p] + V h + b) + b' )
 *   FT[ch, p] = I[ch, p] * (c * beta[ch]) * (P * alpha[p])
 *
 * The c and P factors make uniform weights an identity map.
 */
inline AttentionOutput cs_attention(const Binding& b, const Tensor& I, const Tensor& h) {
  nn::detail::require_rank(I, 3, "cs_attention features");
  const std::size_t c = I.dim(0), H = I.dim(1), W = I.dim(2), P = H * W;
  const Tensor flat = nn::reshape(I, {c, P});

  const Tensor pooled = nn::row_mean(flat);
  const Tensor zc = nn::tanh(nn::apply_linear(b, "attention.channel.hidden", nn::concat({pooled, h})));
  const Tensor beta = nn::softmax(nn::reshape(nn::apply_linear(b, "attention.channel.out", zc), {c}));

  const Tensor per_position = nn::transpose(flat);  // [P x c]
  const Tensor state_term = nn::apply_linear(b, "attention.spatial.state", h);
  const Tensor zs = nn::tanh(nn::add_row_vector(nn::apply_linear(b, "attention.spatial.feature", per_position), state_term));
  const Tensor alpha = nn::softmax(nn::reshape(nn::apply_linear(b, "attention.spatial.out", zs), {P}));

  const Tensor scaled = nn::mul_cols(nn::mul_rows(flat, nn::scale(beta, static_cast<double>(c))),
                                     nn::scale(alpha, static_cast<double>(P)));
  return {nn::reshape(scaled, {c, H, W}), beta, alpha};
}

struct MaskOutput {
  Tensor S;  // [H x W], in (0, 1)
  Tensor Y;  // [1 x H x W], S * G
};

/// Mask MLP on [flatten(FT); T_Z]: ReLU hidden layer, sigmoid output per pixel.
inline MaskOutput generate_mask(const Binding& b, const Tensor& FT, const Tensor& T_Z, const Image& g) {
  const std::size_t H = static_cast<std::size_t>(g.height), W = static_cast<std::size_t>(g.width);
  if (FT.rank() != 3 || FT.dim(1) != H || FT.dim(2) != W) throw ShapeError("generate_mask: FT does not match the frame");
  const Tensor hidden = nn::relu(nn::apply_linear(b, "mask.hidden", nn::concat({nn::flatten(FT), T_Z})));
  const Tensor S = nn::reshape(nn::sigmoid(nn::apply_linear(b, "mask.out", hidden)), {H, W});
  const Tensor G = Tensor::from({H, W}, g.pixels);
  return {S, nn::reshape(nn::mul(S, G), {1, H, W})};
}

/// Residual stack mapping a [c_in x H x W] image to one steering angle.
inline Tensor regress_angle(const Binding& b, const std::string& prefix, const Tensor& Y, const ModelConfig& cfg) {
  Tensor x = nn::relu(nn::apply_conv(b, prefix + ".stem", Y, {1, 1}));
  for (int blk = 0; blk < cfg.residual_blocks; ++blk) {
    const std::string p = prefix + ".block" + std::to_string(blk);
    const Tensor y = nn::relu(nn::apply_conv(b, p + ".conv1", x, {2, 1}));
    const Tensor main = nn::apply_conv(b, p + ".conv2", y, {1, 1});
    const Tensor shortcut = nn::apply_conv(b, p + ".proj", x, {2, 0});
    x = nn::relu(nn::add(main, shortcut));
  }
  return nn::reshape(nn::apply_linear(b, prefix + ".head", nn::global_avg_pool(x)), {1});
}

}  // namespace asyncev::pipeline
