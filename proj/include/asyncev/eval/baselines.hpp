#pragma once

#include <functional>
#include <string>

#include "asyncev/event_model/accumulate.hpp"
#include "asyncev/pipeline/run_sequence.hpp"

namespace asyncev::eval {

using nn::ParamSet;
using nn::Tensor;
using pipeline::ModelConfig;
using pipeline::RunOptions;
using pipeline::SequenceResult;

/// Regressor alone on the gray-scale frame; the events are ignored.
inline ParamSet init_aps_only_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::Rng rng(seed);
  ParamSet ps;
  pipeline::add_regressor_params(ps, rng, "regressor", 1, cfg);
  return ps;
}

/// Regressor on [G; h+; h-]. Only the stem differs from the other models.
inline ParamSet init_sync_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::Rng rng(seed);
  ParamSet ps;
  pipeline::add_regressor_params(ps, rng, "regressor", 3, cfg);
  return ps;
}

/// Three-channel synchronous input: frame, positive counts, negative counts.
inline Tensor sync_input(const Image& g, std::span<const Event> events, const TimeWindow& window) {
  const SplitHistograms hist = accumulate_split_histograms(events, window, g.width, g.height);
  const std::size_t P = g.pixels.size();
  std::vector<double> v(3 * P);
  for (std::size_t i = 0; i < P; ++i) {
    v[i] = g.pixels[i];
    v[P + i] = hist.positive.counts[i];
    v[2 * P + i] = hist.negative.counts[i];
  }
  return Tensor::from({3, static_cast<std::size_t>(g.height), static_cast<std::size_t>(g.width)}, std::move(v));
}

namespace detail {

using FrameInput = std::function<Tensor(const Sequence&, std::size_t frame)>;

/// Shared driver for the per-frame baselines: one regression per frame 1..N-1,
/// MSE loss, gradients in train mode.
inline SequenceResult run_frame_regressor(const Sequence& seq, const ParamSet& params, const ModelConfig& cfg,
                                          const RunOptions& opt, const FrameInput& input) {
  validate_sequence(seq);
  if (seq.width != cfg.width || seq.height != cfg.height) throw InvalidInput("sequence resolution differs from model");
  if (seq.frames.size() < 2) throw InvalidInput("sequence needs at least two frames");
  const bool train = opt.mode == pipeline::Mode::train;
  nn::Binding b(params, train);
  SequenceResult r;
  Tensor total;
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    const Tensor D = pipeline::regress_angle(b, "regressor", input(seq, f), cfg);
    r.predictions.push_back(D.item());
    r.targets.push_back(seq.angles[f]);
    const Tensor err = nn::square(nn::add_scalar(D, -seq.angles[f]));
    total = total.defined() ? nn::add(total, err) : err;
  }
  const Tensor loss = nn::scale(total, 1.0 / static_cast<double>(r.predictions.size()));
  r.loss = loss.item();
  if (train) {
    if (!std::isfinite(r.loss)) throw NumericalError("non-finite loss");
    loss.backward();
    r.gradients = b.gradients(params);
  }
  return r;
}

}  // namespace detail

inline SequenceResult run_aps_only(const Sequence& seq, const ParamSet& params, const ModelConfig& cfg,
                                   const RunOptions& opt = {}) {
  return detail::run_frame_regressor(seq, params, cfg, opt, [](const Sequence& s, std::size_t f) {
    return pipeline::image_tensor(s.frames[f]);
  });
}

/// Synchronous h+/h- baseline. The histograms cover (t_f - window, t_f];
/// window 0 means one frame interval.
inline SequenceResult run_sync_baseline(const Sequence& seq, const ParamSet& params, const ModelConfig& cfg,
                                        const RunOptions& opt = {}, Timestamp window = 0) {
  if (window < 0) throw InvalidInput("sync window must be non-negative");
  const Timestamp span = window == 0 ? seq.frame_interval : window;
  return detail::run_frame_regressor(seq, params, cfg, opt, [span](const Sequence& s, std::size_t f) {
    const Timestamp end = s.frame_time(f);
    return sync_input(s.frames[f], s.events, TimeWindow{end - span, end});
  });
}

enum class ModelKind { asynchronous, sync_baseline, aps_only };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::asynchronous: return "asynchronous";
    case ModelKind::sync_baseline: return "sync";
    case ModelKind::aps_only: return "aps_only";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "asynchronous" || s == "async" || s == "ours") return ModelKind::asynchronous;
  if (s == "sync" || s == "sync_baseline") return ModelKind::sync_baseline;
  if (s == "aps_only" || s == "aps") return ModelKind::aps_only;
  throw ConfigError("unknown model kind '" + s + "'");
}

inline ParamSet init_params(ModelKind kind, const ModelConfig& cfg, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::asynchronous: return pipeline::init_pipeline_params(cfg, seed);
    case ModelKind::sync_baseline: return init_sync_params(cfg, seed);
    case ModelKind::aps_only: return init_aps_only_params(cfg, seed);
  }
  throw ConfigError("unknown model kind");
}

using SequenceModel = std::function<SequenceResult(const Sequence&, const ParamSet&, const RunOptions&)>;

inline SequenceModel make_model(ModelKind kind, const ModelConfig& cfg) {
  switch (kind) {
    case ModelKind::asynchronous:
      return [cfg](const Sequence& s, const ParamSet& p, const RunOptions& o) { return pipeline::run_sequence(s, p, cfg, o); };
    case ModelKind::sync_baseline:
      return [cfg](const Sequence& s, const ParamSet& p, const RunOptions& o) { return run_sync_baseline(s, p, cfg, o); };
    case ModelKind::aps_only:
      return [cfg](const Sequence& s, const ParamSet& p, const RunOptions& o) { return run_aps_only(s, p, cfg, o); };
  }
  throw ConfigError("unknown model kind");
}

}  // namespace asyncev::eval
