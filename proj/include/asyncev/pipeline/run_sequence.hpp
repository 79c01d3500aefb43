#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "asyncev/event_model/event_matrix.hpp"
#include "asyncev/pipeline/stages.hpp"

namespace asyncev::pipeline {

enum class Mode { train, eval };

struct RunOptions {
  Mode mode = Mode::eval;
  bool teacher_forcing = false;
  bool record_trace = false;
};

/// Per-frame diagnostics, filled when RunOptions::record_trace is set.
struct FrameTrace {
  std::size_t frame = 0;
  std::size_t gru_steps = 0;            // GRU steps taken in the gap ending here
  std::vector<double> mask;             // S, row-major H x W
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> angle_history;    // a after this frame's angle was pushed
};

struct SequenceResult {
  std::vector<double> predictions;  // D for frames 1..N-1
  std::vector<double> targets;      // ground truth for the same frames
  double loss = 0.0;                // mean squared error over predictions
  std::optional<nn::GradSet> gradients;
  std::vector<std::size_t> gru_steps_per_gap;
  std::vector<FrameTrace> trace;
};

/// Events whose timestamp lies in (t0, t1], as a contiguous span of a sorted stream.
inline std::span<const Event> events_in_gap(const EventStream& events, Timestamp t0, Timestamp t1) {
  const auto lo = std::upper_bound(events.begin(), events.end(), t0, [](Timestamp t, const Event& e) { return t < e.t; });
  const auto hi = std::upper_bound(lo, events.end(), t1, [](Timestamp t, const Event& e) { return t < e.t; });
  return {lo, hi};
}

/// Forward (and in train mode backward) pass of the asynchronous model over
/// the computational graph for a whole sequence, parameters bound once.
inline SequenceResult run_sequence_bound(const Sequence& seq, const Binding& b, const ModelConfig& cfg,
                                         const RunOptions& opt, nn::Tensor* loss_out = nullptr) {
  validate_sequence(seq);
  if (seq.width != cfg.width || seq.height != cfg.height) {
    throw InvalidInput("sequence resolution " + std::to_string(seq.width) + "x" + std::to_string(seq.height) +
                       " differs from model " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
  }
  if (seq.frames.size() < 2) throw InvalidInput("run_sequence needs at least two frames");

  SequenceResult result;
  PipelineState state = PipelineState::initial(cfg);
  const Tensor& A1 = b["efe.A1"];
  const Tensor& A2 = b["efe.A2"];
  Tensor total_loss;

  for (std::size_t i = 0; i + 1 < seq.frames.size(); ++i) {
    const auto gap = events_in_gap(seq.events, seq.frame_time(i), seq.frame_time(i + 1));
    const std::size_t steps_before = state.gru_steps;
    const Tensor a = state.angle_tensor();
    for (const auto& group : group_by_timestamp(gap, cfg.time_bin)) {
      const EventMatrix M = build_binned_event_matrix(group, cfg.width, cfg.height);
      const Tensor T = event_feature_extract(event_matrix_tensor(M), a, A1, A2);
      state = advance_timestamp(std::move(state), T, b);
    }
    result.gru_steps_per_gap.push_back(state.gru_steps - steps_before);

    const std::size_t f = i + 1;
    const Image& G = seq.frames[f];
    const Tensor I = aps_encode(b, cfg, G);
    const AttentionOutput att = cs_attention(b, I, state.gru_hidden);
    const MaskOutput mask = generate_mask(b, att.FT, state.last_T, G);
    const Tensor D = regress_angle(b, "regressor", mask.Y, cfg);

    const double target = seq.angles[f];
    result.predictions.push_back(D.item());
    result.targets.push_back(target);
    const Tensor err = nn::square(nn::add_scalar(D, -target));
    total_loss = total_loss.defined() ? nn::add(total_loss, err) : err;

    state.push_angle(opt.teacher_forcing ? target : D.item());

    if (opt.record_trace) {
      FrameTrace t;
      t.frame = f;
      t.gru_steps = result.gru_steps_per_gap.back();
      t.mask.assign(mask.S.values().begin(), mask.S.values().end());
      t.beta.assign(att.beta.values().begin(), att.beta.values().end());
      t.alpha.assign(att.alpha.values().begin(), att.alpha.values().end());
      t.angle_history = state.angle_history;
      result.trace.push_back(std::move(t));
    }
  }

  const Tensor loss = nn::scale(total_loss, 1.0 / static_cast<double>(result.predictions.size()));
  result.loss = loss.item();
  if (loss_out) *loss_out = loss;
  return result;
}

/// Runs the model on one sequence. In train mode the MSE loss is
/// back-propagated through the whole unrolled computation and the parameter
/// gradients are returned. Fed-back predicted angles carry no gradient.
inline SequenceResult run_sequence(const Sequence& seq, const ParamSet& params, const ModelConfig& cfg,
                                   const RunOptions& opt = {}) {
  const bool train = opt.mode == Mode::train;
  Binding b(params, train);
  Tensor loss;
  SequenceResult result = run_sequence_bound(seq, b, cfg, opt, &loss);
  if (train) {
    if (!std::isfinite(result.loss)) throw NumericalError("run_sequence: non-finite loss");
    loss.backward();
    result.gradients = b.gradients(params);
  }
  return result;
}

}  // namespace asyncev::pipeline
