#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "asyncev/eval/baselines.hpp"
#include "asyncev/eval/dataset.hpp"
#include "asyncev/eval/metrics.hpp"
#include "asyncev/nn/adam.hpp"

namespace asyncev::eval {

struct TrainConfig {
  nn::AdamConfig adam;
  int epochs = 10;
  int batch_size = 8;
  std::uint64_t shuffle_seed = 1;
  bool teacher_forcing = true;
  int workers = 1;

  void validate() const {
    adam.validate();
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (workers <= 0) throw ConfigError("workers must be positive");
  }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-sequence MSE of the teacher-forced passes
  double train_rmse = 0.0;
  std::optional<double> val_rmse;
};

struct TrainResult {
  nn::ParamSet best_params;
  nn::ParamSet final_params;
  int best_epoch = 0;
  std::optional<double> best_val_rmse;
  std::vector<EpochLog> log;  // entry 0 is the untrained model
};

struct Predictions {
  std::vector<double> predicted;
  std::vector<double> observed;
  std::vector<std::uint64_t> sequence_seed;
  std::vector<std::size_t> frame_index;
};

/// Eval-mode run over a list of sequences with self-fed angle history.
inline Predictions predict(const SequenceModel& model, const nn::ParamSet& params, const std::vector<Sequence>& seqs,
                           int workers = 1) {
  std::vector<SequenceResult> results(seqs.size());
  RunOptions opt;
  opt.mode = pipeline::Mode::eval;
  opt.teacher_forcing = false;
  parallel_for(seqs.size(), workers, [&](std::size_t i) { results[i] = model(seqs[i], params, opt); });
  Predictions p;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& r = results[i];
    for (std::size_t k = 0; k < r.predictions.size(); ++k) {
      p.predicted.push_back(r.predictions[k]);
      p.observed.push_back(r.targets[k]);
      p.sequence_seed.push_back(seqs[i].seed);
      p.frame_index.push_back(k + 1);
    }
  }
  return p;
}

inline MetricReport evaluate(const SequenceModel& model, const nn::ParamSet& params, const std::vector<Sequence>& seqs,
                             int workers = 1) {
  const Predictions p = predict(model, params, seqs, workers);
  return make_report(p.predicted, p.observed);
}

using EpochCallback = std::function<void(const EpochLog&)>;

/*
 * Mini-batch Adam. Each batch runs the sequences (possibly on several
 * threads), then sums their gradients in batch order and divides by the batch
 * size, so the result does not depend on the worker count. The parameters
 * with the lowest validation RMSE are kept.
 */
inline TrainResult train_model(const SequenceModel& model, nn::ParamSet params, const std::vector<Sequence>& train,
                               const std::vector<Sequence>& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train.empty()) throw InvalidInput("training set is empty");
  nn::AdamState adam(params, cfg.adam);
  TrainResult result;

  auto validate_now = [&](const nn::ParamSet& p) -> std::optional<double> {
    if (val.empty()) return std::nullopt;
    return evaluate(model, p, val, cfg.workers).rmse;
  };

  EpochLog initial;
  initial.val_rmse = validate_now(params);
  result.log.push_back(initial);
  result.best_params = params;
  result.best_val_rmse = initial.val_rmse;
  if (on_epoch) on_epoch(initial);

  RunOptions opt;
  opt.mode = pipeline::Mode::train;
  opt.teacher_forcing = cfg.teacher_forcing;

  std::vector<std::size_t> order(train.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Rng rng(cfg.shuffle_seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double loss_sum = 0.0, sq_sum = 0.0;
    std::size_t frames = 0;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      std::vector<SequenceResult> results(n);
      parallel_for(n, cfg.workers, [&](std::size_t k) { results[k] = model(train[order[start + k]], params, opt); });
      nn::GradSet grads = params.zeros_like();
      for (const auto& r : results) {
        nn::accumulate(grads, *r.gradients, 1.0 / static_cast<double>(n));
        loss_sum += r.loss;
        sq_sum += r.loss * static_cast<double>(r.predictions.size());
        frames += r.predictions.size();
      }
      nn::adam_step(params, grads, adam);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train.size());
    log.train_rmse = std::sqrt(sq_sum / static_cast<double>(frames));
    log.val_rmse = validate_now(params);
    if (!val.empty() ? *log.val_rmse < *result.best_val_rmse : true) {
      result.best_val_rmse = log.val_rmse;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.final_params = std::move(params);
  return result;
}

}  // namespace asyncev::eval
