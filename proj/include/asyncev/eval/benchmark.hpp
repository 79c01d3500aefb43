#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "asyncev/eval/trainer.hpp"

namespace asyncev::eval {

/// The standard desk-scale comparison: one synthetic scene distribution,
/// three models, several initialization seeds.
struct BenchmarkConfig {
  SceneConfig scene;
  ModelConfig model;
  TrainConfig train;
  std::size_t sequences = 286;  // 200 / 42 / 44 after the seed-range split
  std::uint64_t first_scene_seed = 1000;
  std::vector<std::uint64_t> model_seeds = {1, 2, 3};
  std::vector<ModelKind> methods = {ModelKind::aps_only, ModelKind::sync_baseline, ModelKind::asynchronous};

  BenchmarkConfig() {
    train.adam.learning_rate = 1e-3;
    train.epochs = 10;
    train.batch_size = 8;
  }

  void validate() const {
    scene.validate();
    model.validate();
    train.validate();
    if (scene.width != model.width || scene.height != model.height) {
      throw ConfigError("benchmark: scene and model resolutions differ");
    }
    if (sequences < 3) throw ConfigError("benchmark: need at least 3 sequences");
    if (model_seeds.empty()) throw ConfigError("benchmark: need at least one model seed");
    if (methods.empty()) throw ConfigError("benchmark: no methods selected");
  }
};

struct MethodRun {
  std::uint64_t seed = 0;
  MetricReport test;
  std::optional<double> best_val_rmse;
  int best_epoch = 0;
  double seconds = 0.0;
};

struct MethodResult {
  ModelKind kind = ModelKind::asynchronous;
  std::vector<MethodRun> runs;

  double mean_rmse() const {
    double s = 0.0;
    for (const auto& r : runs) s += r.test.rmse;
    return s / static_cast<double>(runs.size());
  }

  std::optional<double> mean_eva() const {
    double s = 0.0;
    for (const auto& r : runs) {
      if (!r.test.eva) return std::nullopt;
      s += *r.test.eva;
    }
    return s / static_cast<double>(runs.size());
  }
};

struct BenchmarkResult {
  std::size_t train_size = 0, val_size = 0, test_size = 0;
  std::vector<MethodResult> methods;
  double seconds = 0.0;

  const MethodResult* find(ModelKind k) const {
    for (const auto& m : methods) {
      if (m.kind == k) return &m;
    }
    return nullptr;
  }
};

using BenchmarkProgress = std::function<void(const std::string&)>;

inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const BenchmarkProgress& progress = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };

  Split split = split_by_seed(generate_scenes(cfg.scene, cfg.first_scene_seed, cfg.sequences, cfg.train.workers));
  BenchmarkResult result;
  result.train_size = split.train.size();
  result.val_size = split.val.size();
  result.test_size = split.test.size();
  say("scenes: " + std::to_string(result.train_size) + " train, " + std::to_string(result.val_size) + " val, " +
      std::to_string(result.test_size) + " test");

  for (const ModelKind kind : cfg.methods) {
    MethodResult mr;
    mr.kind = kind;
    const SequenceModel model = make_model(kind, cfg.model);
    for (const std::uint64_t seed : cfg.model_seeds) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainConfig tc = cfg.train;
      tc.shuffle_seed = seed;
      const TrainResult tr = train_model(model, init_params(kind, cfg.model, seed), split.train, split.val, tc,
                                         [&](const EpochLog& log) {
                                           if (log.epoch == 0) return;
                                           char buf[160];
                                           std::snprintf(buf, sizeof buf, "%s seed %llu epoch %d: train rmse %.4f, val rmse %.4f",
                                                         to_string(kind).c_str(), static_cast<unsigned long long>(seed),
                                                         log.epoch, log.train_rmse, log.val_rmse.value_or(-1.0));
                                           say(buf);
                                         });
      MethodRun run;
      run.seed = seed;
      run.test = evaluate(model, tr.best_params, split.test, cfg.train.workers);
      run.best_val_rmse = tr.best_val_rmse;
      run.best_epoch = tr.best_epoch;
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s seed %llu: test rmse %.4f (best epoch %d, %.0f s)", to_string(kind).c_str(),
                    static_cast<unsigned long long>(seed), run.test.rmse, run.best_epoch, run.seconds);
      say(buf);
      mr.runs.push_back(run);
    }
    result.methods.push_back(std::move(mr));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline std::string method_label(ModelKind k) {
  switch (k) {
    case ModelKind::aps_only: return "APS-only";
    case ModelKind::sync_baseline: return "Sync (h+/h-)";
    case ModelKind::asynchronous: return "Asynchronous (ours)";
  }
  return "?";
}

/// Relative gaps the ordering claim is judged on: ours vs sync and sync vs
/// APS-only, as improvement() percentages (negative = lower RMSE).
struct OrderingCheck {
  double ours_vs_sync = 0.0;
  double sync_vs_aps = 0.0;
  bool holds = false;
};

inline OrderingCheck check_ordering(const BenchmarkResult& r, double min_gap_percent = 5.0) {
  const auto* ours = r.find(ModelKind::asynchronous);
  const auto* sync = r.find(ModelKind::sync_baseline);
  const auto* aps = r.find(ModelKind::aps_only);
  if (!ours || !sync || !aps) throw InvalidInput("ordering check needs all three methods");
  OrderingCheck c;
  c.ours_vs_sync = improvement(sync->mean_rmse(), ours->mean_rmse());
  c.sync_vs_aps = improvement(aps->mean_rmse(), sync->mean_rmse());
  c.holds = c.ours_vs_sync <= -min_gap_percent && c.sync_vs_aps <= -min_gap_percent;
  return c;
}

/// Markdown table in the layout of the published comparison: one row per
/// scenario (here one synthetic scenario, plus one row per seed), one column
/// per method, cells "RMSE (EVA)", lowest RMSE per row in bold.
inline std::string benchmark_markdown(const BenchmarkResult& r) {
  std::ostringstream os;
  auto cell = [](double rmse, std::optional<double> eva, bool bold) {
    char buf[64];
    if (eva) {
      std::snprintf(buf, sizeof buf, "%.3f (%.3f)", rmse, *eva);
    } else {
      std::snprintf(buf, sizeof buf, "%.3f (n/a)", rmse);
    }
    return bold ? "**" + std::string(buf) + "**" : std::string(buf);
  };
  auto row = [&](const std::string& name, const std::vector<std::pair<double, std::optional<double>>>& cells) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i].first < cells[best].first) best = i;
    }
    os << "| " << name << " |";
    for (std::size_t i = 0; i < cells.size(); ++i) os << ' ' << cell(cells[i].first, cells[i].second, i == best) << " |";
    os << '\n';
  };

  os << "| Scenario | ";
  for (const auto& m : r.methods) os << method_label(m.kind) << " | ";
  os << "\n|---|";
  for (std::size_t i = 0; i < r.methods.size(); ++i) os << "---|";
  os << '\n';

  std::vector<std::pair<double, std::optional<double>>> mean_cells;
  for (const auto& m : r.methods) mean_cells.emplace_back(m.mean_rmse(), m.mean_eva());
  row("synthetic road (mean of " + std::to_string(r.methods.front().runs.size()) + " seeds)", mean_cells);
  for (std::size_t s = 0; s < r.methods.front().runs.size(); ++s) {
    std::vector<std::pair<double, std::optional<double>>> cells;
    for (const auto& m : r.methods) cells.emplace_back(m.runs[s].test.rmse, m.runs[s].test.eva);
    row("seed " + std::to_string(r.methods.front().runs[s].seed), cells);
  }

  if (r.find(ModelKind::asynchronous) && r.find(ModelKind::sync_baseline) && r.find(ModelKind::aps_only)) {
    const OrderingCheck c = check_ordering(r);
    os << "\nOurs vs sync: RMSE " << describe_improvement(c.ours_vs_sync) << ". Sync vs APS-only: RMSE "
       << describe_improvement(c.sync_vs_aps) << ".\n";
    os << "Ordering ours < sync < APS-only with gaps of at least 5%: " << (c.holds ? "holds" : "does not hold") << ".\n";
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "\nSplit: %zu train / %zu val / %zu test sequences. Wall time %.0f s.\n", r.train_size,
                r.val_size, r.test_size, r.seconds);
  os << buf;
  return os.str();
}

}  // namespace asyncev::eval
