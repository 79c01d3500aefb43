#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asyncev/cli/run_config.hpp"
#include "asyncev/nn/checkpoint.hpp"
#include "asyncev/pipeline/grad_suite.hpp"

namespace asyncev::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// simulate

/// Writes `cfg.scenes` scenes, seeds cfg.seed onward, one sequence directory
/// each, under `out`.
inline std::vector<Sequence> cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  auto seqs = eval::generate_scenes(cfg.scene, cfg.seed, cfg.scenes, cfg.train.workers);
  eval::write_dataset(out, seqs);
  return seqs;
}

// ---------------------------------------------------------------------------
// train

inline std::map<std::string, std::string> checkpoint_metadata(const RunConfig& cfg, const eval::TrainResult& tr) {
  auto m = cfg.model.to_metadata();
  m["model_kind"] = eval::to_string(cfg.kind);
  m["seed"] = std::to_string(cfg.seed);
  m["epochs"] = std::to_string(cfg.train.epochs);
  m["best_epoch"] = std::to_string(tr.best_epoch);
  if (tr.best_val_rmse) m["best_val_rmse"] = io::format_double(*tr.best_val_rmse);
  return m;
}

struct TrainOutcome {
  eval::TrainResult result;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

/// Splits the data by seed (everything is training data when there are too
/// few sequences for a split), trains, and writes the best-validation
/// parameters to `checkpoint_path` plus a per-epoch CSV log next to it.
inline TrainOutcome cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& checkpoint_path,
                              std::ostream& log) {
  cfg.validate();
  auto all = eval::read_dataset(data_dir);
  for (const auto& s : all) {
    if (s.width != cfg.model.width || s.height != cfg.model.height) {
      throw InvalidInput("sequence " + std::to_string(s.seed) + " is " + std::to_string(s.width) + "x" +
                         std::to_string(s.height) + ", config expects " + std::to_string(cfg.model.width) + "x" +
                         std::to_string(cfg.model.height));
    }
  }
  eval::Split split;
  if (eval::split_sizes(all.size())[0] == 0) {
    split.train = std::move(all);
  } else {
    split = eval::split_by_seed(std::move(all));
  }

  eval::TrainConfig tc = cfg.train;
  tc.shuffle_seed = cfg.seed;
  const auto model = eval::make_model(cfg.kind, cfg.model);

  const fs::path log_path = fs::path(checkpoint_path).concat(".log.csv");
  if (checkpoint_path.has_parent_path()) fs::create_directories(checkpoint_path.parent_path());
  std::ofstream csv(log_path);
  if (!csv) throw IoError("cannot write " + log_path.string());
  csv << "epoch,train_loss,train_rmse,val_rmse\n";

  TrainOutcome out;
  out.train_size = split.train.size();
  out.val_size = split.val.size();
  log << "training " << eval::to_string(cfg.kind) << " on " << out.train_size << " sequences, validating on "
      << out.val_size << "\n";
  out.result = eval::train_model(model, eval::init_params(cfg.kind, cfg.model, cfg.seed), split.train, split.val, tc,
                                 [&](const eval::EpochLog& e) {
                                   const std::string val = e.val_rmse ? io::format_double(*e.val_rmse) : "";
                                   csv << e.epoch << ',' << io::format_double(e.train_loss) << ','
                                       << io::format_double(e.train_rmse) << ',' << val << '\n';
                                   char buf[160];
                                   std::snprintf(buf, sizeof buf, "epoch %3d  train loss %.5f  train rmse %.4f  val rmse %s\n",
                                                 e.epoch, e.train_loss, e.train_rmse,
                                                 e.val_rmse ? std::to_string(*e.val_rmse).c_str() : "-");
                                   log << buf << std::flush;
                                 });
  nn::save_checkpoint(checkpoint_path, {out.result.best_params, checkpoint_metadata(cfg, out.result)});
  return out;
}

// ---------------------------------------------------------------------------
// checkpoint loading

struct LoadedModel {
  pipeline::ModelConfig config;
  eval::ModelKind kind = eval::ModelKind::asynchronous;
  nn::ParamSet params;
};

/// Loads a checkpoint and checks its arrays against the layout its metadata
/// describes.
inline LoadedModel load_model(const fs::path& checkpoint_path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
  LoadedModel m;
  m.config = pipeline::ModelConfig::from_metadata(ckpt.metadata);
  m.config.validate();
  if (const auto it = ckpt.metadata.find("model_kind"); it != ckpt.metadata.end()) m.kind = eval::parse_model_kind(it->second);
  const nn::ParamSet layout = eval::init_params(m.kind, m.config, 0);
  if (layout.size() != ckpt.params.size()) throw ShapeError("checkpoint does not match its declared model layout");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& want = layout.arrays()[i];
    const auto& got = ckpt.params.arrays()[i];
    if (want.name != got.name || want.shape != got.shape) {
      throw ShapeError("checkpoint array " + got.name + " " + nn::shape_str(got.shape) + " does not match expected " +
                       want.name + " " + nn::shape_str(want.shape));
    }
  }
  m.params = ckpt.params;
  return m;
}

inline void require_resolution(const std::vector<Sequence>& seqs, const pipeline::ModelConfig& cfg) {
  for (const auto& s : seqs) {
    if (s.width != cfg.width || s.height != cfg.height) {
      throw ShapeError("sequence " + std::to_string(s.seed) + " is " + std::to_string(s.width) + "x" +
                       std::to_string(s.height) + " but the checkpoint expects " + std::to_string(cfg.width) + "x" +
                       std::to_string(cfg.height));
    }
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalOutcome {
  eval::MetricReport report;
  eval::Predictions predictions;
};

inline void write_predictions_csv(const fs::path& path, const eval::Predictions& p) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "frame_index,predicted_angle,true_angle\n";
  for (std::size_t i = 0; i < p.predicted.size(); ++i) {
    os << p.frame_index[i] << ',' << io::format_double(p.predicted[i]) << ',' << io::format_double(p.observed[i]) << '\n';
  }
}

/// Eval-mode run with self-fed angle history over every sequence in
/// `data_dir`; writes report.json and predictions.csv under `out_dir`.
inline EvalOutcome cmd_eval(const fs::path& checkpoint_path, const fs::path& data_dir, const fs::path& out_dir,
                            int workers = 1) {
  const LoadedModel m = load_model(checkpoint_path);
  const auto seqs = eval::read_dataset(data_dir);
  require_resolution(seqs, m.config);
  EvalOutcome out;
  out.predictions = eval::predict(eval::make_model(m.kind, m.config), m.params, seqs, workers);
  out.report = eval::make_report(out.predictions.predicted, out.predictions.observed);
  fs::create_directories(out_dir);
  write_predictions_csv(out_dir / "predictions.csv", out.predictions);
  std::ofstream js(out_dir / "report.json");
  if (!js) throw IoError("cannot write report.json");
  js << out.report.to_json().dump(2) << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// visualize

/// Mask heat-map bytes: round(255 * S), row-major.
inline std::vector<std::uint8_t> mask_bytes(const std::vector<double>& S) {
  std::vector<std::uint8_t> b(S.size());
  for (std::size_t i = 0; i < S.size(); ++i) b[i] = static_cast<std::uint8_t>(std::lround(255.0 * S[i]));
  return b;
}

/// h+ - h- image: zero maps to 128, the largest magnitude in the frame to 1 or 255.
inline std::vector<std::uint8_t> event_frame_bytes(const CountImage& d) {
  int peak = 0;
  for (int v : d.counts) peak = std::max(peak, std::abs(v));
  std::vector<std::uint8_t> b(d.counts.size(), 128);
  if (peak == 0) return b;
  for (std::size_t i = 0; i < b.size(); ++i) {
    b[i] = static_cast<std::uint8_t>(std::lround(128.0 + 127.0 * d.counts[i] / peak));
  }
  return b;
}

struct VisualizeOutcome {
  std::vector<fs::path> masks;
  std::vector<fs::path> event_frames;
};

/// Writes mask_NNNNN.pgm (S of the asynchronous model) and events_NNNNN.pgm
/// (h+ - h- over the same gap) for frames 1..N-1 of one sequence.
inline VisualizeOutcome cmd_visualize(const fs::path& checkpoint_path, const fs::path& sequence_dir, const fs::path& out_dir) {
  const LoadedModel m = load_model(checkpoint_path);
  if (m.kind != eval::ModelKind::asynchronous) throw ConfigError("visualize needs a checkpoint of the asynchronous model");
  const Sequence seq = io::read_sequence(sequence_dir);
  require_resolution({seq}, m.config);
  pipeline::RunOptions opt;
  opt.record_trace = true;
  const auto result = pipeline::run_sequence(seq, m.params, m.config, opt);

  fs::create_directories(out_dir);
  VisualizeOutcome out;
  char name[64];
  for (const auto& t : result.trace) {
    std::snprintf(name, sizeof name, "mask_%05zu.pgm", t.frame);
    out.masks.push_back(out_dir / name);
    io::write_pgm_bytes(out.masks.back(), seq.width, seq.height, mask_bytes(t.mask));

    const TimeWindow window{seq.frame_time(t.frame - 1), seq.frame_time(t.frame)};
    const CountImage d = accumulate_event_frame(seq.events, window, seq.width, seq.height);
    std::snprintf(name, sizeof name, "events_%05zu.pgm", t.frame);
    out.event_frames.push_back(out_dir / name);
    io::write_pgm_bytes(out.event_frames.back(), seq.width, seq.height, event_frame_bytes(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOutcome {
  pipeline::GradSuiteReport layers;
  pipeline::GradSuiteEntry pipeline;
  bool passed = false;
};

inline void print_grad_entry(std::ostream& os, const pipeline::GradSuiteEntry& e, bool per_tensor) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-38s %s  max rel err %.3e (tol %.0e)  checked %zu  skipped %zu\n", e.name.c_str(),
                e.report.passed ? "PASS" : "FAIL", e.report.max_relative_error, e.tolerance, e.report.checked,
                e.report.skipped);
  os << buf;
  if (!per_tensor) return;
  for (const auto& t : e.report.tensors) {
    std::snprintf(buf, sizeof buf, "    %-44s max rel err %.3e  checked %zu  skipped %zu\n", t.name.c_str(),
                  t.max_relative_error, t.checked, t.skipped);
    os << buf;
  }
}

/// The toy sequence of the full-pipeline check: 16x12, three frames.
inline Sequence gradcheck_sequence(std::uint64_t seed) {
  eval::SceneConfig sc;
  sc.width = 16;
  sc.height = 12;
  sc.frames = 3;
  sc.road_half_width = 5.0;
  sc.pixels_per_degree = 1.0;
  sc.lateral_jitter = 1.0;
  sc.seed = seed;
  return eval::generate_scene(sc);
}

/// Layer checks at 1e-4 relative and the unrolled toy pipeline at 1e-3. Every
/// parameter tensor of the pipeline is listed in the report.
inline GradcheckOutcome cmd_gradcheck(const RunConfig& cfg, std::ostream& os) {
  GradcheckOutcome out;
  out.layers = pipeline::run_layer_grad_checks(cfg.seed, 1e-4);
  for (const auto& e : out.layers.entries) print_grad_entry(os, e, true);
  out.pipeline = pipeline::run_pipeline_grad_check(gradcheck_sequence(cfg.seed), pipeline::grad_check_toy_config(),
                                                   cfg.seed, 1e-3);
  print_grad_entry(os, out.pipeline, true);
  out.passed = out.layers.passed() && out.pipeline.report.passed;
  os << (out.passed ? "gradcheck: all checks passed\n" : "gradcheck: FAILED\n");
  return out;
}

// ---------------------------------------------------------------------------
// benchmark

inline nlohmann::json benchmark_json(const eval::BenchmarkResult& r) {
  nlohmann::json j;
  j["train_size"] = r.train_size;
  j["val_size"] = r.val_size;
  j["test_size"] = r.test_size;
  for (const auto& m : r.methods) {
    nlohmann::json mj;
    mj["method"] = eval::to_string(m.kind);
    mj["mean_rmse"] = m.mean_rmse();
    const auto eva = m.mean_eva();
    mj["mean_eva"] = eva ? nlohmann::json(*eva) : nlohmann::json(nullptr);
    for (const auto& run : m.runs) {
      mj["runs"].push_back({{"seed", run.seed}, {"test", run.test.to_json()}, {"best_epoch", run.best_epoch}});
    }
    j["methods"].push_back(mj);
  }
  return j;
}

/// Runs the three-way comparison; writes benchmark.md and benchmark.json under
/// `out_dir` when it is non-empty.
inline eval::BenchmarkResult cmd_benchmark(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  const auto result = eval::run_benchmark(cfg.benchmark(), [&](const std::string& s) { log << s << '\n' << std::flush; });
  const std::string table = eval::benchmark_markdown(result);
  log << '\n' << table;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "benchmark.md") << table;
    std::ofstream(out_dir / "benchmark.json") << benchmark_json(result).dump(2) << '\n';
    std::ofstream(out_dir / "benchmark.cfg") << to_config_text(cfg);
  }
  return result;
}

}  // namespace asyncev::cli
