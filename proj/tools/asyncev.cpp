// asyncev: simulate scenes, train and evaluate models, render masks, check
// gradients and run the three-way benchmark.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
// error, 3 numerical failure (non-finite loss, failed gradient check).

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "asyncev/cli/commands.hpp"

namespace {

using namespace asyncev;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::vector<std::string> overrides;
};

cli::RunConfig resolve(const CommonFlags& f) {
  cli::RunConfig cfg;
  if (!f.config.empty()) cli::apply_config_file(cfg, f.config);
  cli::apply_overrides(cfg, f.overrides);
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.train.workers = *f.workers;
  if (!f.out.empty()) cfg.out = f.out;
  return cfg;
}

std::string require_path(const std::string& flag_value, const std::string& config_value, const char* what) {
  const std::string& v = flag_value.empty() ? config_value : flag_value;
  if (v.empty()) throw ConfigError(std::string("missing ") + what);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous event-stream steering pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags common;
  app.add_option("--config", common.config, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "scene seed (simulate) or initialization seed (train)");
  app.add_option("--out", common.out, "output directory");
  app.add_option("--workers", common.workers, "worker threads across sequences")->check(CLI::PositiveNumber);
  app.add_option("--set", common.overrides, "configuration override key=value (repeatable)");

  auto* simulate = app.add_subcommand("simulate", "render synthetic scenes with frames, angles and events");
  std::optional<std::size_t> scenes;
  simulate->add_option("--scenes", scenes, "number of scenes");

  auto* train = app.add_subcommand("train", "train a model and write the best-validation checkpoint");
  std::string data, checkpoint, model;
  train->add_option("--data", data, "dataset directory");
  train->add_option("--checkpoint", checkpoint, "checkpoint to write");
  train->add_option("--model", model, "asynchronous | sync | aps_only");

  auto* evaluate = app.add_subcommand("eval", "evaluate a checkpoint with self-fed angle history");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint to load");
  evaluate->add_option("--data", data, "dataset or sequence directory");

  auto* visualize = app.add_subcommand("visualize", "write mask and h+ - h- heat-maps for one sequence");
  std::string sequence;
  visualize->add_option("--checkpoint", checkpoint, "checkpoint of the asynchronous model");
  visualize->add_option("--sequence", sequence, "sequence directory")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every layer and the full pipeline");

  auto* benchmark = app.add_subcommand("benchmark", "train and test ours, sync and APS-only; print a Markdown table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    cli::RunConfig cfg = resolve(common);
    if (scenes) cfg.scenes = *scenes;
    if (!model.empty()) cfg.kind = eval::parse_model_kind(model);

    if (simulate->parsed()) {
      const auto out = require_path(common.out, cfg.out, "--out");
      const auto seqs = cli::cmd_simulate(cfg, out);
      std::size_t events = 0;
      for (const auto& s : seqs) events += s.events.size();
      std::cout << "wrote " << seqs.size() << " scene(s), " << events << " events, to " << out << "\n";
    } else if (train->parsed()) {
      const auto d = require_path(data, cfg.data, "--data");
      const auto ck = require_path(checkpoint, cfg.checkpoint, "--checkpoint");
      const auto outcome = cli::cmd_train(cfg, d, ck, std::cout);
      std::cout << "best epoch " << outcome.result.best_epoch << ", checkpoint " << ck << "\n";
    } else if (evaluate->parsed()) {
      const auto ck = require_path(checkpoint, cfg.checkpoint, "--checkpoint");
      const auto d = require_path(data, cfg.data, "--data");
      const auto out = require_path(common.out, cfg.out, "--out");
      const auto outcome = cli::cmd_eval(ck, d, out, cfg.train.workers);
      std::cout << outcome.report.to_json().dump() << "\n";
    } else if (visualize->parsed()) {
      const auto ck = require_path(checkpoint, cfg.checkpoint, "--checkpoint");
      const auto out = require_path(common.out, cfg.out, "--out");
      const auto outcome = cli::cmd_visualize(ck, sequence, out);
      std::cout << "wrote " << outcome.masks.size() << " masks and " << outcome.event_frames.size()
                << " event frames to " << out << "\n";
    } else if (gradcheck->parsed()) {
      if (!cli::cmd_gradcheck(cfg, std::cout).passed) return 3;
    } else if (benchmark->parsed()) {
      cli::cmd_benchmark(cfg, cfg.out, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
