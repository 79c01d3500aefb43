#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "asyncev/cli/commands.hpp"

using namespace asyncev;
using namespace asyncev::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("asyncev_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunConfig tiny_config() {
  RunConfig c;
  for (const char* kv : {"width=16", "height=12", "channels=2", "q=4", "hidden=6", "attention_hidden=4", "mask_hidden=6",
                         "regressor_channels=3", "residual_blocks=1", "frames=4", "road_half_width=5",
                         "pixels_per_degree=1", "lateral_jitter=1", "epochs=2", "batch_size=2", "lr=0.003"}) {
    apply_overrides(c, {kv});
  }
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ASYNCEV_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Independent recomputation from predictions.csv.
std::pair<double, double> metrics_from_csv(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  std::vector<double> pred, obs;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string f, a, b;
    std::getline(ss, f, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    pred.push_back(std::stod(a));
    obs.push_back(std::stod(b));
  }
  const double n = static_cast<double>(pred.size());
  double se = 0.0, mo = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    se += (pred[i] - obs[i]) * (pred[i] - obs[i]);
    mo += obs[i];
    mr += pred[i] - obs[i];
  }
  mo /= n;
  mr /= n;
  double vo = 0.0, vr = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    vo += (obs[i] - mo) * (obs[i] - mo);
    vr += (pred[i] - obs[i] - mr) * (pred[i] - obs[i] - mr);
  }
  return {std::sqrt(se / n), 1.0 - vr / vo};
}

}  // namespace

TEST(RunConfig, FileThenOverridesFlagsWin) {
  const auto dir = scratch("config");
  std::ofstream(dir / "run.cfg") << "# toy\nwidth=32\nheight=24\nlr=0.01\nmodel=sync\nbench_seeds=4,5\n";
  RunConfig c;
  apply_config_file(c, dir / "run.cfg");
  apply_overrides(c, {"lr=0.002"});
  EXPECT_EQ(c.model.width, 32);
  EXPECT_EQ(c.scene.height, 24);
  EXPECT_EQ(c.train.adam.learning_rate, 0.002);
  EXPECT_EQ(c.kind, eval::ModelKind::sync_baseline);
  EXPECT_EQ(c.bench_seeds, (std::vector<std::uint64_t>{4, 5}));
}

TEST(RunConfig, TextRoundTrip) {
  RunConfig c = tiny_config();
  c.out = "somewhere";
  const auto dir = scratch("cfg_rt");
  std::ofstream(dir / "a.cfg") << to_config_text(c);
  RunConfig back;
  apply_config_file(back, dir / "a.cfg");
  EXPECT_EQ(back.to_key_values(), c.to_key_values());
}

TEST(RunConfig, Errors) {
  RunConfig c;
  EXPECT_THROW(c.set("nonsense", "1"), ConfigError);
  EXPECT_THROW(c.set("lr", "fast"), ConfigError);
  EXPECT_THROW(c.set("teacher_forcing", "maybe"), ConfigError);
  EXPECT_THROW(apply_overrides(c, {"lr"}), ConfigError);
  c.set("batch_size", "0");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Simulate, ZeroScheduleWritesZeroAngles) {
  auto c = tiny_config();
  c.set("schedule", "zero");
  const auto dir = scratch("sim_zero");
  cmd_simulate(c, dir);
  const auto csv = slurp(dir / eval::sequence_dir_name(1) / "angles.csv");
  EXPECT_EQ(csv, "frame_index,angle_degrees\n0,0\n1,0\n2,0\n3,0\n");
}

TEST(Simulate, SameSeedIdenticalBytes) {
  const auto c = tiny_config();
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  const auto seqs = cmd_simulate(c, a);
  cmd_simulate(c, b);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 7u);  // four frames, angles, events, sequence.cfg
  EXPECT_EQ(io::read_sequence(a / eval::sequence_dir_name(1)), seqs.front());
}

TEST(Train, CheckpointIsBitIdenticalAndRoundTrips) {
  auto c = tiny_config();
  c.set("epochs", "1");
  const auto data = scratch("train_data"), out = scratch("train_out");
  cmd_simulate(c, data);
  std::ostringstream log;
  const auto r = cmd_train(c, data, out / "a.ckpt", log);
  cmd_train(c, data, out / "b.ckpt", log);
  EXPECT_EQ(slurp(out / "a.ckpt"), slurp(out / "b.ckpt"));
  EXPECT_EQ(r.train_size, 1u);
  const auto ck = nn::load_checkpoint(out / "a.ckpt");
  EXPECT_EQ(ck.params, r.result.best_params);
  EXPECT_EQ(ck.metadata.at("model_kind"), "asynchronous");
  EXPECT_EQ(slurp(out / "a.ckpt.log.csv").substr(0, 36), "epoch,train_loss,train_rmse,val_rmse");
}

TEST(Train, ZeroLearningRateKeepsValidationFlat) {
  auto c = tiny_config();
  c.set("lr", "0");
  c.set("epochs", "3");
  c.set("scenes", "10");
  const auto data = scratch("train_lr0"), out = scratch("train_lr0_out");
  cmd_simulate(c, data);
  std::ostringstream log;
  const auto r = cmd_train(c, data, out / "m.ckpt", log);
  ASSERT_EQ(r.val_size, 1u);
  for (const auto& e : r.result.log) EXPECT_EQ(e.val_rmse, r.result.log.front().val_rmse);
}

TEST(Train, RejectsResolutionMismatch) {
  auto c = tiny_config();
  const auto data = scratch("train_mismatch");
  cmd_simulate(c, data);
  c.set("width", "20");
  std::ostringstream log;
  EXPECT_THROW(cmd_train(c, data, data / "x.ckpt", log), InvalidInput);
}

TEST(Eval, ReportMatchesRecomputationAndIsRepeatable) {
  auto c = tiny_config();
  c.set("scenes", "3");
  c.set("schedule", "sine");
  c.set("amplitude", "4");
  const auto data = scratch("eval_data"), out = scratch("eval_out");
  cmd_simulate(c, data);
  std::ostringstream log;
  cmd_train(c, data, out / "m.ckpt", log);
  const auto a = cmd_eval(out / "m.ckpt", data, out / "a");
  const auto b = cmd_eval(out / "m.ckpt", data, out / "b");
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(slurp(out / "a" / "report.json"), slurp(out / "b" / "report.json"));
  EXPECT_EQ(a.report.n, 9u);
  const auto [rmse, eva] = metrics_from_csv(out / "a" / "predictions.csv");
  EXPECT_NEAR(a.report.rmse, rmse, 1e-12);
  ASSERT_TRUE(a.report.eva.has_value());
  EXPECT_NEAR(*a.report.eva, eva, 1e-12);
  const auto j = nlohmann::json::parse(slurp(out / "a" / "report.json"));
  EXPECT_EQ(eval::MetricReport::from_json(j), a.report);
}

TEST(Eval, ShapeMismatchAgainstManifest) {
  auto c = tiny_config();
  const auto data = scratch("eval_shape"), other = scratch("eval_shape_other");
  cmd_simulate(c, data);
  std::ostringstream log;
  cmd_train(c, data, data / "m.ckpt", log);
  auto big = tiny_config();
  big.set("width", "20");
  cmd_simulate(big, other);
  EXPECT_THROW(cmd_eval(data / "m.ckpt", other, other / "out"), ShapeError);
}

TEST(Visualize, ZeroLogitMasksAreMidGray) {
  auto c = tiny_config();
  const auto data = scratch("vis_data"), out = scratch("vis_out");
  const auto seqs = cmd_simulate(c, data);
  auto params = eval::init_params(eval::ModelKind::asynchronous, c.model, 1);
  for (auto& a : params.arrays()) {
    if (a.name.rfind("mask.", 0) == 0) std::fill(a.values.begin(), a.values.end(), 0.0);
  }
  auto meta = c.model.to_metadata();
  meta["model_kind"] = "asynchronous";
  nn::save_checkpoint(out / "zero.ckpt", {params, meta});
  const auto r = cmd_visualize(out / "zero.ckpt", data / eval::sequence_dir_name(1), out / "maps");
  ASSERT_EQ(r.masks.size(), seqs.front().frames.size() - 1);
  ASSERT_EQ(r.event_frames.size(), r.masks.size());
  for (const auto& m : r.masks) {
    const auto pgm = io::read_pgm_bytes(m);
    for (auto v : pgm.bytes) EXPECT_EQ(v, 128);
  }
}

TEST(Visualize, PixelsAreRoundedMaskValues) {
  auto c = tiny_config();
  const auto data = scratch("vis2_data"), out = scratch("vis2_out");
  cmd_simulate(c, data);
  std::ostringstream log;
  cmd_train(c, data, out / "m.ckpt", log);
  const auto r = cmd_visualize(out / "m.ckpt", data / eval::sequence_dir_name(1), out / "maps");

  const auto m = load_model(out / "m.ckpt");
  pipeline::RunOptions opt;
  opt.record_trace = true;
  const auto seq = io::read_sequence(data / eval::sequence_dir_name(1));
  const auto run = pipeline::run_sequence(seq, m.params, m.config, opt);
  ASSERT_EQ(run.trace.size(), r.masks.size());
  for (std::size_t k = 0; k < r.masks.size(); ++k) {
    const auto pgm = io::read_pgm_bytes(r.masks[k]);
    ASSERT_EQ(pgm.bytes.size(), run.trace[k].mask.size());
    for (std::size_t i = 0; i < pgm.bytes.size(); ++i) {
      EXPECT_EQ(pgm.bytes[i], static_cast<int>(std::lround(255.0 * run.trace[k].mask[i])));
    }
  }
}

TEST(Visualize, RejectsBaselineCheckpoint) {
  auto c = tiny_config();
  c.set("model", "sync");
  const auto data = scratch("vis3");
  cmd_simulate(c, data);
  std::ostringstream log;
  cmd_train(c, data, data / "s.ckpt", log);
  EXPECT_THROW(cmd_visualize(data / "s.ckpt", data / eval::sequence_dir_name(1), data / "maps"), ConfigError);
}

TEST(Gradcheck, PassesAndListsEveryTensor) {
  RunConfig c;
  std::ostringstream os;
  const auto r = cmd_gradcheck(c, os);
  EXPECT_TRUE(r.passed) << os.str();
  const auto toy = eval::init_params(eval::ModelKind::asynchronous, pipeline::grad_check_toy_config(), 0);
  for (const auto& a : toy.arrays()) EXPECT_NE(os.str().find(a.name), std::string::npos) << a.name;
  EXPECT_LT(r.pipeline.report.max_relative_error, 1e-3);
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("bin");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("--set lr=fast simulate --out " + dir.string()), 1);
  EXPECT_EQ(run_cli("--set width=16 --set height=12 --set frames=3 --out " + (dir / "d").string() + " simulate"), 0);
  EXPECT_TRUE(fs::exists(dir / "d" / eval::sequence_dir_name(1) / "events.txt"));
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "missing.ckpt").string() + " --data " + (dir / "d").string() +
                    " --out " + (dir / "e").string()),
            2);
  std::ofstream(dir / "garbage.ckpt") << "not a checkpoint";
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "garbage.ckpt").string() + " --data " + (dir / "d").string() +
                    " --out " + (dir / "e").string()),
            2);
}

TEST(Binary, SimulateIsDeterministicAcrossProcesses) {
  const auto dir = scratch("bin_det");
  const std::string flags = " --set width=16 --set height=12 --set frames=3 --seed 9 simulate";
  ASSERT_EQ(run_cli("--out " + (dir / "a").string() + flags), 0);
  ASSERT_EQ(run_cli("--out " + (dir / "b").string() + flags), 0);
  const auto name = eval::sequence_dir_name(9);
  EXPECT_EQ(slurp(dir / "a" / name / "events.txt"), slurp(dir / "b" / name / "events.txt"));
  EXPECT_FALSE(slurp(dir / "a" / name / "events.txt").empty());
}
