#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "asyncev/event_model/simulator.hpp"
#include "asyncev/pipeline/grad_suite.hpp"

using namespace asyncev;
using namespace asyncev::pipeline;
using nn::Binding;
using nn::ParamSet;
using nn::Tensor;

namespace {

std::vector<double> uniform_values(std::mt19937_64& gen, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

std::vector<double> random_polarity_matrix(std::mt19937_64& gen, std::size_t n, double density = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> m(n, 0.0);
  for (auto& v : m) {
    const double r = u(gen);
    if (r < density) v = r < density / 2 ? -1.0 : 1.0;
  }
  return m;
}

// The five steps written out with scalar loops: M is w x h (row x = column x
// of the image), A1 and A2 are h x q, a has q entries.
std::vector<double> efe_oracle(const std::vector<double>& M, const std::vector<double>& a, const std::vector<double>& A1,
                               const std::vector<double>& A2, std::size_t w, std::size_t h, std::size_t q) {
  std::vector<std::vector<double>> L1(w, std::vector<double>(q, 0.0)), L3 = L1;
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t j = 0; j < q; ++j) {
      for (std::size_t y = 0; y < h; ++y) {
        L1[x][j] += M[x * h + y] * A1[y * q + j];
        L3[x][j] += M[x * h + y] * A2[y * q + j];
      }
    }
  }
  std::vector<double> L2(w, 0.0);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t j = 0; j < q; ++j) L2[x] += L1[x][j] * a[j];
  }
  double z = 0.0;
  std::vector<double> v(w);
  for (std::size_t x = 0; x < w; ++x) z += v[x] = std::exp(L2[x]);
  for (auto& e : v) e /= z;
  std::vector<double> T(q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t x = 0; x < w; ++x) T[j] += v[x] * L3[x][j];
  }
  return T;
}

ModelConfig tiny_config(int w = 8, int h = 6) {
  ModelConfig cfg;
  cfg.width = w;
  cfg.height = h;
  cfg.channels = 2;
  cfg.q = 4;
  cfg.hidden = 5;
  cfg.attention_hidden = 3;
  cfg.mask_hidden = 5;
  cfg.regressor_channels = 3;
  cfg.residual_blocks = 1;
  return cfg;
}

Sequence random_sequence(std::uint64_t seed, int w, int h, std::size_t frames, Timestamp z = 10) {
  std::mt19937_64 gen(seed);
  Sequence seq;
  seq.width = w;
  seq.height = h;
  seq.frame_interval = z;
  seq.seed = seed;
  std::vector<Timestamp> ts;
  for (std::size_t i = 0; i < frames; ++i) {
    Image img(w, h);
    for (auto& v : img.pixels) v = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    seq.frames.push_back(img);
    seq.angles.push_back(std::uniform_real_distribution<double>(-5.0, 5.0)(gen));
    ts.push_back(static_cast<Timestamp>(i) * z);
  }
  seq.events = simulate_events(seq.frames, SimulatorConfig{}, ts);
  return seq;
}

void randomize(ParamSet& ps, std::uint64_t seed, double scale) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& a : ps.arrays()) {
    for (auto& v : a.values) v = u(gen);
  }
}

}  // namespace

TEST(Efe, ZeroMatrixGivesZeroVector) {
  std::mt19937_64 gen(1);
  const auto A1 = Tensor::from({3, 2}, uniform_values(gen, 6));
  const auto A2 = Tensor::from({3, 2}, uniform_values(gen, 6));
  const auto T = event_feature_extract(Tensor::zeros({4, 3}), Tensor::from({2}, {1.0, -2.0}), A1, A2);
  for (double v : T.values()) EXPECT_EQ(v, 0.0);
}

TEST(Efe, SingleRowPassesL3Through) {
  std::mt19937_64 gen(2);
  const auto M = Tensor::from({1, 3}, {1.0, -1.0, 1.0});
  const auto A1v = uniform_values(gen, 6), A2v = uniform_values(gen, 6);
  const auto T = event_feature_extract(M, Tensor::from({2}, {0.3, 0.4}), Tensor::from({3, 2}, A1v),
                                       Tensor::from({3, 2}, A2v));
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(T[j], A2v[0 * 2 + j] - A2v[1 * 2 + j] + A2v[2 * 2 + j], 1e-15);
}

TEST(EfeProperty, MatchesScalarOracleOverFiftySeeds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 gen(seed);
    const std::size_t w = seed < 25 ? 4 : 3 + seed % 9, h = seed < 25 ? 3 : 2 + seed % 5, q = seed < 25 ? 2 : 1 + seed % 6;
    const auto M = random_polarity_matrix(gen, w * h);
    const auto a = uniform_values(gen, q, -3.0, 3.0), A1 = uniform_values(gen, h * q), A2 = uniform_values(gen, h * q);
    const auto ref = efe_oracle(M, a, A1, A2, w, h, q);
    const Tensor args[] = {Tensor::from({w, h}, M), Tensor::from({q}, a), Tensor::from({h, q}, A1),
                           Tensor::from({h, q}, A2)};
    const auto fused = event_feature_extract(args[0], args[1], args[2], args[3]);
    const auto dense = event_feature_extract_reference(args[0], args[1], args[2], args[3]);
    for (std::size_t j = 0; j < q; ++j) {
      EXPECT_NEAR(fused[j], ref[j], 1e-12) << "seed " << seed;
      EXPECT_NEAR(dense[j], ref[j], 1e-12) << "seed " << seed;
    }
  }
}

TEST(Efe, FusedAndDenseGradientsAgree) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed + 300);
    const std::size_t w = 6, h = 5, q = 3;
    const auto M = Tensor::from({w, h}, random_polarity_matrix(gen, w * h));
    const auto w_out = Tensor::from({q}, uniform_values(gen, q));
    ParamSet ps;
    ps.add("A1", {h, q}, uniform_values(gen, h * q));
    ps.add("A2", {h, q}, uniform_values(gen, h * q));
    ps.add("a", {q}, uniform_values(gen, q));
    auto grads = [&](bool fused) {
      Binding b(ps, true);
      const auto T = fused ? event_feature_extract(M, b["a"], b["A1"], b["A2"])
                           : event_feature_extract_reference(M, b["a"], b["A1"], b["A2"]);
      nn::sum(nn::mul(T, w_out)).backward();
      return b.gradients(ps);
    };
    const auto gf = grads(true), gd = grads(false);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      for (std::size_t i = 0; i < gf.arrays()[k].values.size(); ++i) {
        EXPECT_NEAR(gf.arrays()[k].values[i], gd.arrays()[k].values[i], 1e-12);
      }
    }
  }
}

TEST(Efe, GradientPassesFiniteDifferenceCheck) {
  std::mt19937_64 gen(5);
  const auto M = Tensor::from({5, 4}, random_polarity_matrix(gen, 20));
  const auto w_out = Tensor::from({3}, uniform_values(gen, 3));
  ParamSet ps;
  ps.add("A1", {4, 3}, uniform_values(gen, 12));
  ps.add("A2", {4, 3}, uniform_values(gen, 12));
  const auto a = Tensor::from({3}, uniform_values(gen, 3));
  const auto rep = nn::grad_check(
      [&](const Binding& b) { return nn::sum(nn::mul(event_feature_extract(M, a, b["A1"], b["A2"]), w_out)); }, ps);
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.max_relative_error, 1e-4);
}

TEST(Efe, RejectsShapeMismatch) {
  EXPECT_THROW(event_feature_extract(Tensor::zeros({4, 3}), Tensor::zeros({3}), Tensor::zeros({3, 2}),
                                     Tensor::zeros({3, 2})),
               ShapeError);
  EXPECT_THROW(event_feature_extract(Tensor::zeros({4, 3}), Tensor::zeros({2}), Tensor::zeros({2, 2}),
                                     Tensor::zeros({2, 2})),
               ShapeError);
}

TEST(EfeProperty, EventOrderWithinTimestampDoesNotMatter) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 gen(seed);
    const int w = 9, h = 7;
    std::vector<int> cells(w * h);
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), gen);
    EventStream ev;
    for (int i = 0; i < 20; ++i) ev.push_back({cells[i] % w, cells[i] / w, 4, gen() & 1 ? 1 : -1});
    EventStream shuffled = ev;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const auto A1 = Tensor::from({7, 3}, uniform_values(gen, 21)), A2 = Tensor::from({7, 3}, uniform_values(gen, 21));
    const auto a = Tensor::from({3}, uniform_values(gen, 3));
    const auto T1 = event_feature_extract(event_matrix_tensor(build_event_matrix(ev, w, h)), a, A1, A2);
    const auto T2 = event_feature_extract(event_matrix_tensor(build_event_matrix(shuffled, w, h)), a, A1, A2);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(T1[j], T2[j]);
  }
}

TEST(Encoder, ZeroImageZeroBiasGivesZeroFeatures) {
  const auto cfg = tiny_config();
  const auto ps = init_pipeline_params(cfg, 1);
  const Binding b(ps, false);
  const auto I = aps_encode(b, cfg, Image(cfg.width, cfg.height, 0.0));
  EXPECT_EQ(I.shape(), (nn::Shape{2, 6, 8}));
  for (double v : I.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, ShapeAndResolutionCheck) {
  auto cfg = tiny_config(16, 12);
  cfg.channels = 5;
  const auto ps = init_pipeline_params(cfg, 2);
  const Binding b(ps, false);
  EXPECT_EQ(aps_encode(b, cfg, Image(16, 12, 0.3)).shape(), (nn::Shape{5, 12, 16}));
  EXPECT_THROW(aps_encode(b, cfg, Image(12, 16, 0.3)), InvalidInput);
}

TEST(Gru, ZeroTimestampVectorKeepsZeroState) {
  auto cfg = tiny_config();
  auto ps = init_pipeline_params(cfg, 1);
  for (auto& a : ps.arrays()) std::fill(a.values.begin(), a.values.end(), 0.0);
  const Binding b(ps, false);
  auto s = advance_timestamp(PipelineState::initial(cfg), Tensor::zeros({4}), b);
  for (double v : s.gru_hidden.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.gru_steps, 1u);
}

TEST(Gru, TimestampOrderChangesState) {
  auto cfg = tiny_config();
  auto ps = init_pipeline_params(cfg, 3);
  randomize(ps, 3, 0.8);
  const Binding b(ps, false);
  const auto T1 = Tensor::from({4}, {0.9, -0.5, 0.2, 0.7}), T2 = Tensor::from({4}, {-0.3, 0.8, -0.9, 0.1});
  auto s12 = advance_timestamp(advance_timestamp(PipelineState::initial(cfg), T1, b), T2, b);
  auto s21 = advance_timestamp(advance_timestamp(PipelineState::initial(cfg), T2, b), T1, b);
  double diff = 0.0;
  for (std::size_t i = 0; i < s12.gru_hidden.size(); ++i) diff += std::abs(s12.gru_hidden[i] - s21.gru_hidden[i]);
  EXPECT_GT(diff, 1e-6);
  EXPECT_EQ(s12.last_T[0], T2[0]);
}

TEST(Attention, UniformInputWithZeroParamsIsIdentity) {
  auto cfg = tiny_config();
  auto ps = init_pipeline_params(cfg, 1);
  for (auto& a : ps.arrays()) {
    if (a.name.rfind("attention.", 0) == 0) std::fill(a.values.begin(), a.values.end(), 0.0);
  }
  const Binding b(ps, false);
  const auto I = Tensor::filled({2, 6, 8}, 0.37);
  const auto out = cs_attention(b, I, Tensor::from({5}, {0.1, 0.2, 0.3, 0.4, 0.5}));
  for (std::size_t i = 0; i < I.size(); ++i) EXPECT_NEAR(out.FT[i], I[i], 1e-15);
  for (double v : out.beta.values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(AttentionProperty, WeightsSumToOne) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto cfg = tiny_config();
    auto ps = init_pipeline_params(cfg, seed);
    randomize(ps, seed, 1.5);
    const Binding b(ps, false);
    std::mt19937_64 gen(seed);
    const auto out = cs_attention(b, Tensor::from({2, 6, 8}, uniform_values(gen, 96, -3.0, 3.0)),
                                  Tensor::from({5}, uniform_values(gen, 5)));
    EXPECT_NEAR(std::accumulate(out.beta.values().begin(), out.beta.values().end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(std::accumulate(out.alpha.values().begin(), out.alpha.values().end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Attention, GradientCheckOnSmallInput) {
  ModelConfig cfg = tiny_config(3, 4);
  auto ps = init_pipeline_params(cfg, 4);
  randomize(ps, 4, 0.5);
  ParamSet att;
  for (const auto& a : ps.arrays()) {
    if (a.name.rfind("attention.", 0) == 0) att.add(a.name, a.shape, a.values);
  }
  std::mt19937_64 gen(4);
  att.add("I", {2, 4, 3}, uniform_values(gen, 24));
  att.add("h", {5}, uniform_values(gen, 5));
  const auto probe = Tensor::from({2, 4, 3}, uniform_values(gen, 24));
  const auto rep = nn::grad_check(
      [&](const Binding& b) { return nn::sum(nn::mul(cs_attention(b, b["I"], b["h"]).FT, probe)); }, att);
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.max_relative_error, 1e-4);
}

TEST(Mask, ZeroLogitsGiveHalf) {
  auto cfg = tiny_config();
  auto ps = init_pipeline_params(cfg, 1);
  for (auto& v : ps.at("mask.out.weight").values) v = 0.0;
  const Binding b(ps, false);
  std::mt19937_64 gen(1);
  Image g(8, 6);
  for (auto& v : g.pixels) v = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
  const auto m = generate_mask(b, Tensor::from({2, 6, 8}, uniform_values(gen, 96)), Tensor::zeros({4}), g);
  for (std::size_t i = 0; i < 48; ++i) {
    EXPECT_EQ(m.S[i], 0.5);
    EXPECT_EQ(m.Y[i], 0.5 * g.pixels[i]);
  }
}

TEST(MaskProperty, RangeAndExactProduct) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto cfg = tiny_config();
    auto ps = init_pipeline_params(cfg, seed);
    randomize(ps, seed, 0.5);
    const Binding b(ps, false);
    std::mt19937_64 gen(seed);
    Image g(8, 6);
    for (auto& v : g.pixels) v = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const auto m = generate_mask(b, Tensor::from({2, 6, 8}, uniform_values(gen, 96, -2.0, 2.0)),
                                 Tensor::from({4}, uniform_values(gen, 4)), g);
    for (std::size_t i = 0; i < 48; ++i) {
      EXPECT_GT(m.S[i], 0.0);
      EXPECT_LT(m.S[i], 1.0);
      EXPECT_EQ(m.Y[i], m.S[i] * g.pixels[i]);
    }
  }
}

TEST(MaskProperty, SaturatedLogitsStayInClosedRange) {
  // past |logit| ~ 37 the double nearest to sigmoid is exactly 1
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto cfg = tiny_config();
    auto ps = init_pipeline_params(cfg, seed);
    randomize(ps, seed, 4.0);
    const Binding b(ps, false);
    std::mt19937_64 gen(seed);
    Image g(8, 6, 0.7);
    const auto m = generate_mask(b, Tensor::from({2, 6, 8}, uniform_values(gen, 96, -20.0, 20.0)),
                                 Tensor::from({4}, uniform_values(gen, 4)), g);
    for (std::size_t i = 0; i < 48; ++i) {
      EXPECT_GE(m.S[i], 0.0);
      EXPECT_LE(m.S[i], 1.0);
      EXPECT_TRUE(std::isfinite(m.Y[i]));
    }
  }
}

TEST(Mask, RejectsFeatureShapeMismatch) {
  auto cfg = tiny_config();
  const auto ps = init_pipeline_params(cfg, 1);
  const Binding b(ps, false);
  EXPECT_THROW(generate_mask(b, Tensor::zeros({2, 6, 7}), Tensor::zeros({4}), Image(8, 6)), ShapeError);
}

TEST(Regressor, ZeroInputGivesZeroAngle) {
  auto cfg = tiny_config();
  cfg.residual_blocks = 4;
  const auto ps = init_pipeline_params(cfg, 9);
  const Binding b(ps, false);
  const auto D = regress_angle(b, "regressor", Tensor::zeros({1, 6, 8}), cfg);
  ASSERT_EQ(D.size(), 1u);
  EXPECT_EQ(D.item(), 0.0);
  std::mt19937_64 gen(9);
  const auto D2 = regress_angle(b, "regressor", Tensor::from({1, 6, 8}, uniform_values(gen, 48, 0.0, 1.0)), cfg);
  EXPECT_TRUE(std::isfinite(D2.item()));
}

TEST(GradSuite, EveryLayerPassesOverTwentySeeds) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto rep = run_layer_grad_checks(seed);
    for (const auto& e : rep.entries) {
      EXPECT_TRUE(e.report.passed) << e.name << " seed " << seed << " err " << e.report.max_relative_error;
    }
    ASSERT_TRUE(rep.passed());
  }
}

TEST(RunSequence, GruStepsEqualDistinctTimestampsPerGap) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cfg = tiny_config();
    const auto seq = random_sequence(seed, 8, 6, 4, 10 + static_cast<Timestamp>(seed));
    const auto ps = init_pipeline_params(cfg, seed);
    const auto r = run_sequence(seq, ps, cfg);
    ASSERT_EQ(r.gru_steps_per_gap.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      std::set<Timestamp> distinct;
      for (const auto& e : seq.events) {
        if (e.t > seq.frame_time(i) && e.t <= seq.frame_time(i + 1)) distinct.insert(e.t);
      }
      EXPECT_EQ(r.gru_steps_per_gap[i], distinct.size()) << "seed " << seed << " gap " << i;
    }
  }
}

TEST(RunSequence, TimeBinningCoarsensSteps) {
  auto cfg = tiny_config();
  const auto seq = random_sequence(4, 8, 6, 3, 40);
  const auto ps = init_pipeline_params(cfg, 1);
  cfg.time_bin = 10;
  const auto r = run_sequence(seq, ps, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    std::set<Timestamp> bins;
    for (const auto& e : seq.events) {
      if (e.t > seq.frame_time(i) && e.t <= seq.frame_time(i + 1)) bins.insert(e.t / 10);
    }
    EXPECT_EQ(r.gru_steps_per_gap[i], bins.size());
  }
}

TEST(RunSequence, NoEventsAndZeroParamsGiveRegressorOfZero) {
  auto cfg = tiny_config();
  auto seq = random_sequence(1, 8, 6, 4);
  seq.events.clear();
  auto ps = init_pipeline_params(cfg, 1);
  for (auto& a : ps.arrays()) std::fill(a.values.begin(), a.values.end(), 0.0);
  const auto r = run_sequence(seq, ps, cfg);
  const Binding b(ps, false);
  const double zero_out = regress_angle(b, "regressor", Tensor::zeros({1, 6, 8}), cfg).item();
  for (std::size_t i = 0; i < r.gru_steps_per_gap.size(); ++i) EXPECT_EQ(r.gru_steps_per_gap[i], 0u);
  for (double d : r.predictions) EXPECT_EQ(d, zero_out);
}

TEST(RunSequence, TeacherForcingFeedsGroundTruth) {
  const auto cfg = tiny_config();
  const auto seq = random_sequence(2, 8, 6, 6);
  auto ps = init_pipeline_params(cfg, 2);
  randomize(ps, 2, 0.4);
  RunOptions opt;
  opt.teacher_forcing = true;
  opt.record_trace = true;
  const auto r = run_sequence(seq, ps, cfg, opt);
  for (const auto& t : r.trace) {
    ASSERT_EQ(t.angle_history.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
      const long src = static_cast<long>(t.frame) - 3 + static_cast<long>(j);
      EXPECT_EQ(t.angle_history[j], src >= 1 ? seq.angles[static_cast<std::size_t>(src)] : 0.0);
    }
  }
  opt.teacher_forcing = false;
  const auto self = run_sequence(seq, ps, cfg, opt);
  EXPECT_EQ(self.trace.back().angle_history.back(), self.predictions.back());
}

TEST(RunSequence, TraceInvariantsHold) {
  const auto cfg = tiny_config();
  const auto seq = random_sequence(6, 8, 6, 5);
  auto ps = init_pipeline_params(cfg, 6);
  randomize(ps, 6, 0.6);
  RunOptions opt;
  opt.record_trace = true;
  const auto r = run_sequence(seq, ps, cfg, opt);
  ASSERT_EQ(r.trace.size(), 4u);
  for (const auto& t : r.trace) {
    EXPECT_NEAR(std::accumulate(t.beta.begin(), t.beta.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(std::accumulate(t.alpha.begin(), t.alpha.end(), 0.0), 1.0, 1e-12);
    for (double s : t.mask) {
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
    }
  }
}

TEST(RunSequence, DeterministicAcrossRuns) {
  const auto cfg = tiny_config();
  const auto seq = random_sequence(8, 8, 6, 5);
  const auto ps = init_pipeline_params(cfg, 8);
  RunOptions opt;
  opt.mode = Mode::train;
  opt.teacher_forcing = true;
  const auto a = run_sequence(seq, ps, cfg, opt), b = run_sequence(seq, ps, cfg, opt);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.loss, b.loss);
  ASSERT_TRUE(a.gradients && b.gradients);
  EXPECT_EQ(*a.gradients, *b.gradients);
  EXPECT_EQ(init_pipeline_params(cfg, 8), ps);
}

TEST(RunSequence, LossIsMeanSquaredError) {
  const auto cfg = tiny_config();
  const auto seq = random_sequence(10, 8, 6, 5);
  const auto r = run_sequence(seq, init_pipeline_params(cfg, 10), cfg);
  double mse = 0.0;
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    mse += (r.predictions[i] - seq.angles[i + 1]) * (r.predictions[i] - seq.angles[i + 1]);
  }
  EXPECT_NEAR(r.loss, mse / static_cast<double>(r.predictions.size()), 1e-12);
  EXPECT_FALSE(r.gradients.has_value());
}

TEST(RunSequence, RejectsBadSequences) {
  const auto cfg = tiny_config();
  const auto ps = init_pipeline_params(cfg, 1);
  EXPECT_THROW(run_sequence(random_sequence(1, 9, 6, 3), ps, cfg), InvalidInput);
  auto one = random_sequence(1, 8, 6, 2);
  one.frames.pop_back();
  one.angles.pop_back();
  one.events.clear();
  EXPECT_THROW(run_sequence(one, ps, cfg), InvalidInput);
}

TEST(RunSequence, ToyUnrollGradientOnA1) {
  const auto cfg = tiny_config();
  const auto seq = random_sequence(12, 8, 6, 3);
  auto ps = init_pipeline_params(cfg, 12);
  randomize(ps, 12, 0.3);
  RunOptions run;
  run.mode = Mode::train;
  run.teacher_forcing = true;
  const auto r = run_sequence(seq, ps, cfg, run);
  const auto& ga = r.gradients->at("efe.A1").values;
  auto& a1 = ps.at("efe.A1").values;
  double worst = 0.0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    const double saved = a1[i];
    a1[i] = saved + 1e-4;
    const double fp = run_sequence(seq, ps, cfg, run).loss;
    a1[i] = saved - 1e-4;
    const double fm = run_sequence(seq, ps, cfg, run).loss;
    a1[i] = saved;
    worst = std::max(worst, nn::relative_error(ga[i], (fp - fm) / 2e-4, 1e-6));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(RunSequence, FullPipelineGradCheckOnToyScene) {
  const auto cfg = grad_check_toy_config();
  const auto seq = random_sequence(21, 16, 12, 3);
  const auto e = run_pipeline_grad_check(seq, cfg, 21);
  EXPECT_TRUE(e.report.passed) << "max err " << e.report.max_relative_error << ", skipped " << e.report.skipped;
  EXPECT_LT(e.report.max_relative_error, 1e-3);
  EXPECT_GT(e.report.checked, 100u);
}

TEST(Params, LayoutFollowsConfig) {
  auto cfg = tiny_config();
  const auto ps = init_pipeline_params(cfg, 1);
  EXPECT_EQ(ps.at("efe.A1").shape, (nn::Shape{6, 4}));
  EXPECT_EQ(ps.at("efe.A2").shape, (nn::Shape{6, 4}));
  EXPECT_EQ(ps.at("gru.z.W").shape, (nn::Shape{4, 5}));
  EXPECT_EQ(ps.at("mask.out.weight").shape, (nn::Shape{5, 48}));
  EXPECT_EQ(ps.at("encoder.conv3.weight").shape, (nn::Shape{2, 16, 3, 3}));
  EXPECT_EQ(init_pipeline_params(ModelConfig{}, 1).total_values(), 526514u);
  cfg.q = 0;
  EXPECT_THROW(init_pipeline_params(cfg, 1), ConfigError);
}
