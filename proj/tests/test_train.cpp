// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "evtk/evtk.hpp"
#include "test_util.hpp"
#include "tiny_config.hpp"

using namespace evtk;
using namespace evtk::train;
namespace fs = std::filesystem;

TEST(Loss, Examples) {
  const nn::Var pred(Tensor({1, 2}, std::vector<double>{3, 4}));
  EXPECT_DOUBLE_EQ(coordinate_loss(pred, Tensor({1, 2}), Tensor({1}, 1.0)).item(), 12.5);
  EXPECT_DOUBLE_EQ(coordinate_loss(pred, pred.value(), Tensor({1}, 1.0)).item(), 0.0);
  EXPECT_THROW(coordinate_loss(pred, Tensor({1, 2}), Tensor({1})), TrainingError);
  try {
    coordinate_loss(pred, Tensor({1, 2}), Tensor({1}));
  } catch (const TrainingError& e) {
    EXPECT_STREQ(e.what(), "empty loss support");
  }
}

TEST(Loss, MaskedStepsIgnored) {
  const nn::Var pred(Tensor({2, 2}, std::vector<double>{3, 4, 100, 100}));
  EXPECT_DOUBLE_EQ(coordinate_loss(pred, Tensor({2, 2}), Tensor({2}, std::vector<double>{1, 0})).item(), 12.5);
}

class LossGrad : public ::testing::TestWithParam<std::tuple<LossKind, std::uint64_t>> {};

TEST_P(LossGrad, MatchesFiniteDifferences) {
  const auto [kind, seed] = GetParam();
  Rng rng(seed);
  for (std::size_t T : {3u, 6u}) {
    Tensor p({T, 2}), t({T, 2}), w({T});
    for (double& v : p.data()) v = rng.uniform(-2, 2);
    for (double& v : t.data()) v = rng.uniform(-2, 2);
    for (double& v : w.data()) v = rng.uniform() < 0.3 ? 0.0 : 1.0;
    w[0] = 1.0;
    // Keep |d| away from the kinks of L1 (0) and smooth L1 (+-1).
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - t[i];
      if (std::abs(d) < 0.05 || std::abs(std::abs(d) - 1.0) < 0.05) p[i] += 0.2;
    }
    const auto r = nn::gradcheck([&](const std::vector<nn::Var>& v) { return coordinate_loss(v[0], t, w, kind); },
                                 {nn::parameter(p)});
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  }
}

std::string loss_case_name(const ::testing::TestParamInfo<LossGrad::ParamType>& info) {
  static const char* const names[] = {"mse", "l1", "smooth_l1"};
  return std::string(names[static_cast<int>(std::get<0>(info.param))]) + "_seed" + std::to_string(std::get<1>(info.param));
}

INSTANTIATE_TEST_SUITE_P(Kinds, LossGrad,
                         ::testing::Combine(::testing::Values(LossKind::mse, LossKind::l1, LossKind::smooth_l1),
                                            ::testing::Values(1, 2, 3, 4, 5)),
                         loss_case_name);

namespace {

nn::ParamList scalar_params(double value, double grad) {
  nn::Var p = nn::parameter(Tensor({1}, value));
  p.grad_buffer()[0] = grad;
  nn::ParamList pl;
  pl.add("p", p);
  return pl;
}

} // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
  auto pl = scalar_params(1.5, 0.0);
  Adam opt(pl, {});
  opt.step(0.1);
  EXPECT_EQ(pl.params[0].var.value()[0], 1.5);
}

TEST(Adam, FirstStepByHand) {
  auto pl = scalar_params(1.0, 0.5);
  Adam opt(pl, {});
  opt.step(0.1);
  // m = 0.05, v = 0.00025; bias-corrected: 0.5 and 0.25.
  const double want = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
  EXPECT_NEAR(pl.params[0].var.value()[0], want, 1e-15);
}

TEST(Adam, AdamWWithoutDecayIsAdam) {
  auto a = scalar_params(1.0, 0.3), b = scalar_params(1.0, 0.3);
  AdamHyper ha, hb;
  hb.decoupled = true;
  Adam oa(a, ha), ob(b, hb);
  for (int i = 0; i < 5; ++i) {
    oa.step(0.01);
    ob.step(0.01);
  }
  EXPECT_EQ(a.params[0].var.value()[0], b.params[0].var.value()[0]);
}

TEST(Adam, DecoupledDecayShrinksWeights) {
  auto pl = scalar_params(2.0, 0.0);
  AdamHyper h;
  h.decoupled = true;
  h.weight_decay = 0.5;
  Adam opt(pl, h);
  opt.step(0.1);
  EXPECT_DOUBLE_EQ(pl.params[0].var.value()[0], 2.0 * (1 - 0.05));
}

TEST(Schedule, Examples) {
  EXPECT_EQ(step_multiplier(199), 1.0);
  EXPECT_EQ(step_multiplier(200), 0.5);
  EXPECT_EQ(step_multiplier(400), 0.25);
  EXPECT_EQ(cosine_warmup_multiplier(0, 1000), 0.0);
  EXPECT_EQ(cosine_warmup_multiplier(25, 1000), 1.0);
  // Decay span 975 steps; midpoint at 25 + 487.5.
  EXPECT_NEAR(0.5 * (cosine_warmup_multiplier(512, 1000) + cosine_warmup_multiplier(513, 1000)), 0.5, 1e-5);
  EXPECT_NEAR(cosine_warmup_multiplier(525, 1000, 0.05), 0.5, 1e-15);
  EXPECT_NEAR(cosine_warmup_multiplier(1000, 1000), 0.0, 1e-15);
}

TEST(Metrics, Examples) {
  Tensor a({1, 3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  auto r = evaluate_predictions(a, a);
  EXPECT_EQ(r.mean_distance, 0.0);
  EXPECT_EQ(r.p10, 100.0);

  Tensor b = a;
  for (std::size_t i = 0; i < b.size(); i += 2) {
    b[i] += 3;
    b[i + 1] += 4;
  }
  r = evaluate_predictions(b, a);
  EXPECT_EQ(r.mean_distance, 5.0);
  EXPECT_EQ(r.p10, 100.0);

  r = summarize({5.0, 15.0});
  EXPECT_EQ(r.mean_distance, 10.0);
  EXPECT_EQ(r.p10, 50.0);
  EXPECT_EQ(summarize({10.0}).p10, 0.0);
}

TEST(Split, LastQuarterIsValidation) {
  std::vector<RecordingBundle> recs(8);
  for (std::size_t i = 0; i < 8; ++i) recs[i].id = "r" + std::to_string(i);
  const auto [tr, va] = split_dataset(recs, 0.25);
  ASSERT_EQ(tr.size(), 6u);
  ASSERT_EQ(va.size(), 2u);
  EXPECT_EQ(va[0].id, "r6");
  EXPECT_THROW(split_dataset({recs[0]}, 0.25), ConfigError);
}

TEST(Config, UnknownKeyRejected) {
  Config c;
  EXPECT_THROW(c.set("train.epoch", "3"), ConfigError);
  EXPECT_THROW(c.load_text("# comment\nseed = 1\nbogus = 2\n", "f.cfg"), ConfigError);
  try {
    c.load_text("seed = 1\nbogus = 2\n", "f.cfg");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("f.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(Config, CanonicalRoundTrip) {
  Config c = test::tiny_config();
  Config d;
  d.load_text(c.canonical());
  EXPECT_EQ(d.canonical(), c.canonical());
}

TEST(Config, AutoRepresentationFollowsModel) {
  EXPECT_EQ(representation_from(test::tiny_config("knightpupil")), encode::Representation::voxel);
  EXPECT_EQ(representation_from(test::tiny_config("spatiotemporal")), encode::Representation::counts);
}

namespace {

struct TinyRun {
  Config config;
  PreparedData data;

  explicit TinyRun(const std::string& model) : config(test::tiny_config(model)) {
    data = prepare_data(config, synthesize(config));
  }
};

std::string read(const fs::path& p) { return io::read_file(p); }

} // namespace

TEST(Trainer, OneEpochWritesOneRowAndThreeCheckpoints) {
  TinyRun run("knightpupil");
  run.config.set("train.epochs", "1");
  test::TempDir dir;
  const auto s = run_training(run.config, run.data, dir.path);
  EXPECT_EQ(s.result.log.size(), 1u);
  EXPECT_EQ(parse_log_csv(read(dir.path / "log.csv")).size(), 1u);
  for (const char* f : {"best_distance.ckpt", "best_val_loss.ckpt", "final.ckpt"})
    EXPECT_TRUE(fs::exists(dir.path / f)) << f;
  EXPECT_TRUE(std::isfinite(s.best.mean_distance));
}

TEST(Trainer, SameSeedIsBitIdentical) {
  for (const std::string model : {"knightpupil", "spatiotemporal"}) {
    TinyRun run(model);
    test::TempDir a, b;
    run_training(run.config, run.data, a.path);
    run_training(run.config, run.data, b.path);
    EXPECT_EQ(read(a.path / "log.csv"), read(b.path / "log.csv")) << model;
    EXPECT_EQ(read(a.path / "final.ckpt"), read(b.path / "final.ckpt")) << model;
  }
}

TEST(Trainer, DifferentSeedDiffers) {
  TinyRun run("knightpupil");
  test::TempDir a, b;
  run_training(run.config, run.data, a.path);
  run.config.set("seed", "9");
  run_training(run.config, run.data, b.path);
  EXPECT_NE(read(a.path / "final.ckpt"), read(b.path / "final.ckpt"));
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  TinyRun run("knightpupil");
  run.config.set("train.epochs", "3");
  test::TempDir full, split;
  run_training(run.config, run.data, full.path);
  run_training(run.config, run.data, split.path, nullptr, 1);
  EXPECT_EQ(parse_log_csv(read(split.path / "log.csv")).size(), 1u);
  run_training(run.config, run.data, split.path, nullptr, 0, true);
  EXPECT_EQ(read(full.path / "log.csv"), read(split.path / "log.csv"));
  EXPECT_EQ(read(full.path / "final.ckpt"), read(split.path / "final.ckpt"));
}

TEST(Trainer, CheckpointReloadReproducesPredictions) {
  TinyRun run("spatiotemporal");
  test::TempDir dir;
  run_training(run.config, run.data, dir.path);
  auto a = load_model(dir.path / "final.ckpt");
  auto b = load_model(dir.path / "final.ckpt");
  EXPECT_EQ(predict(*a, run.data.val), predict(*b, run.data.val));
  EXPECT_EQ(a->kind(), "spatiotemporal");
}

TEST(Trainer, NonFiniteInputIsReported) {
  TinyRun run("knightpupil");
  run.data.train.frames[0] = std::nan("");
  auto model = build_model(run.config);
  TrainOptions opt = train_options_from(run.config);
  test::TempDir dir;
  opt.out_dir = dir.path;
  try {
    train::train(*model, run.data.train, run.data.val, opt, run.config.canonical());
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite value"), std::string::npos) << e.what();
  }
}

TEST(Trainer, LossDecreasesOnSyntheticData) {
  TinyRun run("knightpupil");
  run.config.set("train.epochs", "20");
  test::TempDir dir;
  const auto s = run_training(run.config, run.data, dir.path);
  const auto& log = s.result.log;
  ASSERT_EQ(log.size(), 20u);
  const double tail = (log[17].train_loss + log[18].train_loss + log[19].train_loss) / 3.0;
  EXPECT_LT(tail, log[0].train_loss);
}

TEST(Ablation, SingleSettingGivesOneRow) {
  Config c = test::tiny_config();
  c.set("train.epochs", "1");
  test::TempDir dir;
  const auto rows = run_ablation(c, synthesize(c), dir.path, {"full"});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].setting, "full");
  EXPECT_TRUE(fs::exists(dir.path / "full" / "final.ckpt"));
  const std::string csv = read(dir.path / "ablation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "setting,distance,p10");
  EXPECT_THROW(run_ablation(c, synthesize(c), dir.path, {"nonsense"}), ConfigError);
}

TEST(ShippedConfigs, LoadAndBuildTheirModel) {
  for (const char* name : {"knightpupil", "spatiotemporal"}) {
    Config c;
    c.load_file(fs::path(EVTK_CONFIG_DIR) / (std::string(name) + ".cfg"));
    EXPECT_EQ(c.str("model"), name);
    EXPECT_EQ(build_model(c)->kind(), name);
  }
}
