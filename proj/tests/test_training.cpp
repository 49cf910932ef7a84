// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "forgeloc/checkpoint.hpp"
#include "forgeloc/datagen/corpus.hpp"
#include "forgeloc/datagen/scene.hpp"
#include "forgeloc/datagen/shapes.hpp"
#include "forgeloc/errors.hpp"
#include "forgeloc/rng.hpp"
#include "forgeloc/training.hpp"
#include "oracles.hpp"

using namespace forgeloc;
namespace fs = std::filesystem;

namespace {

// Four desk-size frames, two of them with a one-block-column forgery.
FrameDataset toy_dataset() {
  auto cfg = ModelConfig::desk();
  FrameDataset data;
  data.grid = cfg.grid();
  for (int i = 0; i < 4; ++i) {
    Rng rng(500 + i);
    auto scene = SceneParams::sample(rng);
    auto frame = capture(render_scene(scene, cfg.frame_height, cfg.frame_width), camera_signatures()[i % 4], rng);
    auto m = torch::zeros({cfg.frame_height, cfg.frame_width});
    if (i % 2) {
      m.slice(1, 128, 256).fill_(1.0f);
      frame = frame.clone();
      frame.slice(1, 128, 256).mul_(0.5);
    }
    data.samples.push_back(make_sample(frame, ForgeryMask::binary(m), data.grid, "toy" + std::to_string(i)));
  }
  return data;
}

StageConfig quick_stage(int stage, int epochs = 1) {
  auto s = StageConfig::defaults(stage);
  s.epochs = epochs;
  s.initial_lr = 1e-3;
  return s;
}

std::vector<torch::Tensor> ffe_snapshot(ForgeryNet& net) {
  std::vector<torch::Tensor> out;
  for (auto& p : net->ffe_parameters()) out.push_back(p.detach().clone());
  for (auto& b : net->ffe()->buffers()) out.push_back(b.detach().clone());
  return out;
}

bool same(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!torch::equal(a[i], b[i])) return false;
  return true;
}

}  // namespace

TEST(Schedule, ClosedForm) {
  EXPECT_DOUBLE_EQ(scheduled_lr(1e-3, 0.5, 2, 4), 2.5e-4);
  EXPECT_DOUBLE_EQ(StageConfig::defaults(1).lr_at(5), 1e-4 * 0.75 * 0.75);
  EXPECT_NEAR(StageConfig::defaults(1).lr_at(5), 5.625e-5, 1e-18);
  for (double rate : {0.5, 0.75, 0.85, 1.0})
    for (int step : {1, 2, 3})
      for (int e = 0; e < 30; ++e) EXPECT_EQ(scheduled_lr(1e-4, rate, step, e), oracle::step_decay(1e-4, rate, step, e));
}

TEST(StageDefaults, TableRows) {
  struct Row {
    int epochs;
    double lr, decay;
    std::size_t datasets;
  };
  const Row rows[] = {{6, 1.0e-4, 0.75, 1}, {6, 8.5e-5, 0.85, 1}, {23, 8.5e-5, 0.85, 1}, {10, 8.5e-5, 0.85, 3},
                      {9, 5.0e-5, 0.85, 6}};
  for (int s = 1; s <= 5; ++s) {
    auto c = StageConfig::defaults(s);
    EXPECT_EQ(c.epochs, rows[s - 1].epochs) << s;
    EXPECT_EQ(c.initial_lr, rows[s - 1].lr) << s;
    EXPECT_EQ(c.decay_rate, rows[s - 1].decay) << s;
    EXPECT_EQ(c.decay_step, 2) << s;
    EXPECT_EQ(c.datasets.size(), rows[s - 1].datasets) << s;
    EXPECT_EQ(c.ffe_frozen, s <= 3) << s;
    EXPECT_DOUBLE_EQ(c.weights.alpha, 0.4);
  }
  EXPECT_EQ(StageConfig::defaults(1).datasets[0], DatasetKind::kVCMS);
  EXPECT_EQ(StageConfig::defaults(2).datasets[0], DatasetKind::kVPVM);
  EXPECT_EQ(StageConfig::defaults(3).datasets[0], DatasetKind::kVPIM);
  EXPECT_THROW(StageConfig::defaults(6), ConfigError);
}

TEST(StageConfig, JsonRoundTripAndValidation) {
  auto s = StageConfig::defaults(4);
  auto back = stage_config_from_json(to_json(s));
  EXPECT_EQ(back.epochs, s.epochs);
  EXPECT_EQ(back.initial_lr, s.initial_lr);
  EXPECT_EQ(back.datasets, s.datasets);
  s.decay_rate = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = StageConfig::defaults(1);
  s.initial_lr = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Pretrain, ConfigDefaults) {
  PretrainConfig c;
  EXPECT_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.momentum, 0.95);
  EXPECT_EQ(c.decay_rate, 0.5);
  EXPECT_EQ(c.decay_step, 2);
  EXPECT_DOUBLE_EQ(c.lr_at(4), 2.5e-4);
}

TEST(Pretrain, SmallRunStripsHeadAndReports) {
  FfeOptions o;
  o.embedding_dim = 16;
  o.conv1_channels = 8;
  o.conv2_channels = 8;
  o.conv3_channels = 8;
  PretrainConfig c;
  c.epochs = 1;
  c.batch_size = 8;
  auto train = make_camera_blocks(8, 4, 128, 1);
  auto test = make_camera_blocks(4, 4, 128, 2);
  EXPECT_EQ(train.blocks.size(0), 32);
  auto r = pretrain_ffe(o, c, train, test);
  EXPECT_FALSE(r.model->has_classifier());
  EXPECT_EQ(r.report.per_class_accuracy.size(), 4u);
  EXPECT_EQ(r.report.epochs_run, 1);
  EXPECT_TRUE(r.model->constraint_satisfied());
  EXPECT_GE(r.report.accuracy, 0.0);
  EXPECT_LE(r.report.accuracy, 1.0);
}

TEST(Pretrain, SingleClassRejected) {
  auto train = make_camera_blocks(4, 4, 128, 3);
  train.classes.fill_(1);
  EXPECT_THROW(pretrain_ffe(FfeOptions{}, PretrainConfig{}, train, train), InvalidArgument);
}

TEST(Pretrain, SavedFfeLoadsIntoNetwork) {
  testutil::TempDir dir("ffe");
  auto cfg = ModelConfig::desk();
  FfeModel ffe(cfg.ffe);
  ffe->drop_classifier();
  save_ffe(dir.path() / "ffe.flck", ffe, PretrainReport{});
  ForgeryNet net(cfg);
  load_pretrained_ffe(net, dir.path() / "ffe.flck");
  auto a = ffe->named_parameters();
  for (const auto& p : net->ffe()->named_parameters()) EXPECT_TRUE(torch::equal(p.value(), a[p.key()])) << p.key();
  auto no_ffe = build_variant(VariantFlags::preset("no-ffe"));
  EXPECT_THROW(load_pretrained_ffe(no_ffe, dir.path() / "ffe.flck"), ConfigError);
}

TEST(Variants, Construction) {
  auto proposed = build_variant(VariantFlags::preset("proposed"));
  EXPECT_FALSE(proposed->ffe().is_empty());
  EXPECT_FALSE(proposed->cfe().is_empty());
  EXPECT_EQ(proposed->attention()->options().mixer, MixerKind::kTransformer);
  EXPECT_EQ(proposed->attention()->options().num_maps, 3);
  EXPECT_EQ(proposed->config().variant.refine, RefineMode::kAdd);
  auto fc = build_variant(VariantFlags::preset("no-transformer"));
  EXPECT_EQ(fc->attention()->options().mixer, MixerKind::kFcStack);
  EXPECT_EQ(fc->attention()->options().fc_layers, 6);
  auto ten = build_variant(VariantFlags::preset("maps-10"));
  EXPECT_EQ(ten->attention()->options().num_maps, 10);
  VariantFlags bad;
  bad.attention = AttentionKind::kNone;
  bad.squeeze = true;
  EXPECT_THROW(build_variant(bad), ConfigError);
  VariantFlags none;
  none.use_ffe = none.use_cfe = false;
  EXPECT_THROW(build_variant(none), ConfigError);
  EXPECT_THROW(VariantFlags::preset("bogus"), ConfigError);
}

TEST(Stage, FrozenFfeStaysBitIdentical) {
  auto data = toy_dataset();
  torch::manual_seed(40);
  ForgeryNet net(ModelConfig::desk());
  auto before = ffe_snapshot(net);
  std::vector<torch::Tensor> others;
  for (auto& p : net->non_ffe_parameters()) others.push_back(p.detach().clone());
  train_on(net, quick_stage(1), data);
  EXPECT_TRUE(same(before, ffe_snapshot(net)));
  std::vector<torch::Tensor> after;
  for (auto& p : net->non_ffe_parameters()) after.push_back(p.detach().clone());
  EXPECT_FALSE(same(others, after));
}

TEST(Stage, LateStagesMoveFfeAndKeepConstraint) {
  auto data = toy_dataset();
  torch::manual_seed(41);
  ForgeryNet net(ModelConfig::desk());
  auto before = ffe_snapshot(net);
  train_on(net, quick_stage(4), data);
  EXPECT_FALSE(same(before, ffe_snapshot(net)));
  EXPECT_TRUE(net->ffe()->constraint_satisfied());
}

TEST(Stage, DeterministicLossCurves) {
  auto data = toy_dataset();
  std::vector<std::vector<double>> curves;
  for (int run = 0; run < 2; ++run) {
    torch::manual_seed(42);
    ForgeryNet net(ModelConfig::desk());
    StageRunOptions o;
    o.seed = 9;
    auto r = train_on(net, quick_stage(1, 2), data, o);
    std::vector<double> c;
    for (const auto& rec : r.log) c.push_back(rec.loss);
    curves.push_back(c);
  }
  ASSERT_EQ(curves[0].size(), 4u);
  for (std::size_t i = 0; i < curves[0].size(); ++i) EXPECT_NEAR(curves[0][i], curves[1][i], 1e-6);
}

TEST(Stage, CheckpointsLogsAndResume) {
  auto data = toy_dataset();
  testutil::TempDir full("full"), split("split");
  auto stage = quick_stage(2, 2);

  torch::manual_seed(43);
  ForgeryNet a(ModelConfig::desk());
  StageRunOptions oa;
  oa.out_dir = full.path();
  auto ra = train_on(a, stage, data, oa);
  EXPECT_TRUE(fs::exists(checkpoint_path(full.path(), 2, 0)));
  EXPECT_TRUE(fs::exists(checkpoint_path(full.path(), 2, 1)));
  EXPECT_EQ(checkpoint_path(full.path(), 2, 1).filename(), "ckpt_stage2_epoch1.flck");

  std::ifstream log(full.path() / "train_log_stage2.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line); ++lines) {
    auto j = nlohmann::json::parse(line);
    for (const char* key : {"step", "stage", "epoch", "lr", "L_D", "L_L", "L"})
      EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(lines, 4);

  torch::manual_seed(43);
  ForgeryNet b(ModelConfig::desk());
  StageRunOptions ob;
  ob.out_dir = split.path();
  auto first = stage;
  first.epochs = 1;
  train_on(b, first, data, ob);
  torch::manual_seed(999);  // resumed weights must come from disk
  ForgeryNet c(ModelConfig::desk());
  ob.resume = true;
  auto rc = train_on(c, stage, data, ob);
  EXPECT_EQ(rc.start_epoch, 1);
  ASSERT_EQ(rc.log.size(), 2u);
  EXPECT_EQ(rc.log.front().step, 3);
  EXPECT_NEAR(rc.log[0].loss, ra.log[2].loss, 1e-6);
  EXPECT_NEAR(rc.log[1].loss, ra.log[3].loss, 1e-6);
}

TEST(Stage, MaxStepsCapsTraining) {
  auto data = toy_dataset();
  ForgeryNet net(ModelConfig::desk());
  StageRunOptions o;
  o.max_steps = 3;
  int seen = 0;
  o.on_step = [&](const TrainLogRecord&) { ++seen; };
  auto r = train_on(net, quick_stage(1, 5), data, o);
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(seen, 3);
}

TEST(Stage, MissingDatasetAndSizeMismatch) {
  testutil::TempDir dir("stage");
  auto o = CorpusOptions::desk();
  o.items = SplitCounts{2, 0, 0};
  o.frames_per_video = 1;
  o.datasets = {DatasetKind::kVPVM};
  generate_corpus(o, dir.path());
  auto records = read_manifest(dir.path() / "manifest.jsonl");
  ForgeryNet net(ModelConfig::desk());
  EXPECT_THROW(run_stage(net, quick_stage(1), records), ConfigError);  // stage 1 needs VCMS
  EXPECT_NO_THROW(run_stage(net, quick_stage(2), records));

  auto big = ModelConfig::desk();
  big.frame_height = 384;
  ForgeryNet other(big);
  EXPECT_THROW(run_stage(other, quick_stage(2), records), ConfigError);
}
