// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// FFE camera-model pretraining and the five-stage curriculum.
//
// Learning rates follow a stepwise exponential decay with 0-based epochs:
//   lr(epoch) = initial * rate^(epoch / step)      (integer division)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "forgeloc/datagen/corpus.hpp"
#include "forgeloc/feature_extractors.hpp"
#include "forgeloc/heads_losses.hpp"
#include "forgeloc/model.hpp"

namespace forgeloc {

double scheduled_lr(double initial, double rate, int step, int epoch);

struct StageConfig {
  int stage = 1;
  std::vector<DatasetKind> datasets;
  int epochs = 1;
  double initial_lr = 1e-4;
  double decay_rate = 1.0;
  int decay_step = 2;
  double momentum = 0.95;
  bool ffe_frozen = true;
  double ffe_lr_multiplier = 0.1;  // only used when the FFE trains
  int batch_size = 2;
  double weight_decay = 0.0;
  LossWeights weights;

  double lr_at(int epoch) const { return scheduled_lr(initial_lr, decay_rate, decay_step, epoch); }

  /// Stage-table defaults for stages 1-5.
  static StageConfig defaults(int stage);
  void validate() const;
};

nlohmann::json to_json(const StageConfig& s);
/// Unspecified keys keep the stage's defaults; `stage` is required.
StageConfig stage_config_from_json(const nlohmann::json& j);

struct PretrainConfig {
  double lr = 1e-3;
  double momentum = 0.95;
  double decay_rate = 0.5;
  int decay_step = 2;
  int epochs = 10;
  int num_classes = 4;
  int train_blocks_per_class = 400;
  int test_blocks_per_class = 100;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double stop_at_accuracy = 0.0;  // > 0: stop once held-out accuracy reaches it

  double lr_at(int epoch) const { return scheduled_lr(lr, decay_rate, decay_step, epoch); }
  void validate() const;
};

nlohmann::json to_json(const PretrainConfig& c);
PretrainConfig pretrain_config_from_json(const nlohmann::json& j);

/// Blocks captured by simulated camera models, labelled by camera id.
struct CameraBlockSet {
  torch::Tensor blocks;   // [N, 3, bs, bs]
  torch::Tensor classes;  // [N] int64
};

CameraBlockSet make_camera_blocks(int per_class, int num_classes, std::int64_t block_size, std::uint64_t seed);

struct PretrainReport {
  std::vector<double> per_class_accuracy;
  double accuracy = 0.0;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
  int epochs_run = 0;
};

nlohmann::json to_json(const PretrainReport& r);

struct PretrainResult {
  FfeModel model{nullptr};  // classifier head removed
  PretrainReport report;
};

/// Held-out accuracy per class; the model must still carry its classifier.
std::vector<double> per_class_accuracy(FfeModel& model, const CameraBlockSet& data, int num_classes);

PretrainResult pretrain_ffe(const FfeOptions& options, const PretrainConfig& config, const CameraBlockSet& train,
                            const CameraBlockSet& test);

/// One training frame: tiled blocks, soft block labels and the one-hot detection target.
struct Sample {
  std::string id;
  torch::Tensor blocks;  // [K, 3, bs, bs]
  torch::Tensor z;       // [K] float32
  torch::Tensor w;       // [2] (pristine, fake)
};

Sample make_sample(const torch::Tensor& frame, const ForgeryMask& mask, const BlockGrid& grid, std::string id = {});

struct FrameDataset {
  BlockGrid grid;
  std::vector<Sample> samples;
};

/// Loads every frame of the given records (already filtered by the caller).
FrameDataset load_frames(const std::vector<ManifestRecord>& records, const BlockGrid& grid);

/// Records of `split` whose dataset is in `datasets`; throws ConfigError if any
/// requested dataset has no such record.
std::vector<ManifestRecord> select_records(const std::vector<ManifestRecord>& records,
                                           const std::vector<DatasetKind>& datasets, const std::string& split);

struct TrainLogRecord {
  std::int64_t step = 0;
  int stage = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss_detection = 0.0;
  double loss_localization = 0.0;
  double loss = 0.0;
};

nlohmann::json to_json(const TrainLogRecord& r);

struct StageRunOptions {
  std::filesystem::path out_dir;  // checkpoints + train_log.jsonl; empty = keep nothing on disk
  std::uint64_t seed = 0;
  bool resume = false;
  std::int64_t max_steps = 0;  // > 0 caps the total number of optimizer steps
  std::function<void(const TrainLogRecord&)> on_step;
};

struct StageResult {
  std::vector<TrainLogRecord> log;
  std::vector<double> epoch_loss;
  std::filesystem::path last_checkpoint;
  int start_epoch = 0;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int stage, int epoch);

/// Trains on an in-memory dataset under the stage's schedule and freeze policy.
StageResult train_on(ForgeryNet& net, const StageConfig& stage, const FrameDataset& data,
                     const StageRunOptions& options = {});

/// Loads the stage's training split from `records` and trains.
StageResult run_stage(ForgeryNet& net, const StageConfig& stage, const std::vector<ManifestRecord>& records,
                      const StageRunOptions& options = {});

/// Copies pretrained FFE weights (a checkpoint written by save_ffe) into the network.
void load_pretrained_ffe(ForgeryNet& net, const std::filesystem::path& path);
void save_ffe(const std::filesystem::path& path, FfeModel& model, const PretrainReport& report,
              nlohmann::json extra = {});

ForgeryNet build_variant(const VariantFlags& flags, ModelConfig base = ModelConfig::desk());

}  // namespace forgeloc
