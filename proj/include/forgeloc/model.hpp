// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Full detection/localization network: per-block FFE + CFE embeddings, attention
// module with squeeze, refinement and the two heads. Architecture variants for
// ablations are selected with VariantFlags.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "forgeloc/attention_core.hpp"
#include "forgeloc/block_geometry.hpp"
#include "forgeloc/feature_extractors.hpp"
#include "forgeloc/heads_losses.hpp"

namespace forgeloc {

enum class AttentionKind { kTransformer, kFcStack, kNone };

struct VariantFlags {
  bool use_ffe = true;
  bool use_cfe = true;
  AttentionKind attention = AttentionKind::kTransformer;
  bool squeeze = true;
  std::int64_t num_maps = 3;
  RefineMode refine = RefineMode::kAdd;
  bool sigmoid_maps = false;

  /// Throws ConfigError for inconsistent combinations.
  void validate() const;

  /// Named ablation presets: proposed, no-ffe, no-cfe, no-transformer-module,
  /// no-transformer, no-attention-squeeze, maps-1, maps-10, concat-refine.
  static VariantFlags preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

struct ModelConfig {
  std::int64_t frame_height = 1080;
  std::int64_t frame_width = 1920;
  std::int64_t block_size = kDefaultBlockSize;
  FfeOptions ffe;
  CfeOptions cfe;
  std::int64_t encoder_blocks = 12;
  std::int64_t heads = 12;
  std::int64_t ff_multiplier = 4;
  double dropout = 0.0;
  VariantFlags variant;

  BlockGrid grid() const { return plan_grid(frame_height, frame_width, block_size); }
  std::int64_t joint_dim() const;
  std::int64_t head_feature_dim() const;
  void validate() const;

  /// CI-sized profile: 256x384 frames, 32+32 embeddings, 2 encoder blocks of width 64.
  static ModelConfig desk();
  /// 1080p frames, 384+384 embeddings, 12 encoder blocks of width 768.
  static ModelConfig full();
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct NetOutput {
  torch::Tensor p;     // [B, 2] softmax (pristine, fake)
  torch::Tensor q;     // [B, K] block probabilities
  torch::Tensor maps;  // [B, L, M, N]; undefined without a squeeze
};

class ForgeryNetImpl : public torch::nn::Module {
 public:
  explicit ForgeryNetImpl(ModelConfig config);

  /// blocks: [B, K, 3, bs, bs].
  NetOutput forward(const torch::Tensor& blocks);
  /// Joint embeddings [B, K, D].
  torch::Tensor joint_embeddings(const torch::Tensor& blocks);

  /// A frozen FFE stays in eval mode and receives no gradients.
  void set_ffe_frozen(bool frozen);
  bool ffe_frozen() const { return ffe_frozen_; }
  void train(bool on = true) override;

  std::vector<torch::Tensor> ffe_parameters() const;
  std::vector<torch::Tensor> non_ffe_parameters() const;

  const ModelConfig& config() const { return config_; }
  BlockGrid grid() const { return grid_; }
  FfeModel& ffe() { return ffe_; }
  CfeModel& cfe() { return cfe_; }
  AttentionModule& attention() { return attention_; }
  DetectionHead& detector() { return detector_; }
  LocalizationHead& localizer() { return localizer_; }

 private:
  ModelConfig config_;
  BlockGrid grid_;
  bool ffe_frozen_ = true;
  FfeModel ffe_{nullptr};
  CfeModel cfe_{nullptr};
  AttentionModule attention_{nullptr};
  DetectionHead detector_{nullptr};
  LocalizationHead localizer_{nullptr};
};
TORCH_MODULE(ForgeryNet);

}  // namespace forgeloc
