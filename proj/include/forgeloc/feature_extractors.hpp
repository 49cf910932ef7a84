// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-block feature extractors:
//  - FfeModel: forensic embeddings from a camera-model-pretrained CNN with a
//    constrained (prediction-error) first layer.
//  - CfeModel: context embeddings from a separable-convolution trunk with a
//    single middle-flow residual block and a 1x1 channel reduction.
// Both map [K, 3, 128, 128] blocks to [K, embedding_dim] and never mix blocks.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "forgeloc/block_geometry.hpp"

namespace forgeloc {

inline constexpr double kLogClip = 1e-12;

struct FfeOptions {
  std::int64_t embedding_dim = 384;
  std::int64_t num_classes = 4;
  std::int64_t block_size = kDefaultBlockSize;
  bool constrained = true;
  std::int64_t constrained_filters = 3;
  std::int64_t conv1_channels = 96;
  std::int64_t conv2_channels = 64;
  std::int64_t conv3_channels = 128;
};

class FfeModelImpl : public torch::nn::Module {
 public:
  explicit FfeModelImpl(FfeOptions options = {});

  /// Embeddings [K, embedding_dim].
  torch::Tensor forward(torch::Tensor blocks);
  /// Camera-class logits [K, n]; requires the classifier head.
  torch::Tensor class_logits(torch::Tensor blocks);

  /// Projects every constrained kernel slice back onto {center = -1, other taps sum to 1}.
  void enforce_constraint();
  bool constraint_satisfied(double tol = 1e-5) const;

  /// Removes the pretraining softmax head.
  void drop_classifier();
  bool has_classifier() const { return !classifier_.is_empty(); }

  const FfeOptions& options() const { return options_; }

 private:
  FfeOptions options_;
  torch::nn::Conv2d constrained_{nullptr};
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr}, bn3_{nullptr};
  torch::nn::Linear embed_{nullptr};
  torch::nn::Linear classifier_{nullptr};
};
TORCH_MODULE(FfeModel);

struct CfeOptions {
  std::int64_t embedding_dim = 384;
  std::int64_t block_size = kDefaultBlockSize;
  std::vector<std::int64_t> stem_channels = {32, 64};
  std::vector<std::int64_t> entry_channels = {128, 256, 512};
};

class SeparableConvImpl : public torch::nn::Module {
 public:
  SeparableConvImpl(std::int64_t in, std::int64_t out);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::Conv2d depthwise_{nullptr}, pointwise_{nullptr};
};
TORCH_MODULE(SeparableConv);

class EntryBlockImpl : public torch::nn::Module {
 public:
  EntryBlockImpl(std::int64_t in, std::int64_t out, bool leading_relu);
  torch::Tensor forward(torch::Tensor x);

 private:
  bool leading_relu_;
  SeparableConv sep1_{nullptr}, sep2_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
  torch::nn::Conv2d skip_{nullptr};
  torch::nn::BatchNorm2d skip_bn_{nullptr};
};
TORCH_MODULE(EntryBlock);

class MiddleBlockImpl : public torch::nn::Module {
 public:
  explicit MiddleBlockImpl(std::int64_t channels);
  torch::Tensor forward(torch::Tensor x);

 private:
  std::vector<SeparableConv> seps_;
  std::vector<torch::nn::BatchNorm2d> bns_;
};
TORCH_MODULE(MiddleBlock);

class CfeModelImpl : public torch::nn::Module {
 public:
  explicit CfeModelImpl(CfeOptions options = {});
  torch::Tensor forward(torch::Tensor blocks);
  const CfeOptions& options() const { return options_; }

 private:
  CfeOptions options_;
  torch::nn::Conv2d stem1_{nullptr}, stem2_{nullptr};
  torch::nn::BatchNorm2d stem_bn1_{nullptr}, stem_bn2_{nullptr};
  torch::nn::Sequential entry_{nullptr};
  MiddleBlock middle_{nullptr};
  torch::nn::Conv2d reduce_{nullptr};
};
TORCH_MODULE(CfeModel);

struct JointEmbeddingField {
  torch::Tensor x;  // [M*N, joint_dim]
  BlockGrid grid;

  std::int64_t joint_dim() const { return x.size(1); }
};

/// -log(p[true_class]) with p clipped at kLogClip. `probs` must sum to 1 within 1e-6.
double ffe_pretrain_loss(std::span<const double> probs, std::int64_t true_class);
/// Batched form: probs [B, n], classes [B] (int64). Mean over the batch, differentiable.
torch::Tensor ffe_pretrain_loss(const torch::Tensor& probs, const torch::Tensor& classes);

/// Evaluation-mode, gradient-free extraction. Puts the model in eval mode.
torch::Tensor extract_forensic(FfeModel& model, const torch::Tensor& blocks);
torch::Tensor extract_context(CfeModel& model, const torch::Tensor& blocks);

/// x_k = concat(f_k, c_k). Either side may be undefined (ablations) but not both.
JointEmbeddingField join_embeddings(const torch::Tensor& f, const torch::Tensor& c, const BlockGrid& grid);

}  // namespace forgeloc
