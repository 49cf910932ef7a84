// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Transformer-based spatial attention over the block grid.
//
// Joint embeddings [B, K, D] get a learnable 1-D position embedding added once,
// pass through a stack of pre-norm encoder blocks, and an attention squeeze
// (L 1x1 kernels over the hidden channels) reduces them to L maps of M x N.
// The maps weight the joint embeddings per position (refine).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "forgeloc/block_geometry.hpp"
#include "forgeloc/feature_extractors.hpp"

namespace forgeloc {

enum class MixerKind { kTransformer, kFcStack };
enum class RefineMode { kAdd, kConcat };

RefineMode parse_refine_mode(const std::string& name);
std::string to_string(RefineMode mode);

struct AttentionOptions {
  std::int64_t dim = 768;
  std::int64_t sequence_length = 135;  // M*N
  MixerKind mixer = MixerKind::kTransformer;
  std::int64_t num_blocks = 12;
  std::int64_t num_heads = 12;
  std::int64_t ff_multiplier = 4;
  double dropout = 0.0;
  std::int64_t fc_layers = 6;  // used by MixerKind::kFcStack
  bool squeeze = true;
  std::int64_t num_maps = 3;  // L
  bool sigmoid_maps = false;
};

class MultiHeadSelfAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadSelfAttentionImpl(std::int64_t dim, std::int64_t heads, double dropout);
  torch::Tensor forward(torch::Tensor x);  // [B, K, D]

 private:
  std::int64_t heads_;
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr};
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(MultiHeadSelfAttention);

class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t ff_dim, double dropout);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::LayerNorm ln1_{nullptr}, ln2_{nullptr};
  MultiHeadSelfAttention attn_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(EncoderBlock);

class AttentionModuleImpl : public torch::nn::Module {
 public:
  explicit AttentionModuleImpl(AttentionOptions options);

  /// Position embedding + mixer: [B, K, D] -> [B, K, D].
  torch::Tensor contextualize(torch::Tensor x);
  /// Squeeze of contextualized features: [B, K, D] -> [B, L, K].
  torch::Tensor squeeze(const torch::Tensor& hidden);
  /// Full path: [B, K, D] -> maps [B, L, K].
  torch::Tensor forward(torch::Tensor x);

  torch::Tensor& position_embeddings() { return position_; }
  const AttentionOptions& options() const { return options_; }

 private:
  AttentionOptions options_;
  torch::Tensor position_;
  std::vector<EncoderBlock> blocks_;
  torch::nn::LayerNorm final_ln_{nullptr};
  std::vector<torch::nn::Linear> fc_stack_;
  torch::nn::Linear squeeze_{nullptr};
};
TORCH_MODULE(AttentionModule);

/// L maps over the block grid.
struct AttentionMapSet {
  torch::Tensor maps;  // [L, M, N]

  std::int64_t count() const { return maps.size(0); }
};

/// x + pe, position-wise in row-major order. x is [K, D] or [B, K, D]; pe is [K, D].
torch::Tensor add_position(const torch::Tensor& x, const torch::Tensor& pe);

AttentionMapSet attention_maps(AttentionModule& module, const JointEmbeddingField& x);

/// add: y_k = sum_l x_k * m_{k,l};  concat: y_k = concat_l(x_k * m_{k,l}).
/// Single frame: x [K, D], maps [L, M, N]. Batched: x [B, K, D], maps [B, L, M, N].
torch::Tensor refine(const torch::Tensor& x, const torch::Tensor& maps, RefineMode mode);

}  // namespace forgeloc
