// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/attention_core.hpp"

#include <cmath>

#include "forgeloc/errors.hpp"

namespace forgeloc {

namespace nn = torch::nn;

RefineMode parse_refine_mode(const std::string& name) {
  if (name == "add") return RefineMode::kAdd;
  if (name == "concat") return RefineMode::kConcat;
  throw InvalidArgument("unknown refine mode '" + name + "' (expected add|concat)");
}

std::string to_string(RefineMode mode) { return mode == RefineMode::kAdd ? "add" : "concat"; }

MultiHeadSelfAttentionImpl::MultiHeadSelfAttentionImpl(std::int64_t dim, std::int64_t heads, double dropout)
    : heads_(heads) {
  FORGELOC_REQUIRE(heads >= 1 && dim % heads == 0, "hidden dim must be divisible by the head count");
  qkv_ = register_module("qkv", nn::Linear(dim, 3 * dim));
  proj_ = register_module("proj", nn::Linear(dim, dim));
  drop_ = register_module("drop", nn::Dropout(dropout));
}

torch::Tensor MultiHeadSelfAttentionImpl::forward(torch::Tensor x) {
  const auto b = x.size(0);
  const auto k = x.size(1);
  const auto d = x.size(2);
  const auto hd = d / heads_;
  // [B, K, 3, H, hd] -> [3, B, H, K, hd]
  auto qkv = qkv_->forward(x).view({b, k, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0];
  auto key = qkv[1];
  auto v = qkv[2];
  auto scores = torch::matmul(q, key.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
  auto weights = drop_->forward(torch::softmax(scores, -1));
  auto out = torch::matmul(weights, v).permute({0, 2, 1, 3}).reshape({b, k, d});
  return proj_->forward(out);
}

EncoderBlockImpl::EncoderBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t ff_dim, double dropout) {
  ln1_ = register_module("ln1", nn::LayerNorm(nn::LayerNormOptions({dim})));
  attn_ = register_module("attn", MultiHeadSelfAttention(dim, heads, dropout));
  ln2_ = register_module("ln2", nn::LayerNorm(nn::LayerNormOptions({dim})));
  fc1_ = register_module("fc1", nn::Linear(dim, ff_dim));
  fc2_ = register_module("fc2", nn::Linear(ff_dim, dim));
  drop_ = register_module("drop", nn::Dropout(dropout));
}

torch::Tensor EncoderBlockImpl::forward(torch::Tensor x) {
  x = x + drop_->forward(attn_->forward(ln1_->forward(x)));
  auto h = fc2_->forward(torch::gelu(fc1_->forward(ln2_->forward(x))));
  return x + drop_->forward(h);
}

AttentionModuleImpl::AttentionModuleImpl(AttentionOptions options) : options_(options) {
  FORGELOC_REQUIRE(options_.dim >= 1 && options_.sequence_length >= 1, "attention dims must be positive");
  FORGELOC_REQUIRE(!options_.squeeze || options_.num_maps >= 1, "attention squeeze needs at least one map");
  position_ = register_parameter("position", torch::randn({options_.sequence_length, options_.dim}) * 0.02);
  if (options_.mixer == MixerKind::kTransformer) {
    FORGELOC_REQUIRE(options_.num_blocks >= 1, "transformer needs at least one encoder block");
    for (std::int64_t i = 0; i < options_.num_blocks; ++i) {
      blocks_.push_back(register_module(
          "block" + std::to_string(i),
          EncoderBlock(options_.dim, options_.num_heads, options_.ff_multiplier * options_.dim, options_.dropout)));
    }
    final_ln_ = register_module("final_ln", nn::LayerNorm(nn::LayerNormOptions({options_.dim})));
  } else {
    FORGELOC_REQUIRE(options_.fc_layers >= 1, "FC mixer needs at least one layer");
    for (std::int64_t i = 0; i < options_.fc_layers; ++i) {
      fc_stack_.push_back(register_module("fc" + std::to_string(i), nn::Linear(options_.dim, options_.dim)));
    }
  }
  if (options_.squeeze) squeeze_ = register_module("squeeze", nn::Linear(options_.dim, options_.num_maps));
}

torch::Tensor AttentionModuleImpl::contextualize(torch::Tensor x) {
  FORGELOC_REQUIRE(x.dim() == 3 && x.size(1) == options_.sequence_length && x.size(2) == options_.dim,
                   "attention input must be [B, " + std::to_string(options_.sequence_length) + ", " +
                       std::to_string(options_.dim) + "]");
  x = add_position(x, position_);
  if (options_.mixer == MixerKind::kTransformer) {
    for (auto& block : blocks_) x = block->forward(x);
    return final_ln_->forward(x);
  }
  for (auto& fc : fc_stack_) x = torch::relu(fc->forward(x));
  return x;
}

torch::Tensor AttentionModuleImpl::squeeze(const torch::Tensor& hidden) {
  FORGELOC_REQUIRE(!squeeze_.is_empty(), "attention module was built without a squeeze layer");
  auto maps = squeeze_->forward(hidden).transpose(1, 2);  // [B, L, K]
  return options_.sigmoid_maps ? torch::sigmoid(maps) : maps;
}

torch::Tensor AttentionModuleImpl::forward(torch::Tensor x) { return squeeze(contextualize(std::move(x))); }

torch::Tensor add_position(const torch::Tensor& x, const torch::Tensor& pe) {
  FORGELOC_REQUIRE(pe.dim() == 2, "position embeddings must be [K, D]");
  FORGELOC_REQUIRE((x.dim() == 2 || x.dim() == 3) && x.size(-2) == pe.size(0) && x.size(-1) == pe.size(1),
                   "position embedding shape does not match the embeddings");
  return x + pe;
}

AttentionMapSet attention_maps(AttentionModule& module, const JointEmbeddingField& x) {
  FORGELOC_REQUIRE(x.x.dim() == 2 && x.x.size(0) == module->options().sequence_length,
                   "sequence length does not match the attention module");
  auto maps = module->forward(x.x.unsqueeze(0)).squeeze(0);  // [L, K]
  return AttentionMapSet{maps.reshape({maps.size(0), x.grid.rows, x.grid.cols})};
}

torch::Tensor refine(const torch::Tensor& x, const torch::Tensor& maps, RefineMode mode) {
  const bool batched = x.dim() == 3;
  FORGELOC_REQUIRE(x.dim() == 2 || batched, "refine expects x as [K, D] or [B, K, D]");
  FORGELOC_REQUIRE(maps.dim() == x.dim() + 1, "maps must be [L, M, N] (or batched [B, L, M, N])");
  auto xb = batched ? x : x.unsqueeze(0);
  auto mb = batched ? maps : maps.unsqueeze(0);
  FORGELOC_REQUIRE(xb.size(0) == mb.size(0), "batch sizes differ");
  FORGELOC_REQUIRE(mb.size(2) * mb.size(3) == xb.size(1), "map grid does not match the embedding count");
  auto weights = mb.flatten(2).transpose(1, 2);  // [B, K, L]
  torch::Tensor y;
  if (mode == RefineMode::kAdd) {
    // sum_l x_k m_{k,l}
    y = xb.unsqueeze(2).mul(weights.unsqueeze(3)).sum(2);
  } else {
    y = xb.unsqueeze(2).mul(weights.unsqueeze(3)).flatten(2);  // [B, K, L*D], map-major
  }
  return batched ? y : y.squeeze(0);
}

}  // namespace forgeloc
