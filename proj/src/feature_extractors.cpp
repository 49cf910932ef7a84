// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/feature_extractors.hpp"

#include <cmath>

#include "forgeloc/errors.hpp"

namespace forgeloc {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

constexpr std::int64_t kConstrainedKernel = 5;

void check_blocks(const torch::Tensor& blocks, std::int64_t block_size) {
  if (!blocks.defined() || blocks.dim() != 4 || blocks.size(1) != 3 || blocks.size(2) != block_size ||
      blocks.size(3) != block_size) {
    throw InvalidArgument("expected blocks of shape [K, 3, " + std::to_string(block_size) + ", " +
                          std::to_string(block_size) + "]");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FFE

FfeModelImpl::FfeModelImpl(FfeOptions options) : options_(std::move(options)) {
  FORGELOC_REQUIRE(options_.embedding_dim >= 1, "embedding_dim must be positive");
  FORGELOC_REQUIRE(options_.block_size % 16 == 0, "FFE block size must be a multiple of 16");
  std::int64_t in = 3;
  if (options_.constrained) {
    constrained_ = register_module(
        "constrained",
        nn::Conv2d(nn::Conv2dOptions(3, options_.constrained_filters, kConstrainedKernel).padding(2).bias(false)));
    in = options_.constrained_filters;
  }
  conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, options_.conv1_channels, 7).stride(2).padding(3)));
  bn1_ = register_module("bn1", nn::BatchNorm2d(options_.conv1_channels));
  conv2_ = register_module(
      "conv2", nn::Conv2d(nn::Conv2dOptions(options_.conv1_channels, options_.conv2_channels, 5).padding(2)));
  bn2_ = register_module("bn2", nn::BatchNorm2d(options_.conv2_channels));
  conv3_ = register_module("conv3", nn::Conv2d(nn::Conv2dOptions(options_.conv2_channels, options_.conv3_channels, 1)));
  bn3_ = register_module("bn3", nn::BatchNorm2d(options_.conv3_channels));
  // 128 -> 64 (conv1) -> 32 (pool) -> 16 (pool) -> 8 (avg pool)
  const auto side = options_.block_size / 16;
  embed_ = register_module("embed", nn::Linear(options_.conv3_channels * side * side, options_.embedding_dim));
  if (options_.num_classes > 0) {
    classifier_ = register_module("classifier", nn::Linear(options_.embedding_dim, options_.num_classes));
  }
  if (options_.constrained) enforce_constraint();
}

torch::Tensor FfeModelImpl::forward(torch::Tensor blocks) {
  check_blocks(blocks, options_.block_size);
  auto x = blocks;
  if (options_.constrained) x = constrained_->forward(x);
  x = torch::tanh(bn1_->forward(conv1_->forward(x)));
  x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
  x = torch::tanh(bn2_->forward(conv2_->forward(x)));
  x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
  x = torch::tanh(bn3_->forward(conv3_->forward(x)));
  x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2).stride(2));
  return torch::tanh(embed_->forward(x.flatten(1)));
}

torch::Tensor FfeModelImpl::class_logits(torch::Tensor blocks) {
  if (classifier_.is_empty()) throw InvalidArgument("FFE classifier head has been discarded");
  return classifier_->forward(forward(std::move(blocks)));
}

void FfeModelImpl::enforce_constraint() {
  if (!options_.constrained) return;
  torch::NoGradGuard no_grad;
  auto w = constrained_->weight;  // [out, in, 5, 5]
  const auto c = kConstrainedKernel / 2;
  auto flat = w.view({w.size(0) * w.size(1), kConstrainedKernel * kConstrainedKernel});
  const auto center = c * kConstrainedKernel + c;
  flat.select(1, center).zero_();
  auto sums = flat.sum(1, /*keepdim=*/true);
  // Degenerate slices fall back to a uniform neighbourhood average.
  auto degenerate = sums.abs() < 1e-12;
  auto uniform = torch::full_like(flat, 1.0 / (kConstrainedKernel * kConstrainedKernel - 1));
  uniform.select(1, center).zero_();
  flat.copy_(torch::where(degenerate, uniform, flat / torch::where(degenerate, torch::ones_like(sums), sums)));
  flat.select(1, center).fill_(-1.0);
}

bool FfeModelImpl::constraint_satisfied(double tol) const {
  if (!options_.constrained) return true;
  torch::NoGradGuard no_grad;
  auto w = constrained_->weight.to(torch::kFloat64);
  auto flat = w.reshape({w.size(0) * w.size(1), -1});
  const auto center = (kConstrainedKernel / 2) * kConstrainedKernel + kConstrainedKernel / 2;
  auto centers = flat.select(1, center);
  auto others = flat.sum(1) - centers;
  return (centers + 1.0).abs().max().item<double>() <= tol && (others - 1.0).abs().max().item<double>() <= tol;
}

void FfeModelImpl::drop_classifier() {
  if (classifier_.is_empty()) return;
  unregister_module("classifier");
  classifier_ = nullptr;
  options_.num_classes = 0;
}

// ---------------------------------------------------------------------------
// CFE

SeparableConvImpl::SeparableConvImpl(std::int64_t in, std::int64_t out) {
  depthwise_ = register_module("depthwise", nn::Conv2d(nn::Conv2dOptions(in, in, 3).padding(1).groups(in).bias(false)));
  pointwise_ = register_module("pointwise", nn::Conv2d(nn::Conv2dOptions(in, out, 1).bias(false)));
}

torch::Tensor SeparableConvImpl::forward(torch::Tensor x) { return pointwise_->forward(depthwise_->forward(x)); }

EntryBlockImpl::EntryBlockImpl(std::int64_t in, std::int64_t out, bool leading_relu) : leading_relu_(leading_relu) {
  sep1_ = register_module("sep1", SeparableConv(in, out));
  bn1_ = register_module("bn1", nn::BatchNorm2d(out));
  sep2_ = register_module("sep2", SeparableConv(out, out));
  bn2_ = register_module("bn2", nn::BatchNorm2d(out));
  skip_ = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(2).bias(false)));
  skip_bn_ = register_module("skip_bn", nn::BatchNorm2d(out));
}

torch::Tensor EntryBlockImpl::forward(torch::Tensor x) {
  auto residual = skip_bn_->forward(skip_->forward(x));
  auto y = leading_relu_ ? torch::relu(x) : x;
  y = bn1_->forward(sep1_->forward(y));
  y = bn2_->forward(sep2_->forward(torch::relu(y)));
  y = F::max_pool2d(y, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
  return y + residual;
}

MiddleBlockImpl::MiddleBlockImpl(std::int64_t channels) {
  for (int i = 0; i < 3; ++i) {
    seps_.push_back(register_module("sep" + std::to_string(i + 1), SeparableConv(channels, channels)));
    bns_.push_back(register_module("bn" + std::to_string(i + 1), nn::BatchNorm2d(channels)));
  }
}

torch::Tensor MiddleBlockImpl::forward(torch::Tensor x) {
  auto y = x;
  for (std::size_t i = 0; i < seps_.size(); ++i) y = bns_[i]->forward(seps_[i]->forward(torch::relu(y)));
  return x + y;
}

CfeModelImpl::CfeModelImpl(CfeOptions options) : options_(std::move(options)) {
  FORGELOC_REQUIRE(options_.stem_channels.size() == 2, "CFE stem needs exactly two channel counts");
  FORGELOC_REQUIRE(!options_.entry_channels.empty(), "CFE needs at least one entry block");
  FORGELOC_REQUIRE(options_.embedding_dim >= 1, "embedding_dim must be positive");
  const auto s0 = options_.stem_channels[0];
  const auto s1 = options_.stem_channels[1];
  stem1_ = register_module("stem1", nn::Conv2d(nn::Conv2dOptions(3, s0, 3).stride(2).padding(1).bias(false)));
  stem_bn1_ = register_module("stem_bn1", nn::BatchNorm2d(s0));
  stem2_ = register_module("stem2", nn::Conv2d(nn::Conv2dOptions(s0, s1, 3).padding(1).bias(false)));
  stem_bn2_ = register_module("stem_bn2", nn::BatchNorm2d(s1));
  entry_ = register_module("entry", nn::Sequential());
  std::int64_t in = s1;
  for (std::size_t i = 0; i < options_.entry_channels.size(); ++i) {
    entry_->push_back(EntryBlock(in, options_.entry_channels[i], /*leading_relu=*/i > 0));
    in = options_.entry_channels[i];
  }
  middle_ = register_module("middle", MiddleBlock(in));
  reduce_ = register_module("reduce", nn::Conv2d(nn::Conv2dOptions(in, options_.embedding_dim, 1)));
}

torch::Tensor CfeModelImpl::forward(torch::Tensor blocks) {
  check_blocks(blocks, options_.block_size);
  auto x = torch::relu(stem_bn1_->forward(stem1_->forward(blocks)));
  x = torch::relu(stem_bn2_->forward(stem2_->forward(x)));
  x = entry_->forward(x);
  x = middle_->forward(x);
  x = reduce_->forward(torch::relu(x));
  return x.mean({2, 3});
}

// ---------------------------------------------------------------------------

double ffe_pretrain_loss(std::span<const double> probs, std::int64_t true_class) {
  FORGELOC_REQUIRE(!probs.empty(), "empty probability vector");
  FORGELOC_REQUIRE(true_class >= 0 && true_class < static_cast<std::int64_t>(probs.size()),
                   "true class index out of range");
  double total = 0.0;
  for (double p : probs) total += p;
  FORGELOC_REQUIRE(std::abs(total - 1.0) <= 1e-6, "class probabilities must sum to 1");
  return -std::log(std::max(probs[static_cast<std::size_t>(true_class)], kLogClip));
}

torch::Tensor ffe_pretrain_loss(const torch::Tensor& probs, const torch::Tensor& classes) {
  FORGELOC_REQUIRE(probs.dim() == 2 && classes.dim() == 1 && probs.size(0) == classes.size(0),
                   "expected probs [B, n] and classes [B]");
  const auto n = probs.size(1);
  FORGELOC_REQUIRE(classes.numel() == 0 || (classes.min().item<std::int64_t>() >= 0 &&
                                            classes.max().item<std::int64_t>() < n),
                   "true class index out of range");
  auto picked = probs.gather(1, classes.to(torch::kLong).unsqueeze(1)).squeeze(1);
  return (-torch::log(picked.clamp_min(kLogClip))).mean();
}

torch::Tensor extract_forensic(FfeModel& model, const torch::Tensor& blocks) {
  torch::NoGradGuard no_grad;
  model->eval();
  return model->forward(blocks);
}

torch::Tensor extract_context(CfeModel& model, const torch::Tensor& blocks) {
  torch::NoGradGuard no_grad;
  model->eval();
  return model->forward(blocks);
}

JointEmbeddingField join_embeddings(const torch::Tensor& f, const torch::Tensor& c, const BlockGrid& grid) {
  FORGELOC_REQUIRE(f.defined() || c.defined(), "at least one embedding source is required");
  torch::Tensor x;
  if (f.defined() && c.defined()) {
    FORGELOC_REQUIRE(f.dim() == 2 && c.dim() == 2, "embeddings must be [K, D]");
    FORGELOC_REQUIRE(f.size(0) == c.size(0), "forensic and context block counts differ");
    x = torch::cat({f, c}, 1);
  } else {
    x = f.defined() ? f : c;
    FORGELOC_REQUIRE(x.dim() == 2, "embeddings must be [K, D]");
  }
  FORGELOC_REQUIRE(x.size(0) == grid.count(), "embedding count does not match grid");
  return JointEmbeddingField{x, grid};
}

}  // namespace forgeloc
