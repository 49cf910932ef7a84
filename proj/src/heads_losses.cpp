// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/heads_losses.hpp"

#include <algorithm>
#include <cmath>

#include "forgeloc/errors.hpp"
#include "forgeloc/feature_extractors.hpp"

namespace forgeloc {

namespace nn = torch::nn;

namespace {

// [B, K, F] -> [B, F, M, N]
torch::Tensor to_grid(const torch::Tensor& y, std::int64_t feature_dim, std::int64_t rows, std::int64_t cols) {
  if (y.dim() != 3 || y.size(1) != rows * cols || y.size(2) != feature_dim) {
    throw InvalidArgument("head input must be [B, " + std::to_string(rows * cols) + ", " +
                          std::to_string(feature_dim) + "]");
  }
  return y.transpose(1, 2).reshape({y.size(0), feature_dim, rows, cols});
}

}  // namespace

DetectionHeadImpl::DetectionHeadImpl(std::int64_t feature_dim, std::int64_t rows, std::int64_t cols)
    : feature_dim_(feature_dim), rows_(rows), cols_(cols) {
  conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(feature_dim, 200, 1)));
  conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(200, 2, 1)));
  fc_ = register_module("fc", nn::Linear(2 * rows * cols, 2));
}

torch::Tensor DetectionHeadImpl::logits(const torch::Tensor& y) {
  auto x = to_grid(y, feature_dim_, rows_, cols_);
  x = torch::relu(conv1_->forward(x));
  x = torch::relu(conv2_->forward(x));
  return fc_->forward(x.flatten(1));
}

torch::Tensor DetectionHeadImpl::forward(const torch::Tensor& y) { return torch::softmax(logits(y), 1); }

LocalizationHeadImpl::LocalizationHeadImpl(std::int64_t feature_dim, std::int64_t rows, std::int64_t cols)
    : feature_dim_(feature_dim), rows_(rows), cols_(cols) {
  const std::array<std::int64_t, 5> channels = {feature_dim, 192, 96, 12, 1};
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i] = register_module("conv" + std::to_string(i + 1),
                                nn::Conv2d(nn::Conv2dOptions(channels[i], channels[i + 1], 1)));
  }
}

torch::Tensor LocalizationHeadImpl::forward(const torch::Tensor& y) {
  auto x = to_grid(y, feature_dim_, rows_, cols_);
  for (std::size_t i = 0; i + 1 < convs_.size(); ++i) x = torch::relu(convs_[i]->forward(x));
  x = torch::sigmoid(convs_.back()->forward(x));
  return x.flatten(1);
}

Detection detect(DetectionHead& head, const torch::Tensor& y) {
  FORGELOC_REQUIRE(y.dim() == 2, "single-frame detection expects y as [K, F]");
  auto p = head->forward(y.unsqueeze(0)).squeeze(0).to(torch::kFloat64);
  return Detection{p[0].item<double>(), p[1].item<double>()};
}

torch::Tensor localize(LocalizationHead& head, const torch::Tensor& y) {
  FORGELOC_REQUIRE(y.dim() == 2, "single-frame localization expects y as [K, F]");
  return head->forward(y.unsqueeze(0)).squeeze(0);
}

void LossWeights::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
}

double detection_loss(std::span<const double, 2> p, std::span<const double, 2> w) {
  const bool one_hot = (w[0] == 1.0 && w[1] == 0.0) || (w[0] == 0.0 && w[1] == 1.0);
  FORGELOC_REQUIRE(one_hot, "detection label must be one-hot");
  double loss = 0.0;
  for (std::size_t n = 0; n < 2; ++n) loss -= w[n] * std::log(std::max(p[n], kLogClip));
  return loss;
}

torch::Tensor detection_loss(const torch::Tensor& p, const torch::Tensor& w) {
  FORGELOC_REQUIRE(p.dim() == 2 && p.size(1) == 2 && w.sizes() == p.sizes(), "expected p and w as [B, 2]");
  auto wd = w.to(torch::kFloat64);
  const bool one_hot = torch::logical_or(wd == 0.0, wd == 1.0).all().item<bool>() &&
                       (wd.sum(1) == 1.0).all().item<bool>();
  FORGELOC_REQUIRE(one_hot, "detection labels must be one-hot");
  auto per_frame = -(w.to(p.dtype()) * torch::log(p.clamp_min(kLogClip))).sum(1);
  return per_frame.mean();
}

double localization_loss(std::span<const double> q, std::span<const double> z) {
  FORGELOC_REQUIRE(q.size() == z.size(), "q and z lengths differ");
  double loss = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    FORGELOC_REQUIRE(z[k] >= 0.0 && z[k] <= 1.0, "block labels must lie in [0, 1]");
    loss += -z[k] * std::log(std::max(q[k], kLogClip)) - (1.0 - z[k]) * std::log(std::max(1.0 - q[k], kLogClip));
  }
  return loss;
}

torch::Tensor localization_loss(const torch::Tensor& q, const torch::Tensor& z) {
  FORGELOC_REQUIRE(q.dim() == z.dim() && q.sizes() == z.sizes() && (q.dim() == 1 || q.dim() == 2),
                   "q and z must have the same [K] or [B, K] shape");
  auto qb = q.dim() == 1 ? q.unsqueeze(0) : q;
  auto zb = (z.dim() == 1 ? z.unsqueeze(0) : z).to(q.dtype());
  FORGELOC_REQUIRE(zb.numel() == 0 || (zb.min().item<double>() >= 0.0 && zb.max().item<double>() <= 1.0),
                   "block labels must lie in [0, 1]");
  auto per_block = -zb * torch::log(qb.clamp_min(kLogClip)) - (1.0 - zb) * torch::log((1.0 - qb).clamp_min(kLogClip));
  return per_block.sum(1).mean();
}

double joint_loss(double detection, double localization, const LossWeights& weights) {
  weights.validate();
  return weights.alpha * detection + (1.0 - weights.alpha) * localization;
}

torch::Tensor joint_loss(const torch::Tensor& detection, const torch::Tensor& localization,
                         const LossWeights& weights) {
  weights.validate();
  return weights.alpha * detection + (1.0 - weights.alpha) * localization;
}

}  // namespace forgeloc
