// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include <torch/torch.h>

namespace forgeloc {

inline constexpr double kDetectionThreshold = 0.5;

/// Frame-level detector: 1x1 conv (200) + ReLU, 1x1 conv (2) + ReLU, FC over the
/// flattened 2 x M x N map, softmax -> (p_pristine, p_fake).
class DetectionHeadImpl : public torch::nn::Module {
 public:
  DetectionHeadImpl(std::int64_t feature_dim, std::int64_t rows, std::int64_t cols);
  /// y [B, K, F] -> pre-softmax logits [B, 2].
  torch::Tensor logits(const torch::Tensor& y);
  /// y [B, K, F] -> probabilities [B, 2].
  torch::Tensor forward(const torch::Tensor& y);

  std::int64_t feature_dim() const { return feature_dim_; }

 private:
  std::int64_t feature_dim_, rows_, cols_;
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(DetectionHead);

/// Block localizer: 1x1 convs with 192, 96, 12 and 1 kernels; ReLU between, sigmoid last.
class LocalizationHeadImpl : public torch::nn::Module {
 public:
  LocalizationHeadImpl(std::int64_t feature_dim, std::int64_t rows, std::int64_t cols);
  /// y [B, K, F] -> q [B, K] in (0, 1).
  torch::Tensor forward(const torch::Tensor& y);

 private:
  std::int64_t feature_dim_, rows_, cols_;
  std::array<torch::nn::Conv2d, 4> convs_{nullptr, nullptr, nullptr, nullptr};
};
TORCH_MODULE(LocalizationHead);

struct Detection {
  double p_pristine = 0.5;
  double p_fake = 0.5;

  bool is_fake(double threshold = kDetectionThreshold) const { return p_fake >= threshold; }
};

/// Single-frame helpers: y is [K, F].
Detection detect(DetectionHead& head, const torch::Tensor& y);
torch::Tensor localize(LocalizationHead& head, const torch::Tensor& y);

struct LossWeights {
  double alpha = 0.4;

  void validate() const;
};

/// -sum_n w_n log p_n, log clipped at 1e-12. w must be one-hot.
double detection_loss(std::span<const double, 2> p, std::span<const double, 2> w);
/// Batched: p, w [B, 2]; mean over frames.
torch::Tensor detection_loss(const torch::Tensor& p, const torch::Tensor& w);

/// sum_k [-z_k log q_k - (1 - z_k) log(1 - q_k)] (summed, not averaged, over blocks).
double localization_loss(std::span<const double> q, std::span<const double> z);
/// Batched: q, z [B, K]; per-frame sums averaged over frames. [K] inputs are one frame.
torch::Tensor localization_loss(const torch::Tensor& q, const torch::Tensor& z);

/// alpha * Ld + (1 - alpha) * Ll.
double joint_loss(double detection, double localization, const LossWeights& weights);
torch::Tensor joint_loss(const torch::Tensor& detection, const torch::Tensor& localization,
                         const LossWeights& weights);

}  // namespace forgeloc
