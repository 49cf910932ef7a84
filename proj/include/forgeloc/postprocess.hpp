// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Block probabilities -> full-resolution binary mask:
//   1. threshold at the first histogram valley right of the first peak,
//   2. fill 4-connected background holes not reachable from the border,
//   3. bilinear upscale anchored at block centers, crop, binarize at 0.5.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "forgeloc/block_geometry.hpp"

namespace forgeloc {

struct ThresholdOptions {
  int bins = 256;
  double fallback = 0.5;
};

struct ThresholdReport {
  std::vector<std::int64_t> histogram;
  double threshold = 0.5;
  bool fallback_used = false;
  int peak_bin = -1;
  int valley_bin = -1;
};

/// Histogram bin of a probability: min(floor(q * bins), bins - 1).
int histogram_bin(double q, int bins);
double bin_center(int bin, int bins);

/// Peak: lowest-index strict local maximum (a plateau counts, resolved to its lowest
/// index). Valley: first strict local minimum to its right; a flat valley resolves to
/// its middle bin. No valley -> fallback threshold.
ThresholdReport select_threshold(std::span<const double> q, const ThresholdOptions& options = {});

/// q >= threshold -> 1.
torch::Tensor binarize_blocks(const torch::Tensor& q_grid, double threshold);

/// binary [M, N] in {0, 1}; 0-regions not 4-connected to the border become 1.
torch::Tensor fill_holes(const torch::Tensor& binary_grid);

/// Bilinear value of an M x N block-center lattice at continuous pixel coordinates
/// (y, x); outside the center lattice the nearest edge value is used.
double interpolate_at(const torch::Tensor& grid_values, std::int64_t block_size, double y, double x);

/// Soft upscale evaluated at pixel centers, cropped to out_h x out_w (float64).
torch::Tensor upscale_soft(const torch::Tensor& grid_values, const BlockGrid& grid, std::int64_t out_h,
                           std::int64_t out_w);

/// upscale_soft followed by binarization at 0.5.
ForgeryMask upscale_mask(const torch::Tensor& binary_grid, const BlockGrid& grid, std::int64_t out_h,
                         std::int64_t out_w);

struct PostprocessResult {
  ThresholdReport report;
  torch::Tensor block_mask;  // [M, N] after thresholding + hole filling
  ForgeryMask mask;
};

/// Full pipeline on one frame's block probabilities q [K].
PostprocessResult postprocess(const torch::Tensor& q, const BlockGrid& grid, const ThresholdOptions& options = {});

}  // namespace forgeloc
