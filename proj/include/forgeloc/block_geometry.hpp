// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame padding, tiling into non-overlapping analysis blocks and soft block labels.
// Frames are padded at the bottom/right up to the next multiple of the block size;
// blocks are always enumerated in row-major order.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace forgeloc {

inline constexpr std::int64_t kDefaultBlockSize = 128;

/// One decoded frame: H x W x 3 float32 values in [0, 1].
struct FrameTensor {
  torch::Tensor pixels;
  std::string frame_id;
  std::string source_id;

  std::int64_t height() const { return pixels.size(0); }
  std::int64_t width() const { return pixels.size(1); }

  /// Validates shape/range and makes the storage contiguous float32.
  static FrameTensor make(torch::Tensor pixels, std::string frame_id = {}, std::string source_id = {});
};

struct BlockGrid {
  std::int64_t block_size = kDefaultBlockSize;
  std::int64_t rows = 0;  // M
  std::int64_t cols = 0;  // N
  std::int64_t height = 0;  // unpadded frame height
  std::int64_t width = 0;
  std::int64_t pad_bottom = 0;
  std::int64_t pad_right = 0;

  std::int64_t count() const { return rows * cols; }
  std::int64_t padded_height() const { return rows * block_size; }
  std::int64_t padded_width() const { return cols * block_size; }
  std::int64_t index(std::int64_t row, std::int64_t col) const { return row * cols + col; }
  std::pair<std::int64_t, std::int64_t> position(std::int64_t k) const { return {k / cols, k % cols}; }

  bool operator==(const BlockGrid&) const = default;
};

/// Pixel-level tamper mask, same H x W as the unpadded frame.
struct ForgeryMask {
  torch::Tensor values;  // H x W float32 in [0, 1]
  bool binarized = false;

  std::int64_t height() const { return values.size(0); }
  std::int64_t width() const { return values.size(1); }

  static ForgeryMask binary(torch::Tensor values);
  static ForgeryMask zeros(std::int64_t height, std::int64_t width);
};

/// z_k: fraction of tampered pixels per block, row-major.
struct BlockLabelField {
  std::vector<double> z;

  torch::Tensor to_tensor() const;
};

enum class PadMode { kReplicate, kZero };

BlockGrid plan_grid(std::int64_t height, std::int64_t width, std::int64_t block_size = kDefaultBlockSize);

/// Pads the frame per `mode` and returns [M*N, 3, bs, bs] blocks in row-major order.
torch::Tensor tile_frame(const FrameTensor& frame, const BlockGrid& grid, PadMode mode = PadMode::kReplicate);

/// Inverse of tile_frame: reassembles [M*N, 3, bs, bs] blocks and crops the padding (H x W x 3).
torch::Tensor untile_blocks(const torch::Tensor& blocks, const BlockGrid& grid);

/// Padded pixels count as unmanipulated, so |P_k| = bs^2 for every block.
BlockLabelField block_labels(const ForgeryMask& mask, const BlockGrid& grid);

}  // namespace forgeloc
