// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/block_geometry.hpp"

#include "forgeloc/errors.hpp"

namespace forgeloc {

FrameTensor FrameTensor::make(torch::Tensor pixels, std::string frame_id, std::string source_id) {
  FORGELOC_REQUIRE(pixels.defined() && pixels.dim() == 3 && pixels.size(2) == 3,
                   "frame must be H x W x 3");
  FORGELOC_REQUIRE(pixels.size(0) >= 1 && pixels.size(1) >= 1, "frame must be at least 1 x 1");
  pixels = pixels.to(torch::kFloat32).contiguous();
  FORGELOC_REQUIRE(pixels.min().item<float>() >= 0.0f && pixels.max().item<float>() <= 1.0f,
                   "frame values must lie in [0, 1]");
  return FrameTensor{std::move(pixels), std::move(frame_id), std::move(source_id)};
}

ForgeryMask ForgeryMask::binary(torch::Tensor values) {
  FORGELOC_REQUIRE(values.defined() && values.dim() == 2, "mask must be H x W");
  values = values.to(torch::kFloat32).contiguous();
  FORGELOC_REQUIRE(torch::logical_or(values == 0.0f, values == 1.0f).all().item<bool>(),
                   "binary mask values must be 0 or 1");
  return ForgeryMask{std::move(values), true};
}

ForgeryMask ForgeryMask::zeros(std::int64_t height, std::int64_t width) {
  return ForgeryMask{torch::zeros({height, width}, torch::kFloat32), true};
}

torch::Tensor BlockLabelField::to_tensor() const {
  return torch::tensor(z, torch::kFloat64).to(torch::kFloat32);
}

BlockGrid plan_grid(std::int64_t height, std::int64_t width, std::int64_t block_size) {
  FORGELOC_REQUIRE(height >= 1 && width >= 1, "frame dimensions must be positive");
  FORGELOC_REQUIRE(block_size >= 8, "block size must be at least 8");
  BlockGrid g;
  g.block_size = block_size;
  g.height = height;
  g.width = width;
  g.rows = (height + block_size - 1) / block_size;
  g.cols = (width + block_size - 1) / block_size;
  g.pad_bottom = g.padded_height() - height;
  g.pad_right = g.padded_width() - width;
  return g;
}

namespace {

void check_grid_matches(const BlockGrid& grid, std::int64_t h, std::int64_t w) {
  if (grid.height != h || grid.width != w || grid.rows * grid.block_size - h != grid.pad_bottom ||
      grid.cols * grid.block_size - w != grid.pad_right) {
    throw InvalidArgument("block grid was not planned for a " + std::to_string(h) + "x" + std::to_string(w) +
                          " frame");
  }
}

// Clamped index vector [0, padded) -> [0, size) for edge replication.
torch::Tensor clamped_index(std::int64_t padded, std::int64_t size) {
  return torch::arange(padded, torch::kLong).clamp_max(size - 1);
}

}  // namespace

torch::Tensor tile_frame(const FrameTensor& frame, const BlockGrid& grid, PadMode mode) {
  FORGELOC_REQUIRE(frame.pixels.defined() && frame.pixels.dim() == 3 && frame.pixels.size(2) == 3,
                   "frame must be H x W x 3");
  check_grid_matches(grid, frame.height(), frame.width());
  const auto bs = grid.block_size;
  const auto hp = grid.padded_height();
  const auto wp = grid.padded_width();

  torch::Tensor padded;
  if (mode == PadMode::kReplicate) {
    padded = frame.pixels.index_select(0, clamped_index(hp, grid.height))
                 .index_select(1, clamped_index(wp, grid.width));
  } else {
    padded = torch::zeros({hp, wp, 3}, frame.pixels.options());
    padded.narrow(0, 0, grid.height).narrow(1, 0, grid.width).copy_(frame.pixels);
  }
  // [M, bs, N, bs, 3] -> [M, N, 3, bs, bs]
  return padded.view({grid.rows, bs, grid.cols, bs, 3})
      .permute({0, 2, 4, 1, 3})
      .reshape({grid.count(), 3, bs, bs})
      .contiguous();
}

torch::Tensor untile_blocks(const torch::Tensor& blocks, const BlockGrid& grid) {
  const auto bs = grid.block_size;
  FORGELOC_REQUIRE(blocks.dim() == 4 && blocks.size(0) == grid.count() && blocks.size(1) == 3 &&
                       blocks.size(2) == bs && blocks.size(3) == bs,
                   "blocks do not match grid");
  auto full = blocks.view({grid.rows, grid.cols, 3, bs, bs})
                  .permute({0, 3, 1, 4, 2})
                  .reshape({grid.padded_height(), grid.padded_width(), 3});
  return full.narrow(0, 0, grid.height).narrow(1, 0, grid.width).contiguous();
}

BlockLabelField block_labels(const ForgeryMask& mask, const BlockGrid& grid) {
  FORGELOC_REQUIRE(mask.binarized, "block labels require a binarized mask");
  FORGELOC_REQUIRE(mask.values.dim() == 2, "mask must be H x W");
  check_grid_matches(grid, mask.height(), mask.width());
  auto values = mask.values.to(torch::kFloat64);
  FORGELOC_REQUIRE(torch::logical_or(values == 0.0, values == 1.0).all().item<bool>(),
                   "binarized mask contains non-binary values");

  const auto bs = grid.block_size;
  auto padded = torch::zeros({grid.padded_height(), grid.padded_width()}, torch::kFloat64);
  padded.narrow(0, 0, grid.height).narrow(1, 0, grid.width).copy_(values);
  auto sums = padded.view({grid.rows, bs, grid.cols, bs}).sum({1, 3}).reshape({-1}).contiguous();

  BlockLabelField out;
  out.z.resize(static_cast<std::size_t>(grid.count()));
  const double area = static_cast<double>(bs * bs);
  auto acc = sums.accessor<double, 1>();
  for (std::int64_t k = 0; k < grid.count(); ++k) out.z[static_cast<std::size_t>(k)] = acc[k] / area;
  return out;
}

}  // namespace forgeloc
