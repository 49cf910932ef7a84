// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// 8-bit image I/O. Frames are RGB, masks single-channel with 0 = pristine and
// 255 = tampered; soft masks scale linearly.

#pragma once

#include <filesystem>

#include <torch/torch.h>

#include "forgeloc/block_geometry.hpp"

namespace forgeloc {

FrameTensor read_frame(const std::filesystem::path& path);
void write_frame(const std::filesystem::path& path, const torch::Tensor& pixels);

/// With `binarize`, pixels >= 128 become 1 and the rest 0.
ForgeryMask read_mask(const std::filesystem::path& path, bool binarize = true);
void write_mask(const std::filesystem::path& path, const ForgeryMask& mask);

/// Writes an H x W map in [0, 1] as an 8-bit gray image.
void write_gray(const std::filesystem::path& path, const torch::Tensor& values);

/// Rounds values in [0, 1] onto the 8-bit lattice k/255.
torch::Tensor quantize8(const torch::Tensor& values);

/// H x W x 3 float frame <-> H x W x 3 uint8 (RGB order).
torch::Tensor to_bytes(const torch::Tensor& pixels);
torch::Tensor from_bytes(const torch::Tensor& bytes);

}  // namespace forgeloc
