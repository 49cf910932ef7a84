// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container (all integers little-endian):
//
//   bytes[8]  magic "FLCKPT01"
//   u64       manifest length, followed by the manifest as UTF-8 JSON
//   u64       tensor count
//   per tensor:
//     u32 name length, name bytes
//     u32 ndim, ndim x i64 dims
//     numel x f32 values (row-major)
//
// The manifest carries at least {"model": <ModelConfig json>} for network
// checkpoints, plus whatever run metadata the writer adds (stage, epoch, seed).

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "forgeloc/model.hpp"

namespace forgeloc {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

struct Checkpoint {
  nlohmann::json manifest;
  NamedTensors tensors;

  const torch::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters and buffers of `module`, names prefixed with `prefix`.
NamedTensors collect_state(const torch::nn::Module& module, const std::string& prefix = {});

/// Copies tensors named `prefix + local_name` into `module`. With `strict`, every
/// parameter/buffer of the module must be present. Returns the number copied.
std::size_t apply_state(torch::nn::Module& module, const Checkpoint& checkpoint, const std::string& prefix = {},
                        bool strict = true);

void save_network(const std::filesystem::path& path, const ForgeryNet& net, nlohmann::json extra = {});
ForgeryNet load_network(const std::filesystem::path& path, nlohmann::json* manifest_out = nullptr);

}  // namespace forgeloc
