// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration shared by every CLI command. A config file is a JSON object
// whose keys override the selected profile's defaults:
//
//   {
//     "profile": "desk",            // or "full"
//     "seed": 0,
//     "alpha": 0.4,                 // detection/localization loss balance, all stages
//     "L": 3,                       // number of attention maps
//     "block_size": 128,
//     "datagen":  { ... },          // corpus options
//     "model":    { ... },          // model dimensions and variant flags
//     "pretrain": { ... },          // FFE camera-model pretraining
//     "stages":   { "1": { ... }, ..., "5": { ... } },
//     "eval":     { "split": "test", "mask_rule": "histogram", "bins": 256, "fallback": 0.5 },
//     "bench":    { "frames": 100, "warmup": 2 }
//   }
//
// Nested objects are merged key by key, so a file only needs the values it changes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "forgeloc/datagen/corpus.hpp"
#include "forgeloc/evaluation.hpp"
#include "forgeloc/model.hpp"
#include "forgeloc/training.hpp"

namespace forgeloc {

struct BenchConfig {
  std::int64_t frames = 100;
  int warmup = 2;
};

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 0;
  CorpusOptions datagen;
  ModelConfig model;
  PretrainConfig pretrain;
  std::vector<StageConfig> stages;  // index s-1 holds stage s
  std::string eval_split = "test";
  MaskRule mask_rule = MaskRule::kHistogram;
  ThresholdOptions threshold;
  BenchConfig bench;

  const StageConfig& stage(int s) const;

  static RunConfig for_profile(const std::string& profile);
  /// Throws ConfigError on any value that violates a module invariant.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);

/// Applies `overrides` on top of the profile named in it (or `profile` when absent).
RunConfig run_config_from_json(const nlohmann::json& overrides, const std::string& profile = "desk");

/// Reads a JSON config file; a missing or malformed file is a ConfigError.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Best-effort source revision baked in at build time.
std::string code_version();

}  // namespace forgeloc
