// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic corpora. Six dataset kinds, labelled A-F in stage tables:
//
//   A VCMS  video, spliced from another camera's video
//   B VPVM  video, visible in-place edits
//   C VPIM  video, invisible in-place edits
//   D ICMS  image versions of the above (single frame)
//   E IPVM
//   F IPIM
//
// Layout under the output directory:
//   corpus.json              generation options + seed
//   manifest.jsonl           one record per item, paths relative to this directory
//   frames/<id>/NNNN.png     decoded frames
//   masks/<id>.png           ground-truth mask (all zero for authentic items)
//   videos/<id>.mp4          H.264 container (h264 mode only)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "forgeloc/block_geometry.hpp"
#include "forgeloc/datagen/encoder.hpp"
#include "forgeloc/datagen/manipulations.hpp"
#include "forgeloc/datagen/shapes.hpp"

namespace forgeloc {

enum class DatasetKind { kVCMS, kVPVM, kVPIM, kICMS, kIPVM, kIPIM };

std::string dataset_name(DatasetKind d);
char dataset_letter(DatasetKind d);
/// Accepts names ("VPVM") or stage-table letters ("B").
DatasetKind parse_dataset(const std::string& s);
bool is_video_dataset(DatasetKind d);
std::vector<DatasetKind> all_datasets();

struct SplitCounts {
  int train = 12;
  int val = 2;
  int test = 2;

  int total() const { return train + val + test; }
};

struct CorpusOptions {
  std::int64_t height = 256;
  std::int64_t width = 384;
  SplitCounts items;  // per dataset
  int frames_per_video = 4;
  std::vector<DatasetKind> datasets = all_datasets();
  EncodeSettings encode;
  std::uint64_t seed = 0;
  MaskSamplerOptions mask;
  DiffMaskOptions diff;

  static CorpusOptions desk();
  static CorpusOptions full();

  /// Throws InvalidArgument on any inconsistent value.
  void validate() const;
};

nlohmann::json to_json(const CorpusOptions& o);
CorpusOptions corpus_options_from_json(const nlohmann::json& j);

/// One synthesized item before encoding. Odd item indices are manipulated, so
/// every split is balanced.
struct CorpusItem {
  std::string id;
  DatasetKind dataset = DatasetKind::kVCMS;
  std::string split;
  bool manipulated = false;
  std::string kind;  // "authentic", "splice" or "in-place"
  nlohmann::json recipe;
  int camera = 0;
  std::uint64_t seed = 0;
  std::vector<torch::Tensor> authentic;  // pre-manipulation frames
  std::vector<torch::Tensor> frames;     // what gets encoded
  ForgeryMask mask;
};

std::string split_of(const SplitCounts& counts, int index);

/// Deterministic in (options.seed, dataset, index). Throws GenerationError if a
/// manipulated frame differs from its source outside the mask.
CorpusItem synthesize_item(const CorpusOptions& options, DatasetKind dataset, int index);

struct ManifestRecord {
  std::string id;
  std::string split;
  std::string dataset;
  std::string kind;
  nlohmann::json recipe;
  std::filesystem::path mask_path;
  std::vector<std::filesystem::path> frame_paths;
  std::string encode_settings;
  std::uint64_t seed = 0;
  int camera = 0;
  std::string container;
  std::string encode_command;

  bool manipulated() const { return kind != "authentic"; }
};

nlohmann::json to_json(const ManifestRecord& r);
ManifestRecord manifest_record_from_json(const nlohmann::json& j);

/// Writes the corpus and returns its records (paths relative to out_dir).
std::vector<ManifestRecord> generate_corpus(const CorpusOptions& options, const std::filesystem::path& out_dir);

/// Reads manifest.jsonl; relative paths are resolved against its directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest_path);

/// Accepts a corpus directory or a manifest file path.
std::filesystem::path manifest_path_for(const std::filesystem::path& corpus_or_manifest);

}  // namespace forgeloc
