// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Video re-encoding. H.264 runs an external ffmpeg process; the lossless mode
// writes a PNG sequence and needs no codec at all.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace forgeloc {

enum class EncodeMode { kLossless, kH264 };

struct EncodeSettings {
  EncodeMode mode = EncodeMode::kLossless;
  int crf = 23;
  int fps = 30;
  std::string preset = "medium";
  std::string encoder;  // explicit ffmpeg path; empty = search

  /// "crf=23,fps=30" for H.264, "lossless-png" otherwise.
  std::string settings_string() const;
};

EncodeMode parse_encode_mode(const std::string& s);

/// Lookup order: explicit path, $FORGELOC_FFMPEG, `ffmpeg` on PATH, build-time default.
/// Throws EnvironmentError when nothing executable is found.
std::filesystem::path locate_encoder(const std::string& configured = {});

struct ProcessResult {
  int exit_code = -1;
  std::string stderr_text;
  std::string command_line;
};

/// Runs argv[0] with the given arguments; stdout is discarded, stderr captured.
ProcessResult run_process(const std::vector<std::string>& argv);

struct EncodeResult {
  std::filesystem::path container;  // .mp4 for H.264, frame directory for lossless
  std::vector<torch::Tensor> decoded;
  std::vector<std::filesystem::path> frame_paths;  // decoded frames as PNG
  std::string command_line;
};

/// Encodes `frames` (H x W x 3 in [0, 1]) into `out_dir` using `stem` for file
/// names and decodes them back. Throws EnvironmentError if the encoder fails.
EncodeResult encode_video(const std::vector<torch::Tensor>& frames, const EncodeSettings& settings,
                          const std::filesystem::path& out_dir, const std::string& stem);

/// Decodes a video container into out_dir/NNNN.png and returns the frame paths.
std::vector<std::filesystem::path> decode_video(const std::filesystem::path& video, const std::filesystem::path& out_dir,
                                                const std::string& encoder = {});

double psnr(const torch::Tensor& a, const torch::Tensor& b);

}  // namespace forgeloc
