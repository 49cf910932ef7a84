// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural scenes and simulated capture pipelines.
//
// A scene is an analytic RGB field (gratings, soft ellipses, value noise) that can
// be rendered at any time t, so consecutive frames show smooth motion. A camera
// signature turns a scene into a "captured" frame: CFA mosaic, demosaic, sharpen or
// blur, sensor noise and tone quantization. Each signature leaves its own
// low-level fingerprint, which is what the forensic extractor is pretrained on.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "forgeloc/rng.hpp"

namespace forgeloc {

struct Grating {
  double fx = 0.0;  // cycles per pixel
  double fy = 0.0;
  double phase = 0.0;
  double speed = 0.0;  // phase advance per frame, radians
  double amplitude = 0.1;
  std::array<double, 3> color{1.0, 1.0, 1.0};
};

struct SoftEllipse {
  double cx = 0.0;  // fractions of width / height
  double cy = 0.0;
  double rx = 0.1;
  double ry = 0.1;
  double vx = 0.0;  // fraction per frame
  double vy = 0.0;
  double softness = 0.05;
  std::array<double, 3> color{0.5, 0.5, 0.5};
};

struct SceneParams {
  std::array<double, 3> base{0.5, 0.5, 0.5};
  std::vector<Grating> gratings;
  std::vector<SoftEllipse> ellipses;
  std::uint64_t noise_seed = 0;
  double noise_amplitude = 0.1;
  double noise_cell = 24.0;  // value-noise lattice spacing in pixels
  double drift_x = 0.0;      // value-noise drift, pixels per frame
  double drift_y = 0.0;

  static SceneParams sample(Rng& rng);
};

nlohmann::json to_json(const SceneParams& p);

/// H x W x 3 float32 in [0, 1] at time t (frames).
torch::Tensor render_scene(const SceneParams& params, std::int64_t height, std::int64_t width, double t = 0.0);

enum class CfaPattern { kRGGB, kGRBG, kBGGR, kGBRG };

std::string to_string(CfaPattern p);

struct CameraSignature {
  int id = 0;
  CfaPattern cfa = CfaPattern::kRGGB;
  double sharpen = 0.0;     // unsharp-mask amount
  double blur_sigma = 0.0;  // Gaussian blur after demosaicing
  double noise_std = 0.0;
  int levels = 256;         // tone levels before 8-bit storage
};

/// The simulated camera models; index == id.
const std::vector<CameraSignature>& camera_signatures();

/// Scene -> captured 8-bit-lattice frame (H x W x 3 float32). Dims must be even.
torch::Tensor capture(const torch::Tensor& scene, const CameraSignature& camera, Rng& rng);

/// Renders and captures `frames` consecutive frames.
std::vector<torch::Tensor> render_video(const SceneParams& params, const CameraSignature& camera,
                                        std::int64_t height, std::int64_t width, int frames, Rng& rng);

}  // namespace forgeloc
