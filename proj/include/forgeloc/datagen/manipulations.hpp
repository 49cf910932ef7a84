// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Region manipulations for the synthetic corpora.
//
// In-place ops act on the whole frame and are composited back through the mask,
// so pixels outside the mask never change:
//   brightness  x * f
//   contrast    f * x + (1 - f) * mean luminance of the masked region
//   saturation  f * x + (1 - f) * luminance(x)
//   hue         HSV hue rotated by h turns
//   blurs       Gaussian / motion-line / box kernels of the profile's size
//   noise       x + N(0, std^2)
// Every result is clamped to [0, 1].

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "forgeloc/block_geometry.hpp"
#include "forgeloc/rng.hpp"

namespace forgeloc {

enum class Visibility { kVisible, kInvisible };
enum class ManipulationKind { kSplice, kInPlace };

enum class OpKind {
  kBrightness,
  kContrast,
  kSaturation,
  kHue,
  kGaussianBlur,
  kMotionBlur,
  kBoxBlur,
  kGaussianNoise,
};

std::string to_string(Visibility v);
std::string to_string(ManipulationKind k);
std::string to_string(OpKind k);
Visibility parse_visibility(const std::string& s);
OpKind parse_op(const std::string& s);

struct OpSpec {
  OpKind kind;
  double probability = 1.0;
  double lo = 0.0;  // factor / hue-shift range, unused by blurs and noise
  double hi = 0.0;
  int kernel = 0;
  double sigma = 0.0;
  double angle_lo = 0.0;
  double angle_hi = 0.0;
  double direction_lo = 0.0;
  double direction_hi = 0.0;
  double noise_std = 0.0;
};

struct ManipulationProfile {
  Visibility visibility = Visibility::kVisible;
  std::vector<OpSpec> ops;  // in application order

  const OpSpec* find(OpKind kind) const;

  static ManipulationProfile visible();
  static ManipulationProfile invisible();
  static ManipulationProfile for_visibility(Visibility v);
};

/// A drawn op: `value` is the factor, hue shift, blur sigma or noise std depending on kind.
struct AppliedOp {
  OpKind kind;
  double value = 0.0;
  int kernel = 0;
  double angle = 0.0;
  double direction = 0.0;
};

struct ManipulationRecipe {
  ManipulationKind kind = ManipulationKind::kInPlace;
  Visibility visibility = Visibility::kVisible;
  std::vector<AppliedOp> ops;
};

nlohmann::json to_json(const ManipulationRecipe& recipe);
ManipulationRecipe manipulation_recipe_from_json(const nlohmann::json& j);

/// Draws each profile op with its probability; at least one op is always kept.
ManipulationRecipe sample_inplace_recipe(Visibility visibility, Rng& rng);

/// Throws InvalidArgument when an op is missing from the profile or out of its range.
void validate_recipe(const ManipulationRecipe& recipe);

/// Whole-frame op on H x W x 3. `region` (H x W) is only used by contrast.
torch::Tensor apply_op(const torch::Tensor& frame, const AppliedOp& op, const torch::Tensor& region, Rng& rng);

torch::Tensor motion_blur_kernel(int size, double angle_deg, double direction);

torch::Tensor apply_inplace(const torch::Tensor& frame, const ForgeryMask& mask, const ManipulationRecipe& recipe,
                            Rng& rng);

/// out = source * mask + dest * (1 - mask).
torch::Tensor apply_splice(const torch::Tensor& dest, const torch::Tensor& source, const ForgeryMask& mask);

struct DiffMaskOptions {
  std::int64_t block = 16;
  double threshold = 0.1;
};

/// Per-block mean absolute channel difference, min-max normalized, thresholded and
/// projected back to pixels. Blocks at the right/bottom edge may be partial.
torch::Tensor diff_block_scores(const torch::Tensor& original, const torch::Tensor& manipulated,
                               std::int64_t block = 16);
ForgeryMask diff_mask(const torch::Tensor& original, const torch::Tensor& manipulated,
                      const DiffMaskOptions& options = {});

}  // namespace forgeloc
