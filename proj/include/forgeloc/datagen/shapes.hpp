// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Compound-shape tamper masks: up to three overlapping basic shapes, each randomly
// resized, rotated and translated. Masks covering more than max_area of the frame
// are rejected and resampled.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "forgeloc/block_geometry.hpp"
#include "forgeloc/rng.hpp"

namespace forgeloc {

enum class ShapeKind {
  kRectangle,
  kCircle,
  kEllipse,
  kTriangle,
  kPentagon,
  kHeptagon,
  kStar5,
  kStar8,
  kStar12,
  kStar18,
};

inline constexpr int kShapeCount = 10;

std::string shape_name(ShapeKind kind);
ShapeKind parse_shape(const std::string& name);

struct ShapeDraw {
  ShapeKind kind = ShapeKind::kCircle;
  double radius = 32.0;        // outer radius in pixels
  double aspect = 1.0;         // minor/major ratio, rectangles and ellipses only
  double rotation_deg = 0.0;
  double cx = 0.0;             // center, pixel coordinates (x right, y down)
  double cy = 0.0;
};

struct MaskRecipe {
  std::vector<ShapeDraw> shapes;
  std::uint64_t seed = 0;
  int attempts = 1;   // draws needed to pass the area rule
  double area = 0.0;  // fraction of frame pixels marked
};

nlohmann::json to_json(const MaskRecipe& recipe);
MaskRecipe mask_recipe_from_json(const nlohmann::json& j);

using Polygon = std::vector<std::pair<double, double>>;  // (x, y) vertices

Polygon shape_polygon(const ShapeDraw& draw);

/// Even-odd fill sampled at pixel centers (x + 0.5, y + 0.5); H x W float32 of {0, 1}.
torch::Tensor rasterize_polygon(const Polygon& polygon, std::int64_t height, std::int64_t width);

/// One shape, reduced to its largest 4-connected component so the region is connected.
torch::Tensor rasterize_shape(const ShapeDraw& draw, std::int64_t height, std::int64_t width);

/// Union of the recipe's shapes.
ForgeryMask rasterize_recipe(const MaskRecipe& recipe, std::int64_t height, std::int64_t width);

struct MaskSamplerOptions {
  int max_shapes = 3;
  double max_area = 0.75;
  int max_attempts = 100;
  double min_radius = 0.08;  // fractions of min(height, width)
  double max_radius = 0.55;
};

inline bool area_acceptable(double area_fraction, double max_area = 0.75) { return area_fraction <= max_area; }

struct MaskSample {
  ForgeryMask mask;
  MaskRecipe recipe;
};

/// Rejection-samples a compound mask; throws GenerationError when the budget runs out.
MaskSample sample_mask(std::int64_t height, std::int64_t width, Rng& rng, const MaskSamplerOptions& options = {});

}  // namespace forgeloc
