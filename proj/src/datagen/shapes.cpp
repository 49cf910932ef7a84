// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/datagen/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

#include "forgeloc/errors.hpp"

namespace forgeloc {

using nlohmann::json;

namespace {

constexpr const char* kShapeNames[kShapeCount] = {"rectangle", "circle",  "ellipse", "triangle", "pentagon",
                                                  "heptagon",  "star5",   "star8",   "star12",   "star18"};

constexpr double kStarInnerRatio = 0.5;
constexpr int kRoundVertices = 96;

Polygon regular(int n, double rx, double ry, double phase) {
  Polygon p;
  p.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = phase + 2.0 * std::numbers::pi * i / n;
    p.emplace_back(rx * std::cos(t), ry * std::sin(t));
  }
  return p;
}

Polygon star(int points, double r) {
  Polygon p;
  p.reserve(static_cast<std::size_t>(2 * points));
  for (int i = 0; i < 2 * points; ++i) {
    const double t = -std::numbers::pi / 2 + std::numbers::pi * i / points;
    const double rad = i % 2 == 0 ? r : r * kStarInnerRatio;
    p.emplace_back(rad * std::cos(t), rad * std::sin(t));
  }
  return p;
}

}  // namespace

std::string shape_name(ShapeKind kind) { return kShapeNames[static_cast<int>(kind)]; }

ShapeKind parse_shape(const std::string& name) {
  for (int i = 0; i < kShapeCount; ++i)
    if (name == kShapeNames[i]) return static_cast<ShapeKind>(i);
  throw InvalidArgument("unknown shape '" + name + "'");
}

json to_json(const MaskRecipe& recipe) {
  json shapes = json::array();
  for (const auto& s : recipe.shapes) {
    shapes.push_back({{"shape", shape_name(s.kind)},
                      {"radius", s.radius},
                      {"aspect", s.aspect},
                      {"rotation_deg", s.rotation_deg},
                      {"cx", s.cx},
                      {"cy", s.cy}});
  }
  return json{{"shapes", shapes}, {"seed", recipe.seed}, {"attempts", recipe.attempts}, {"area", recipe.area}};
}

MaskRecipe mask_recipe_from_json(const json& j) {
  MaskRecipe r;
  for (const auto& s : j.at("shapes")) {
    ShapeDraw d;
    d.kind = parse_shape(s.at("shape").get<std::string>());
    d.radius = s.at("radius").get<double>();
    d.aspect = s.at("aspect").get<double>();
    d.rotation_deg = s.at("rotation_deg").get<double>();
    d.cx = s.at("cx").get<double>();
    d.cy = s.at("cy").get<double>();
    r.shapes.push_back(d);
  }
  r.seed = j.value("seed", std::uint64_t{0});
  r.attempts = j.value("attempts", 1);
  r.area = j.value("area", 0.0);
  return r;
}

Polygon shape_polygon(const ShapeDraw& d) {
  FORGELOC_REQUIRE(d.radius > 0.0, "shape radius must be positive");
  FORGELOC_REQUIRE(d.aspect > 0.0 && d.aspect <= 1.0, "shape aspect must lie in (0, 1]");
  const double r = d.radius;
  Polygon local;
  switch (d.kind) {
    case ShapeKind::kRectangle: {
      const double hw = r / std::sqrt(1.0 + d.aspect * d.aspect);
      const double hh = hw * d.aspect;
      local = {{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}};
      break;
    }
    case ShapeKind::kCircle: local = regular(kRoundVertices, r, r, 0.0); break;
    case ShapeKind::kEllipse: local = regular(kRoundVertices, r, r * d.aspect, 0.0); break;
    case ShapeKind::kTriangle: local = regular(3, r, r, -std::numbers::pi / 2); break;
    case ShapeKind::kPentagon: local = regular(5, r, r, -std::numbers::pi / 2); break;
    case ShapeKind::kHeptagon: local = regular(7, r, r, -std::numbers::pi / 2); break;
    case ShapeKind::kStar5: local = star(5, r); break;
    case ShapeKind::kStar8: local = star(8, r); break;
    case ShapeKind::kStar12: local = star(12, r); break;
    case ShapeKind::kStar18: local = star(18, r); break;
  }
  const double a = d.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  Polygon out;
  out.reserve(local.size());
  for (auto [x, y] : local) out.emplace_back(d.cx + c * x - s * y, d.cy + s * x + c * y);
  return out;
}

torch::Tensor rasterize_polygon(const Polygon& polygon, std::int64_t height, std::int64_t width) {
  FORGELOC_REQUIRE(polygon.size() >= 3, "polygon needs at least 3 vertices");
  FORGELOC_REQUIRE(height >= 1 && width >= 1, "raster dimensions must be positive");
  auto out = torch::zeros({height, width}, torch::kFloat32);
  auto acc = out.accessor<float, 2>();
  std::vector<double> xs;
  const std::size_t n = polygon.size();
  for (std::int64_t y = 0; y < height; ++y) {
    const double yc = static_cast<double>(y) + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x0, y0] = polygon[i];
      const auto [x1, y1] = polygon[(i + 1) % n];
      if ((y0 <= yc) != (y1 <= yc)) xs.push_back(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      // pixel x is inside when xs[i] <= x + 0.5 < xs[i + 1]
      auto lo = static_cast<std::int64_t>(std::ceil(xs[i] - 0.5));
      auto hi = static_cast<std::int64_t>(std::ceil(xs[i + 1] - 0.5));
      lo = std::max<std::int64_t>(lo, 0);
      hi = std::min<std::int64_t>(hi, width);
      for (std::int64_t x = lo; x < hi; ++x) acc[y][x] = 1.0f;
    }
  }
  return out;
}

torch::Tensor rasterize_shape(const ShapeDraw& draw, std::int64_t height, std::int64_t width) {
  auto raw = rasterize_polygon(shape_polygon(draw), height, width);
  auto bytes = raw.to(torch::kUInt8).contiguous();
  cv::Mat img(static_cast<int>(height), static_cast<int>(width), CV_8UC1, bytes.data_ptr<std::uint8_t>());
  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(img, labels, stats, centroids, 4, CV_32S);
  if (n <= 2) return raw;  // background plus at most one component
  int best = 1;
  for (int i = 2; i < n; ++i)
    if (stats.at<int>(i, cv::CC_STAT_AREA) > stats.at<int>(best, cv::CC_STAT_AREA)) best = i;
  auto lab = torch::from_blob(labels.data, {height, width}, torch::kInt32);
  return (lab == best).to(torch::kFloat32);
}

ForgeryMask rasterize_recipe(const MaskRecipe& recipe, std::int64_t height, std::int64_t width) {
  auto acc = torch::zeros({height, width}, torch::kFloat32);
  for (const auto& s : recipe.shapes) acc = torch::maximum(acc, rasterize_shape(s, height, width));
  return ForgeryMask::binary(acc);
}

MaskSample sample_mask(std::int64_t height, std::int64_t width, Rng& rng, const MaskSamplerOptions& options) {
  FORGELOC_REQUIRE(height >= 128 && width >= 128, "mask dimensions must be at least 128");
  FORGELOC_REQUIRE(options.max_shapes >= 1 && options.max_shapes <= 3, "compound masks use 1 to 3 shapes");
  FORGELOC_REQUIRE(options.max_attempts >= 1, "rejection budget must be positive");
  FORGELOC_REQUIRE(options.min_radius > 0.0 && options.min_radius <= options.max_radius, "invalid radius range");

  MaskSample out;
  out.recipe.seed = rng();
  Rng local(out.recipe.seed);
  const double base = static_cast<double>(std::min(height, width));
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    MaskRecipe recipe;
    recipe.seed = out.recipe.seed;
    recipe.attempts = attempt;
    const int count = uniform_int(local, 1, options.max_shapes);
    for (int i = 0; i < count; ++i) {
      ShapeDraw d;
      d.kind = static_cast<ShapeKind>(uniform_int(local, 0, kShapeCount - 1));
      d.radius = base * uniform(local, options.min_radius, options.max_radius);
      d.aspect = (d.kind == ShapeKind::kRectangle || d.kind == ShapeKind::kEllipse) ? uniform(local, 0.35, 1.0) : 1.0;
      d.rotation_deg = uniform(local, 0.0, 360.0);
      d.cx = uniform(local, 0.0, static_cast<double>(width));
      d.cy = uniform(local, 0.0, static_cast<double>(height));
      recipe.shapes.push_back(d);
    }
    auto mask = rasterize_recipe(recipe, height, width);
    recipe.area = mask.values.mean().item<double>();
    if (recipe.area > 0.0 && area_acceptable(recipe.area, options.max_area)) {
      out.mask = std::move(mask);
      out.recipe = std::move(recipe);
      return out;
    }
  }
  throw GenerationError("mask rejection budget of " + std::to_string(options.max_attempts) + " draws exhausted");
}

}  // namespace forgeloc
