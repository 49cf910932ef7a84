// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/datagen/scene.hpp"

#include <cmath>
#include <numbers>

#include <ATen/CPUGeneratorImpl.h>
#include <opencv2/imgproc.hpp>

#include "forgeloc/errors.hpp"
#include "forgeloc/image_io.hpp"

namespace forgeloc {

using nlohmann::json;

namespace {

std::array<double, 3> random_color(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

torch::Tensor color_tensor(const std::array<double, 3>& c) {
  return torch::tensor({c[0], c[1], c[2]}, torch::kFloat32);
}

// Channel index (0 R, 1 G, 2 B) sampled at (y % 2, x % 2).
std::array<std::array<int, 2>, 2> cfa_layout(CfaPattern p) {
  switch (p) {
    case CfaPattern::kRGGB: return {{{0, 1}, {1, 2}}};
    case CfaPattern::kGRBG: return {{{1, 0}, {2, 1}}};
    case CfaPattern::kBGGR: return {{{2, 1}, {1, 0}}};
    case CfaPattern::kGBRG: return {{{1, 2}, {0, 1}}};
  }
  return {{{0, 1}, {1, 2}}};
}

// OpenCV names Bayer layouts by the 2x2 block starting at (1, 1).
int demosaic_code(CfaPattern p) {
  switch (p) {
    case CfaPattern::kRGGB: return cv::COLOR_BayerBG2RGB;
    case CfaPattern::kGRBG: return cv::COLOR_BayerGB2RGB;
    case CfaPattern::kBGGR: return cv::COLOR_BayerRG2RGB;
    case CfaPattern::kGBRG: return cv::COLOR_BayerGR2RGB;
  }
  return cv::COLOR_BayerBG2RGB;
}

}  // namespace

SceneParams SceneParams::sample(Rng& rng) {
  SceneParams p;
  p.base = random_color(rng, 0.25, 0.75);
  const int gratings = uniform_int(rng, 2, 4);
  for (int i = 0; i < gratings; ++i) {
    Grating g;
    const double freq = std::exp(uniform(rng, std::log(1.0 / 96.0), std::log(1.0 / 6.0)));
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    g.fx = freq * std::cos(theta);
    g.fy = freq * std::sin(theta);
    g.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    g.speed = uniform(rng, -0.3, 0.3);
    g.amplitude = uniform(rng, 0.03, 0.12);
    g.color = random_color(rng, 0.3, 1.0);
    p.gratings.push_back(g);
  }
  const int ellipses = uniform_int(rng, 2, 5);
  for (int i = 0; i < ellipses; ++i) {
    SoftEllipse e;
    e.cx = uniform(rng, 0.0, 1.0);
    e.cy = uniform(rng, 0.0, 1.0);
    e.rx = uniform(rng, 0.05, 0.3);
    e.ry = uniform(rng, 0.05, 0.3);
    e.vx = uniform(rng, -0.01, 0.01);
    e.vy = uniform(rng, -0.01, 0.01);
    e.softness = uniform(rng, 0.02, 0.2);
    e.color = random_color(rng, 0.1, 0.9);
    p.ellipses.push_back(e);
  }
  p.noise_seed = rng();
  p.noise_amplitude = uniform(rng, 0.04, 0.15);
  p.noise_cell = uniform(rng, 8.0, 40.0);
  p.drift_x = uniform(rng, -2.0, 2.0);
  p.drift_y = uniform(rng, -2.0, 2.0);
  return p;
}

json to_json(const SceneParams& p) {
  json gratings = json::array();
  for (const auto& g : p.gratings)
    gratings.push_back({{"fx", g.fx}, {"fy", g.fy}, {"phase", g.phase}, {"speed", g.speed},
                        {"amplitude", g.amplitude}, {"color", g.color}});
  json ellipses = json::array();
  for (const auto& e : p.ellipses)
    ellipses.push_back({{"cx", e.cx}, {"cy", e.cy}, {"rx", e.rx}, {"ry", e.ry}, {"vx", e.vx}, {"vy", e.vy},
                        {"softness", e.softness}, {"color", e.color}});
  return json{{"base", p.base},
              {"gratings", gratings},
              {"ellipses", ellipses},
              {"noise_seed", p.noise_seed},
              {"noise_amplitude", p.noise_amplitude},
              {"noise_cell", p.noise_cell},
              {"drift", {p.drift_x, p.drift_y}}};
}

torch::Tensor render_scene(const SceneParams& p, std::int64_t height, std::int64_t width, double t) {
  FORGELOC_REQUIRE(height >= 1 && width >= 1, "scene dimensions must be positive");
  auto opts = torch::TensorOptions().dtype(torch::kFloat32);
  auto ys = torch::arange(height, opts).view({height, 1}) + 0.5f;
  auto xs = torch::arange(width, opts).view({1, width}) + 0.5f;

  auto img = color_tensor(p.base).view({1, 1, 3}).expand({height, width, 3}).clone();
  for (const auto& g : p.gratings) {
    auto wave = torch::sin(xs * (2.0 * std::numbers::pi * g.fx) + ys * (2.0 * std::numbers::pi * g.fy) +
                           (g.phase + g.speed * t));
    img += (wave * g.amplitude).unsqueeze(2) * color_tensor(g.color).view({1, 1, 3});
  }
  for (const auto& e : p.ellipses) {
    const double cx = (e.cx + e.vx * t) * width;
    const double cy = (e.cy + e.vy * t) * height;
    auto dx = (xs - cx) / (e.rx * width);
    auto dy = (ys - cy) / (e.ry * height);
    auto r = torch::sqrt(dx * dx + dy * dy);
    auto alpha = torch::sigmoid((1.0 - r) / e.softness).unsqueeze(2);
    img = img * (1.0 - alpha) + alpha * color_tensor(e.color).view({1, 1, 3});
  }

  // Value noise: a random lattice bilinearly upsampled, drifting over time.
  const double dx = p.drift_x * t;
  const double dy = p.drift_y * t;
  const auto pad_y = static_cast<std::int64_t>(std::ceil(std::abs(dy)));
  const auto pad_x = static_cast<std::int64_t>(std::ceil(std::abs(dx)));
  const auto gh = static_cast<std::int64_t>(std::ceil((height + 2 * pad_y) / p.noise_cell)) + 2;
  const auto gw = static_cast<std::int64_t>(std::ceil((width + 2 * pad_x) / p.noise_cell)) + 2;
  auto gen = at::detail::createCPUGenerator(p.noise_seed);
  auto lattice = torch::rand({1, 3, gh, gw}, gen, opts) * 2.0 - 1.0;
  const auto up_h = static_cast<std::int64_t>(std::ceil(gh * p.noise_cell));
  const auto up_w = static_cast<std::int64_t>(std::ceil(gw * p.noise_cell));
  auto field = torch::nn::functional::interpolate(
      lattice, torch::nn::functional::InterpolateFuncOptions()
                   .size(std::vector<std::int64_t>{up_h, up_w})
                   .mode(torch::kBilinear)
                   .align_corners(false));
  const auto oy = static_cast<std::int64_t>(std::llround(static_cast<double>(pad_y) - dy));
  const auto ox = static_cast<std::int64_t>(std::llround(static_cast<double>(pad_x) - dx));
  auto crop = field[0].slice(1, oy, oy + height).slice(2, ox, ox + width).permute({1, 2, 0});
  img += crop * p.noise_amplitude;
  return img.clamp(0.02, 0.98).contiguous();
}

std::string to_string(CfaPattern p) {
  switch (p) {
    case CfaPattern::kRGGB: return "RGGB";
    case CfaPattern::kGRBG: return "GRBG";
    case CfaPattern::kBGGR: return "BGGR";
    case CfaPattern::kGBRG: return "GBRG";
  }
  return "RGGB";
}

const std::vector<CameraSignature>& camera_signatures() {
  static const std::vector<CameraSignature> cams = {
      {.id = 0, .cfa = CfaPattern::kRGGB, .sharpen = 0.0, .blur_sigma = 0.0, .noise_std = 0.003, .levels = 256},
      {.id = 1, .cfa = CfaPattern::kGRBG, .sharpen = 0.6, .blur_sigma = 0.0, .noise_std = 0.012, .levels = 256},
      {.id = 2, .cfa = CfaPattern::kBGGR, .sharpen = 0.0, .blur_sigma = 0.8, .noise_std = 0.006, .levels = 48},
      {.id = 3, .cfa = CfaPattern::kGBRG, .sharpen = 0.3, .blur_sigma = 0.0, .noise_std = 0.02, .levels = 128},
  };
  return cams;
}

torch::Tensor capture(const torch::Tensor& scene, const CameraSignature& cam, Rng& rng) {
  FORGELOC_REQUIRE(scene.dim() == 3 && scene.size(2) == 3, "scene must be H x W x 3");
  FORGELOC_REQUIRE(scene.size(0) % 2 == 0 && scene.size(1) % 2 == 0, "capture needs even frame dimensions");
  FORGELOC_REQUIRE(cam.levels >= 2, "camera needs at least 2 tone levels");
  const auto h = scene.size(0);
  const auto w = scene.size(1);
  auto src = scene.to(torch::kFloat32).contiguous();

  // Mosaic: keep one channel per photosite.
  const auto layout = cfa_layout(cam.cfa);
  auto raw = torch::empty({h, w}, torch::kFloat32);
  for (int py = 0; py < 2; ++py)
    for (int px = 0; px < 2; ++px)
      raw.slice(0, py, h, 2).slice(1, px, w, 2).copy_(src.slice(0, py, h, 2).slice(1, px, w, 2).select(2, layout[py][px]));
  auto raw16 = (raw * 65535.0f).round().clamp(0, 65535).to(torch::kInt32).to(torch::kUInt16).contiguous();
  cv::Mat bayer(static_cast<int>(h), static_cast<int>(w), CV_16UC1, raw16.data_ptr());
  cv::Mat rgb16;
  cv::cvtColor(bayer, rgb16, demosaic_code(cam.cfa));
  cv::Mat rgb;
  rgb16.convertTo(rgb, CV_32FC3, 1.0 / 65535.0);

  if (cam.blur_sigma > 0.0) cv::GaussianBlur(rgb, rgb, cv::Size(0, 0), cam.blur_sigma, cam.blur_sigma, cv::BORDER_REFLECT_101);
  if (cam.sharpen > 0.0) {
    cv::Mat soft;
    cv::GaussianBlur(rgb, soft, cv::Size(0, 0), 1.0, 1.0, cv::BORDER_REFLECT_101);
    rgb = rgb + cam.sharpen * (rgb - soft);
  }
  auto out = torch::from_blob(rgb.data, {h, w, 3}, torch::kFloat32).clone();
  if (cam.noise_std > 0.0) {
    auto gen = at::detail::createCPUGenerator(rng());
    out += torch::randn({h, w, 3}, gen, torch::kFloat32) * cam.noise_std;
  }
  const double steps = cam.levels - 1;
  out = (out.clamp(0.0, 1.0) * steps).round() / steps;
  return quantize8(out);
}

std::vector<torch::Tensor> render_video(const SceneParams& params, const CameraSignature& camera,
                                        std::int64_t height, std::int64_t width, int frames, Rng& rng) {
  FORGELOC_REQUIRE(frames >= 1, "a video needs at least one frame");
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) out.push_back(capture(render_scene(params, height, width, f), camera, rng));
  return out;
}

}  // namespace forgeloc
