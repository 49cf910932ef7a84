// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/datagen/manipulations.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <ATen/CPUGeneratorImpl.h>
#include <opencv2/imgproc.hpp>

#include "forgeloc/errors.hpp"

namespace forgeloc {

using nlohmann::json;

namespace {

constexpr double kRangeSlack = 1e-12;

const char* const kOpNames[] = {"brightness",    "contrast",    "saturation", "hue",
                                "gaussian_blur", "motion_blur", "box_blur",   "gaussian_noise"};

torch::Tensor luminance(const torch::Tensor& frame) {
  return frame.select(2, 0) * 0.299 + frame.select(2, 1) * 0.587 + frame.select(2, 2) * 0.114;
}

// The Mat aliases the tensor's storage; keep the tensor alive while the Mat is used.
cv::Mat as_mat(torch::Tensor& t) {
  return cv::Mat(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_32FC3, t.data_ptr<float>());
}

torch::Tensor filtered(const torch::Tensor& frame, const std::function<void(const cv::Mat&, cv::Mat&)>& fn) {
  auto src = frame.contiguous().clone();
  auto dst = torch::empty_like(src);
  cv::Mat in = as_mat(src);
  cv::Mat out = as_mat(dst);
  fn(in, out);
  return dst;
}

torch::Tensor rotate_hue(const torch::Tensor& frame, double turns) {
  auto src = frame.contiguous().clone();
  cv::Mat in = as_mat(src);
  cv::Mat hsv;
  cv::cvtColor(in, hsv, cv::COLOR_RGB2HSV);  // float input: H in [0, 360)
  std::vector<cv::Mat> ch;
  cv::split(hsv, ch);
  ch[0] += turns * 360.0;
  for (int y = 0; y < ch[0].rows; ++y) {
    auto* row = ch[0].ptr<float>(y);
    for (int x = 0; x < ch[0].cols; ++x) {
      float h = std::fmod(row[x], 360.0f);
      row[x] = h < 0.0f ? h + 360.0f : h;
    }
  }
  cv::merge(ch, hsv);
  auto dst = torch::empty_like(src);
  cv::Mat out = as_mat(dst);
  cv::cvtColor(hsv, out, cv::COLOR_HSV2RGB);
  return dst;
}

bool in_range(double v, double lo, double hi) { return v >= lo - kRangeSlack && v <= hi + kRangeSlack; }

}  // namespace

std::string to_string(Visibility v) { return v == Visibility::kVisible ? "visible" : "invisible"; }
std::string to_string(ManipulationKind k) { return k == ManipulationKind::kSplice ? "splice" : "in-place"; }
std::string to_string(OpKind k) { return kOpNames[static_cast<int>(k)]; }

Visibility parse_visibility(const std::string& s) {
  if (s == "visible") return Visibility::kVisible;
  if (s == "invisible") return Visibility::kInvisible;
  throw InvalidArgument("unknown visibility profile '" + s + "'");
}

OpKind parse_op(const std::string& s) {
  for (int i = 0; i < 8; ++i)
    if (s == kOpNames[i]) return static_cast<OpKind>(i);
  throw InvalidArgument("unknown manipulation op '" + s + "'");
}

const OpSpec* ManipulationProfile::find(OpKind kind) const {
  for (const auto& op : ops)
    if (op.kind == kind) return &op;
  return nullptr;
}

ManipulationProfile ManipulationProfile::visible() {
  ManipulationProfile p;
  p.visibility = Visibility::kVisible;
  p.ops = {
      {.kind = OpKind::kBrightness, .probability = 1.0, .lo = 0.8, .hi = 1.6},
      {.kind = OpKind::kContrast, .probability = 1.0, .lo = 0.7, .hi = 1.3},
      {.kind = OpKind::kSaturation, .probability = 1.0, .lo = 0.8, .hi = 1.1},
      {.kind = OpKind::kHue, .probability = 1.0, .lo = -0.2, .hi = 0.2},
      {.kind = OpKind::kGaussianBlur, .probability = 0.7, .kernel = 5, .sigma = 2.0},
      {.kind = OpKind::kMotionBlur,
       .probability = 0.7,
       .kernel = 5,
       .angle_lo = -25.0,
       .angle_hi = 25.0,
       .direction_lo = -1.0,
       .direction_hi = 1.0},
      {.kind = OpKind::kBoxBlur, .probability = 0.7, .kernel = 5},
      {.kind = OpKind::kGaussianNoise, .probability = 1.0, .noise_std = 0.05},
  };
  return p;
}

ManipulationProfile ManipulationProfile::invisible() {
  ManipulationProfile p;
  p.visibility = Visibility::kInvisible;
  p.ops = {
      {.kind = OpKind::kBrightness, .probability = 0.9, .lo = 0.95, .hi = 1.05},
      {.kind = OpKind::kContrast, .probability = 0.9, .lo = 0.95, .hi = 1.05},
      {.kind = OpKind::kSaturation, .probability = 0.9, .lo = 0.95, .hi = 1.05},
      {.kind = OpKind::kGaussianBlur, .probability = 0.7, .kernel = 3, .sigma = 1.2},
      {.kind = OpKind::kMotionBlur,
       .probability = 0.7,
       .kernel = 3,
       .angle_lo = -20.0,
       .angle_hi = 20.0,
       .direction_lo = -1.0,
       .direction_hi = 1.0},
      {.kind = OpKind::kBoxBlur, .probability = 0.7, .kernel = 3},
      {.kind = OpKind::kGaussianNoise, .probability = 0.9, .noise_std = 0.006},
  };
  return p;
}

ManipulationProfile ManipulationProfile::for_visibility(Visibility v) {
  return v == Visibility::kVisible ? visible() : invisible();
}

json to_json(const ManipulationRecipe& recipe) {
  json ops = json::array();
  for (const auto& op : recipe.ops) {
    json o{{"op", to_string(op.kind)}, {"value", op.value}};
    if (op.kernel > 0) o["kernel"] = op.kernel;
    if (op.kind == OpKind::kMotionBlur) {
      o["angle"] = op.angle;
      o["direction"] = op.direction;
    }
    ops.push_back(std::move(o));
  }
  return json{{"kind", to_string(recipe.kind)}, {"profile", to_string(recipe.visibility)}, {"ops", ops}};
}

ManipulationRecipe manipulation_recipe_from_json(const json& j) {
  ManipulationRecipe r;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "splice") r.kind = ManipulationKind::kSplice;
  else if (kind == "in-place") r.kind = ManipulationKind::kInPlace;
  else throw InvalidArgument("unknown manipulation kind '" + kind + "'");
  r.visibility = parse_visibility(j.at("profile").get<std::string>());
  for (const auto& o : j.value("ops", json::array())) {
    AppliedOp op{parse_op(o.at("op").get<std::string>())};
    op.value = o.at("value").get<double>();
    op.kernel = o.value("kernel", 0);
    op.angle = o.value("angle", 0.0);
    op.direction = o.value("direction", 0.0);
    r.ops.push_back(op);
  }
  return r;
}

ManipulationRecipe sample_inplace_recipe(Visibility visibility, Rng& rng) {
  const auto profile = ManipulationProfile::for_visibility(visibility);
  auto draw = [&](const OpSpec& spec) {
    AppliedOp op{spec.kind};
    switch (spec.kind) {
      case OpKind::kBrightness:
      case OpKind::kContrast:
      case OpKind::kSaturation:
      case OpKind::kHue: op.value = uniform(rng, spec.lo, spec.hi); break;
      case OpKind::kGaussianBlur:
        op.value = spec.sigma;
        op.kernel = spec.kernel;
        break;
      case OpKind::kMotionBlur:
        op.kernel = spec.kernel;
        op.angle = uniform(rng, spec.angle_lo, spec.angle_hi);
        op.direction = uniform(rng, spec.direction_lo, spec.direction_hi);
        break;
      case OpKind::kBoxBlur: op.kernel = spec.kernel; break;
      case OpKind::kGaussianNoise: op.value = spec.noise_std; break;
    }
    return op;
  };
  ManipulationRecipe r;
  r.kind = ManipulationKind::kInPlace;
  r.visibility = visibility;
  for (const auto& spec : profile.ops)
    if (bernoulli(rng, spec.probability)) r.ops.push_back(draw(spec));
  if (r.ops.empty()) {
    const auto& spec = profile.ops[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(profile.ops.size()) - 1))];
    r.ops.push_back(draw(spec));
  }
  return r;
}

void validate_recipe(const ManipulationRecipe& recipe) {
  if (recipe.kind == ManipulationKind::kSplice) return;
  FORGELOC_REQUIRE(!recipe.ops.empty(), "in-place recipes need at least one op");
  const auto profile = ManipulationProfile::for_visibility(recipe.visibility);
  for (const auto& op : recipe.ops) {
    const auto* spec = profile.find(op.kind);
    const auto name = to_string(op.kind);
    const auto where = " for the " + to_string(recipe.visibility) + " profile";
    FORGELOC_REQUIRE(spec != nullptr, "op '" + name + "' is not part of" + where);
    switch (op.kind) {
      case OpKind::kBrightness:
      case OpKind::kContrast:
      case OpKind::kSaturation:
      case OpKind::kHue:
        FORGELOC_REQUIRE(in_range(op.value, spec->lo, spec->hi), name + " parameter out of range" + where);
        break;
      case OpKind::kGaussianBlur:
        FORGELOC_REQUIRE(in_range(op.value, spec->sigma, spec->sigma), name + " sigma out of range" + where);
        FORGELOC_REQUIRE(op.kernel == spec->kernel, name + " kernel out of range" + where);
        break;
      case OpKind::kMotionBlur:
        FORGELOC_REQUIRE(op.kernel == spec->kernel, name + " kernel out of range" + where);
        FORGELOC_REQUIRE(in_range(op.angle, spec->angle_lo, spec->angle_hi), name + " angle out of range" + where);
        FORGELOC_REQUIRE(in_range(op.direction, spec->direction_lo, spec->direction_hi),
                         name + " direction out of range" + where);
        break;
      case OpKind::kBoxBlur:
        FORGELOC_REQUIRE(op.kernel == spec->kernel, name + " kernel out of range" + where);
        break;
      case OpKind::kGaussianNoise:
        FORGELOC_REQUIRE(in_range(op.value, 0.0, spec->noise_std), name + " std out of range" + where);
        break;
    }
  }
}

torch::Tensor motion_blur_kernel(int size, double angle_deg, double direction) {
  FORGELOC_REQUIRE(size >= 3 && size % 2 == 1, "motion blur kernel size must be odd and >= 3");
  const double dn = (std::clamp(direction, -1.0, 1.0) + 1.0) / 2.0;
  cv::Mat line = cv::Mat::zeros(size, size, CV_32F);
  for (int i = 0; i < size; ++i)
    line.at<float>(size / 2, i) = static_cast<float>(dn + (1.0 - 2.0 * dn) * i / (size - 1));
  const double c = (size - 1) / 2.0;
  cv::Mat rot = cv::getRotationMatrix2D(cv::Point2f(static_cast<float>(c), static_cast<float>(c)), angle_deg, 1.0);
  cv::Mat k;
  cv::warpAffine(line, k, rot, line.size(), cv::INTER_CUBIC, cv::BORDER_CONSTANT, 0.0);
  k = cv::max(k, 0.0);
  const double s = cv::sum(k)[0];
  if (s <= 0.0) {
    k = cv::Mat::zeros(size, size, CV_32F);
    k.at<float>(size / 2, size / 2) = 1.0f;
  } else {
    k /= s;
  }
  return torch::from_blob(k.data, {size, size}, torch::kFloat32).clone();
}

torch::Tensor apply_op(const torch::Tensor& frame, const AppliedOp& op, const torch::Tensor& region, Rng& rng) {
  torch::Tensor out;
  switch (op.kind) {
    case OpKind::kBrightness: out = frame * op.value; break;
    case OpKind::kContrast: {
      auto lum = luminance(frame);
      auto sel = region.defined() ? region > 0.5f : torch::ones_like(lum, torch::kBool);
      const double mean = sel.any().item<bool>() ? lum.masked_select(sel).mean().item<double>() : lum.mean().item<double>();
      out = frame * op.value + (1.0 - op.value) * mean;
      break;
    }
    case OpKind::kSaturation: out = frame * op.value + luminance(frame).unsqueeze(2) * (1.0 - op.value); break;
    case OpKind::kHue: out = rotate_hue(frame, op.value); break;
    case OpKind::kGaussianBlur: {
      const int k = op.kernel;
      out = filtered(frame, [&](const cv::Mat& in, cv::Mat& o) {
        cv::GaussianBlur(in, o, cv::Size(k, k), op.value, op.value, cv::BORDER_REFLECT_101);
      });
      break;
    }
    case OpKind::kMotionBlur: {
      auto kt = motion_blur_kernel(op.kernel, op.angle, op.direction);
      cv::Mat kernel(static_cast<int>(kt.size(0)), static_cast<int>(kt.size(1)), CV_32F, kt.data_ptr<float>());
      out = filtered(frame, [&](const cv::Mat& in, cv::Mat& o) {
        cv::filter2D(in, o, -1, kernel, cv::Point(-1, -1), 0.0, cv::BORDER_REFLECT_101);
      });
      break;
    }
    case OpKind::kBoxBlur: {
      const int k = op.kernel;
      out = filtered(frame, [&](const cv::Mat& in, cv::Mat& o) {
        cv::blur(in, o, cv::Size(k, k), cv::Point(-1, -1), cv::BORDER_REFLECT_101);
      });
      break;
    }
    case OpKind::kGaussianNoise: {
      auto gen = at::detail::createCPUGenerator(rng());
      out = frame + torch::randn(frame.sizes(), gen, torch::kFloat32) * op.value;
      break;
    }
  }
  return out.clamp(0.0, 1.0);
}

torch::Tensor apply_inplace(const torch::Tensor& frame, const ForgeryMask& mask, const ManipulationRecipe& recipe,
                            Rng& rng) {
  FORGELOC_REQUIRE(frame.dim() == 3 && frame.size(2) == 3, "frame must be H x W x 3");
  FORGELOC_REQUIRE(mask.values.dim() == 2 && mask.height() == frame.size(0) && mask.width() == frame.size(1),
                   "mask and frame dimensions differ");
  FORGELOC_REQUIRE(recipe.kind == ManipulationKind::kInPlace, "apply_inplace needs an in-place recipe");
  validate_recipe(recipe);
  auto base = frame.to(torch::kFloat32).contiguous();
  auto sel = (mask.values > 0.5f).unsqueeze(2);
  if (!sel.any().item<bool>()) return base.clone();
  auto cur = base;
  for (const auto& op : recipe.ops) cur = apply_op(cur, op, mask.values, rng);
  return torch::where(sel, cur, base).contiguous();
}

torch::Tensor apply_splice(const torch::Tensor& dest, const torch::Tensor& source, const ForgeryMask& mask) {
  FORGELOC_REQUIRE(dest.sizes() == source.sizes(), "splice source and destination dimensions differ");
  FORGELOC_REQUIRE(dest.dim() == 3 && mask.height() == dest.size(0) && mask.width() == dest.size(1),
                   "mask and frame dimensions differ");
  auto m = mask.values.to(torch::kFloat32).unsqueeze(2);
  return (source.to(torch::kFloat32) * m + dest.to(torch::kFloat32) * (1.0f - m)).contiguous();
}

torch::Tensor diff_block_scores(const torch::Tensor& original, const torch::Tensor& manipulated, std::int64_t block) {
  FORGELOC_REQUIRE(original.sizes() == manipulated.sizes(), "diff mask inputs have different dimensions");
  FORGELOC_REQUIRE(original.dim() == 3 && original.size(2) == 3, "diff mask inputs must be H x W x 3");
  FORGELOC_REQUIRE(block >= 1, "diff block size must be positive");
  auto diff = (original.to(torch::kFloat64) - manipulated.to(torch::kFloat64)).abs().mean(2);  // H x W
  const auto h = diff.size(0);
  const auto w = diff.size(1);
  const auto rows = (h + block - 1) / block;
  const auto cols = (w + block - 1) / block;
  auto scores = torch::empty({rows, cols}, torch::kFloat64);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      scores[r][c] = diff.slice(0, r * block, std::min(h, (r + 1) * block))
                         .slice(1, c * block, std::min(w, (c + 1) * block))
                         .mean();
  return scores;
}

ForgeryMask diff_mask(const torch::Tensor& original, const torch::Tensor& manipulated, const DiffMaskOptions& options) {
  auto scores = diff_block_scores(original, manipulated, options.block);
  const double lo = scores.min().item<double>();
  const double hi = scores.max().item<double>();
  torch::Tensor norm;
  if (hi > lo) norm = (scores - lo) / (hi - lo);
  else norm = torch::full_like(scores, hi > 0.0 ? 1.0 : 0.0);
  auto marked = (norm > options.threshold).to(torch::kFloat32);
  auto pixels = marked.repeat_interleave(options.block, 0).repeat_interleave(options.block, 1);
  return ForgeryMask::binary(pixels.slice(0, 0, original.size(0)).slice(1, 0, original.size(1)).contiguous());
}

}  // namespace forgeloc
