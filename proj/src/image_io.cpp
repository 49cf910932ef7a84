// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "forgeloc/errors.hpp"

namespace forgeloc {

namespace fs = std::filesystem;

namespace {

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void imwrite_checked(const fs::path& path, const cv::Mat& img) {
  ensure_parent(path);
  if (!cv::imwrite(path.string(), img)) throw IoError("failed to write image " + path.string());
}

}  // namespace

torch::Tensor quantize8(const torch::Tensor& values) {
  return torch::round(values.clamp(0.0, 1.0) * 255.0) / 255.0;
}

torch::Tensor to_bytes(const torch::Tensor& pixels) {
  return torch::round(pixels.clamp(0.0, 1.0) * 255.0).to(torch::kUInt8).contiguous();
}

torch::Tensor from_bytes(const torch::Tensor& bytes) {
  return bytes.to(torch::kFloat32).div(255.0f).contiguous();
}

FrameTensor read_frame(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read frame " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto bytes = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return FrameTensor::make(from_bytes(bytes), path.stem().string(), path.string());
}

void write_frame(const fs::path& path, const torch::Tensor& pixels) {
  FORGELOC_REQUIRE(pixels.dim() == 3 && pixels.size(2) == 3, "frame must be H x W x 3");
  auto bytes = to_bytes(pixels);
  cv::Mat rgb(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC3, bytes.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  imwrite_checked(path, bgr);
}

ForgeryMask read_mask(const fs::path& path, bool binarize) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw IoError("cannot read mask " + path.string());
  auto bytes = torch::from_blob(gray.data, {gray.rows, gray.cols}, torch::kUInt8).clone();
  if (binarize) return ForgeryMask{(bytes >= 128).to(torch::kFloat32), true};
  return ForgeryMask{bytes.to(torch::kFloat32) / 255.0f, false};
}

void write_mask(const fs::path& path, const ForgeryMask& mask) {
  write_gray(path, mask.values);
}

void write_gray(const fs::path& path, const torch::Tensor& values) {
  FORGELOC_REQUIRE(values.dim() == 2, "gray image must be H x W");
  auto bytes = torch::round(values.to(torch::kFloat32).clamp(0.0, 1.0) * 255.0f).to(torch::kUInt8).contiguous();
  cv::Mat gray(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC1, bytes.data_ptr());
  imwrite_checked(path, gray);
}

}  // namespace forgeloc
