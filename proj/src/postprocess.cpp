// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "forgeloc/errors.hpp"

namespace forgeloc {

int histogram_bin(double q, int bins) {
  const auto b = static_cast<int>(std::floor(q * bins));
  return std::clamp(b, 0, bins - 1);
}

double bin_center(int bin, int bins) { return (bin + 0.5) / bins; }

ThresholdReport select_threshold(std::span<const double> q, const ThresholdOptions& options) {
  FORGELOC_REQUIRE(!q.empty(), "threshold selection needs at least one block");
  FORGELOC_REQUIRE(options.bins >= 3, "histogram needs at least 3 bins");
  ThresholdReport report;
  const int n = options.bins;
  report.histogram.assign(static_cast<std::size_t>(n), 0);
  for (double v : q) {
    FORGELOC_REQUIRE(v >= 0.0 && v <= 1.0, "block probabilities must lie in [0, 1]");
    ++report.histogram[static_cast<std::size_t>(histogram_bin(v, n))];
  }
  const auto& h = report.histogram;

  // Walk plateaus [a, b]; `prev` is the count just left of the current plateau.
  int a = 0;
  int peak_end = -1;
  while (a < n) {
    int b = a;
    while (b + 1 < n && h[b + 1] == h[a]) ++b;
    const bool left_lower = a == 0 || h[a - 1] < h[a];
    const bool left_higher = a > 0 && h[a - 1] > h[a];
    const bool right_lower = b == n - 1 || h[b + 1] < h[b];
    const bool right_higher = b < n - 1 && h[b + 1] > h[b];
    if (report.peak_bin < 0) {
      if (left_lower && right_lower) {
        report.peak_bin = a;
        peak_end = b;
      }
    } else if (a > peak_end && left_higher && right_higher) {
      report.valley_bin = (a + b) / 2;
      break;
    }
    a = b + 1;
  }

  if (report.valley_bin < 0) {
    report.fallback_used = true;
    report.threshold = options.fallback;
  } else {
    report.threshold = bin_center(report.valley_bin, n);
  }
  return report;
}

torch::Tensor binarize_blocks(const torch::Tensor& q_grid, double threshold) {
  return (q_grid.to(torch::kFloat64) >= threshold).to(torch::kFloat32);
}

torch::Tensor fill_holes(const torch::Tensor& binary_grid) {
  FORGELOC_REQUIRE(binary_grid.dim() == 2, "fill_holes expects an M x N grid");
  auto in = binary_grid.to(torch::kFloat32).contiguous();
  FORGELOC_REQUIRE(torch::logical_or(in == 0.0f, in == 1.0f).all().item<bool>(), "fill_holes input must be binary");
  const auto rows = in.size(0);
  const auto cols = in.size(1);
  auto src = in.accessor<float, 2>();

  std::vector<char> reached(static_cast<std::size_t>(rows * cols), 0);
  std::deque<std::pair<std::int64_t, std::int64_t>> frontier;
  auto seed = [&](std::int64_t r, std::int64_t c) {
    auto idx = static_cast<std::size_t>(r * cols + c);
    if (src[r][c] == 0.0f && !reached[idx]) {
      reached[idx] = 1;
      frontier.emplace_back(r, c);
    }
  };
  for (std::int64_t r = 0; r < rows; ++r) {
    seed(r, 0);
    seed(r, cols - 1);
  }
  for (std::int64_t c = 0; c < cols; ++c) {
    seed(0, c);
    seed(rows - 1, c);
  }
  while (!frontier.empty()) {
    auto [r, c] = frontier.front();
    frontier.pop_front();
    if (r > 0) seed(r - 1, c);
    if (r + 1 < rows) seed(r + 1, c);
    if (c > 0) seed(r, c - 1);
    if (c + 1 < cols) seed(r, c + 1);
  }

  auto out = torch::ones_like(in);
  auto dst = out.accessor<float, 2>();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      if (reached[static_cast<std::size_t>(r * cols + c)]) dst[r][c] = 0.0f;
  return out;
}

namespace {

struct Tap {
  std::int64_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

Tap tap_for(double pixel_coord, std::int64_t block_size, std::int64_t cells) {
  double u = pixel_coord / static_cast<double>(block_size) - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(cells - 1));
  const auto i0 = static_cast<std::int64_t>(std::floor(u));
  const auto i1 = std::min(i0 + 1, cells - 1);
  return Tap{i0, i1, u - static_cast<double>(i0)};
}

}  // namespace

double interpolate_at(const torch::Tensor& grid_values, std::int64_t block_size, double y, double x) {
  FORGELOC_REQUIRE(grid_values.dim() == 2, "grid values must be M x N");
  auto g = grid_values.to(torch::kFloat64).contiguous();
  auto a = g.accessor<double, 2>();
  const auto ty = tap_for(y, block_size, g.size(0));
  const auto tx = tap_for(x, block_size, g.size(1));
  const double top = (1.0 - tx.w1) * a[ty.i0][tx.i0] + tx.w1 * a[ty.i0][tx.i1];
  const double bottom = (1.0 - tx.w1) * a[ty.i1][tx.i0] + tx.w1 * a[ty.i1][tx.i1];
  return (1.0 - ty.w1) * top + ty.w1 * bottom;
}

torch::Tensor upscale_soft(const torch::Tensor& grid_values, const BlockGrid& grid, std::int64_t out_h,
                           std::int64_t out_w) {
  FORGELOC_REQUIRE(grid_values.dim() == 2 && grid_values.size(0) == grid.rows && grid_values.size(1) == grid.cols,
                   "grid values do not match the block grid");
  FORGELOC_REQUIRE(out_h >= 1 && out_w >= 1, "output dimensions must be positive");
  FORGELOC_REQUIRE(out_h <= grid.padded_height() && out_w <= grid.padded_width(),
                   "output dimensions exceed the padded frame size");
  auto g = grid_values.to(torch::kFloat64).contiguous();
  auto a = g.accessor<double, 2>();

  std::vector<Tap> xs(static_cast<std::size_t>(out_w));
  for (std::int64_t j = 0; j < out_w; ++j) xs[static_cast<std::size_t>(j)] = tap_for(j + 0.5, grid.block_size, grid.cols);

  auto out = torch::empty({out_h, out_w}, torch::kFloat64);
  auto o = out.accessor<double, 2>();
  for (std::int64_t i = 0; i < out_h; ++i) {
    const auto ty = tap_for(i + 0.5, grid.block_size, grid.rows);
    for (std::int64_t j = 0; j < out_w; ++j) {
      const auto& tx = xs[static_cast<std::size_t>(j)];
      const double top = (1.0 - tx.w1) * a[ty.i0][tx.i0] + tx.w1 * a[ty.i0][tx.i1];
      const double bottom = (1.0 - tx.w1) * a[ty.i1][tx.i0] + tx.w1 * a[ty.i1][tx.i1];
      o[i][j] = (1.0 - ty.w1) * top + ty.w1 * bottom;
    }
  }
  return out;
}

ForgeryMask upscale_mask(const torch::Tensor& binary_grid, const BlockGrid& grid, std::int64_t out_h,
                         std::int64_t out_w) {
  auto soft = upscale_soft(binary_grid, grid, out_h, out_w);
  return ForgeryMask{(soft >= 0.5).to(torch::kFloat32), true};
}

PostprocessResult postprocess(const torch::Tensor& q, const BlockGrid& grid, const ThresholdOptions& options) {
  FORGELOC_REQUIRE(q.numel() == grid.count(), "block probability count does not match the grid");
  auto qd = q.detach().to(torch::kFloat64).contiguous().view({-1});
  std::vector<double> values(qd.data_ptr<double>(), qd.data_ptr<double>() + qd.numel());
  PostprocessResult out;
  out.report = select_threshold(values, options);
  auto binary = binarize_blocks(qd.view({grid.rows, grid.cols}), out.report.threshold);
  out.block_mask = fill_holes(binary);
  out.mask = upscale_mask(out.block_mask, grid, grid.height, grid.width);
  return out;
}

}  // namespace forgeloc
