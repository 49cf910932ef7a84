// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "forgeloc/errors.hpp"
#include "forgeloc/postprocess.hpp"
#include "oracles.hpp"

using namespace forgeloc;

namespace {

// Union-find labelling of 4-connected zero cells; components touching the border survive.
std::vector<int> fill_oracle(const std::vector<int>& g, int rows, int cols) {
  std::vector<int> parent(g.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (g[i]) continue;
      if (c + 1 < cols && !g[i + 1]) parent[find(i)] = find(i + 1);
      if (r + 1 < rows && !g[i + cols]) parent[find(i)] = find(i + cols);
    }
  std::vector<char> open(g.size(), 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if ((r == 0 || c == 0 || r == rows - 1 || c == cols - 1) && !g[r * cols + c]) open[find(r * cols + c)] = 1;
  std::vector<int> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] ? 1 : (open[find(static_cast<int>(i))] ? 0 : 1);
  return out;
}

torch::Tensor as_grid(const std::vector<int>& g, int rows, int cols) {
  auto t = torch::zeros({rows, cols});
  for (int i = 0; i < rows * cols; ++i) t.view(-1)[i] = static_cast<float>(g[i]);
  return t;
}

}  // namespace

TEST(SelectThreshold, BimodalSplit) {
  std::vector<double> q(50, 0.1);
  q.insert(q.end(), 20, 0.9);
  auto r = select_threshold(q);
  EXPECT_FALSE(r.fallback_used);
  EXPECT_GT(r.threshold, 0.1);
  EXPECT_LT(r.threshold, 0.9);
  EXPECT_EQ(r.valley_bin, oracle::valley_bin(q));
  EXPECT_DOUBLE_EQ(r.threshold, (oracle::valley_bin(q) + 0.5) / 256.0);
  auto marked = binarize_blocks(torch::tensor(q), r.threshold);
  EXPECT_EQ(marked.sum().item<double>(), 20.0);
  EXPECT_TRUE(torch::equal(marked.slice(0, 50), torch::ones({20})));
  long total = 0;
  for (auto c : r.histogram) total += c;
  EXPECT_EQ(total, 70);
  EXPECT_EQ(r.histogram.size(), 256u);
}

TEST(SelectThreshold, ConstantFallsBack) {
  std::vector<double> q(30, 0.2);
  auto r = select_threshold(q);
  EXPECT_TRUE(r.fallback_used);
  EXPECT_EQ(r.threshold, 0.5);
}

TEST(SelectThreshold, AdjacentMasses) {
  // Bins 100 and 102 hold the masses; bin 101 sits empty between them.
  const double lo = (100 + 0.5) / 256, hi = (102 + 0.5) / 256;
  std::vector<double> q(10, lo);
  q.insert(q.end(), 6, hi);
  auto r = select_threshold(q);
  EXPECT_FALSE(r.fallback_used);
  EXPECT_GT(r.threshold, lo);
  EXPECT_LT(r.threshold, hi);
  EXPECT_EQ(r.valley_bin, oracle::valley_bin(q));
}

TEST(SelectThreshold, MatchesRunLengthOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::uniform_int_distribution<int> n_levels(1, 6), n_blocks(1, 200);
    std::vector<double> levels(static_cast<std::size_t>(n_levels(rng)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& l : levels) l = u(rng);
    std::vector<double> q(static_cast<std::size_t>(n_blocks(rng)));
    std::uniform_int_distribution<std::size_t> pick(0, levels.size() - 1);
    for (auto& v : q) v = levels[pick(rng)];
    auto r = select_threshold(q);
    const int want = oracle::valley_bin(q);
    if (want < 0) {
      EXPECT_TRUE(r.fallback_used) << "trial " << trial;
      EXPECT_EQ(r.threshold, 0.5);
    } else {
      EXPECT_FALSE(r.fallback_used) << "trial " << trial;
      EXPECT_EQ(r.valley_bin, want) << "trial " << trial;
    }
  }
}

TEST(SelectThreshold, PermutationInvariant) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(60);
    for (auto& v : q) v = u(rng) < 0.7 ? u(rng) * 0.2 : 0.8 + u(rng) * 0.2;
    auto a = select_threshold(q);
    std::shuffle(q.begin(), q.end(), rng);
    auto b = select_threshold(q);
    EXPECT_EQ(a.threshold, b.threshold);
    EXPECT_EQ(a.histogram, b.histogram);
  }
}

TEST(SelectThreshold, Errors) {
  std::vector<double> empty;
  EXPECT_THROW(select_threshold(empty), InvalidArgument);
  std::vector<double> bad{0.2, 1.3};
  EXPECT_THROW(select_threshold(bad), InvalidArgument);
}

TEST(FillHoles, RingCenter) {
  auto g = torch::ones({5, 5});
  g[2][2] = 0.0f;
  auto f = fill_holes(g);
  EXPECT_TRUE(torch::equal(f, torch::ones({5, 5})));
}

TEST(FillHoles, AllZeroUnchanged) {
  auto g = torch::zeros({4, 7});
  EXPECT_TRUE(torch::equal(fill_holes(g), g));
}

TEST(FillHoles, DiagonalGapIsNotAHole) {
  // A zero reachable only through a diagonal stays a hole under 4-connectivity.
  auto g = torch::tensor({{1.f, 0.f, 1.f}, {1.f, 0.f, 1.f}, {1.f, 1.f, 1.f}});
  EXPECT_TRUE(torch::equal(fill_holes(g), g));
  auto h = torch::tensor({{0.f, 1.f, 1.f}, {1.f, 0.f, 1.f}, {1.f, 1.f, 1.f}});
  EXPECT_EQ(fill_holes(h)[1][1].item<float>(), 1.0f);
}

TEST(FillHoles, MatchesComponentOracleAndIsIdempotent) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> dim(1, 12);
    const int rows = dim(rng), cols = dim(rng);
    std::bernoulli_distribution coin(0.3 + 0.4 * (trial % 3) / 2.0);
    std::vector<int> g(static_cast<std::size_t>(rows * cols));
    for (auto& v : g) v = coin(rng);
    auto got = fill_holes(as_grid(g, rows, cols));
    EXPECT_TRUE(torch::equal(got, as_grid(fill_oracle(g, rows, cols), rows, cols))) << "trial " << trial;
    EXPECT_TRUE(torch::equal(fill_holes(got), got));
    EXPECT_TRUE((got >= as_grid(g, rows, cols)).all().item<bool>());
  }
}

TEST(FillHoles, RejectsNonBinary) { EXPECT_THROW(fill_holes(torch::full({3, 3}, 0.5f)), InvalidArgument); }

TEST(Upscale, ConstantGrids) {
  auto g = plan_grid(300, 500);
  auto m = upscale_mask(torch::ones({g.rows, g.cols}), g, 300, 500);
  EXPECT_TRUE(torch::equal(m.values, torch::ones({300, 500})));
  auto one = plan_grid(128, 128);
  EXPECT_TRUE(torch::equal(upscale_mask(torch::ones({1, 1}), one, 128, 128).values, torch::ones({128, 128})));
  EXPECT_TRUE(torch::equal(upscale_mask(torch::ones({1, 1}), one, 100, 90).values, torch::ones({100, 90})));
}

TEST(Upscale, MidpointOfFourCenters) {
  auto g = plan_grid(256, 256);
  auto v = torch::tensor({{1.0, 0.0}, {0.0, 0.0}}, torch::kFloat64);
  EXPECT_DOUBLE_EQ(interpolate_at(v, 128, 128.0, 128.0), 0.25);
  auto m = upscale_mask(v, g, 256, 256);
  EXPECT_EQ(m.values[127][127].item<float>(), 0.0f);
  EXPECT_EQ(m.values[128][128].item<float>(), 0.0f);
  EXPECT_EQ(m.values[0][0].item<float>(), 1.0f);
}

TEST(Upscale, MatchesBilinearOracle) {
  torch::manual_seed(15);
  auto g = plan_grid(300, 420);
  auto v = torch::rand({g.rows, g.cols}, torch::kFloat64);
  std::vector<std::vector<double>> lattice(static_cast<std::size_t>(g.rows), std::vector<double>(g.cols));
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) lattice[r][c] = v[r][c].item<double>();
  auto soft = upscale_soft(v, g, 300, 420);
  auto a = soft.accessor<double, 2>();
  for (int i = 0; i < 300; i += 7)
    for (int j = 0; j < 420; j += 5) EXPECT_NEAR(a[i][j], oracle::bilinear_at(lattice, 128, i, j), 1e-12);
}

TEST(Upscale, Monotone) {
  std::mt19937_64 rng(16);
  auto g = plan_grid(256, 384);
  for (int trial = 0; trial < 20; ++trial) {
    torch::manual_seed(trial);
    auto v = torch::rand({g.rows, g.cols}, torch::kFloat64);
    auto raised = v.clone();
    std::uniform_int_distribution<int> k(0, static_cast<int>(g.count()) - 1);
    raised.view(-1)[k(rng)] += 0.3;
    auto a = upscale_soft(v, g, 256, 384);
    auto b = upscale_soft(raised, g, 256, 384);
    EXPECT_TRUE((b >= a).all().item<bool>());
    EXPECT_TRUE(((b >= 0.5) >= (a >= 0.5)).all().item<bool>());
  }
}

TEST(Upscale, RejectsOversizedOutput) {
  auto g = plan_grid(200, 200);
  EXPECT_THROW(upscale_mask(torch::zeros({2, 2}), g, 257, 100), InvalidArgument);
  EXPECT_THROW(upscale_mask(torch::zeros({2, 3}), g, 200, 200), InvalidArgument);
}

TEST(Postprocess, BimodalFieldReconstructsBlockMask) {
  auto g = plan_grid(512, 768);  // 4 x 6
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lo(0.0500, 0.0505), hi(0.950, 0.952);  // one histogram bin each
  for (int trial = 0; trial < 10; ++trial) {
    std::bernoulli_distribution coin(0.35);
    std::vector<int> truth(static_cast<std::size_t>(g.count()));
    for (auto& t : truth) t = coin(rng);
    truth[0] = 1;
    truth[1] = 0;
    auto filled = fill_oracle(truth, 4, 6);
    auto q = torch::empty({g.count()}, torch::kFloat64);
    for (int k = 0; k < g.count(); ++k) q[k] = filled[k] ? hi(rng) : lo(rng);
    auto r = postprocess(q, g);
    EXPECT_FALSE(r.report.fallback_used);
    EXPECT_TRUE(torch::equal(r.block_mask, as_grid(filled, 4, 6))) << "trial " << trial;
    EXPECT_EQ(r.mask.values.size(0), 512);
    EXPECT_EQ(r.mask.values.size(1), 768);
  }
}

TEST(Postprocess, FullColumnMaskIsPixelExact) {
  auto g = plan_grid(256, 384);
  auto q = torch::full({2, 3}, 0.05, torch::kFloat64);
  q.select(1, 1).fill_(0.95);
  auto r = postprocess(q.view(-1), g);
  auto expect = torch::zeros({256, 384});
  expect.slice(1, 128, 256).fill_(1.0f);
  EXPECT_TRUE(torch::equal(r.mask.values, expect));
}
