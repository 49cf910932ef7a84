// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "forgeloc/errors.hpp"
#include "forgeloc/feature_extractors.hpp"
#include "forgeloc/heads_losses.hpp"
#include "oracles.hpp"

using namespace forgeloc;

namespace {

void zero_parameters(torch::nn::Module& m) {
  torch::NoGradGuard ng;
  for (auto& p : m.parameters()) p.zero_();
}

double fd_rel_error(double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(an)); }

}  // namespace

TEST(DetectionHead, SoftmaxSumsToOne) {
  DetectionHead head(16, 2, 3);
  torch::manual_seed(1);
  for (int t = 0; t < 10; ++t) {
    auto d = detect(head, torch::randn({6, 16}) * (t + 1));
    EXPECT_NEAR(d.p_pristine + d.p_fake, 1.0, 1e-6);
  }
}

TEST(DetectionHead, ZeroParametersGiveHalf) {
  DetectionHead head(16, 2, 3);
  zero_parameters(*head);
  auto d = detect(head, torch::randn({6, 16}));
  EXPECT_DOUBLE_EQ(d.p_pristine, 0.5);
  EXPECT_DOUBLE_EQ(d.p_fake, 0.5);
  EXPECT_TRUE(d.is_fake());  // threshold is inclusive
}

TEST(DetectionHead, ChannelSchedule) {
  DetectionHead head(768, 9, 15);
  auto params = head->named_parameters();
  EXPECT_EQ(params["conv1.weight"].sizes(), (std::vector<int64_t>{200, 768, 1, 1}));
  EXPECT_EQ(params["conv2.weight"].sizes(), (std::vector<int64_t>{2, 200, 1, 1}));
  EXPECT_EQ(params["fc.weight"].sizes(), (std::vector<int64_t>{2, 2 * 135}));
}

TEST(DetectionHead, ShiftInvariantDecision) {
  torch::manual_seed(2);
  auto logits = torch::randn({20, 2}, torch::kFloat64);
  auto p = torch::softmax(logits, 1);
  auto shifted = torch::softmax(logits + torch::randn({20, 1}, torch::kFloat64) * 5.0, 1);
  EXPECT_TRUE(torch::allclose(p, shifted, 1e-9, 1e-12));
  EXPECT_TRUE(torch::equal(p.select(1, 1) >= 0.5, shifted.select(1, 1) >= 0.5));
}

TEST(DetectionHead, ShapeMismatch) {
  DetectionHead head(16, 2, 3);
  EXPECT_THROW(detect(head, torch::randn({5, 16})), InvalidArgument);
  EXPECT_THROW(detect(head, torch::randn({6, 15})), InvalidArgument);
  EXPECT_THROW(detect(head, torch::randn({6})), InvalidArgument);
}

TEST(LocalizationHead, RangeAndCount) {
  LocalizationHead head(32, 9, 15);
  torch::manual_seed(3);
  auto q = localize(head, torch::randn({135, 32}) * 4);
  ASSERT_EQ(q.numel(), 135);
  EXPECT_TRUE((q > 0).all().item<bool>());
  EXPECT_TRUE((q < 1).all().item<bool>());
}

TEST(LocalizationHead, ZeroParametersGiveHalf) {
  LocalizationHead head(32, 2, 3);
  zero_parameters(*head);
  auto q = localize(head, torch::randn({6, 32}));
  EXPECT_TRUE(torch::equal(q, torch::full({6}, 0.5f)));
}

TEST(LocalizationHead, ChannelSchedule) {
  LocalizationHead head(768, 9, 15);
  auto params = head->named_parameters();
  const std::array<int64_t, 5> ch{768, 192, 96, 12, 1};
  for (int i = 0; i < 4; ++i) {
    auto w = params["conv" + std::to_string(i + 1) + ".weight"];
    EXPECT_EQ(w.size(0), ch[i + 1]);
    EXPECT_EQ(w.size(1), ch[i]);
  }
  EXPECT_THROW(localize(head, torch::randn({134, 768})), InvalidArgument);
}

TEST(DetectionLoss, Examples) {
  const double eps = 1e-12;
  std::array<double, 2> p{1 - eps, eps}, w{1, 0};
  EXPECT_NEAR(detection_loss(p, w), 0.0, 1e-11);
  std::array<double, 2> half{0.5, 0.5}, w1{0, 1};
  EXPECT_NEAR(detection_loss(half, w), std::log(2.0), 1e-12);
  EXPECT_NEAR(detection_loss(half, w1), 0.6931, 1e-4);
}

TEST(DetectionLoss, MatchesOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const double p1 = u(rng);
    std::array<double, 2> p{1 - p1, p1};
    std::array<double, 2> w{t % 2 ? 1.0 : 0.0, t % 2 ? 0.0 : 1.0};
    EXPECT_NEAR(detection_loss(p, w), oracle::detection_ce(p[0], p[1], w[0], w[1]), 1e-9);
  }
}

TEST(DetectionLoss, RejectsNonOneHot) {
  std::array<double, 2> p{0.5, 0.5}, w{0.5, 0.5}, both{1, 1};
  EXPECT_THROW(detection_loss(p, w), InvalidArgument);
  EXPECT_THROW(detection_loss(p, both), InvalidArgument);
  EXPECT_THROW(detection_loss(torch::full({1, 2}, 0.5), torch::full({1, 2}, 0.5)), InvalidArgument);
}

TEST(DetectionLoss, TensorMatchesSpan) {
  auto p = torch::tensor({{0.3, 0.7}, {0.9, 0.1}}, torch::kFloat64);
  auto w = torch::tensor({{0.0, 1.0}, {0.0, 1.0}}, torch::kFloat64);
  const double expect = 0.5 * (-std::log(0.7) - std::log(0.1));
  EXPECT_NEAR(detection_loss(p, w).item<double>(), expect, 1e-12);
}

TEST(LocalizationLoss, Examples) {
  std::vector<double> q{0.5}, z{0.5};
  EXPECT_NEAR(localization_loss(q, z), std::log(2.0), 1e-12);
  std::vector<double> q10(10, 1e-12), z10(10, 0.0);
  EXPECT_NEAR(localization_loss(q10, z10), 0.0, 1e-9);
}

TEST(LocalizationLoss, MatchesOracleAndSumsBlocks) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> q(12), z(12);
    for (auto& v : q) v = u(rng);
    for (auto& v : z) v = std::round(u(rng) * 4) / 4;
    const double want = oracle::block_ce(q, z);
    EXPECT_NEAR(localization_loss(q, z), want, 1e-9);
    auto tq = torch::tensor(q, torch::kFloat64);
    auto tz = torch::tensor(z, torch::kFloat64);
    EXPECT_NEAR(localization_loss(tq, tz).item<double>(), want, 1e-9);
  }
}

TEST(LocalizationLoss, Errors) {
  std::vector<double> q{0.5, 0.5}, z{0.5};
  EXPECT_THROW(localization_loss(q, z), InvalidArgument);
  std::vector<double> z2{0.5, 1.5};
  EXPECT_THROW(localization_loss(q, z2), InvalidArgument);
  EXPECT_THROW(localization_loss(torch::rand({3}), torch::rand({4})), InvalidArgument);
}

TEST(LocalizationLoss, MinimizedAtLabels) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> q(8), z(8);
    for (auto& v : q) v = std::clamp(u(rng), 1e-9, 1 - 1e-9);
    for (auto& v : z) v = std::clamp(u(rng), 1e-12, 1 - 1e-12);
    EXPECT_GE(localization_loss(q, z) + 1e-12, localization_loss(z, z));
  }
}

TEST(JointLoss, Examples) {
  EXPECT_NEAR(joint_loss(1.0, 2.0, LossWeights{0.4}), 1.6, 1e-12);
  EXPECT_DOUBLE_EQ(LossWeights{}.alpha, 0.4);
  for (double a : {0.1, 0.4, 0.9}) EXPECT_NEAR(joint_loss(0.77, 0.77, LossWeights{a}), 0.77, 1e-12);
  EXPECT_NEAR(joint_loss(3.0, 100.0, LossWeights{0.999}), 0.999 * 3.0 + 0.001 * 100.0, 1e-12);
  EXPECT_NEAR(joint_loss(2.0, 5.0, LossWeights{0.3}), oracle::blend(2.0, 5.0, 0.3), 1e-12);
}

TEST(JointLoss, AlphaRange) {
  EXPECT_THROW(joint_loss(1.0, 1.0, LossWeights{0.0}), InvalidArgument);
  EXPECT_THROW(joint_loss(1.0, 1.0, LossWeights{1.0}), InvalidArgument);
  EXPECT_THROW(joint_loss(1.0, 1.0, LossWeights{-0.2}), InvalidArgument);
}

TEST(LossGradients, MatchFiniteDifferences) {
  torch::manual_seed(7);
  auto q0 = torch::rand({2, 6}, torch::kFloat64) * 0.9 + 0.05;
  auto z = torch::rand({2, 6}, torch::kFloat64);
  auto p0 = torch::softmax(torch::randn({2, 2}, torch::kFloat64), 1);
  auto w = torch::tensor({{1.0, 0.0}, {0.0, 1.0}}, torch::kFloat64);
  const double h = 1e-6;

  auto q = q0.clone().requires_grad_(true);
  localization_loss(q, z).backward();
  for (int64_t i = 0; i < q0.numel(); ++i) {
    auto a = q0.clone(), b = q0.clone();
    a.view(-1)[i] += h;
    b.view(-1)[i] -= h;
    const double fd = (localization_loss(a, z).item<double>() - localization_loss(b, z).item<double>()) / (2 * h);
    EXPECT_LE(fd_rel_error(fd, q.grad().view(-1)[i].item<double>()), 1e-4);
  }

  auto p = p0.clone().requires_grad_(true);
  detection_loss(p, w).backward();
  for (int64_t i = 0; i < p0.numel(); ++i) {
    auto a = p0.clone(), b = p0.clone();
    a.view(-1)[i] += h;
    b.view(-1)[i] -= h;
    const double fd = (detection_loss(a, w).item<double>() - detection_loss(b, w).item<double>()) / (2 * h);
    EXPECT_LE(fd_rel_error(fd, p.grad().view(-1)[i].item<double>()), 1e-4);
  }
}
