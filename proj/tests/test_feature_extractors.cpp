// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "forgeloc/errors.hpp"
#include "forgeloc/feature_extractors.hpp"
#include "forgeloc/model.hpp"
#include "oracles.hpp"

using namespace forgeloc;

namespace {

FfeOptions small_ffe() {
  FfeOptions o;
  o.embedding_dim = 16;
  o.conv1_channels = 8;
  o.conv2_channels = 8;
  o.conv3_channels = 8;
  return o;
}

CfeOptions small_cfe() {
  CfeOptions o;
  o.embedding_dim = 16;
  o.stem_channels = {4, 8};
  o.entry_channels = {8, 16, 16};
  return o;
}

}  // namespace

TEST(PretrainLoss, PerfectPrediction) {
  std::vector<double> p{1.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(ffe_pretrain_loss(p, 0), 0.0, 1e-12);
  // A zero on the true class is clipped rather than infinite.
  EXPECT_NEAR(ffe_pretrain_loss(p, 1), -std::log(kLogClip), 1e-9);
}

TEST(PretrainLoss, UniformFourClasses) {
  std::vector<double> p(4, 0.25);
  EXPECT_NEAR(ffe_pretrain_loss(p, 2), std::log(4.0), 1e-12);
  EXPECT_NEAR(ffe_pretrain_loss(p, 2), 1.3863, 1e-4);
}

TEST(PretrainLoss, MatchesScalarOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(4);
    double s = 0;
    for (auto& v : p) s += (v = u(rng));
    for (auto& v : p) v /= s;
    const std::size_t c = trial % 4;
    EXPECT_NEAR(ffe_pretrain_loss(p, static_cast<std::int64_t>(c)), oracle::camera_ce(p, c), 1e-9);
  }
}

TEST(PretrainLoss, RejectsBadInput) {
  std::vector<double> p(4, 0.25);
  EXPECT_THROW(ffe_pretrain_loss(p, 4), InvalidArgument);
  EXPECT_THROW(ffe_pretrain_loss(p, -1), InvalidArgument);
  std::vector<double> bad{0.5, 0.6};
  EXPECT_THROW(ffe_pretrain_loss(bad, 0), InvalidArgument);
  auto probs = torch::full({2, 4}, 0.25);
  EXPECT_THROW(ffe_pretrain_loss(probs, torch::tensor({0, 4})), InvalidArgument);
}

TEST(PretrainLoss, TensorFormAveragesBatch) {
  auto probs = torch::tensor({{0.7, 0.1, 0.1, 0.1}, {0.25, 0.25, 0.25, 0.25}}, torch::kFloat64);
  auto loss = ffe_pretrain_loss(probs, torch::tensor({0, 3})).item<double>();
  EXPECT_NEAR(loss, 0.5 * (-std::log(0.7) + std::log(4.0)), 1e-12);
}

TEST(PretrainLoss, GradientMatchesFiniteDifferences) {
  torch::manual_seed(2);
  auto logits = torch::randn({3, 4}, torch::kFloat64);
  auto classes = torch::tensor({1, 0, 3});
  auto f = [&](const torch::Tensor& l) { return ffe_pretrain_loss(torch::softmax(l, 1), classes); };
  auto x = logits.clone().requires_grad_(true);
  f(x).backward();
  auto grad = x.grad();
  const double h = 1e-6;
  for (int64_t i = 0; i < logits.numel(); ++i) {
    auto plus = logits.clone();
    auto minus = logits.clone();
    plus.view(-1)[i] += h;
    minus.view(-1)[i] -= h;
    const double fd = (f(plus).item<double>() - f(minus).item<double>()) / (2 * h);
    const double an = grad.view(-1)[i].item<double>();
    EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(an))) << "entry " << i;
  }
}

TEST(ExtractForensic, FullProfileShapeAndDeterminism) {
  FfeModel ffe(FfeOptions{});
  ffe->drop_classifier();
  torch::manual_seed(4);
  auto one = torch::rand({1, 3, 128, 128});
  auto blocks = one.expand({135, 3, 128, 128}).contiguous();
  auto f = extract_forensic(ffe, blocks);
  ASSERT_EQ(f.sizes(), (std::vector<int64_t>{135, 384}));
  EXPECT_TRUE(torch::equal(f[0], f[134]));
  EXPECT_TRUE(torch::equal(f, extract_forensic(ffe, blocks)));
  EXPECT_FALSE(ffe->has_classifier());
  EXPECT_THROW(ffe->class_logits(blocks), InvalidArgument);
}

TEST(ExtractForensic, RejectsWrongBlockShape) {
  FfeModel ffe(small_ffe());
  EXPECT_THROW(extract_forensic(ffe, torch::rand({2, 3, 64, 64})), InvalidArgument);
  EXPECT_THROW(extract_forensic(ffe, torch::rand({2, 1, 128, 128})), InvalidArgument);
  EXPECT_THROW(extract_forensic(ffe, torch::rand({3, 128, 128})), InvalidArgument);
}

TEST(ExtractContext, FullProfileShapeAndDeterminism) {
  CfeModel cfe(CfeOptions{});
  torch::manual_seed(6);
  auto blocks = torch::rand({1, 3, 128, 128}).expand({135, 3, 128, 128}).contiguous();
  auto c = extract_context(cfe, blocks);
  ASSERT_EQ(c.sizes(), (std::vector<int64_t>{135, 384}));
  EXPECT_TRUE(torch::equal(c[0], c[77]));
  EXPECT_THROW(extract_context(cfe, torch::rand({2, 3, 100, 128})), InvalidArgument);
}

TEST(ExtractContext, PermutationEquivariant) {
  CfeModel cfe(small_cfe());
  torch::manual_seed(8);
  auto blocks = torch::rand({6, 3, 128, 128});
  auto perm = torch::tensor({4, 2, 0, 5, 1, 3});
  auto a = extract_context(cfe, blocks).index_select(0, perm);
  auto b = extract_context(cfe, blocks.index_select(0, perm));
  EXPECT_TRUE(torch::allclose(a, b, 1e-5, 1e-6));
}

TEST(ExtractForensic, PermutationEquivariant) {
  FfeModel ffe(small_ffe());
  torch::manual_seed(9);
  auto blocks = torch::rand({5, 3, 128, 128});
  auto perm = torch::tensor({3, 4, 0, 2, 1});
  auto a = extract_forensic(ffe, blocks).index_select(0, perm);
  auto b = extract_forensic(ffe, blocks.index_select(0, perm));
  EXPECT_TRUE(torch::allclose(a, b, 1e-5, 1e-6));
}

TEST(JoinEmbeddings, ConcatenatesForensicFirst) {
  auto g = plan_grid(128, 128);
  auto j = join_embeddings(torch::tensor({{1.0f, 2.0f}}), torch::tensor({{3.0f}}), g);
  EXPECT_TRUE(torch::equal(j.x, torch::tensor({{1.0f, 2.0f, 3.0f}})));
  EXPECT_EQ(j.joint_dim(), 3);
}

TEST(JoinEmbeddings, FullDimsAndInverse) {
  auto g = plan_grid(1080, 1920);
  auto f = torch::randn({135, 384});
  auto c = torch::randn({135, 384});
  auto j = join_embeddings(f, c, g);
  EXPECT_EQ(j.joint_dim(), 768);
  EXPECT_EQ(j.x.size(0), 135);
  EXPECT_TRUE(torch::equal(j.x.slice(1, 0, 384), f));
  EXPECT_TRUE(torch::equal(j.x.slice(1, 384, 768), c));
}

TEST(JoinEmbeddings, CountMismatch) {
  auto g = plan_grid(256, 384);
  EXPECT_THROW(join_embeddings(torch::zeros({6, 4}), torch::zeros({5, 4}), g), InvalidArgument);
  EXPECT_THROW(join_embeddings(torch::zeros({5, 4}), torch::zeros({5, 4}), g), InvalidArgument);
}

TEST(Constraint, HoldsAfterEveryStep) {
  auto opts = small_ffe();
  FfeModel ffe(opts);
  EXPECT_TRUE(ffe->constraint_satisfied());
  torch::optim::SGD opt(ffe->parameters(), torch::optim::SGDOptions(0.5).momentum(0.9));
  torch::manual_seed(10);
  auto blocks = torch::rand({4, 3, 128, 128});
  auto classes = torch::tensor({0, 1, 2, 3});
  for (int step = 0; step < 5; ++step) {
    opt.zero_grad();
    auto loss = ffe_pretrain_loss(torch::softmax(ffe->class_logits(blocks), 1), classes);
    loss.backward();
    opt.step();
    EXPECT_FALSE(ffe->constraint_satisfied()) << "a raw step should move the weights off the constraint";
    ffe->enforce_constraint();
    ASSERT_TRUE(ffe->constraint_satisfied()) << "step " << step;
  }
  auto w = ffe->named_parameters()["constrained.weight"].to(torch::kFloat64);
  auto flat = w.reshape({w.size(0) * w.size(1), 25});
  for (int64_t r = 0; r < flat.size(0); ++r) {
    EXPECT_NEAR(flat[r][12].item<double>(), -1.0, 1e-6);
    EXPECT_NEAR(flat[r].sum().item<double>() + 1.0, 1.0, 1e-5);
  }
}

TEST(Ablation, JointDimShrinksWithoutExtractor) {
  auto cfg = ModelConfig::desk();
  const auto full = cfg.joint_dim();
  for (const char* name : {"no-ffe", "no-cfe"}) {
    auto c = ModelConfig::desk();
    c.variant = VariantFlags::preset(name);
    EXPECT_LT(c.joint_dim(), full) << name;
    ForgeryNet net(c);
    net->eval();
    torch::NoGradGuard ng;
    auto out = net->forward(torch::rand({1, c.grid().count(), 3, 128, 128}));
    EXPECT_EQ(out.p.sizes(), (std::vector<int64_t>{1, 2}));
    EXPECT_EQ(out.q.sizes(), (std::vector<int64_t>{1, c.grid().count()}));
  }
}
