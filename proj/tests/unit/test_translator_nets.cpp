#include <gtest/gtest.h>

#include <algorithm>

#include "generators.hpp"
#include "repcycle/error.hpp"
#include "repcycle/tensor_utils.hpp"
#include "repcycle/translator_nets.hpp"

namespace repcycle::nn {
namespace {

NetConfig small_net() { return {32, 32, 8, 1, 8, 8}; }

TEST(TranslatorNets, ShapesAndRanges) {
  torch::manual_seed(0);
  GenA2B g(small_net());
  const auto x = torch::rand({3, 3, 32, 32});
  const auto out = g->forward(x);
  EXPECT_EQ(out.raw.sizes(), (std::vector<std::int64_t>{3, 4, 32, 32}));
  EXPECT_EQ(out.mean.sizes(), (std::vector<std::int64_t>{3, 8}));
  EXPECT_EQ(out.logvar.sizes(), (std::vector<std::int64_t>{3, 8}));
  EXPECT_TRUE((out.raw > 0).all().item<bool>() && (out.raw < 1).all().item<bool>());

  PatchDiscriminator d(kDomainBChannels, 8);
  EXPECT_EQ(d->forward(out.raw).sizes(), (std::vector<std::int64_t>{3, 1, 32 / kPatchStride, 32 / kPatchStride}));
}

TEST(TranslatorNets, RejectsWrongInputShape) {
  GenA2B g(small_net());
  try {
    g->forward(torch::rand({1, 4, 32, 32}));
    FAIL() << "expected kShapeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
  EXPECT_THROW(GenA2B(NetConfig{30, 32, 8, 1, 8, 8}), Error);
}

TEST(TranslatorNets, HardFusionKeepsBackgroundExactly) {
  torch::manual_seed(1);
  GenB2A g(small_net());
  auto b = torch::rand({2, 4, 32, 32});
  const auto out = g->forward(b, torch::randn({2, 8}));
  const auto outside = (b.slice(1, 3, 4) <= kMaskThreshold).expand({-1, 3, -1, -1});
  EXPECT_GT(outside.sum().item<int>(), 0);
  EXPECT_TRUE(torch::equal(out.masked_select(outside), b.slice(1, 0, 3).masked_select(outside)));
}

TEST(TranslatorNets, SoftMaskReceivesStraightThroughGradient) {
  torch::manual_seed(2);
  GenB2A g(small_net());
  auto b = torch::rand({1, 4, 32, 32}).requires_grad_(true);
  g->forward(b, torch::randn({1, 8})).sum().backward();
  EXPECT_GT(b.grad().slice(1, 3, 4).abs().sum().item<double>(), 0.0);
}

TEST(StraightThroughMask, ForwardIsHardBackwardIsIdentity) {
  auto soft = torch::tensor({0.2, 0.5, 0.51, 0.9}, torch::kFloat32).requires_grad_(true);
  const auto hard = straight_through_mask(soft);
  EXPECT_TRUE(torch::equal(hard.detach(), torch::tensor({0.f, 0.f, 1.f, 1.f})));
  (hard * torch::tensor({1.f, 2.f, 3.f, 4.f})).sum().backward();
  EXPECT_TRUE(torch::equal(soft.grad(), torch::tensor({1.f, 2.f, 3.f, 4.f})));
}

TEST(ClipGradient, ForwardIsIdentityBackwardCapsEachSample) {
  const auto x = torch::zeros({3, 2, 2}).requires_grad_(true);
  const auto y = clip_gradient(x, 1.0);
  EXPECT_TRUE(torch::equal(y, x));
  // Per-sample upstream norms 4, 0.5 and 0.
  const auto upstream = torch::stack({torch::full({2, 2}, 2.0), torch::full({2, 2}, 0.25), torch::zeros({2, 2})});
  (y * upstream).sum().backward();
  const auto norms = x.grad().flatten(1).norm(2, 1);
  EXPECT_NEAR(norms[0].item<double>(), 1.0, 1e-6);
  EXPECT_TRUE(torch::allclose(x.grad()[1], upstream[1]));
  EXPECT_EQ(x.grad()[2].abs().sum().item<double>(), 0.0);
  EXPECT_TRUE(torch::allclose(x.grad()[0] / norms[0], upstream[0] / 4.0));
}

TEST(ClipGradient, ZeroCapPassesGradientThrough) {
  const auto x = torch::zeros({2, 3}).requires_grad_(true);
  (clip_gradient(x, 0.0) * 100.0).sum().backward();
  EXPECT_TRUE(torch::allclose(x.grad(), torch::full({2, 3}, 100.0)));
}

TEST(SampleCode, TenThousandDrawsAreStandardNormal) {
  Rng rng = derive_rng(11);
  const auto z = sample_code(torch::zeros({10000, 16}), torch::zeros({10000, 16}), rng);
  const auto mean = z.mean(0);
  const auto var = z.var(0, false);
  EXPECT_LT(mean.abs().max().item<double>(), 0.05);
  EXPECT_LT((var - 1.0).abs().max().item<double>(), 0.05);
}

TEST(SampleCode, MeanAndScaleFollowParameters) {
  Rng a = derive_rng(3), b = derive_rng(3);
  const auto z0 = sample_code(torch::zeros({4, 5}), torch::zeros({4, 5}), a);
  const auto z1 = sample_code(torch::full({4, 5}, 2.0), torch::full({4, 5}, std::log(9.0)), b);
  EXPECT_TRUE(torch::allclose(z1, 2.0 + 3.0 * z0, 1e-5, 1e-5));
}

TEST(KlDivergence, HandValues) {
  EXPECT_DOUBLE_EQ(kl_divergence(torch::zeros({3, 4}), torch::zeros({3, 4})).item<double>(), 0.0);
  // One dim, mean 1, logvar 0: 0.5 * (1 + 1 - 1 - 0) = 0.5 per row.
  const auto kl = kl_divergence(torch::ones({2, 1}), torch::zeros({2, 1}));
  EXPECT_NEAR(kl.item<double>(), 0.5, 1e-7);
  const auto kl2 = kl_divergence(torch::zeros({1, 1}), torch::full({1, 1}, std::log(2.0)));
  EXPECT_NEAR(kl2.item<double>(), 0.5 * (2.0 - 1.0 - std::log(2.0)), 1e-6);
}

// Per-pixel oracle for flooding on the CPU image path.
TEST(FloodTensor, MatchesPerPixelNearestColor) {
  Rng rng = derive_rng(5);
  const auto palette = render::Palette::standard();
  for (int trial = 0; trial < 10; ++trial) {
    const auto rgb = testing::random_image(rng, 12, 10);
    Raster<double> mask(12, 10, 1);
    for (auto& v : mask.data()) v = uniform(rng, 0.0, 1.0);
    auto raw = torch::cat({image_to_tensor(rgb), torch::empty({1, 12, 10})}, 0);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 10; ++x) raw[3][y][x] = static_cast<float>(mask(y, x));
    const auto flooded = flood_tensor(raw.unsqueeze(0), palette_tensor(palette));
    const auto oracle = render::labels_from_colors(tensor_to_image(raw), mask, palette);
    const auto got = tensor_to_labels(flooded.labels[0]);
    // Float rounding can only matter at exact ties, which random data avoids.
    EXPECT_TRUE(std::ranges::equal(got.data(), oracle.data()));
  }
}

TEST(FloodTensor, IdempotentAndPaletteClosedOnNoisyPredictions) {
  torch::manual_seed(6);
  const auto pal = palette_tensor(render::Palette::standard());
  const auto raw = torch::rand({100, 4, 16, 16});
  const auto once = flood_tensor(raw, pal);
  const auto twice = flood_tensor(once.b, pal);
  EXPECT_TRUE(torch::equal(once.b, twice.b));
  EXPECT_TRUE(torch::equal(once.labels, twice.labels));
  const auto inside = once.labels > 0;
  const auto d = (once.b.slice(1, 0, 3).unsqueeze(1) - pal.view({1, 14, 3, 1, 1})).abs().sum(2).amin(1);
  EXPECT_EQ(d.masked_select(inside).max().item<float>(), 0.f);
}

TEST(FloodSegments, ImagePathIsIdempotentAndSatisfiesInvariants) {
  Rng rng = derive_rng(7);
  const auto palette = render::Palette::standard();
  for (int trial = 0; trial < 20; ++trial) {
    const auto rgb = testing::random_image(rng, 8, 8);
    Raster<double> mask(8, 8, 1);
    for (auto& v : mask.data()) v = uniform(rng, 0.0, 1.0);
    const auto once = flood_segments(rgb, mask, palette);
    once.check_invariants(palette);
    Raster<double> hard(8, 8, 1);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) hard(y, x) = once.mask(y, x);
    const auto twice = flood_segments(once.rgb, hard, palette);
    EXPECT_TRUE(std::ranges::equal(twice.labels.data(), once.labels.data()));
    EXPECT_TRUE(std::ranges::equal(twice.rgb.data(), once.rgb.data()));
  }
}

TEST(Neutralize, GrayOutsideMaskUnchangedInside) {
  auto b = torch::rand({2, 4, 8, 8});
  const auto n = neutralize(b);
  const auto mask = (b.slice(1, 3, 4) > 0.5).expand({-1, 3, -1, -1});
  EXPECT_TRUE(torch::equal(n.slice(1, 0, 3).masked_select(mask), b.slice(1, 0, 3).masked_select(mask)));
  EXPECT_TRUE((n.slice(1, 0, 3).masked_select(mask.logical_not()) == 0.5).all().item<bool>());
}

}  // namespace
}  // namespace repcycle::nn
