#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "adasiam/checkpoint.hpp"
#include "adasiam/errors.hpp"
#include "adasiam/layers.hpp"
#include "adasiam/loss.hpp"
#include "adasiam/optim.hpp"
#include "adasiam/reference.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace adasiam;
using namespace adasiam::testing;

namespace {

LayerParams conv_from(Tensor weights, Tensor bias) {
  LayerParams p;
  p.name = "test";
  p.weights = std::move(weights);
  p.bias = std::move(bias);
  return p;
}

}  // namespace

// ---------------------------------------------------------------- conv2d

TEST(Conv2d, IdentityKernel) {
  const Tensor x({1, 1, 1}, 5.0);
  const LayerParams p = conv_from(Tensor({1, 1, 1, 1}, 1.0), Tensor({1}));
  const Tensor y = conv2d(x, p, {1, 0});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y[0], 5.0);
}

TEST(Conv2d, SummationKernel) {
  const Tensor x({1, 3, 3}, 1.0);
  const LayerParams p = conv_from(Tensor({1, 1, 3, 3}, 1.0), Tensor({1}));
  const Tensor y = conv2d(x, p, {1, 0});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y[0], 9.0);
}

TEST(Conv2d, MatchesDirectSummation) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Tensor x = random_tensor({2, 5, 5}, seed);
    const LayerParams p = conv_from(random_tensor({3, 2, 3, 3}, seed + 10), random_tensor({3}, seed + 20));
    for (ConvGeometry g : {ConvGeometry{1, 0}, ConvGeometry{1, 1}, ConvGeometry{2, 1}, ConvGeometry{2, 0}}) {
      const Tensor fast = conv2d(x, p, g);
      const Tensor slow = reference::conv2d_direct(x, p, g);
      ASSERT_EQ(fast.shape(), slow.shape());
      EXPECT_LT(max_abs_diff(fast, slow), 1e-10) << "stride " << g.stride << " pad " << g.pad;
    }
  }
}

TEST(Conv2d, OutputExtentFormula) {
  const LayerParams p = make_conv_params("fmen", 16, 3, 7, 7);
  EXPECT_EQ(conv2d_output_shape({3, 107, 107}, p, {2, 0}), (Shape{16, 51, 51}));
  EXPECT_EQ(conv2d_output_shape({3, 10, 12}, p, {1, 2}), (Shape{16, 8, 10}));
}

TEST(Conv2d, ShapeErrorsNameTheDimension) {
  const LayerParams p = make_conv_params("probe", 4, 3, 3, 3);
  try {
    conv2d(Tensor({2, 5, 5}), p, {1, 0});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("channels"), std::string::npos);
  }
  try {
    conv2d(Tensor({3, 2, 5}), p, {1, 0});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
  }
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(conv2d_gradcheck(seed, {1, 1}), 1e-4);
    EXPECT_LT(conv2d_gradcheck(seed, {2, 0}), 1e-4);
  }
}

TEST(Conv2d, PointwisePathMatchesDirect) {
  const Tensor x = random_tensor({4, 6, 7}, 3);
  const LayerParams p = conv_from(random_tensor({5, 4, 1, 1}, 4), random_tensor({5}, 5));
  EXPECT_LT(max_abs_diff(conv2d(x, p, {1, 0}), reference::conv2d_direct(x, p, {1, 0})), 1e-12);
}

// ---------------------------------------------------------------- relu

TEST(Relu, Examples) {
  const Tensor y = relu(Tensor({3}, {-1.0, 0.0, 2.0}));
  EXPECT_EQ(y, Tensor({3}, {0.0, 0.0, 2.0}));
  const Tensor neg = relu(Tensor({2, 2}, -3.0));
  EXPECT_EQ(neg, Tensor({2, 2}, 0.0));
}

TEST(Relu, BackwardMasksNonPositive) {
  const Tensor g = relu_backward(Tensor({3}, {-1.0, 0.0, 2.0}), Tensor({3}, 1.0));
  EXPECT_EQ(g, Tensor({3}, {0.0, 0.0, 1.0}));
}

TEST(Relu, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(relu_gradcheck(seed), 1e-4);
}

// ---------------------------------------------------------------- max pool

TEST(MaxPool, Examples) {
  EXPECT_EQ(max_pool2d(Tensor({1, 2, 2}, {1, 2, 3, 4})).output, Tensor({1, 1, 1}, {4.0}));
  const Tensor pooled = max_pool2d(Tensor({2, 4, 6}, 1.5)).output;
  EXPECT_EQ(pooled, Tensor({2, 2, 3}, 1.5));
}

TEST(MaxPool, OddExtentRejected) {
  EXPECT_THROW(max_pool2d(Tensor({1, 3, 4})), ConfigError);
  EXPECT_THROW(max_pool2d(Tensor({1, 4, 5})), ConfigError);
}

TEST(MaxPool, TiesRouteToFirstIndex) {
  const MaxPoolResult r = max_pool2d(Tensor({1, 2, 2}, 7.0));
  ASSERT_EQ(r.argmax.size(), 1u);
  EXPECT_EQ(r.argmax[0], 0u);
}

TEST(MaxPool, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(max_pool_gradcheck(seed), 1e-4);
}

// ---------------------------------------------------------------- LRN

TEST(Lrn, ZeroAlphaDividesByKPowBeta) {
  const Tensor x = random_tensor({1, 3, 3}, 11);
  const Tensor y = lrn(x, LrnParams{2, 0.0, 0.75, 2.0});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i] / std::pow(2.0, 0.75));
}

TEST(Lrn, UnitKZeroAlphaIsIdentity) {
  const Tensor x = random_tensor({4, 2, 3}, 12);
  EXPECT_EQ(lrn(x, LrnParams{2, 0.0, 0.3, 1.0}), x);
}

TEST(Lrn, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(lrn_gradcheck(seed), 1e-4);
}

// ---------------------------------------------------------------- roi pool

TEST(RoiPool, WholeMapIdentity) {
  const Tensor f = random_tensor({1, 7, 7}, 3);
  const RoiPoolResult r = roi_pool(f, Box{0, 0, 7, 7}, RoiPoolParams{7, 7, 1.0});
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(r.output, f);
}

TEST(RoiPool, ConstantFeature) {
  const Tensor f({3, 20, 20}, 0.25);
  for (const Box& roi : {Box{4, 4, 30, 18}, Box{0, 0, 80, 80}, Box{50, 60, 9, 11}}) {
    EXPECT_EQ(roi_pool(f, roi, RoiPoolParams{}).output, Tensor({3, 7, 7}, 0.25));
  }
}

TEST(RoiPool, MatchesExhaustiveBinOracle) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-10.0, 70.0);
  std::uniform_real_distribution<double> ext(2.0, 60.0);
  const RoiPoolParams params;
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    const Tensor f = random_tensor({2, 16, 16}, trial);
    const Box roi{u(rng), u(rng), ext(rng), ext(rng)};
    const RoiPoolResult r = roi_pool(f, roi, params);
    if (r.degenerate) continue;
    EXPECT_EQ(r.output, roi_pool_oracle(f, roi, params)) << "trial " << trial;
  }
}

TEST(RoiPool, OutsideMapIsDegenerate) {
  const Tensor f = random_tensor({2, 8, 8}, 5);
  const RoiPoolResult r = roi_pool(f, Box{200, 200, 20, 20}, RoiPoolParams{});
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.output, Tensor({2, 7, 7}, 0.0));
}

TEST(RoiPool, BatchEqualsSerial) {
  const Tensor f = random_tensor({4, 16, 16}, 8);
  std::vector<Box> rois;
  for (int i = 0; i < 40; ++i) rois.push_back(Box{1.5 * i, 0.7 * i, 20.0 + i, 24.0});
  const auto fast = roi_pool_batch(f, rois, RoiPoolParams{});
  const auto slow = reference::roi_pool_serial(f, rois, RoiPoolParams{});
  for (std::size_t i = 0; i < rois.size(); ++i) EXPECT_EQ(fast[i].output, slow[i].output);
}

TEST(RoiPool, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(roi_pool_gradcheck(seed), 1e-4);
}

// ---------------------------------------------------------------- l2 normalize

TEST(L2Normalize, Examples) {
  const Tensor y = l2_normalize(Tensor({2}, {3.0, 4.0}));
  EXPECT_DOUBLE_EQ(y[0], 0.6);
  EXPECT_DOUBLE_EQ(y[1], 0.8);
  const Tensor unit({3}, {0.0, 1.0, 0.0});
  EXPECT_EQ(l2_normalize(unit), unit);
}

TEST(L2Normalize, UnitNormProperty) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double scale = std::pow(10.0, static_cast<double>(seed % 13) - 6.0);
    Tensor x = random_tensor({1 + seed % 50}, seed);
    for (double& v : x.values()) v *= scale;
    const Tensor y = l2_normalize(x);
    EXPECT_NEAR(std::sqrt(dot(y, y)), 1.0, 1e-9);
  }
}

TEST(L2Normalize, ZeroVectorRejected) {
  EXPECT_THROW(l2_normalize(Tensor({4}, 0.0)), NormalizationError);
  EXPECT_THROW(l2_normalize(Tensor({2}, 1e-14)), NormalizationError);
}

TEST(L2Normalize, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(l2_normalize_gradcheck(seed), 1e-4);
}

// ---------------------------------------------------------------- losses

TEST(WeightedSoftmax, UniformLogitsGiveLn2) {
  const Tensor logits({2, 5}, 0.3);
  const std::vector<std::size_t> labels = {0, 1, 1, 0, 1};
  const std::vector<double> weights = {1.0, 1.0};
  EXPECT_NEAR(weighted_softmax_loss(logits, labels, weights).loss, std::numbers::ln2, 1e-15);
}

TEST(WeightedSoftmax, ConfidentCorrectLogitsApproachZero) {
  const Tensor logits({2, 2}, {60.0, -60.0, -60.0, 60.0});
  const std::vector<std::size_t> labels = {0, 1};
  const std::vector<double> weights = {1.0, 1.0};
  EXPECT_LT(weighted_softmax_loss(logits, labels, weights).loss, 1e-40);
}

TEST(WeightedSoftmax, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(weighted_softmax_gradcheck(seed), 1e-4);
}

TEST(Contrastive, HandValues) {
  const Tensor a = random_tensor({6}, 1);
  EXPECT_EQ(contrastive_loss(a, a, true, 1.0).loss, 0.0);
  const Tensor far1({2}, {1.0, 0.0}), far2({2}, {-1.0, 0.0});  // D^2 = 4 >= margin
  EXPECT_EQ(contrastive_loss(far1, far2, false, 1.0).loss, 0.0);
  EXPECT_EQ(contrastive_loss(a, a, false, 1.0).loss, 0.5);
}

TEST(Contrastive, NonNegative) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Tensor a = random_tensor({5}, seed), b = random_tensor({5}, seed + 1000);
    EXPECT_GE(contrastive_loss(a, b, seed % 2 == 0, 0.1 + 0.02 * seed).loss, 0.0);
  }
}

TEST(Contrastive, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(contrastive_gradcheck(seed), 1e-4);
}

// ---------------------------------------------------------------- SGD

TEST(Sgd, PlainStep) {
  LayerParams p = conv_from(Tensor({1, 1, 1, 2}, {1.0, 2.0}), Tensor({1}, {0.5}));
  SgdState state{0.1, 0.0, 0.0, 1, {}};
  const ParamGrads g{Tensor({1, 1, 1, 2}, {0.5, -1.0}), Tensor({1}, {2.0})};
  LayerParams* params[] = {&p};
  sgd_step(params, std::span(&g, 1), state);
  EXPECT_DOUBLE_EQ(p.weights[0], 1.0 - 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(p.weights[1], 2.0 + 0.1 * 1.0);
  EXPECT_DOUBLE_EQ(p.bias[0], 0.5 - 0.1 * 2.0);
}

TEST(Sgd, FrozenLayerBitIdentical) {
  LayerParams p = conv_from(random_tensor({2, 2, 3, 3}, 3), random_tensor({2}, 4));
  p.frozen = true;
  const LayerParams before = p;
  const ParamGrads g{random_tensor(p.weights.shape(), 5), random_tensor(p.bias.shape(), 6)};
  SgdState state{0.5, 0.9, 0.01, 1, {}};
  LayerParams* params[] = {&p};
  for (int i = 0; i < 10; ++i) sgd_step(params, std::span(&g, 1), state);
  EXPECT_TRUE(bit_identical(p.weights, before.weights));
  EXPECT_TRUE(bit_identical(p.bias, before.bias));
}

TEST(Sgd, TwoMomentumStepsMatchHandUnrolling) {
  // v1 = -lr*m*(g1 + d*w0); w1 = w0 + v1; v2 = mu*v1 - lr*m*(g2 + d*w1); w2 = w1 + v2
  const double w0 = 0.8, g1 = 0.3, g2 = -0.6, lr = 0.01, mult = 3.0, mu = 0.9, decay = 0.0005;
  const double v1 = -lr * mult * (g1 + decay * w0);
  const double w1 = w0 + v1;
  const double v2 = mu * v1 - lr * mult * (g2 + decay * w1);
  const double w2 = w1 + v2;

  LayerParams p = conv_from(Tensor({1, 1, 1, 1}, w0), Tensor({1}, 0.0));
  p.lr_multiplier = mult;
  SgdState state{lr, mu, decay, 1, {}};
  LayerParams* params[] = {&p};
  const ParamGrads step1{Tensor({1, 1, 1, 1}, g1), Tensor({1}, 0.0)};
  const ParamGrads step2{Tensor({1, 1, 1, 1}, g2), Tensor({1}, 0.0)};
  sgd_step(params, std::span(&step1, 1), state);
  sgd_step(params, std::span(&step2, 1), state);
  EXPECT_DOUBLE_EQ(p.weights[0], w2);
}

// ---------------------------------------------------------------- finite differences

TEST(FiniteDiff, SumGivesOnes) {
  const Tensor x = random_tensor({7}, 2);
  const Tensor g = finite_diff_grad(
      [](const Tensor& v) {
        double s = 0.0;
        for (double e : v.values()) s += e;
        return s;
      },
      x, 1e-5);
  for (double v : g.values()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDiff, HalfSquaredNormGivesX) {
  const Tensor x = random_tensor({7}, 3);
  const Tensor g = finite_diff_grad([](const Tensor& v) { return 0.5 * dot(v, v); }, x, 1e-5);
  EXPECT_LT(max_abs_diff(g, x), 1e-9);
}

// ---------------------------------------------------------------- checkpoint

TEST(Checkpoint, BitExactRoundTrip) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NamedTensor> records;
    const std::size_t count = 1 + rng() % 5;
    for (std::size_t r = 0; r < count; ++r) {
      Shape shape;
      const std::size_t rank = 1 + rng() % 4;
      for (std::size_t a = 0; a < rank; ++a) shape.push_back(1 + rng() % 4);
      Tensor t(shape);
      for (double& v : t.values()) v = std::bit_cast<double>(rng() & 0x7FEFFFFFFFFFFFFFull);
      t[0] = -0.0;
      if (t.size() > 1) t[1] = std::numeric_limits<double>::denorm_min();
      records.push_back({"layer" + std::to_string(r) + ".weights", std::move(t)});
    }
    const std::string bytes = encode_checkpoint(records);
    EXPECT_EQ(bytes.substr(0, 5), "ADSM1");
    const std::vector<NamedTensor> back = decode_checkpoint(bytes);
    ASSERT_EQ(back.size(), records.size());
    for (std::size_t r = 0; r < count; ++r) {
      EXPECT_EQ(back[r].name, records[r].name);
      EXPECT_TRUE(bit_identical(back[r].value, records[r].value));
    }
    EXPECT_EQ(encode_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, LittleEndianLayout) {
  const NamedTensor rec{"a", Tensor({1}, 1.0)};
  const std::string bytes = encode_checkpoint(std::span(&rec, 1));
  // magic(5) + len(8) + "a"(1) + rank(8) + extent(8) + value(8)
  ASSERT_EQ(bytes.size(), 38u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 1);  // name length LSB first
  EXPECT_EQ(static_cast<unsigned char>(bytes[37]), 0x3F);  // 1.0 = 0x3FF0... MSB last
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  EXPECT_THROW(decode_checkpoint("ADSM2"), CheckpointError);
  const NamedTensor rec{"w", Tensor({3}, 2.0)};
  const std::string bytes = encode_checkpoint(std::span(&rec, 1));
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
}

TEST(Checkpoint, AssignReportsMismatchedExtent) {
  LayerParams layer = make_conv_params("conv3_1", 32, 16, 3, 3);
  LayerParams other = make_conv_params("conv3_1", 16, 16, 3, 3);
  const LayerParams* src[] = {&other};
  const auto records = to_records(src);
  LayerParams* dst[] = {&layer};
  try {
    assign_records(records, dst);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("conv3_1.weights"), std::string::npos);
  }
}
