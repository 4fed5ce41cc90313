#include <gtest/gtest.h>

#include <cmath>

#include "adasiam/errors.hpp"
#include "adasiam/geometry.hpp"
#include "adasiam/siamese.hpp"
#include "adasiam/synth.hpp"
#include "test_util.hpp"

using namespace adasiam;
using namespace adasiam::testing;

namespace {

SiameseConfig tiny_config() {
  SiameseConfig c;
  c.input_size = 16;
  c.widths = {2, 2, 3, 3, 3};
  c.fc_width = 4;
  return c;
}

Embedding unit_vector(std::size_t n, std::uint64_t seed) { return l2_normalize(random_tensor({n}, seed)); }

}  // namespace

TEST(Siamese, EmbedDimensionAndUnitNorm) {
  const SiameseNet net(SiameseConfig{}, 1);
  EXPECT_EQ(net.config().embed_dim(), 3136u + 3136u + 512u);
  const Tensor img = random_tensor({3, 128, 128}, 2, 0.0, 1.0);
  const std::vector<Box> rois = {Box{10, 10, 30, 20}, Box{40, 50, 24, 24}, Box{10, 10, 30, 20}};
  const auto emb = net.embed(img, rois);
  for (const auto& e : emb) {
    EXPECT_EQ(e.size(), net.config().embed_dim());
    EXPECT_NEAR(std::sqrt(dot(e, e)), 1.0, 1e-9);
  }
  EXPECT_TRUE(bit_identical(emb[0], emb[2]));
}

TEST(Siamese, BatchedEqualsSingleRoi) {
  const SiameseNet net(SiameseConfig{}, 3);
  const Tensor img = random_tensor({3, 128, 128}, 4, 0.0, 1.0);
  std::vector<Box> rois;
  for (int i = 0; i < 12; ++i) rois.push_back(Box{5.0 + 7 * i, 3.0 + 5 * i, 20.0 + i, 18.0 + 2 * i});
  const auto batch = net.embed(img, rois);
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const auto one = net.embed(img, std::span(&rois[i], 1));
    EXPECT_LE(max_abs_diff(batch[i], one[0]), 1e-12) << i;
  }
}

TEST(Siamese, DegenerateRoiRaises) {
  const SiameseNet net(SiameseConfig{}, 3);
  const Tensor img = random_tensor({3, 128, 128}, 4, 0.0, 1.0);
  const Box outside{500, 500, 10, 10};
  EXPECT_THROW(net.embed(img, std::span(&outside, 1)), NormalizationError);
  EXPECT_FALSE(net.embed_batch(img, std::span(&outside, 1)).valid[0]);
}

TEST(Siamese, WholeNetGradientMatchesFiniteDifferences) {
  SiameseNet net(tiny_config(), 5);
  const Tensor img = random_tensor({3, 16, 16}, 6, 0.0, 1.0);
  const std::vector<Box> rois = {Box{0, 0, 16, 16}, Box{2, 3, 10, 9}};
  std::vector<Tensor> r;
  for (std::size_t i = 0; i < rois.size(); ++i) r.push_back(random_tensor({net.config().embed_dim()}, 10 + i));
  const auto objective = [&](const SiameseNet& n) {
    const auto e = n.embed(img, rois);
    return dot(r[0], e[0]) + dot(r[1], e[1]);
  };
  std::vector<ParamGrads> grads;
  net.backward_trace(net.forward_trace(img, rois), r, grads);
  auto layers = net.layers();
  for (std::size_t li : {2u, 7u, 12u, 13u}) {
    LayerParams& p = *layers[li];
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& w) {
          const Tensor saved = p.weights;
          p.weights = w;
          const double v = objective(net);
          p.weights = saved;
          return v;
        },
        p.weights, 1e-6);
    EXPECT_LT(relative_error(grads[li].weights, fd), 1e-4) << p.name;
  }
  // first block is frozen: no gradient reaches it
  for (double v : grads[0].weights.values()) EXPECT_EQ(v, 0.0);
}

TEST(MatchScore, Examples) {
  const Embedding x = unit_vector(9, 1);
  EXPECT_NEAR(match_score(x, x), 1.0, 1e-15);
  Embedding neg = x;
  for (double& v : neg.values()) v = -v;
  EXPECT_NEAR(match_score(x, neg), -1.0, 1e-15);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Embedding p = unit_vector(33, s), q = unit_vector(33, s + 100);
    EXPECT_NEAR(match_score(p, q), match_score(q, p), 1e-15);
  }
}

TEST(AdaptiveBuffer, HandValue) {
  // anchor . u = 0.9, b1 . u = 0.6, b2 . u = 0.8 on orthonormal axes
  const Embedding u({4}, {1, 0, 0, 0});
  const Embedding anchor({2}, {0.9, std::sqrt(1 - 0.81)});
  const auto pad = [](double a) { return Embedding({4}, {a, std::sqrt(1 - a * a), 0, 0}); };
  AdaptiveBuffer buf(pad(0.9), 35);
  buf.push(pad(0.6));
  buf.push(pad(0.8));
  EXPECT_NEAR(buffered_similarity(u, buf, 0.7), 0.84, 1e-12);
  EXPECT_EQ(anchor.size(), 2u);
}

TEST(AdaptiveBuffer, CollapsesToAnchor) {
  const Embedding a = unit_vector(16, 1), u = unit_vector(16, 2);
  AdaptiveBuffer buf(a, 35);
  EXPECT_EQ(buffered_similarity(u, buf, 0.3), match_score(a, u));
  for (int i = 0; i < 5; ++i) buf.push(a);
  for (double eta : {0.0, 0.3, 0.7, 1.0}) EXPECT_NEAR(buffered_similarity(u, buf, eta), match_score(a, u), 1e-15);
  EXPECT_NEAR(buffered_similarity(a, buf, 0.7), 1.0, 1e-15);
  buf.push(unit_vector(16, 9));
  EXPECT_EQ(buffered_similarity(u, buf, 1.0), match_score(a, u));
}

TEST(AdaptiveBuffer, FifoEvictionAndImmutableAnchor) {
  const Embedding a = unit_vector(8, 1);
  AdaptiveBuffer buf(a, 35);
  for (std::size_t i = 0; i < 35; ++i) buf.push(Embedding({1}, static_cast<double>(i)));
  EXPECT_EQ(buf.size(), 35u);
  for (std::size_t i = 0; i < 35; ++i) EXPECT_EQ(buf.entries()[i][0], static_cast<double>(i));
  buf.push(Embedding({1}, 35.0));
  EXPECT_EQ(buf.size(), 35u);
  EXPECT_EQ(buf.entries().front()[0], 1.0);
  for (std::size_t i = 36; i < 136; ++i) buf.push(Embedding({1}, static_cast<double>(i)));
  EXPECT_TRUE(bit_identical(buf.anchor(), a));
  EXPECT_EQ(buf.entries().front()[0], 101.0);
  EXPECT_EQ(buf.entries().back()[0], 135.0);
}

TEST(AdaptiveBuffer, BoundedAndMonotone) {
  const Embedding a = unit_vector(12, 3), u = unit_vector(12, 4);
  AdaptiveBuffer buf(a, 4);
  for (std::uint64_t s = 0; s < 6; ++s) {
    buf.push(unit_vector(12, 20 + s));
    const double v = buffered_similarity(u, buf, 0.7);
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  AdaptiveBuffer closer = buf;
  closer.push(u);  // replaces the oldest entry with one scoring exactly 1
  AdaptiveBuffer replaced(a, 4);
  for (std::size_t i = 1; i < buf.size(); ++i) replaced.push(buf.entries()[i]);
  replaced.push(buf.entries().front());
  EXPECT_GE(buffered_similarity(u, closer, 0.7), buffered_similarity(u, replaced, 0.7));
}

namespace {

std::vector<Sequence> toy_corpus() {
  std::vector<Sequence> corpus;
  for (std::uint64_t k = 0; k < 2; ++k) {
    SequenceSpec s;
    s.name = "toy" + std::to_string(k);
    s.length = 8;
    s.width = s.height = 64;
    s.target_w = 16;
    s.target_h = 14;
    s.texture_seed = 40 + k;
    corpus.push_back(generate_sequence(s, 500 + k));
  }
  return corpus;
}

}  // namespace

TEST(TrainingPairs, LabelsMatchPixelOracle) {
  const auto corpus = toy_corpus();
  const auto pairs = build_training_pairs(corpus, PairOptions{}, 17);
  ASSERT_FALSE(pairs.empty());
  std::size_t pos = 0, neg = 0;
  for (const PairGroup& g : pairs) {
    const Box& gt = corpus[g.sequence].ground_truth[g.frame_b];
    EXPECT_NE(g.frame_a, g.frame_b);
    for (std::size_t k = 0; k < g.candidates.size(); ++k) {
      const Box& c = g.candidates[k];
      // integer boxes: count shared pixels directly
      long inter = 0;
      for (long y = static_cast<long>(c.y); y < static_cast<long>(c.bottom()); ++y)
        for (long x = static_cast<long>(c.x); x < static_cast<long>(c.right()); ++x)
          inter += x >= gt.x && x < gt.right() && y >= gt.y && y < gt.bottom();
      const double o = static_cast<double>(inter) / (c.area() + gt.area() - static_cast<double>(inter));
      ASSERT_TRUE(o > 0.7 || o < 0.5);
      EXPECT_EQ(g.same[k], o > 0.7);
      (g.same[k] ? pos : neg) += 1;
    }
  }
  EXPECT_GT(pos, 0u);
  EXPECT_GT(neg, 0u);
  // exact gt of the second frame is a positive
  const Box& gt = corpus[0].ground_truth[3];
  EXPECT_EQ(label_by_iou(std::span(&gt, 1), gt, 0.7, 0.5)[0], SampleLabel::kPositive);
}

TEST(TrainingPairs, ShortSequencesSkipped) {
  Sequence one;
  one.name = "one";
  one.frames.push_back(Tensor({3, 8, 8}));
  one.ground_truth.push_back(Box{1, 1, 4, 4});
  EXPECT_TRUE(build_training_pairs(std::span(&one, 1), PairOptions{}, 1).empty());
}

TEST(TrainSiamese, ZeroEpochsAndFrozenBlock) {
  const auto corpus = toy_corpus();
  SiameseConfig cfg;
  cfg.input_size = 64;
  SiameseNet net(cfg, 2);
  PairOptions po;
  po.groups_per_sequence = 2;
  const auto pairs = build_training_pairs(corpus, po, 3);
  const SiameseNet before = net;
  SiameseTrainOptions opt;
  opt.epochs = 0;
  train_siamese(net, corpus, pairs, opt);
  for (std::size_t i = 0; i < net.layers().size(); ++i)
    EXPECT_TRUE(bit_identical(net.layers()[i]->weights, before.layers()[i]->weights));
  opt.epochs = 2;
  train_siamese(net, corpus, pairs, opt);
  const auto a = net.layers();
  const auto b = before.layers();
  EXPECT_TRUE(bit_identical(a[0]->weights, b[0]->weights));
  EXPECT_TRUE(bit_identical(a[1]->bias, b[1]->bias));
  EXPECT_FALSE(bit_identical(a[13]->weights, b[13]->weights));
}

TEST(TrainSiamese, ToyCorpusLossHalves) {
  const auto corpus = toy_corpus();
  SiameseConfig cfg;
  cfg.input_size = 64;
  SiameseNet net(cfg, 2);
  PairOptions po;
  po.groups_per_sequence = 4;
  const auto pairs = build_training_pairs(corpus, po, 5);
  const TrainingLog log = train_siamese(net, corpus, pairs, SiameseTrainOptions{});
  ASSERT_EQ(log.epoch_losses.size(), 30u);
  const double final_loss = mean_pair_loss(net, corpus, pairs);
  EXPECT_LT(final_loss, 0.5 * log.initial_loss) << log.initial_loss << " -> " << final_loss;
}
