// Production kernels against the serial references they are tested with.

#include <benchmark/benchmark.h>

#include <random>

#include "adasiam/layers.hpp"
#include "adasiam/reference.hpp"
#include "adasiam/siamese.hpp"
#include "adasiam/wcnn.hpp"

using namespace adasiam;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

LayerParams conv_layer(std::size_t out, std::size_t in, std::size_t k) {
  LayerParams p = make_conv_params("bench", out, in, k, k);
  std::mt19937_64 rng(1);
  init_he(p, rng);
  return p;
}

std::vector<Box> random_rois(std::size_t n, double extent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.0, extent * 0.7), size(8.0, extent * 0.3);
  std::vector<Box> rois;
  for (std::size_t i = 0; i < n; ++i) rois.push_back(Box{pos(rng), pos(rng), size(rng), size(rng)});
  return rois;
}

// conv3x3 at the first backbone block's shape
void BM_Conv2d(benchmark::State& state) {
  const Tensor x = random_tensor({8, 128, 128}, 1);
  const LayerParams p = conv_layer(8, 8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, p, ConvGeometry{1, 1}));
}
BENCHMARK(BM_Conv2d)->Unit(benchmark::kMillisecond);

void BM_Conv2dDirect(benchmark::State& state) {
  const Tensor x = random_tensor({8, 128, 128}, 1);
  const LayerParams p = conv_layer(8, 8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_direct(x, p, ConvGeometry{1, 1}));
}
BENCHMARK(BM_Conv2dDirect)->Unit(benchmark::kMillisecond);

void BM_RoiPoolBatch(benchmark::State& state) {
  const Tensor f = random_tensor({64, 32, 32}, 2);
  const auto rois = random_rois(static_cast<std::size_t>(state.range(0)), 128.0);
  for (auto _ : state) benchmark::DoNotOptimize(roi_pool_batch(f, rois, RoiPoolParams{}));
}
BENCHMARK(BM_RoiPoolBatch)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_RoiPoolSerial(benchmark::State& state) {
  const Tensor f = random_tensor({64, 32, 32}, 2);
  const auto rois = random_rois(static_cast<std::size_t>(state.range(0)), 128.0);
  for (auto _ : state) benchmark::DoNotOptimize(reference::roi_pool_serial(f, rois, RoiPoolParams{}));
}
BENCHMARK(BM_RoiPoolSerial)->Arg(256)->Unit(benchmark::kMicrosecond);

// 256 candidates through the matcher head and the WCNN in one batch
void BM_CandidateScoringBatched(benchmark::State& state) {
  const SiameseNet net(SiameseConfig{}, 1);
  const Tensor frame = random_tensor({3, 128, 128}, 4);
  const auto features = net.backbone(frame);
  const auto rois = random_rois(256, 128.0);
  std::mt19937_64 rng(5);
  const PointwiseHead wcnn = make_wcnn(net.config().embed_dim(), WcnnConfig{}, rng);
  for (auto _ : state) {
    const EmbedBatch e = net.embed_features(features, rois);
    benchmark::DoNotOptimize(wcnn_scores(wcnn, e.embeddings));
  }
}
BENCHMARK(BM_CandidateScoringBatched)->Unit(benchmark::kMillisecond);

void BM_CandidateScoringOneByOne(benchmark::State& state) {
  const SiameseNet net(SiameseConfig{}, 1);
  const Tensor frame = random_tensor({3, 128, 128}, 4);
  const auto features = net.backbone(frame);
  const auto rois = random_rois(256, 128.0);
  std::mt19937_64 rng(5);
  const PointwiseHead wcnn = make_wcnn(net.config().embed_dim(), WcnnConfig{}, rng);
  for (auto _ : state) {
    for (const Box& r : rois) {
      const EmbedBatch e = net.embed_features(features, std::span(&r, 1));
      if (e.valid[0]) benchmark::DoNotOptimize(wcnn_score(wcnn, e.embeddings[0]));
    }
  }
}
BENCHMARK(BM_CandidateScoringOneByOne)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
