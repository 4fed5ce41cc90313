#include "adasiam/wcnn.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "adasiam/errors.hpp"
#include "adasiam/loss.hpp"

namespace adasiam {

PointwiseHead make_wcnn(std::size_t embed_dim, const WcnnConfig& cfg, std::mt19937_64& rng) {
  return make_pointwise_head("wcnn", embed_dim, cfg.hidden, 2, 0.01, rng);
}

std::vector<double> wcnn_scores(const PointwiseHead& wcnn, std::span<const Embedding> embeddings) {
  if (embeddings.empty()) return {};
  const Tensor logits = head_logits(wcnn, stack_columns(embeddings));
  const std::size_t n = embeddings.size();
  return std::vector<double>(logits.data() + n, logits.data() + 2 * n);
}

double wcnn_score(const PointwiseHead& wcnn, const Embedding& embedding) {
  return wcnn_scores(wcnn, std::span(&embedding, 1))[0];
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(k);
  return idx;
}

StateEstimate estimate_state(std::span<const ScoredCandidate> candidates, std::size_t k) {
  if (candidates.empty()) throw LostTargetError("estimate_state: no candidates");
  std::vector<double> fused;
  fused.reserve(candidates.size());
  for (const ScoredCandidate& c : candidates) fused.push_back(c.fused);
  StateEstimate out;
  out.top = top_k_indices(fused, k);
  out.state = BoxState{0.0, 0.0, 0.0};
  for (std::size_t i : out.top) {
    out.state.cx += candidates[i].state.cx;
    out.state.cy += candidates[i].state.cy;
    out.state.s += candidates[i].state.s;
    out.score += candidates[i].fused;
  }
  const double n = static_cast<double>(out.top.size());
  out.state.cx /= n;
  out.state.cy /= n;
  out.state.s /= n;
  out.score /= n;
  return out;
}

std::vector<std::size_t> mine_hard_negatives(const PointwiseHead& wcnn,
                                             std::span<const Embedding> negatives, std::size_t k) {
  return top_k_indices(wcnn_scores(wcnn, negatives), k);
}

namespace {

// First k entries of a seeded Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> draw_distinct(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

WcnnTrainResult train_wcnn(PointwiseHead& wcnn, std::size_t n_pos, const EmbeddingSource& positive,
                           std::size_t n_neg, const EmbeddingSource& negative, const WcnnConfig& cfg,
                           std::size_t iterations, SgdState& sgd, std::uint64_t seed) {
  WcnnTrainResult result;
  if (iterations == 0) return result;
  if (n_pos == 0) {
    std::cerr << "warning: train_wcnn: no positive samples; update skipped\n";
    result.skipped = true;
    return result;
  }
  std::mt19937_64 rng(seed);
  auto layers = wcnn.layers();
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<Embedding> batch;
    std::vector<std::size_t> labels;
    for (std::size_t i : draw_distinct(n_pos, cfg.batch_positives, rng)) {
      batch.push_back(positive(i));
      labels.push_back(1);
    }
    if (n_neg > 0) {
      std::vector<Embedding> pool;
      for (std::size_t i : draw_distinct(n_neg, std::max(cfg.negative_pool, cfg.batch_negatives), rng)) pool.push_back(negative(i));
      for (std::size_t i : mine_hard_negatives(wcnn, pool, cfg.batch_negatives)) {
        batch.push_back(std::move(pool[i]));
        labels.push_back(0);
      }
    }
    const Tensor x = stack_columns(batch);
    const HeadTrace trace = head_forward(wcnn, x);
    const Tensor logits = trace.logits.reshaped({2, batch.size()});
    const double unit[2] = {1.0, 1.0};
    const LossAndGrad lg = weighted_softmax_loss(logits, labels, unit);
    if (!std::isfinite(lg.loss)) throw TrainingError("train_wcnn: non-finite loss at iteration " + std::to_string(it + 1));
    if (it == 0) result.first_loss = lg.loss;
    result.last_loss = lg.loss;
    const auto g = head_backward(wcnn, x, trace, lg.grad.reshaped(trace.logits.shape()));
    sgd_step(layers, g, sgd);
  }
  return result;
}

WcnnTrainResult train_wcnn(PointwiseHead& wcnn, std::span<const Embedding> positives,
                           std::span<const Embedding> negatives, const WcnnConfig& cfg,
                           std::size_t iterations, SgdState& sgd, std::uint64_t seed) {
  return train_wcnn(
      wcnn, positives.size(), [&](std::size_t i) { return positives[i]; }, negatives.size(),
      [&](std::size_t i) { return negatives[i]; }, cfg, iterations, sgd, seed);
}

}  // namespace adasiam
