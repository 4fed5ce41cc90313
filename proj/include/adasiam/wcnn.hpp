#pragma once

// Sequence-specific weighting head over Siamese embeddings and the fused
// candidate score exp(beta * w) * sim.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "adasiam/geometry.hpp"
#include "adasiam/head.hpp"
#include "adasiam/optim.hpp"
#include "adasiam/siamese.hpp"

namespace adasiam {

struct WcnnConfig {
  std::size_t hidden = 64;
  double beta = 0.2;
  double lr = 0.15;
  double momentum = 0.005;
  double weight_decay = 0.0005;
  std::size_t batch_positives = 32;
  std::size_t batch_negatives = 96;
  std::size_t negative_pool = 256;   // negatives scored per iteration when mining
  std::size_t initial_iterations = 100;
  std::size_t online_iterations = 10;
  double input_scale = 20.0;  // embeddings are multiplied by this before entering the head

  SgdState make_sgd() const { return SgdState{lr, momentum, weight_decay, batch_positives + batch_negatives, {}}; }
};

PointwiseHead make_wcnn(std::size_t embed_dim, const WcnnConfig& cfg, std::mt19937_64& rng);

/// Positive-class raw logit per embedding, one batched pass.
std::vector<double> wcnn_scores(const PointwiseHead& wcnn, std::span<const Embedding> embeddings);
double wcnn_score(const PointwiseHead& wcnn, const Embedding& embedding);

inline double combine_scores(double sim, double weight, double beta) {
  return std::exp(beta * weight) * sim;
}

struct ScoredCandidate {
  BoxState state;
  double sim = 0.0;
  double weight = 0.0;
  double fused = 0.0;
};

struct StateEstimate {
  BoxState state;
  double score = 0.0;
  std::vector<std::size_t> top;  // indices of the averaged candidates, best first
};

/// Mean state and mean fused score of the k best candidates, ties by index.
/// Throws LostTargetError on an empty list.
StateEstimate estimate_state(std::span<const ScoredCandidate> candidates, std::size_t k = 5);

/// Indices of the k largest logits, ties by index, in descending order.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);
/// The k negatives the current head scores most positively.
std::vector<std::size_t> mine_hard_negatives(const PointwiseHead& wcnn,
                                             std::span<const Embedding> negatives, std::size_t k);

using EmbeddingSource = std::function<Embedding(std::size_t)>;

struct WcnnTrainResult {
  double first_loss = 0.0;
  double last_loss = 0.0;
  bool skipped = false;
};

/// Each iteration: batch_positives positives drawn without replacement, a
/// random pool of negatives scored by the current head, the top
/// batch_negatives of them kept; one SGD step on the mean softmax loss.
/// With no positives the update is skipped and a warning printed.
WcnnTrainResult train_wcnn(PointwiseHead& wcnn, std::size_t n_pos, const EmbeddingSource& positive,
                           std::size_t n_neg, const EmbeddingSource& negative, const WcnnConfig& cfg,
                           std::size_t iterations, SgdState& sgd, std::uint64_t seed);
WcnnTrainResult train_wcnn(PointwiseHead& wcnn, std::span<const Embedding> positives,
                           std::span<const Embedding> negatives, const WcnnConfig& cfg,
                           std::size_t iterations, SgdState& sgd, std::uint64_t seed);

}  // namespace adasiam
