#pragma once

// Two stacked 1x1 convolutions with a ReLU between them. Used for the motion
// head over a feature map and for the weighting head over a batch of
// embeddings laid out as a [dim, N, 1] tensor.

#include <array>
#include <random>
#include <string>

#include "adasiam/layers.hpp"

namespace adasiam {

struct PointwiseHead {
  LayerParams first;
  LayerParams second;

  std::array<LayerParams*, 2> layers() { return {&first, &second}; }
  std::array<const LayerParams*, 2> layers() const { return {&first, &second}; }
  std::size_t input_channels() const { return first.weights.dim(1); }
};

/// Weights N(0, stddev), zero biases.
PointwiseHead make_pointwise_head(const std::string& prefix, std::size_t in, std::size_t hidden,
                                  std::size_t out, double stddev, std::mt19937_64& rng);

struct HeadTrace {
  Tensor hidden_pre;  // first layer output before the ReLU
  Tensor logits;
};

HeadTrace head_forward(const PointwiseHead& head, const Tensor& input);
Tensor head_logits(const PointwiseHead& head, const Tensor& input);

std::array<ParamGrads, 2> head_backward(const PointwiseHead& head, const Tensor& input,
                                        const HeadTrace& trace, const Tensor& logit_grad);

/// Stacks rank-1 vectors as the columns of a [dim, N, 1] tensor.
Tensor stack_columns(std::span<const Tensor> vectors);

}  // namespace adasiam
