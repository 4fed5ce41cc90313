#pragma once

#include <cstddef>
#include <span>

#include "adasiam/tensor.hpp"

namespace adasiam {

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean over the N samples of class_weights[label] * -log softmax(logits)[label].
/// logits is [classes, N] (class-major, so a CHW score map reshapes directly).
LossAndGrad weighted_softmax_loss(const Tensor& logits, std::span<const std::size_t> labels,
                                  std::span<const double> class_weights);

struct ContrastiveResult {
  double loss = 0.0;
  Tensor grad_a;
  Tensor grad_b;
};

/// Margin contrastive loss on squared distance:
/// 0.5*c*D^2 + 0.5*(1-c)*max(0, margin - D^2), D = ||a - b||.
ContrastiveResult contrastive_loss(const Tensor& a, const Tensor& b, bool same, double margin);

}  // namespace adasiam
