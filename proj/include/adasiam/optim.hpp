#pragma once

#include <functional>
#include <span>
#include <vector>

#include "adasiam/layers.hpp"

namespace adasiam {

struct SgdState {
  double global_lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t batch_size = 8;
  std::vector<ParamGrads> velocity;  // one entry per parameter set, created on first step
};

/// Momentum SGD with per-layer learning-rate multipliers:
///   v <- momentum*v - lr*mult*(g + decay*w);  w <- w + v.
/// Frozen layers are skipped entirely.
void sgd_step(std::span<LayerParams* const> params, std::span<const ParamGrads> grads,
              SgdState& state);

/// Central-difference gradient of a scalar function, one coordinate at a time.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

}  // namespace adasiam
