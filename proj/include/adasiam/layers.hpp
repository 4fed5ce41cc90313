#pragma once

// Layer kernels with hand-written backward passes. Every function is pure:
// forward takes the input and parameters, backward takes the forward input
// (or cached routing indices) plus the upstream gradient.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adasiam/box.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam {

struct LayerParams {
  std::string name;
  Tensor weights;  // conv: [out, in, kh, kw]
  Tensor bias;     // [out]
  double lr_multiplier = 1.0;
  bool frozen = false;
};

struct ParamGrads {
  Tensor weights;
  Tensor bias;
};

LayerParams make_conv_params(std::string name, std::size_t out_channels, std::size_t in_channels,
                             std::size_t kernel_h, std::size_t kernel_w);
// Zero-mean Gaussian weights, zero biases.
void init_gaussian(LayerParams& params, double stddev, std::mt19937_64& rng);
// He-normal weights scaled by fan-in, zero biases.
void init_he(LayerParams& params, std::mt19937_64& rng);

ParamGrads zero_grads_like(const LayerParams& params);
void accumulate(ParamGrads& into, const ParamGrads& from, double scale = 1.0);

// ---------------------------------------------------------------- conv2d

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

Shape conv2d_output_shape(const Shape& input, const LayerParams& params, ConvGeometry geometry);

Tensor conv2d(const Tensor& input, const LayerParams& params, ConvGeometry geometry);

struct ConvGradients {
  Tensor input;  // empty when not requested
  ParamGrads params;
};

ConvGradients conv2d_backward(const Tensor& input, const LayerParams& params,
                              ConvGeometry geometry, const Tensor& output_grad,
                              bool want_input_grad = true);

// ---------------------------------------------------------------- relu

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& output_grad);

// ---------------------------------------------------------------- max pool (2x2, stride 2)

struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

MaxPoolResult max_pool2d(const Tensor& input);
Tensor max_pool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                           const Tensor& output_grad);

// ---------------------------------------------------------------- LRN

/// Cross-channel local response normalization,
/// y_c = x_c / (k + alpha * sum_{|c'-c| <= depth_radius} x_{c'}^2)^beta.
struct LrnParams {
  std::size_t depth_radius = 2;
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 2.0;
};

Tensor lrn(const Tensor& input, const LrnParams& params);
Tensor lrn_backward(const Tensor& input, const LrnParams& params, const Tensor& output_grad);

// ---------------------------------------------------------------- ROI pooling

struct RoiPoolParams {
  std::size_t pooled_h = 7;
  std::size_t pooled_w = 7;
  double spatial_scale = 0.25;
};

/// Integer window of a roi on the feature grid, half-open. Bin (ph, pw) covers
/// rows [start_y + floor(ph*h/P), start_y + ceil((ph+1)*h/P)) clipped to the map.
struct RoiWindow {
  long start_x = 0;
  long start_y = 0;
  long width = 1;
  long height = 1;
};

RoiWindow roi_window(const Box& roi, double spatial_scale);

struct RoiPoolResult {
  Tensor output;                    // [C, pooled_h, pooled_w]
  std::vector<std::ptrdiff_t> argmax;  // flat feature index, -1 for empty bins
  bool degenerate = false;          // roi misses the feature map entirely
};

RoiPoolResult roi_pool(const Tensor& feature, const Box& roi, const RoiPoolParams& params);
std::vector<RoiPoolResult> roi_pool_batch(const Tensor& feature, std::span<const Box> rois,
                                          const RoiPoolParams& params);
// Adds the routed gradient into feature_grad (same shape as the pooled feature).
void roi_pool_backward(const RoiPoolResult& forward, const Tensor& output_grad,
                       Tensor& feature_grad);

// ---------------------------------------------------------------- l2 normalization

inline constexpr double kMinNormalizableNorm = 1e-12;

Tensor l2_normalize(const Tensor& input);
Tensor l2_normalize_backward(const Tensor& input, const Tensor& output_grad);

}  // namespace adasiam
