#include "adasiam/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adasiam/errors.hpp"
#include "blas.hpp"

namespace adasiam {

using detail::gemm;
using detail::Trans;

LayerParams make_conv_params(std::string name, std::size_t out_channels, std::size_t in_channels,
                             std::size_t kernel_h, std::size_t kernel_w) {
  LayerParams p;
  p.name = std::move(name);
  p.weights = Tensor({out_channels, in_channels, kernel_h, kernel_w});
  p.bias = Tensor({out_channels});
  return p;
}

void init_gaussian(LayerParams& params, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& w : params.weights.values()) w = normal(rng);
  params.bias.fill(0.0);
}

void init_he(LayerParams& params, std::mt19937_64& rng) {
  const auto& s = params.weights.shape();
  const double fan_in = static_cast<double>(s[1] * s[2] * s[3]);
  init_gaussian(params, std::sqrt(2.0 / fan_in), rng);
}

ParamGrads zero_grads_like(const LayerParams& params) {
  return ParamGrads{Tensor(params.weights.shape()), Tensor(params.bias.shape())};
}

void accumulate(ParamGrads& into, const ParamGrads& from, double scale) {
  for (std::size_t i = 0; i < into.weights.size(); ++i) into.weights[i] += scale * from.weights[i];
  for (std::size_t i = 0; i < into.bias.size(); ++i) into.bias[i] += scale * from.bias[i];
}

// ---------------------------------------------------------------- conv2d

Shape conv2d_output_shape(const Shape& input, const LayerParams& params, ConvGeometry geometry) {
  const Shape& ws = params.weights.shape();
  if (input.size() != 3) throw ConfigError("conv2d expects CHW input, got " + shape_string(input));
  if (ws.size() != 4) throw ConfigError(params.name + ": weights must be rank 4");
  if (ws[1] != input[0]) {
    throw ConfigError(params.name + ": input channels " + std::to_string(input[0]) +
                      " != kernel channels " + std::to_string(ws[1]));
  }
  if (params.bias.size() != ws[0]) {
    throw ConfigError(params.name + ": bias length " + std::to_string(params.bias.size()) +
                      " != output channels " + std::to_string(ws[0]));
  }
  if (geometry.stride == 0) throw ConfigError(params.name + ": stride must be positive");
  const std::size_t padded_h = input[1] + 2 * geometry.pad;
  const std::size_t padded_w = input[2] + 2 * geometry.pad;
  if (ws[2] > padded_h) {
    throw ConfigError(params.name + ": kernel height " + std::to_string(ws[2]) +
                      " exceeds padded input height " + std::to_string(padded_h));
  }
  if (ws[3] > padded_w) {
    throw ConfigError(params.name + ": kernel width " + std::to_string(ws[3]) +
                      " exceeds padded input width " + std::to_string(padded_w));
  }
  return {ws[0], (padded_h - ws[2]) / geometry.stride + 1,
          (padded_w - ws[3]) / geometry.stride + 1};
}

namespace {

bool is_pointwise(const LayerParams& params, ConvGeometry g) {
  return params.weights.dim(2) == 1 && params.weights.dim(3) == 1 && g.stride == 1 && g.pad == 0;
}

// Unrolls input patches into a (C*kh*kw) x (out_h*out_w) matrix.
std::vector<double> im2col(const Tensor& input, std::size_t kh, std::size_t kw, ConvGeometry g,
                           std::size_t out_h, std::size_t out_w) {
  const std::size_t channels = input.dim(0);
  const long in_h = static_cast<long>(input.dim(1));
  const long in_w = static_cast<long>(input.dim(2));
  const std::size_t plane = out_h * out_w;
  std::vector<double> col(channels * kh * kw * plane);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        double* row = col.data() + ((c * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          double* dst = row + oy * out_w;
          if (y < 0 || y >= in_h) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = input.data() + (c * in_h + y) * in_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long x = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            dst[ox] = (x < 0 || x >= in_w) ? 0.0 : src[x];
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const std::vector<double>& col, std::size_t kh, std::size_t kw, ConvGeometry g,
                std::size_t out_h, std::size_t out_w, Tensor& input_grad) {
  const std::size_t channels = input_grad.dim(0);
  const long in_h = static_cast<long>(input_grad.dim(1));
  const long in_w = static_cast<long>(input_grad.dim(2));
  const std::size_t plane = out_h * out_w;
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const double* row = col.data() + ((c * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          if (y < 0 || y >= in_h) continue;
          double* dst = input_grad.data() + (c * in_h + y) * in_w;
          const double* src = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long x = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            if (x >= 0 && x < in_w) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const LayerParams& params, ConvGeometry geometry) {
  const Shape out_shape = conv2d_output_shape(input.shape(), params, geometry);
  const std::size_t out_c = out_shape[0];
  const std::size_t plane = out_shape[1] * out_shape[2];
  const std::size_t kh = params.weights.dim(2);
  const std::size_t kw = params.weights.dim(3);
  const std::size_t depth = input.dim(0) * kh * kw;

  Tensor output(out_shape);
  for (std::size_t o = 0; o < out_c; ++o) {
    std::fill_n(output.data() + o * plane, plane, params.bias[o]);
  }
  if (is_pointwise(params, geometry)) {
    gemm(Trans::kNo, Trans::kNo, out_c, plane, depth, 1.0, params.weights.data(), depth,
         input.data(), plane, 1.0, output.data(), plane);
  } else {
    const std::vector<double> col = im2col(input, kh, kw, geometry, out_shape[1], out_shape[2]);
    gemm(Trans::kNo, Trans::kNo, out_c, plane, depth, 1.0, params.weights.data(), depth,
         col.data(), plane, 1.0, output.data(), plane);
  }
  return output;
}

ConvGradients conv2d_backward(const Tensor& input, const LayerParams& params,
                              ConvGeometry geometry, const Tensor& output_grad,
                              bool want_input_grad) {
  const Shape out_shape = conv2d_output_shape(input.shape(), params, geometry);
  if (output_grad.shape() != out_shape) {
    throw ConfigError(params.name + ": output gradient shape " +
                      shape_string(output_grad.shape()) + " != " + shape_string(out_shape));
  }
  const std::size_t out_c = out_shape[0];
  const std::size_t plane = out_shape[1] * out_shape[2];
  const std::size_t kh = params.weights.dim(2);
  const std::size_t kw = params.weights.dim(3);
  const std::size_t depth = input.dim(0) * kh * kw;

  ConvGradients grads{Tensor(), zero_grads_like(params)};
  for (std::size_t o = 0; o < out_c; ++o) {
    const double* g = output_grad.data() + o * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += g[i];
    grads.params.bias[o] = sum;
  }

  const bool pointwise = is_pointwise(params, geometry);
  std::vector<double> col;
  if (!pointwise) col = im2col(input, kh, kw, geometry, out_shape[1], out_shape[2]);
  const double* col_data = pointwise ? input.data() : col.data();

  gemm(Trans::kNo, Trans::kYes, out_c, depth, plane, 1.0, output_grad.data(), plane, col_data,
       plane, 0.0, grads.params.weights.data(), depth);

  if (want_input_grad) {
    grads.input = Tensor(input.shape());
    if (pointwise) {
      gemm(Trans::kYes, Trans::kNo, depth, plane, out_c, 1.0, params.weights.data(), depth,
           output_grad.data(), plane, 0.0, grads.input.data(), plane);
    } else {
      std::vector<double> col_grad(depth * plane);
      gemm(Trans::kYes, Trans::kNo, depth, plane, out_c, 1.0, params.weights.data(), depth,
           output_grad.data(), plane, 0.0, col_grad.data(), plane);
      col2im_add(col_grad, kh, kw, geometry, out_shape[1], out_shape[2], grads.input);
    }
  }
  return grads;
}

// ---------------------------------------------------------------- relu

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& output_grad) {
  Tensor grad = output_grad;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

// ---------------------------------------------------------------- max pool

MaxPoolResult max_pool2d(const Tensor& input) {
  if (input.rank() != 3) throw ConfigError("max_pool2d expects CHW input");
  const std::size_t channels = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  if (in_h % 2 != 0) throw ConfigError("max_pool2d: odd height " + std::to_string(in_h));
  if (in_w % 2 != 0) throw ConfigError("max_pool2d: odd width " + std::to_string(in_w));
  const std::size_t out_h = in_h / 2, out_w = in_w / 2;
  MaxPoolResult r{Tensor({channels, out_h, out_w}), std::vector<std::size_t>(channels * out_h * out_w)};
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        std::size_t best = (c * in_h + 2 * oy) * in_w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * in_h + 2 * oy + dy) * in_w + 2 * ox + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t o = (c * out_h + oy) * out_w + ox;
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor max_pool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                           const Tensor& output_grad) {
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < output_grad.size(); ++i) grad[argmax[i]] += output_grad[i];
  return grad;
}

// ---------------------------------------------------------------- LRN

namespace {

// Per-element denominator base k + alpha * window sum of squares.
Tensor lrn_scale(const Tensor& input, const LrnParams& p) {
  const std::size_t channels = input.dim(0);
  const std::size_t plane = input.dim(1) * input.dim(2);
  Tensor scale(input.shape(), p.k);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t lo = c >= p.depth_radius ? c - p.depth_radius : 0;
    const std::size_t hi = std::min(channels - 1, c + p.depth_radius);
    double* dst = scale.data() + c * plane;
    for (std::size_t n = lo; n <= hi; ++n) {
      const double* src = input.data() + n * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += p.alpha * src[i] * src[i];
    }
  }
  return scale;
}

}  // namespace

Tensor lrn(const Tensor& input, const LrnParams& params) {
  if (input.rank() != 3) throw ConfigError("lrn expects CHW input");
  if (!(params.k > 0.0)) throw ConfigError("lrn: k must be positive");
  const Tensor scale = lrn_scale(input, params);
  Tensor out(input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = input[i] * std::pow(scale[i], -params.beta);
  }
  return out;
}

Tensor lrn_backward(const Tensor& input, const LrnParams& params, const Tensor& output_grad) {
  const std::size_t channels = input.dim(0);
  const std::size_t plane = input.dim(1) * input.dim(2);
  const Tensor scale = lrn_scale(input, params);
  // ratio = g * x * S^(-beta-1), summed over the (symmetric) window of each channel.
  Tensor ratio(input.shape());
  Tensor grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    ratio[i] = output_grad[i] * input[i] * std::pow(scale[i], -params.beta - 1.0);
    grad[i] = output_grad[i] * std::pow(scale[i], -params.beta);
  }
  const double factor = 2.0 * params.alpha * params.beta;
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t lo = c >= params.depth_radius ? c - params.depth_radius : 0;
    const std::size_t hi = std::min(channels - 1, c + params.depth_radius);
    double* dst = grad.data() + c * plane;
    const double* x = input.data() + c * plane;
    for (std::size_t n = lo; n <= hi; ++n) {
      const double* r = ratio.data() + n * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] -= factor * x[i] * r[i];
    }
  }
  return grad;
}

// ---------------------------------------------------------------- ROI pooling

RoiWindow roi_window(const Box& roi, double spatial_scale) {
  RoiWindow w;
  w.start_x = std::lround(roi.x * spatial_scale);
  w.start_y = std::lround(roi.y * spatial_scale);
  const long end_x = std::lround(roi.right() * spatial_scale);
  const long end_y = std::lround(roi.bottom() * spatial_scale);
  w.width = std::max(end_x - w.start_x, 1L);
  w.height = std::max(end_y - w.start_y, 1L);
  return w;
}

RoiPoolResult roi_pool(const Tensor& feature, const Box& roi, const RoiPoolParams& params) {
  if (feature.rank() != 3) throw ConfigError("roi_pool expects CHW feature");
  if (!roi.valid()) throw GeometryError("roi_pool: roi must have positive width and height");
  if (!(params.spatial_scale > 0.0)) throw ConfigError("roi_pool: spatial_scale must be positive");
  const std::size_t channels = feature.dim(0);
  const long fh = static_cast<long>(feature.dim(1));
  const long fw = static_cast<long>(feature.dim(2));
  const std::size_t ph_n = params.pooled_h, pw_n = params.pooled_w;

  RoiPoolResult r{Tensor({channels, ph_n, pw_n}),
                  std::vector<std::ptrdiff_t>(channels * ph_n * pw_n, -1), false};
  const RoiWindow win = roi_window(roi, params.spatial_scale);
  if (win.start_x >= fw || win.start_y >= fh || win.start_x + win.width <= 0 ||
      win.start_y + win.height <= 0) {
    r.degenerate = true;
    return r;
  }
  const double bin_h = static_cast<double>(win.height) / static_cast<double>(ph_n);
  const double bin_w = static_cast<double>(win.width) / static_cast<double>(pw_n);
  for (std::size_t ph = 0; ph < ph_n; ++ph) {
    const long y0 = std::clamp(win.start_y + static_cast<long>(std::floor(ph * bin_h)), 0L, fh);
    const long y1 = std::clamp(win.start_y + static_cast<long>(std::ceil((ph + 1) * bin_h)), 0L, fh);
    for (std::size_t pw = 0; pw < pw_n; ++pw) {
      const long x0 = std::clamp(win.start_x + static_cast<long>(std::floor(pw * bin_w)), 0L, fw);
      const long x1 = std::clamp(win.start_x + static_cast<long>(std::ceil((pw + 1) * bin_w)), 0L, fw);
      if (y1 <= y0 || x1 <= x0) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        std::ptrdiff_t best = -1;
        double best_value = -std::numeric_limits<double>::infinity();
        for (long y = y0; y < y1; ++y) {
          const std::ptrdiff_t row = (static_cast<std::ptrdiff_t>(c) * fh + y) * fw;
          for (long x = x0; x < x1; ++x) {
            if (feature[row + x] > best_value) {
              best_value = feature[row + x];
              best = row + x;
            }
          }
        }
        const std::size_t o = (c * ph_n + ph) * pw_n + pw;
        r.output[o] = best_value;
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

std::vector<RoiPoolResult> roi_pool_batch(const Tensor& feature, std::span<const Box> rois,
                                          const RoiPoolParams& params) {
  std::vector<RoiPoolResult> results(rois.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < rois.size(); ++i) results[i] = roi_pool(feature, rois[i], params);
  return results;
}

void roi_pool_backward(const RoiPoolResult& forward, const Tensor& output_grad,
                       Tensor& feature_grad) {
  for (std::size_t i = 0; i < output_grad.size(); ++i) {
    if (forward.argmax[i] >= 0) feature_grad[static_cast<std::size_t>(forward.argmax[i])] += output_grad[i];
  }
}

// ---------------------------------------------------------------- l2 normalization

namespace {

double l2_norm(const Tensor& t) {
  double sq = 0.0;
  for (double v : t.values()) sq += v * v;
  return std::sqrt(sq);
}

}  // namespace

Tensor l2_normalize(const Tensor& input) {
  const double norm = l2_norm(input);
  if (!(norm >= kMinNormalizableNorm)) {
    throw NormalizationError("l2_normalize: norm " + std::to_string(norm) + " below threshold");
  }
  Tensor out = input;
  for (double& v : out.values()) v /= norm;
  return out;
}

Tensor l2_normalize_backward(const Tensor& input, const Tensor& output_grad) {
  const double norm = l2_norm(input);
  if (!(norm >= kMinNormalizableNorm)) throw NormalizationError("l2_normalize_backward: zero norm");
  double dot = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) dot += input[i] * output_grad[i];
  dot /= norm;  // y . g with y = x / norm
  Tensor grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad[i] = (output_grad[i] - (input[i] / norm) * dot) / norm;
  }
  return grad;
}

}  // namespace adasiam
