#include "adasiam/reference.hpp"

namespace adasiam::reference {

Tensor conv2d_direct(const Tensor& input, const LayerParams& params, ConvGeometry geometry) {
  const Shape out_shape = conv2d_output_shape(input.shape(), params, geometry);
  const long in_h = static_cast<long>(input.dim(1));
  const long in_w = static_cast<long>(input.dim(2));
  const std::size_t in_c = input.dim(0);
  const std::size_t kh = params.weights.dim(2), kw = params.weights.dim(3);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < out_shape[0]; ++o) {
    for (std::size_t oy = 0; oy < out_shape[1]; ++oy) {
      for (std::size_t ox = 0; ox < out_shape[2]; ++ox) {
        double sum = params.bias[o];
        for (std::size_t c = 0; c < in_c; ++c) {
          for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
              const long y = static_cast<long>(oy * geometry.stride + i) - static_cast<long>(geometry.pad);
              const long x = static_cast<long>(ox * geometry.stride + j) - static_cast<long>(geometry.pad);
              if (y < 0 || y >= in_h || x < 0 || x >= in_w) continue;
              sum += params.weights[((o * in_c + c) * kh + i) * kw + j] *
                     input.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            }
          }
        }
        out.at(o, oy, ox) = sum;
      }
    }
  }
  return out;
}

std::vector<RoiPoolResult> roi_pool_serial(const Tensor& feature, std::span<const Box> rois,
                                           const RoiPoolParams& params) {
  std::vector<RoiPoolResult> results;
  results.reserve(rois.size());
  for (const Box& roi : rois) results.push_back(roi_pool(feature, roi, params));
  return results;
}

}  // namespace adasiam::reference
