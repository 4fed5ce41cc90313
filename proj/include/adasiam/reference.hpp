#pragma once

// Serial reference kernels. Kept for tests and the kernel benchmark; the
// production paths in layers.hpp are im2col/BLAS and OpenMP based.

#include <span>
#include <vector>

#include "adasiam/layers.hpp"

namespace adasiam::reference {

/// Direct six-nested-loop convolution.
Tensor conv2d_direct(const Tensor& input, const LayerParams& params, ConvGeometry geometry);

/// One roi at a time, no parallel region.
std::vector<RoiPoolResult> roi_pool_serial(const Tensor& feature, std::span<const Box> rois,
                                           const RoiPoolParams& params);

}  // namespace adasiam::reference
