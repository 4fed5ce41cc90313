#pragma once

// Slow, obviously-correct reimplementations used to cross-check the kernels.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "adasiam/box.hpp"
#include "adasiam/layers.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam::testing {

// A cell belongs to a bin when the unit cell interval and the fractional bin
// interval overlap with positive length.
inline Tensor roi_pool_oracle(const Tensor& f, const Box& roi, const RoiPoolParams& p) {
  const long sx = std::lround(roi.x * p.spatial_scale);
  const long sy = std::lround(roi.y * p.spatial_scale);
  const long rw = std::max(std::lround(roi.right() * p.spatial_scale) - sx, 1L);
  const long rh = std::max(std::lround(roi.bottom() * p.spatial_scale) - sy, 1L);
  Tensor out({f.dim(0), p.pooled_h, p.pooled_w});
  for (std::size_t c = 0; c < f.dim(0); ++c) {
    for (std::size_t ph = 0; ph < p.pooled_h; ++ph) {
      for (std::size_t pw = 0; pw < p.pooled_w; ++pw) {
        const double y_lo = sy + static_cast<double>(ph) * rh / p.pooled_h;
        const double y_hi = sy + static_cast<double>(ph + 1) * rh / p.pooled_h;
        const double x_lo = sx + static_cast<double>(pw) * rw / p.pooled_w;
        const double x_hi = sx + static_cast<double>(pw + 1) * rw / p.pooled_w;
        double best = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t y = 0; y < f.dim(1); ++y) {
          for (std::size_t x = 0; x < f.dim(2); ++x) {
            const bool in_y = y + 1.0 > y_lo && static_cast<double>(y) < y_hi;
            const bool in_x = x + 1.0 > x_lo && static_cast<double>(x) < x_hi;
            if (in_y && in_x) {
              best = std::max(best, f.at(c, y, x));
              any = true;
            }
          }
        }
        out.at(c, ph, pw) = any ? best : 0.0;
      }
    }
  }
  return out;
}

// Counts unit pixels covered by integer boxes on a grid.
inline double pixel_iou(const Box& a, const Box& b) {
  const int lo_x = static_cast<int>(std::min(a.x, b.x)), hi_x = static_cast<int>(std::max(a.right(), b.right()));
  const int lo_y = static_cast<int>(std::min(a.y, b.y)), hi_y = static_cast<int>(std::max(a.bottom(), b.bottom()));
  long inter = 0, uni = 0;
  for (int y = lo_y; y < hi_y; ++y) {
    for (int x = lo_x; x < hi_x; ++x) {
      const bool in_a = x >= a.x && x < a.right() && y >= a.y && y < a.bottom();
      const bool in_b = x >= b.x && x < b.right() && y >= b.y && y < b.bottom();
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline Box random_int_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pos(-5, 40), ext(1, 25);
  return Box{static_cast<double>(pos(rng)), static_cast<double>(pos(rng)),
             static_cast<double>(ext(rng)), static_cast<double>(ext(rng))};
}

// Indices of the k largest values, ties to the lower index, by sorting everything.
inline std::vector<std::size_t> full_sort_top_k(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

}  // namespace adasiam::testing
