#pragma once

#include <string>
#include <vector>

#include "adasiam/box.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam {

// A video: CHW frames in [0, 1] and one ground-truth box per frame.
struct Sequence {
  std::string name;
  std::vector<Tensor> frames;
  std::vector<Box> ground_truth;

  std::size_t length() const { return frames.size(); }
  std::size_t width() const { return frames.empty() ? 0 : frames.front().dim(2); }
  std::size_t height() const { return frames.empty() ? 0 : frames.front().dim(1); }
};

}  // namespace adasiam
