#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "adasiam/box.hpp"
#include "adasiam/tensor.hpp"

namespace adasiam {

// Initial target extent; every state's box is this size times its scale.
struct TargetSize {
  double w = 1.0;
  double h = 1.0;
};

// Target state (center, scale relative to the first-frame box).
struct BoxState {
  double cx = 0.0;
  double cy = 0.0;
  double s = 1.0;

  friend bool operator==(const BoxState&, const BoxState&) = default;
};

Box to_box(const BoxState& state, TargetSize base);
BoxState to_state(const Box& box, TargetSize base);

double iou(const Box& a, const Box& b);
double center_distance(const Box& a, const Box& b);

struct SamplerConfig {
  std::size_t n_candidates = 256;
  double xy_variance_factor = 0.09;  // translation variance = factor * v^2
  double scale_variance = 0.25;      // variance of the log-step exponent
  double scale_step = 1.1;
  double split_ratio = 0.5;  // share drawn around the first center when two are given
  double min_scale = 0.2;
  double max_scale = 5.0;
};

/// Gaussian candidate states around one or two centers. With two centers,
/// ceil(split_ratio * n) are drawn around centers[0] and the rest around
/// centers[1]. Draws are consumed in candidate order from one stream, so the
/// perturbations do not depend on which center a candidate belongs to.
std::vector<BoxState> sample_candidates(std::span<const BoxState> centers, TargetSize base,
                                        const SamplerConfig& cfg, std::uint64_t seed);

enum class SampleLabel { kPositive, kNegative, kIgnore };

/// IoU > pos_thresh -> positive, IoU < neg_thresh -> negative, otherwise ignore.
std::vector<SampleLabel> label_by_iou(std::span<const Box> candidates, const Box& gt,
                                      double pos_thresh, double neg_thresh);

struct LabeledSamples {
  std::vector<Box> positives;
  std::vector<Box> negatives;
};

/// Rejection-samples training boxes around gt: positives from a tight Gaussian
/// (IoU > pos_thresh), negatives from a wide uniform shift (IoU < neg_thresh).
/// Boxes keep their centers inside the image. May return fewer than requested
/// if the attempt budget runs out.
LabeledSamples sample_training_boxes(const Box& gt, std::size_t image_w, std::size_t image_h,
                                     std::size_t n_pos, std::size_t n_neg, double pos_thresh,
                                     double neg_thresh, std::uint64_t seed);

/// Crops box from a CHW image with edge replication and resizes bilinearly.
/// Throws GeometryError when the box does not overlap the image.
Tensor extract_patch(const Tensor& image, const Box& box, std::size_t out_h, std::size_t out_w);

/// Outer product of two Hann windows; 1 at the center, 0 on the border.
Tensor cosine_window(std::size_t h, std::size_t w);

}  // namespace adasiam
