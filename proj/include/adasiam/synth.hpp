#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adasiam/sequence.hpp"

namespace adasiam {

struct JumpEvent {
  std::size_t frame = 0;  // displacement applied between frame-1 and frame
  double dx = 0.0;
  double dy = 0.0;
};

struct OcclusionEvent {
  std::size_t start = 0;
  std::size_t duration = 0;
  double coverage = 0.5;  // fraction of the target width hidden, from the left
};

/// Description of one synthetic sequence. All randomness derives from the
/// seed passed to generate_sequence plus texture_seed for the target.
struct SequenceSpec {
  std::string name = "synthetic";
  std::size_t length = 60;
  std::size_t width = 128;
  std::size_t height = 128;
  double target_w = 24.0;
  double target_h = 20.0;
  std::uint64_t texture_seed = 1;

  double walk_sigma = 0.5;  // std of the per-frame velocity change, px
  double max_speed = 2.0;   // px per frame
  std::vector<JumpEvent> jumps;
  std::vector<OcclusionEvent> occlusions;
  double illumination_ramp = 0.0;  // brightness change reached at the last frame
  double scale_drift = 0.0;        // per-frame log-scale rate
  double appearance_drift = 0.0;   // blend toward a second texture reached at the last frame
  std::size_t distractors = 0;

  void validate() const;
};

/// Renders a textured target over a textured static background. Ground truth
/// boxes are integer-valued and defined on every frame, occluded or not.
/// Throws SequenceSpecError if the target would leave the frame entirely.
Sequence generate_sequence(const SequenceSpec& spec, std::uint64_t seed);

}  // namespace adasiam
