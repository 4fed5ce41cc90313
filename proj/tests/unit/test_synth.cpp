#include <gtest/gtest.h>

#include <cmath>

#include "adasiam/errors.hpp"
#include "adasiam/synth.hpp"
#include "adasiam/tensor.hpp"

using namespace adasiam;

namespace {

SequenceSpec small_spec() {
  SequenceSpec s;
  s.name = "small";
  s.length = 12;
  s.width = 64;
  s.height = 64;
  s.target_w = 12;
  s.target_h = 10;
  return s;
}

}  // namespace

TEST(Synth, ZeroMotionKeepsBoxFixed) {
  SequenceSpec s = small_spec();
  s.walk_sigma = 0.0;
  const Sequence seq = generate_sequence(s, 3);
  ASSERT_EQ(seq.length(), 12u);
  for (const Box& b : seq.ground_truth) EXPECT_EQ(b, seq.ground_truth.front());
}

TEST(Synth, JumpDisplacesGroundTruthExactly) {
  SequenceSpec s = small_spec();
  s.width = s.height = 128;
  s.jumps.push_back(JumpEvent{5, 14, -9});
  const Sequence seq = generate_sequence(s, 11);
  EXPECT_EQ(seq.ground_truth[5].x - seq.ground_truth[4].x, 14.0);
  EXPECT_EQ(seq.ground_truth[5].y - seq.ground_truth[4].y, -9.0);
}

TEST(Synth, SameSeedIsBitIdentical) {
  SequenceSpec s = small_spec();
  s.distractors = 2;
  s.occlusions.push_back(OcclusionEvent{3, 4, 0.5});
  s.illumination_ramp = 0.3;
  s.appearance_drift = 0.5;
  const Sequence a = generate_sequence(s, 99), b = generate_sequence(s, 99);
  ASSERT_EQ(a.length(), b.length());
  for (std::size_t t = 0; t < a.length(); ++t) {
    EXPECT_TRUE(bit_identical(a.frames[t], b.frames[t]));
    EXPECT_EQ(a.ground_truth[t], b.ground_truth[t]);
  }
  const Sequence c = generate_sequence(s, 100);
  EXPECT_FALSE(bit_identical(a.frames[0], c.frames[0]));
}

TEST(Synth, FramesQuantizedAndBoxesIntegral) {
  const Sequence seq = generate_sequence(small_spec(), 5);
  for (const Tensor& f : seq.frames) {
    EXPECT_EQ(f.shape(), (Shape{3, 64, 64}));
    for (double v : f.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_EQ(v * 255.0, std::round(v * 255.0));
    }
  }
  for (const Box& b : seq.ground_truth) {
    EXPECT_EQ(b.x, std::round(b.x));
    EXPECT_EQ(b.y, std::round(b.y));
    EXPECT_GE(b.x, 0.0);
    EXPECT_LE(b.right(), 64.0);
  }
}

TEST(Synth, OcclusionHidesLeftPartOfTarget) {
  SequenceSpec s = small_spec();
  s.walk_sigma = 0.0;
  const Sequence clear = generate_sequence(s, 8);
  s.occlusions.push_back(OcclusionEvent{4, 2, 0.5});
  const Sequence occ = generate_sequence(s, 8);
  const Box& b = occ.ground_truth[4];
  const std::size_t y = static_cast<std::size_t>(b.cy());
  const std::size_t left = static_cast<std::size_t>(b.x + 1), right = static_cast<std::size_t>(b.right() - 1);
  bool left_changed = false;
  for (std::size_t c = 0; c < 3; ++c) left_changed |= occ.frames[4].at(c, y, left) != clear.frames[4].at(c, y, left);
  EXPECT_TRUE(left_changed);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(occ.frames[4].at(c, y, right), clear.frames[4].at(c, y, right));
  EXPECT_TRUE(bit_identical(occ.frames[7], clear.frames[7]));
}

TEST(Synth, TargetLeavingFrameIsRejected) {
  SequenceSpec s = small_spec();
  s.jumps.push_back(JumpEvent{2, 500, 0});
  EXPECT_THROW(generate_sequence(s, 1), SequenceSpecError);
  SequenceSpec bad = small_spec();
  bad.target_w = 60;
  EXPECT_THROW(generate_sequence(bad, 1), SequenceSpecError);
}
