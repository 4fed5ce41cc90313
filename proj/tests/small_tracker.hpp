#pragma once

// A scaled-down tracker configuration for tests that run the whole loop.

#include "adasiam/config.hpp"
#include "adasiam/synth.hpp"

namespace small {

inline adasiam::TrackerConfig config() {
  adasiam::TrackerConfig c;
  c.siamese.input_size = 64;
  c.siamese.widths = {4, 8, 8, 16, 16};
  c.siamese.fc_width = 64;
  c.men.channels = 8;
  c.sampler.n_candidates = 64;
  c.tracker.first_positives = 100;
  c.tracker.first_negatives = 400;
  c.tracker.frame_positives = 20;
  c.tracker.frame_negatives = 40;
  c.tracker.men_frame_positives = 5;
  c.wcnn.hidden = 16;
  c.wcnn.initial_iterations = 20;
  c.wcnn.online_iterations = 3;
  c.wcnn.negative_pool = 128;
  c.tracker.amen_initial_iterations = 10;
  c.tracker.amen_online_iterations = 3;
  return c;
}

inline adasiam::Sequence sequence(std::size_t length, std::uint64_t seed = 5) {
  adasiam::SequenceSpec s;
  s.name = "small";
  s.length = length;
  s.texture_seed = seed;
  return adasiam::generate_sequence(s, seed);
}

}  // namespace small
