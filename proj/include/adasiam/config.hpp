#pragma once

// Every tunable of the tracker and of offline training, loadable from JSON.
// Unknown keys anywhere in the document are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "adasiam/geometry.hpp"
#include "adasiam/men.hpp"
#include "adasiam/siamese.hpp"
#include "adasiam/synth.hpp"
#include "adasiam/wcnn.hpp"

namespace adasiam {

struct TrackerOptions {
  double score_gate = 1.6;
  std::size_t warmup_frames = 4;  // frames t < warmup always update the buffer
  std::size_t tau_long = 100;
  std::size_t tau_short = 20;
  std::size_t tau_int = 10;
  double eta = 0.7;
  std::size_t buffer_capacity = 35;
  std::size_t first_positives = 500;
  std::size_t first_negatives = 5000;
  std::size_t frame_positives = 50;
  std::size_t frame_negatives = 200;
  double pos_iou = 0.7;
  double neg_iou = 0.3;
  std::size_t men_first_positives = 5;
  std::size_t men_frame_positives = 50;
  std::size_t top_k = 5;
  double amen_lr = 0.001;
  double amen_momentum = 0.9;
  double amen_weight_decay = 0.0005;
  std::size_t amen_batch = 8;
  std::size_t amen_initial_iterations = 30;
  std::size_t amen_online_iterations = 10;
  std::uint64_t seed = 1;
};

struct TrainingOptions {
  std::size_t siamese_epochs = 30;
  std::size_t groups_per_sequence = 8;
  std::size_t candidates_per_group = 16;
  double siamese_lr = 0.01;
  double siamese_momentum = 0.9;
  double siamese_weight_decay = 0.0005;
  std::uint64_t pair_seed = 3;
  std::uint64_t shuffle_seed = 7;
  std::uint64_t init_seed = 1;
  std::size_t fmen_iterations = 300;
  std::size_t fmen_batch = 8;
  double fmen_lr = 0.01;
  double fmen_max_shift = 0.2;
  std::uint64_t fmen_seed = 11;
};

struct TrackerConfig {
  TrackerOptions tracker;
  SamplerConfig sampler;
  WcnnConfig wcnn;
  MenConfig men;
  SiameseConfig siamese;
  TrainingOptions training;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

TrackerConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const TrackerConfig& cfg);
TrackerConfig load_config(const std::filesystem::path& path);

/// Sequence specs use the same rules: unknown keys and wrong types are errors.
SequenceSpec sequence_spec_from_json(const nlohmann::json& doc);
nlohmann::json sequence_spec_to_json(const SequenceSpec& spec);
/// Throws ConfigError when the file is missing or not JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace adasiam
