#pragma once

// The offline-trained networks: the Siamese matcher and the frozen F-MEN
// conv stage, stored together in one checkpoint.

#include <filesystem>
#include <span>
#include <vector>

#include "adasiam/config.hpp"
#include "adasiam/layers.hpp"
#include "adasiam/sequence.hpp"
#include "adasiam/siamese.hpp"

namespace adasiam {

struct Models {
  SiameseNet siamese;
  LayerParams fmen;
};

/// Randomly initialized networks shaped by cfg.
Models make_models(const TrackerConfig& cfg);

void save_models(const std::filesystem::path& path, const Models& models);
/// Throws CheckpointError naming the first record that is missing or whose
/// extents disagree with cfg.
Models load_models(const std::filesystem::path& path, const TrackerConfig& cfg);

struct OfflineTrainingLog {
  TrainingLog siamese;
  std::vector<double> fmen_losses;
};

/// Siamese contrastive training on pairs from the corpus, then F-MEN pretraining.
OfflineTrainingLog train_models(Models& models, std::span<const Sequence> corpus,
                                const TrackerConfig& cfg);

}  // namespace adasiam
