#include "adasiam/models.hpp"

#include <random>

#include "adasiam/checkpoint.hpp"
#include "adasiam/men.hpp"

namespace adasiam {

namespace {

std::vector<LayerParams*> all_layers(Models& m) {
  std::vector<LayerParams*> layers = m.siamese.layers();
  layers.push_back(&m.fmen);
  return layers;
}

}  // namespace

Models make_models(const TrackerConfig& cfg) {
  std::mt19937_64 rng(cfg.training.init_seed ^ 0x6d656eULL);
  return Models{SiameseNet(cfg.siamese, cfg.training.init_seed), make_fmen(cfg.men, rng)};
}

void save_models(const std::filesystem::path& path, const Models& models) {
  std::vector<const LayerParams*> layers = models.siamese.layers();
  layers.push_back(&models.fmen);
  save_checkpoint(path, to_records(layers));
}

Models load_models(const std::filesystem::path& path, const TrackerConfig& cfg) {
  Models m = make_models(cfg);
  const std::vector<NamedTensor> records = load_checkpoint(path);
  assign_records(records, all_layers(m));
  m.fmen.frozen = true;
  return m;
}

OfflineTrainingLog train_models(Models& models, std::span<const Sequence> corpus,
                                const TrackerConfig& cfg) {
  const TrainingOptions& t = cfg.training;
  PairOptions pairs_opt;
  pairs_opt.groups_per_sequence = t.groups_per_sequence;
  pairs_opt.candidates_per_group = t.candidates_per_group;
  const std::vector<PairGroup> pairs = build_training_pairs(corpus, pairs_opt, t.pair_seed);

  SiameseTrainOptions sopt;
  sopt.epochs = t.siamese_epochs;
  sopt.sgd = SgdState{t.siamese_lr, t.siamese_momentum, t.siamese_weight_decay, 1, {}};
  sopt.shuffle_seed = t.shuffle_seed;

  OfflineTrainingLog log;
  log.siamese = train_siamese(models.siamese, corpus, pairs, sopt);

  FmenPretrainOptions fopt;
  fopt.iterations = t.fmen_iterations;
  fopt.sgd = SgdState{t.fmen_lr, 0.9, 0.0005, t.fmen_batch, {}};
  fopt.max_shift = t.fmen_max_shift;
  fopt.seed = t.fmen_seed;
  log.fmen_losses = pretrain_fmen(models.fmen, corpus, cfg.men, fopt);
  return log;
}

}  // namespace adasiam
