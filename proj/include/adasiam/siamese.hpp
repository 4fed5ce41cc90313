#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "adasiam/box.hpp"
#include "adasiam/layers.hpp"
#include "adasiam/optim.hpp"
#include "adasiam/sequence.hpp"

namespace adasiam {

/// One branch of the matcher: a VGG-style backbone with two early max-pools,
/// ROI taps on conv4 and conv5, and a 7x7 "fc" conv on the conv5 ROI.
/// Defaults are the full-size topology with channels divided by 8 and the
/// input side divided by 4.
struct SiameseConfig {
  std::size_t input_size = 128;
  // conv1..conv5 widths; blocks have 2, 2, 3, 3, 3 sublayers
  std::array<std::size_t, 5> widths = {8, 16, 32, 64, 64};
  std::size_t fc_width = 512;
  RoiPoolParams roi{7, 7, 0.25};
  double margin = 1.0;

  std::size_t roi_length(std::size_t block) const { return widths[block] * roi.pooled_h * roi.pooled_w; }
  std::size_t embed_dim() const { return roi_length(3) + roi_length(4) + fc_width; }
  void validate() const;
};

using Embedding = Tensor;  // rank-1, unit norm

double match_score(const Embedding& p, const Embedding& q);

struct EmbedBatch {
  std::vector<Embedding> embeddings;  // empty tensor where invalid
  std::vector<bool> valid;            // false when a roi pooled to an all-zero vector
};

class SiameseNet {
 public:
  SiameseNet(SiameseConfig config, std::uint64_t seed);

  const SiameseConfig& config() const { return config_; }
  std::vector<LayerParams*> layers();
  std::vector<const LayerParams*> layers() const;

  struct Features {
    Tensor conv4;
    Tensor conv5;
    double scale_x = 1.0;  // image pixels -> network input pixels
    double scale_y = 1.0;
  };

  /// Shared backbone pass. Frames not at input_size are resized first.
  Features backbone(const Tensor& image) const;
  EmbedBatch embed_features(const Features& features, std::span<const Box> rois) const;
  EmbedBatch embed_batch(const Tensor& image, std::span<const Box> rois) const;
  /// Throws NormalizationError if any roi is degenerate.
  std::vector<Embedding> embed(const Tensor& image, std::span<const Box> rois) const;

  // Training support: loss gradient w.r.t. the embeddings -> parameter grads.
  struct Trace;
  Trace forward_trace(const Tensor& image, std::span<const Box> rois) const;
  /// Accumulates parameter gradients into grads (indexed like layers()).
  void backward_trace(const Trace& trace, std::span<const Tensor> embedding_grads,
                      std::vector<ParamGrads>& grads) const;

 private:
  SiameseConfig config_;
  std::vector<LayerParams> convs_;  // 13 backbone layers
  LayerParams fc_;
};

struct SiameseNet::Trace {
  // per backbone conv: its input and pre-activation output
  std::vector<Tensor> conv_inputs;
  std::vector<Tensor> conv_outputs;
  std::vector<std::size_t> pool1_argmax, pool2_argmax;
  Shape pool1_input, pool2_input;
  Features features;
  // per roi
  std::vector<RoiPoolResult> pool4, pool5;
  std::vector<Tensor> fc_out;
  std::vector<Embedding> embeddings;
  std::vector<bool> valid;
};

// ---------------------------------------------------------------- adaptive buffer

/// Anchor template plus a FIFO of recent best embeddings.
class AdaptiveBuffer {
 public:
  AdaptiveBuffer(Embedding anchor, std::size_t capacity);

  const Embedding& anchor() const { return anchor_; }
  const std::deque<Embedding>& entries() const { return entries_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }

  /// Appends best; evicts the oldest entry once size exceeds capacity.
  void push(Embedding best);

 private:
  Embedding anchor_;
  std::deque<Embedding> entries_;
  std::size_t capacity_;
};

/// eta * M(anchor, u) + (1 - eta) * mean_i M(b_i, u); anchor only when empty.
double buffered_similarity(const Embedding& candidate, const AdaptiveBuffer& buffer, double eta);

// ---------------------------------------------------------------- offline training

struct PairGroup {
  std::size_t sequence = 0;
  std::size_t frame_a = 0;  // anchor frame, anchor roi = its ground truth
  std::size_t frame_b = 0;
  std::vector<Box> candidates;  // rois in frame_b
  std::vector<bool> same;       // IoU with frame_b ground truth > pos (true) or < neg (false)
};

struct PairOptions {
  std::size_t groups_per_sequence = 8;
  std::size_t candidates_per_group = 16;
  double pos_iou = 0.7;
  double neg_iou = 0.5;
};

std::vector<PairGroup> build_training_pairs(std::span<const Sequence> corpus,
                                            const PairOptions& options, std::uint64_t seed);

struct SiameseTrainOptions {
  std::size_t epochs = 30;
  SgdState sgd{0.01, 0.9, 0.0005, 1, {}};
  std::uint64_t shuffle_seed = 7;
};

struct TrainingLog {
  double initial_loss = 0.0;          // mean loss before the first update
  std::vector<double> epoch_losses;   // running mean during each epoch
};

/// Sets the first-block freeze and layer learning-rate multipliers, then
/// minimizes the mean contrastive loss over all pair groups.
TrainingLog train_siamese(SiameseNet& net, std::span<const Sequence> corpus,
                          std::span<const PairGroup> pairs, const SiameseTrainOptions& options);

double mean_pair_loss(const SiameseNet& net, std::span<const Sequence> corpus,
                      std::span<const PairGroup> pairs);

}  // namespace adasiam
