#pragma once

// Motion estimation: a frozen strided conv stage over a search window
// (F-MEN), an online 1x1-conv head producing a 2-channel score map (A-MEN),
// score-map labels, and back-projection of the peak into the image.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adasiam/box.hpp"
#include "adasiam/head.hpp"
#include "adasiam/layers.hpp"
#include "adasiam/optim.hpp"
#include "adasiam/sequence.hpp"

namespace adasiam {

struct MenConfig {
  std::size_t search_input = 107;
  std::size_t kernel = 7;
  std::size_t stride = 2;
  std::size_t channels = 16;
  std::size_t amen_hidden = 0;  // 0 means channels / 2
  std::size_t score_size = 51;
  double radius = 12.0;         // score-map cells
  double search_factor = 4.0;   // window side / sqrt(w * h)
  // F-MEN sees (pixel - input_mean) * input_scale, i.e. a 0-255 centered image
  double input_mean = 0.5;
  double input_scale = 255.0;
  LrnParams lrn;

  /// Rejects any configuration whose conv output grid differs from score_size.
  void validate() const;
  std::size_t hidden() const { return amen_hidden ? amen_hidden : std::max<std::size_t>(channels / 2, 1); }
};

/// Square window of side search_factor * sqrt(w * h) centered on the box.
Box search_window(const Box& target, double search_factor);

LayerParams make_fmen(const MenConfig& cfg, std::mt19937_64& rng);
/// Pixel rescaling applied before the F-MEN conv.
Tensor fmen_input(const Tensor& patch, const MenConfig& cfg);
/// conv(stride) -> ReLU -> LRN on a search_input x search_input patch.
Tensor fmen_forward(const LayerParams& conv, const Tensor& patch, const MenConfig& cfg);
/// Multiplies every channel by the score-size cosine window.
Tensor apply_cosine_window(Tensor features);
/// Crop, resize, F-MEN, cosine window: the A-MEN input for one window.
Tensor search_features(const LayerParams& fmen, const Tensor& frame, const Box& window,
                       const MenConfig& cfg);

/// A-MEN with learning-rate multipliers 3 and 30 and N(0, 0.01) weights.
PointwiseHead make_amen(const MenConfig& cfg, std::mt19937_64& rng);

struct ScoreMap {
  Tensor logits;  // [2, S, S]; channel 1 is the target class

  /// Target-class score l1 - l0 per cell (monotone in the softmax probability).
  Tensor positive() const;
};

ScoreMap amen_forward(const PointwiseHead& amen, const Tensor& windowed_features);

struct ScoreLabels {
  std::vector<std::size_t> labels;     // 1 inside the radius, else 0; row-major S*S
  std::array<double, 2> class_weights{};  // inverse class frequency, mean 1 over cells
  std::size_t positives = 0;
};

ScoreLabels make_score_labels(const MenConfig& cfg);
/// Same rule around an arbitrary grid point (row, col), possibly fractional.
ScoreLabels make_score_labels_at(const MenConfig& cfg, double row, double col);

/// Row-major first maximum of the positive map.
std::pair<std::size_t, std::size_t> argmax_cell(const ScoreMap& map);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Cell (r, c) maps to window.x + (c + 0.5) / S * window.w, likewise for y.
Point backproject_cell(std::size_t row, std::size_t col, std::size_t size, const Box& window);
Point backproject_argmax(const ScoreMap& map, const Box& window);

struct AmenTrainResult {
  double first_loss = 0.0;
  double last_loss = 0.0;
};

/// Minibatch SGD on the weighted softmax loss; each iteration averages
/// sgd.batch_size feature maps drawn uniformly from the pool.
AmenTrainResult train_amen(PointwiseHead& amen, std::size_t pool_size,
                           const std::function<Tensor(std::size_t)>& feature_at,
                           const ScoreLabels& labels, std::size_t iterations, SgdState& sgd,
                           std::uint64_t seed);
AmenTrainResult train_amen(PointwiseHead& amen, std::span<const Tensor> features,
                           const ScoreLabels& labels, std::size_t iterations, SgdState& sgd,
                           std::uint64_t seed);

struct FmenPretrainOptions {
  std::size_t iterations = 300;
  SgdState sgd{0.01, 0.9, 0.0005, 8, {}};
  double max_shift = 0.2;  // window offset as a fraction of its side
  double head_stddev = 0.01;
  std::uint64_t seed = 11;
};

/// Trains the conv stage jointly with a throwaway 2-class head on shifted
/// windows from the corpus, labels centered on the true target position.
/// Returns the per-iteration loss.
std::vector<double> pretrain_fmen(LayerParams& fmen, std::span<const Sequence> corpus,
                                  const MenConfig& cfg, const FmenPretrainOptions& options);

/// S rows of S comma-separated positive scores.
std::string score_map_csv(const ScoreMap& map);
/// 1 x S x S gray image of the positive map, min-max normalized.
Tensor score_heatmap(const ScoreMap& map);

}  // namespace adasiam
