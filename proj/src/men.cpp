#include "adasiam/men.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "adasiam/errors.hpp"
#include "adasiam/geometry.hpp"
#include "adasiam/io.hpp"
#include "adasiam/loss.hpp"

namespace adasiam {

void MenConfig::validate() const {
  if (stride == 0 || kernel == 0 || kernel > search_input) {
    throw ConfigError("men: kernel " + std::to_string(kernel) + " / stride " + std::to_string(stride) +
                      " incompatible with search_input " + std::to_string(search_input));
  }
  const std::size_t grid = (search_input - kernel) / stride + 1;
  if (grid != score_size) {
    throw ConfigError("men: F-MEN output grid " + std::to_string(grid) + " != score_size " +
                      std::to_string(score_size));
  }
  if (!(radius >= 0.0) || !(radius < static_cast<double>(score_size) / 2.0)) {
    throw ConfigError("men: radius must lie in [0, score_size / 2)");
  }
  if (channels == 0) throw ConfigError("men: channels must be positive");
  if (!(search_factor > 0.0)) throw ConfigError("men: search_factor must be positive");
  if (!(input_scale > 0.0)) throw ConfigError("men: input_scale must be positive");
  if (!(lrn.k > 0.0)) throw ConfigError("men: lrn.k must be positive");
}

Box search_window(const Box& target, double search_factor) {
  const double side = search_factor * std::sqrt(target.w * target.h);
  return Box::centered(target.cx(), target.cy(), side, side);
}

LayerParams make_fmen(const MenConfig& cfg, std::mt19937_64& rng) {
  LayerParams p = make_conv_params("fmen", cfg.channels, 3, cfg.kernel, cfg.kernel);
  init_he(p, rng);
  return p;
}

Tensor fmen_input(const Tensor& patch, const MenConfig& cfg) {
  Tensor out = patch;
  for (double& v : out.values()) v = (v - cfg.input_mean) * cfg.input_scale;
  return out;
}

Tensor fmen_forward(const LayerParams& conv, const Tensor& patch, const MenConfig& cfg) {
  const Shape want{3, cfg.search_input, cfg.search_input};
  if (patch.shape() != want) {
    throw ConfigError("fmen: input " + shape_string(patch.shape()) + ", expected " + shape_string(want));
  }
  return lrn(relu(conv2d(fmen_input(patch, cfg), conv, ConvGeometry{cfg.stride, 0})), cfg.lrn);
}

Tensor apply_cosine_window(Tensor features) {
  const std::size_t h = features.dim(1), w = features.dim(2);
  const Tensor window = cosine_window(h, w);
  for (std::size_t c = 0; c < features.dim(0); ++c)
    for (std::size_t i = 0; i < h * w; ++i) features[c * h * w + i] *= window[i];
  return features;
}

Tensor search_features(const LayerParams& fmen, const Tensor& frame, const Box& window,
                       const MenConfig& cfg) {
  const Tensor patch = extract_patch(frame, window, cfg.search_input, cfg.search_input);
  return apply_cosine_window(fmen_forward(fmen, patch, cfg));
}

PointwiseHead make_amen(const MenConfig& cfg, std::mt19937_64& rng) {
  PointwiseHead h = make_pointwise_head("amen", cfg.channels, cfg.hidden(), 2, 0.01, rng);
  h.first.lr_multiplier = 3.0;
  h.second.lr_multiplier = 30.0;
  return h;
}

Tensor ScoreMap::positive() const {
  const std::size_t h = logits.dim(1), w = logits.dim(2);
  Tensor out({h, w});
  for (std::size_t i = 0; i < h * w; ++i) out[i] = logits[h * w + i] - logits[i];
  return out;
}

ScoreMap amen_forward(const PointwiseHead& amen, const Tensor& windowed_features) {
  return ScoreMap{head_logits(amen, windowed_features)};
}

ScoreLabels make_score_labels_at(const MenConfig& cfg, double row, double col) {
  const std::size_t s = cfg.score_size;
  ScoreLabels out;
  out.labels.assign(s * s, 0);
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < s; ++c) {
      const double dr = static_cast<double>(r) - row, dc = static_cast<double>(c) - col;
      if (std::sqrt(dr * dr + dc * dc) <= cfg.radius) {
        out.labels[r * s + c] = 1;
        ++out.positives;
      }
    }
  }
  const double n = static_cast<double>(s * s);
  const double pos = static_cast<double>(out.positives), neg = n - pos;
  // w_k = n / (2 n_k): mean over cells is exactly 1
  out.class_weights[0] = neg > 0 ? n / (2.0 * neg) : 0.0;
  out.class_weights[1] = pos > 0 ? n / (2.0 * pos) : 0.0;
  if (pos == 0 || neg == 0) out.class_weights = {1.0, 1.0};
  return out;
}

ScoreLabels make_score_labels(const MenConfig& cfg) {
  const double center = static_cast<double>(cfg.score_size / 2);
  return make_score_labels_at(cfg, center, center);
}

std::pair<std::size_t, std::size_t> argmax_cell(const ScoreMap& map) {
  const Tensor p = map.positive();
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return {best / p.dim(1), best % p.dim(1)};
}

Point backproject_cell(std::size_t row, std::size_t col, std::size_t size, const Box& window) {
  const double n = static_cast<double>(size);
  return Point{window.x + (static_cast<double>(col) + 0.5) / n * window.w,
               window.y + (static_cast<double>(row) + 0.5) / n * window.h};
}

Point backproject_argmax(const ScoreMap& map, const Box& window) {
  const auto [r, c] = argmax_cell(map);
  return backproject_cell(r, c, map.logits.dim(1), window);
}

namespace {

Tensor as_class_major(const Tensor& logits) {
  return logits.reshaped({2, logits.dim(1) * logits.dim(2)});
}

}  // namespace

AmenTrainResult train_amen(PointwiseHead& amen, std::size_t pool_size,
                           const std::function<Tensor(std::size_t)>& feature_at,
                           const ScoreLabels& labels, std::size_t iterations, SgdState& sgd,
                           std::uint64_t seed) {
  AmenTrainResult result;
  if (pool_size == 0 || iterations == 0) return result;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
  const std::size_t batch = std::max<std::size_t>(sgd.batch_size, 1);
  auto layers = amen.layers();
  for (std::size_t it = 0; it < iterations; ++it) {
    std::array<ParamGrads, 2> grads{zero_grads_like(amen.first), zero_grads_like(amen.second)};
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Tensor x = feature_at(pick(rng));
      const HeadTrace trace = head_forward(amen, x);
      const LossAndGrad lg = weighted_softmax_loss(as_class_major(trace.logits), labels.labels, labels.class_weights);
      loss += lg.loss / static_cast<double>(batch);
      const auto g = head_backward(amen, x, trace, lg.grad.reshaped(trace.logits.shape()));
      accumulate(grads[0], g[0], 1.0 / static_cast<double>(batch));
      accumulate(grads[1], g[1], 1.0 / static_cast<double>(batch));
    }
    if (!std::isfinite(loss)) throw TrainingError("train_amen: non-finite loss at iteration " + std::to_string(it + 1));
    if (it == 0) result.first_loss = loss;
    result.last_loss = loss;
    sgd_step(layers, grads, sgd);
  }
  return result;
}

AmenTrainResult train_amen(PointwiseHead& amen, std::span<const Tensor> features,
                           const ScoreLabels& labels, std::size_t iterations, SgdState& sgd,
                           std::uint64_t seed) {
  return train_amen(amen, features.size(), [&](std::size_t i) { return features[i]; }, labels,
                    iterations, sgd, seed);
}

std::vector<double> pretrain_fmen(LayerParams& fmen, std::span<const Sequence> corpus,
                                  const MenConfig& cfg, const FmenPretrainOptions& options) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("pretrain_fmen: empty corpus");
  std::mt19937_64 rng(options.seed);
  PointwiseHead head = make_pointwise_head("fmen_head", cfg.channels, cfg.hidden(), 2, options.head_stddev, rng);
  fmen.frozen = false;
  std::vector<LayerParams*> params = {&fmen, &head.first, &head.second};
  SgdState sgd = options.sgd;
  const std::size_t batch = std::max<std::size_t>(sgd.batch_size, 1);
  const ConvGeometry geom{cfg.stride, 0};
  std::uniform_real_distribution<double> shift(-options.max_shift, options.max_shift);
  std::vector<double> losses;
  for (std::size_t it = 0; it < options.iterations; ++it) {
    std::vector<ParamGrads> grads = {zero_grads_like(fmen), zero_grads_like(head.first), zero_grads_like(head.second)};
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Sequence& seq = corpus[std::uniform_int_distribution<std::size_t>(0, corpus.size() - 1)(rng)];
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, seq.length() - 1)(rng);
      const Box& gt = seq.ground_truth[t];
      Box window = search_window(gt, cfg.search_factor);
      window.x += shift(rng) * window.w;
      window.y += shift(rng) * window.h;
      const double n = static_cast<double>(cfg.score_size);
      const double col = (gt.cx() - window.x) / window.w * n - 0.5;
      const double row = (gt.cy() - window.y) / window.h * n - 0.5;
      const ScoreLabels labels = make_score_labels_at(cfg, row, col);

      const Tensor patch = fmen_input(extract_patch(seq.frames[t], window, cfg.search_input, cfg.search_input), cfg);
      const Tensor pre = conv2d(patch, fmen, geom);
      const Tensor act = relu(pre);
      const Tensor feat = lrn(act, cfg.lrn);
      const HeadTrace trace = head_forward(head, feat);
      const LossAndGrad lg = weighted_softmax_loss(as_class_major(trace.logits), labels.labels, labels.class_weights);
      loss += lg.loss / static_cast<double>(batch);
      const Tensor g_logits = lg.grad.reshaped(trace.logits.shape());

      const Tensor hidden = relu(trace.hidden_pre);
      ConvGradients g2 = conv2d_backward(hidden, head.second, ConvGeometry{}, g_logits, true);
      ConvGradients g1 = conv2d_backward(feat, head.first, ConvGeometry{}, relu_backward(trace.hidden_pre, g2.input), true);
      const Tensor g_act = lrn_backward(act, cfg.lrn, g1.input);
      ConvGradients g0 = conv2d_backward(patch, fmen, geom, relu_backward(pre, g_act), false);
      const double inv = 1.0 / static_cast<double>(batch);
      accumulate(grads[0], g0.params, inv);
      accumulate(grads[1], g1.params, inv);
      accumulate(grads[2], g2.params, inv);
    }
    if (!std::isfinite(loss)) throw TrainingError("pretrain_fmen: non-finite loss at iteration " + std::to_string(it + 1));
    losses.push_back(loss);
    sgd_step(params, grads, sgd);
  }
  fmen.frozen = true;
  return losses;
}

std::string score_map_csv(const ScoreMap& map) {
  const Tensor p = map.positive();
  const std::size_t h = p.dim(0), w = p.dim(1);
  std::string out;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (c) out += ',';
      out += format_double(p[r * w + c]);
    }
    out += '\n';
  }
  return out;
}

Tensor score_heatmap(const ScoreMap& map) {
  const Tensor p = map.positive();
  const auto [lo, hi] = std::minmax_element(p.values().begin(), p.values().end());
  const double low = *lo, range = *hi - *lo;
  Tensor out({1, p.dim(0), p.dim(1)});
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = range > 0 ? (p[i] - low) / range : 0.0;
  return out;
}

}  // namespace adasiam
