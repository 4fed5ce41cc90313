#include "adasiam/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "adasiam/errors.hpp"
#include "adasiam/geometry.hpp"
#include "adasiam/loss.hpp"
#include "blas.hpp"

namespace adasiam {

using detail::gemm;
using detail::Trans;

namespace {

constexpr std::array<std::size_t, 5> kBlockDepth = {2, 2, 3, 3, 3};
constexpr std::size_t kConv4Tap = 9;   // conv4_3
constexpr std::size_t kConv5Tap = 12;  // conv5_3
constexpr std::size_t kPool1Before = 2;
constexpr std::size_t kPool2Before = 4;
constexpr ConvGeometry kSame3x3{1, 1};

double norm_of(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

void SiameseConfig::validate() const {
  if (input_size % 4 != 0) {
    throw ConfigError("siamese.input_size must be divisible by 4 (two 2x2 max-pools), got " +
                      std::to_string(input_size));
  }
  if (roi.spatial_scale != 0.25) {
    throw ConfigError("siamese.spatial_scale must be 0.25 after two max-pools");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("siamese.widths must be positive");
  }
  if (fc_width == 0) throw ConfigError("siamese.fc_width must be positive");
  if (!(margin > 0.0)) throw ConfigError("siamese.margin must be positive");
}

double match_score(const Embedding& p, const Embedding& q) {
  if (p.size() != q.size()) throw ConfigError("match_score: embedding length mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * q[i];
  return dot;
}

SiameseNet::SiameseNet(SiameseConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in_c = 3;
  for (std::size_t block = 0; block < 5; ++block) {
    for (std::size_t sub = 0; sub < kBlockDepth[block]; ++sub) {
      const std::string name = "conv" + std::to_string(block + 1) + "_" + std::to_string(sub + 1);
      LayerParams p = make_conv_params(name, config_.widths[block], in_c, 3, 3);
      init_he(p, rng);
      p.frozen = block == 0;
      p.lr_multiplier = 0.01;
      convs_.push_back(std::move(p));
      in_c = config_.widths[block];
    }
  }
  fc_ = make_conv_params("fc", config_.fc_width, config_.widths[4], config_.roi.pooled_h,
                         config_.roi.pooled_w);
  const double fan_in = static_cast<double>(config_.roi_length(4));
  init_gaussian(fc_, std::sqrt(1.0 / fan_in), rng);
  fc_.lr_multiplier = 1.0;
}

std::vector<LayerParams*> SiameseNet::layers() {
  std::vector<LayerParams*> out;
  for (auto& c : convs_) out.push_back(&c);
  out.push_back(&fc_);
  return out;
}

std::vector<const LayerParams*> SiameseNet::layers() const {
  std::vector<const LayerParams*> out;
  for (const auto& c : convs_) out.push_back(&c);
  out.push_back(&fc_);
  return out;
}

namespace {

struct PreparedInput {
  Tensor image;
  double scale_x = 1.0;
  double scale_y = 1.0;
};

PreparedInput prepare_input(const Tensor& image, std::size_t side) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ConfigError("siamese input must be a 3-channel CHW image, got " + shape_string(image.shape()));
  }
  if (image.dim(1) == side && image.dim(2) == side) return {image, 1.0, 1.0};
  const double h = static_cast<double>(image.dim(1));
  const double w = static_cast<double>(image.dim(2));
  return {extract_patch(image, Box{0.0, 0.0, w, h}, side, side), static_cast<double>(side) / w,
          static_cast<double>(side) / h};
}

Box scale_roi(const Box& roi, double sx, double sy) {
  return Box{roi.x * sx, roi.y * sy, roi.w * sx, roi.h * sy};
}

}  // namespace

SiameseNet::Features SiameseNet::backbone(const Tensor& image) const {
  PreparedInput in = prepare_input(image, config_.input_size);
  Tensor x = std::move(in.image);
  Features f;
  f.scale_x = in.scale_x;
  f.scale_y = in.scale_y;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (i == kPool1Before || i == kPool2Before) x = max_pool2d(x).output;
    x = relu(conv2d(x, convs_[i], kSame3x3));
    if (i == kConv4Tap) f.conv4 = x;
  }
  f.conv5 = std::move(x);
  return f;
}

namespace {

struct HeadOutput {
  std::vector<RoiPoolResult> pool4, pool5;
  std::vector<Tensor> fc_out;
  std::vector<Embedding> embeddings;
  std::vector<bool> valid;
};

HeadOutput run_head(const SiameseConfig& cfg, const LayerParams& fc, const SiameseNet::Features& f,
                    std::span<const Box> rois) {
  std::vector<Box> scaled;
  scaled.reserve(rois.size());
  for (const Box& r : rois) scaled.push_back(scale_roi(r, f.scale_x, f.scale_y));

  HeadOutput h;
  h.pool4 = roi_pool_batch(f.conv4, scaled, cfg.roi);
  h.pool5 = roi_pool_batch(f.conv5, scaled, cfg.roi);
  const std::size_t n = rois.size();
  const std::size_t len4 = cfg.roi_length(3);
  const std::size_t len5 = cfg.roi_length(4);
  const std::size_t fw = cfg.fc_width;

  std::vector<double> stacked(n * len5);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(h.pool5[i].output.data(), len5, stacked.data() + i * len5);
  }
  std::vector<double> fc_rows(n * fw);
  if (n > 0) {
    gemm(Trans::kNo, Trans::kYes, n, fw, len5, 1.0, stacked.data(), len5, fc.weights.data(), len5,
         0.0, fc_rows.data(), fw);
  }

  h.fc_out.resize(n);
  h.embeddings.resize(n);
  h.valid.assign(n, false);
  std::vector<char> valid(n, 0);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    Tensor fc_out({fw});
    for (std::size_t k = 0; k < fw; ++k) fc_out[k] = fc_rows[i * fw + k] + fc.bias[k];
    const double n4 = norm_of(h.pool4[i].output.values());
    const double n5 = norm_of(h.pool5[i].output.values());
    const double nf = norm_of(fc_out.values());
    h.fc_out[i] = std::move(fc_out);
    if (n4 < kMinNormalizableNorm || n5 < kMinNormalizableNorm || nf < kMinNormalizableNorm) continue;
    // concat order: roipool1 (conv4), roipool3 (conv5), fc
    Tensor concat({len4 + len5 + fw});
    for (std::size_t k = 0; k < len4; ++k) concat[k] = h.pool4[i].output[k] / n4;
    for (std::size_t k = 0; k < len5; ++k) concat[len4 + k] = h.pool5[i].output[k] / n5;
    for (std::size_t k = 0; k < fw; ++k) concat[len4 + len5 + k] = h.fc_out[i][k] / nf;
    h.embeddings[i] = l2_normalize(concat);
    valid[i] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) h.valid[i] = valid[i] != 0;
  return h;
}

}  // namespace

EmbedBatch SiameseNet::embed_features(const Features& features, std::span<const Box> rois) const {
  HeadOutput h = run_head(config_, fc_, features, rois);
  return EmbedBatch{std::move(h.embeddings), std::move(h.valid)};
}

EmbedBatch SiameseNet::embed_batch(const Tensor& image, std::span<const Box> rois) const {
  return embed_features(backbone(image), rois);
}

std::vector<Embedding> SiameseNet::embed(const Tensor& image, std::span<const Box> rois) const {
  EmbedBatch batch = embed_batch(image, rois);
  for (std::size_t i = 0; i < rois.size(); ++i) {
    if (!batch.valid[i]) {
      throw NormalizationError("embed: roi " + std::to_string(i) + " pooled to a zero vector");
    }
  }
  return std::move(batch.embeddings);
}

SiameseNet::Trace SiameseNet::forward_trace(const Tensor& image, std::span<const Box> rois) const {
  PreparedInput in = prepare_input(image, config_.input_size);
  Trace t;
  t.features.scale_x = in.scale_x;
  t.features.scale_y = in.scale_y;
  Tensor x = std::move(in.image);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (i == kPool1Before || i == kPool2Before) {
      MaxPoolResult pooled = max_pool2d(x);
      (i == kPool1Before ? t.pool1_argmax : t.pool2_argmax) = std::move(pooled.argmax);
      (i == kPool1Before ? t.pool1_input : t.pool2_input) = x.shape();
      x = std::move(pooled.output);
    }
    t.conv_inputs.push_back(x);
    t.conv_outputs.push_back(conv2d(x, convs_[i], kSame3x3));
    x = relu(t.conv_outputs.back());
    if (i == kConv4Tap) t.features.conv4 = x;
  }
  t.features.conv5 = std::move(x);
  HeadOutput h = run_head(config_, fc_, t.features, rois);
  t.pool4 = std::move(h.pool4);
  t.pool5 = std::move(h.pool5);
  t.fc_out = std::move(h.fc_out);
  t.embeddings = std::move(h.embeddings);
  t.valid = std::move(h.valid);
  return t;
}

void SiameseNet::backward_trace(const Trace& trace, std::span<const Tensor> embedding_grads,
                                std::vector<ParamGrads>& grads) const {
  if (grads.size() != convs_.size() + 1) {
    grads.clear();
    for (const LayerParams* p : layers()) grads.push_back(zero_grads_like(*p));
  }
  const std::size_t len4 = config_.roi_length(3);
  const std::size_t len5 = config_.roi_length(4);
  const std::size_t fw = config_.fc_width;
  Tensor d_conv4(trace.features.conv4.shape());
  Tensor d_conv5(trace.features.conv5.shape());
  ParamGrads& fc_grads = grads.back();

  for (std::size_t i = 0; i < embedding_grads.size(); ++i) {
    if (!trace.valid[i] || embedding_grads[i].empty()) continue;
    const Tensor& r1 = trace.pool4[i].output;
    const Tensor& r3 = trace.pool5[i].output;
    const Tensor& fc_out = trace.fc_out[i];
    const double n4 = norm_of(r1.values());
    const double n5 = norm_of(r3.values());
    const double nf = norm_of(fc_out.values());
    Tensor concat({len4 + len5 + fw});
    for (std::size_t k = 0; k < len4; ++k) concat[k] = r1[k] / n4;
    for (std::size_t k = 0; k < len5; ++k) concat[len4 + k] = r3[k] / n5;
    for (std::size_t k = 0; k < fw; ++k) concat[len4 + len5 + k] = fc_out[k] / nf;
    const Tensor d_concat = l2_normalize_backward(concat, embedding_grads[i]);

    Tensor d_n1({len4}), d_n3({len5}), d_n2({fw});
    std::copy_n(d_concat.data(), len4, d_n1.data());
    std::copy_n(d_concat.data() + len4, len5, d_n3.data());
    std::copy_n(d_concat.data() + len4 + len5, fw, d_n2.data());
    const Tensor d_r1 = l2_normalize_backward(r1.reshaped({len4}), d_n1);
    Tensor d_r5 = l2_normalize_backward(r3.reshaped({len5}), d_n3);
    const Tensor d_fc = l2_normalize_backward(fc_out, d_n2);

    // fc: out = W r + b, W is [fw, len5]
    for (std::size_t o = 0; o < fw; ++o) {
      const double g = d_fc[o];
      fc_grads.bias[o] += g;
      if (g == 0.0) continue;
      double* wrow = fc_grads.weights.data() + o * len5;
      const double* w = fc_.weights.data() + o * len5;
      for (std::size_t k = 0; k < len5; ++k) {
        wrow[k] += g * r3[k];
        d_r5[k] += g * w[k];
      }
    }
    roi_pool_backward(trace.pool4[i], d_r1.reshaped(r1.shape()), d_conv4);
    roi_pool_backward(trace.pool5[i], d_r5.reshaped(r3.shape()), d_conv5);
  }

  std::size_t first_trainable = convs_.size();
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (!convs_[i].frozen) {
      first_trainable = i;
      break;
    }
  }
  Tensor g = std::move(d_conv5);
  for (std::size_t i = convs_.size(); i-- > first_trainable;) {
    if (i == kConv4Tap) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += d_conv4[k];
    }
    const Tensor g_pre = relu_backward(trace.conv_outputs[i], g);
    const bool want_input = i > first_trainable;
    ConvGradients cg = conv2d_backward(trace.conv_inputs[i], convs_[i], kSame3x3, g_pre, want_input);
    if (!convs_[i].frozen) accumulate(grads[i], cg.params);
    if (!want_input) break;
    g = std::move(cg.input);
    if (i == kPool2Before) g = max_pool2d_backward(trace.pool2_input, trace.pool2_argmax, g);
    if (i == kPool1Before) g = max_pool2d_backward(trace.pool1_input, trace.pool1_argmax, g);
  }
}

// ---------------------------------------------------------------- adaptive buffer

AdaptiveBuffer::AdaptiveBuffer(Embedding anchor, std::size_t capacity)
    : anchor_(std::move(anchor)), capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("adaptive buffer capacity must be positive");
}

void AdaptiveBuffer::push(Embedding best) {
  entries_.push_back(std::move(best));
  while (entries_.size() > capacity_) entries_.pop_front();
}

double buffered_similarity(const Embedding& candidate, const AdaptiveBuffer& buffer, double eta) {
  if (eta < 0.0 || eta > 1.0) throw ConfigError("buffered_similarity: eta must lie in [0, 1]");
  const double anchor_score = match_score(buffer.anchor(), candidate);
  if (buffer.entries().empty() || eta == 1.0) return anchor_score;
  double sum = 0.0;
  for (const Embedding& b : buffer.entries()) sum += match_score(b, candidate);
  return eta * anchor_score + (1.0 - eta) / static_cast<double>(buffer.size()) * sum;
}

// ---------------------------------------------------------------- offline training

std::vector<PairGroup> build_training_pairs(std::span<const Sequence> corpus,
                                            const PairOptions& options, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PairGroup> groups;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const Sequence& seq = corpus[s];
    if (seq.length() < 2) {
      std::cerr << "warning: sequence '" << seq.name << "' has fewer than 2 frames; skipped\n";
      continue;
    }
    const double img_w = static_cast<double>(seq.width());
    const double img_h = static_cast<double>(seq.height());
    std::uniform_int_distribution<std::size_t> pick(0, seq.length() - 1);
    for (std::size_t g = 0; g < options.groups_per_sequence; ++g) {
      PairGroup group;
      group.sequence = s;
      group.frame_a = pick(rng);
      do {
        group.frame_b = pick(rng);
      } while (group.frame_b == group.frame_a);
      const Box& gt = seq.ground_truth[group.frame_b];
      const double v = 0.5 * (gt.w + gt.h);
      std::vector<Box> drawn;
      for (std::size_t k = 0; k < options.candidates_per_group; ++k) {
        double cx, cy, scale;
        if (k % 2 == 0) {
          cx = gt.cx() + 0.1 * v * normal(rng);
          cy = gt.cy() + 0.1 * v * normal(rng);
          scale = std::pow(1.05, normal(rng));
        } else {
          cx = unit(rng) * img_w;
          cy = unit(rng) * img_h;
          scale = std::pow(1.2, 2.0 * unit(rng) - 1.0);
        }
        const double w = std::max(1.0, std::round(gt.w * scale));
        const double h = std::max(1.0, std::round(gt.h * scale));
        drawn.push_back(Box{std::round(cx - 0.5 * w), std::round(cy - 0.5 * h), w, h});
      }
      const std::vector<SampleLabel> labels = label_by_iou(drawn, gt, options.pos_iou, options.neg_iou);
      for (std::size_t k = 0; k < drawn.size(); ++k) {
        if (labels[k] == SampleLabel::kIgnore) continue;
        group.candidates.push_back(drawn[k]);
        group.same.push_back(labels[k] == SampleLabel::kPositive);
      }
      if (!group.candidates.empty()) groups.push_back(std::move(group));
    }
  }
  return groups;
}

namespace {

struct GroupLoss {
  double loss = 0.0;
  std::size_t count = 0;
  Tensor grad_anchor;
  std::vector<Tensor> grad_candidates;
};

GroupLoss group_loss(const SiameseNet::Trace& anchor, const SiameseNet::Trace& cands,
                     const PairGroup& group, double margin) {
  GroupLoss out;
  if (!anchor.valid[0]) return out;
  const Embedding& ea = anchor.embeddings[0];
  out.grad_anchor = Tensor(ea.shape());
  out.grad_candidates.resize(group.candidates.size());
  for (std::size_t k = 0; k < group.candidates.size(); ++k) {
    if (cands.valid[k]) ++out.count;
  }
  if (out.count == 0) return out;
  const double inv = 1.0 / static_cast<double>(out.count);
  for (std::size_t k = 0; k < group.candidates.size(); ++k) {
    if (!cands.valid[k]) continue;
    ContrastiveResult r = contrastive_loss(ea, cands.embeddings[k], group.same[k], margin);
    out.loss += r.loss * inv;
    for (std::size_t i = 0; i < ea.size(); ++i) out.grad_anchor[i] += r.grad_a[i] * inv;
    for (double& v : r.grad_b.values()) v *= inv;
    out.grad_candidates[k] = std::move(r.grad_b);
  }
  return out;
}

}  // namespace

double mean_pair_loss(const SiameseNet& net, std::span<const Sequence> corpus,
                      std::span<const PairGroup> pairs) {
  double total = 0.0;
  std::size_t used = 0;
  for (const PairGroup& group : pairs) {
    const Sequence& seq = corpus[group.sequence];
    const Box anchor_roi = seq.ground_truth[group.frame_a];
    const EmbedBatch a = net.embed_batch(seq.frames[group.frame_a], std::span(&anchor_roi, 1));
    const EmbedBatch b = net.embed_batch(seq.frames[group.frame_b], group.candidates);
    if (!a.valid[0]) continue;
    double loss = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < group.candidates.size(); ++k) {
      if (!b.valid[k]) continue;
      loss += contrastive_loss(a.embeddings[0], b.embeddings[k], group.same[k], net.config().margin).loss;
      ++count;
    }
    if (count == 0) continue;
    total += loss / static_cast<double>(count);
    ++used;
  }
  return used ? total / static_cast<double>(used) : 0.0;
}

TrainingLog train_siamese(SiameseNet& net, std::span<const Sequence> corpus,
                          std::span<const PairGroup> pairs, const SiameseTrainOptions& options) {
  if (pairs.empty()) throw ConfigError("train_siamese: empty pair set");
  TrainingLog log;
  log.initial_loss = mean_pair_loss(net, corpus, pairs);
  SgdState sgd = options.sgd;
  std::vector<LayerParams*> params = net.layers();
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(options.shuffle_seed);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t used = 0;
    for (std::size_t idx : order) {
      const PairGroup& group = pairs[idx];
      const Sequence& seq = corpus[group.sequence];
      const Box anchor_roi = seq.ground_truth[group.frame_a];
      const SiameseNet::Trace ta = net.forward_trace(seq.frames[group.frame_a], std::span(&anchor_roi, 1));
      const SiameseNet::Trace tb = net.forward_trace(seq.frames[group.frame_b], group.candidates);
      GroupLoss gl = group_loss(ta, tb, group, net.config().margin);
      if (gl.count == 0) continue;
      if (!std::isfinite(gl.loss)) {
        throw TrainingError("train_siamese: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += gl.loss;
      ++used;
      std::vector<ParamGrads> grads;
      net.backward_trace(ta, std::span(&gl.grad_anchor, 1), grads);
      net.backward_trace(tb, gl.grad_candidates, grads);
      sgd_step(params, grads, sgd);
    }
    log.epoch_losses.push_back(used ? epoch_loss / static_cast<double>(used) : 0.0);
  }
  return log;
}

}  // namespace adasiam
