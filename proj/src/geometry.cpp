#include "adasiam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "adasiam/errors.hpp"

namespace adasiam {

Box to_box(const BoxState& state, TargetSize base) {
  return Box::centered(state.cx, state.cy, state.s * base.w, state.s * base.h);
}

BoxState to_state(const Box& box, TargetSize base) {
  return BoxState{box.cx(), box.cy(), std::sqrt((box.w / base.w) * (box.h / base.h))};
}

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double center_distance(const Box& a, const Box& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

std::vector<BoxState> sample_candidates(std::span<const BoxState> centers, TargetSize base,
                                        const SamplerConfig& cfg, std::uint64_t seed) {
  if (centers.empty()) throw ConfigError("sample_candidates: no centers");
  if (cfg.split_ratio < 0.0 || cfg.split_ratio > 1.0) {
    throw ConfigError("sample_candidates: split_ratio must lie in [0, 1]");
  }
  const std::size_t n = cfg.n_candidates;
  const std::size_t first_count =
      centers.size() == 1 ? n
                          : static_cast<std::size_t>(std::ceil(cfg.split_ratio * static_cast<double>(n)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double xy_sd = std::sqrt(cfg.xy_variance_factor);
  const double log_sd = std::sqrt(cfg.scale_variance);

  std::vector<BoxState> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const BoxState& c = centers[i < first_count ? 0 : 1];
    const double v = 0.5 * c.s * (base.w + base.h);
    const double dx = normal(rng);
    const double dy = normal(rng);
    const double dg = normal(rng);
    BoxState s;
    s.cx = c.cx + xy_sd * v * dx;
    s.cy = c.cy + xy_sd * v * dy;
    s.s = std::clamp(c.s * std::pow(cfg.scale_step, log_sd * dg), cfg.min_scale, cfg.max_scale);
    out.push_back(s);
  }
  return out;
}

std::vector<SampleLabel> label_by_iou(std::span<const Box> candidates, const Box& gt,
                                      double pos_thresh, double neg_thresh) {
  if (!(0.0 <= neg_thresh && neg_thresh <= pos_thresh && pos_thresh <= 1.0)) {
    throw ConfigError("label_by_iou: thresholds must satisfy 0 <= neg <= pos <= 1");
  }
  std::vector<SampleLabel> labels;
  labels.reserve(candidates.size());
  for (const Box& c : candidates) {
    const double overlap = iou(c, gt);
    if (overlap > pos_thresh) {
      labels.push_back(SampleLabel::kPositive);
    } else if (overlap < neg_thresh) {
      labels.push_back(SampleLabel::kNegative);
    } else {
      labels.push_back(SampleLabel::kIgnore);
    }
  }
  return labels;
}

LabeledSamples sample_training_boxes(const Box& gt, std::size_t image_w, std::size_t image_h,
                                     std::size_t n_pos, std::size_t n_neg, double pos_thresh,
                                     double neg_thresh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double v = 0.5 * (gt.w + gt.h);
  const double max_x = static_cast<double>(image_w);
  const double max_y = static_cast<double>(image_h);
  auto inside = [&](const Box& b) {
    return b.cx() >= 0.0 && b.cx() < max_x && b.cy() >= 0.0 && b.cy() < max_y;
  };

  LabeledSamples out;
  const std::size_t budget = 50 * (n_pos + n_neg) + 1000;
  for (std::size_t attempt = 0; attempt < budget && out.positives.size() < n_pos; ++attempt) {
    const double scale = std::pow(1.05, normal(rng));
    const Box b = Box::centered(gt.cx() + 0.1 * v * normal(rng), gt.cy() + 0.1 * v * normal(rng),
                                gt.w * scale, gt.h * scale);
    if (inside(b) && iou(b, gt) > pos_thresh) out.positives.push_back(b);
  }
  for (std::size_t attempt = 0; attempt < budget && out.negatives.size() < n_neg; ++attempt) {
    const double scale = std::pow(1.2, unit(rng));
    const Box b = Box::centered(gt.cx() + 2.0 * v * unit(rng), gt.cy() + 2.0 * v * unit(rng),
                                gt.w * scale, gt.h * scale);
    if (inside(b) && iou(b, gt) < neg_thresh) out.negatives.push_back(b);
  }
  return out;
}

Tensor extract_patch(const Tensor& image, const Box& box, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ConfigError("extract_patch expects a CHW image");
  if (!box.valid()) throw GeometryError("extract_patch: box has non-positive size");
  const std::size_t channels = image.dim(0);
  const std::size_t in_h = image.dim(1), in_w = image.dim(2);
  if (box.right() <= 0.0 || box.bottom() <= 0.0 || box.x >= static_cast<double>(in_w) ||
      box.y >= static_cast<double>(in_h)) {
    throw GeometryError("extract_patch: box does not overlap the image");
  }
  // Sample points at output pixel centers; pixel centers of the source sit at integers.
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](double origin, double extent, std::size_t out_n, std::size_t in_n) {
    std::vector<Tap> t(out_n);
    const double last = static_cast<double>(in_n - 1);
    for (std::size_t i = 0; i < out_n; ++i) {
      double p = origin + (static_cast<double>(i) + 0.5) * extent / static_cast<double>(out_n) - 0.5;
      p = std::clamp(p, 0.0, last);
      const double f = std::floor(p);
      t[i].lo = static_cast<std::size_t>(f);
      t[i].hi = std::min(t[i].lo + 1, in_n - 1);
      t[i].frac = p - f;
    }
    return t;
  };
  const std::vector<Tap> ys = taps(box.y, box.h, out_h, in_h);
  const std::vector<Tap> xs = taps(box.x, box.w, out_w, in_w);

  Tensor out({channels, out_h, out_w});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const Tap& ty = ys[i];
      for (std::size_t j = 0; j < out_w; ++j) {
        const Tap& tx = xs[j];
        const double top = image.at(c, ty.lo, tx.lo) * (1.0 - tx.frac) + image.at(c, ty.lo, tx.hi) * tx.frac;
        const double bot = image.at(c, ty.hi, tx.lo) * (1.0 - tx.frac) + image.at(c, ty.hi, tx.hi) * tx.frac;
        out.at(c, i, j) = top * (1.0 - ty.frac) + bot * ty.frac;
      }
    }
  }
  return out;
}

Tensor cosine_window(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw ConfigError("cosine_window: extents must be positive");
  auto hann = [](std::size_t n) {
    std::vector<double> v(n, 1.0);
    if (n == 1) return v;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(n - 1)));
    }
    return v;
  };
  const std::vector<double> wy = hann(h), wx = hann(w);
  Tensor out({h, w});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = wy[i] * wx[j];
  }
  return out;
}

}  // namespace adasiam
