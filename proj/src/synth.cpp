#include "adasiam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "adasiam/errors.hpp"
#include "adasiam/geometry.hpp"

namespace adasiam {

void SequenceSpec::validate() const {
  if (length == 0) throw SequenceSpecError(name + ": length must be positive");
  if (width < 16 || height < 16) throw SequenceSpecError(name + ": image must be at least 16x16");
  if (!(target_w >= 4.0 && target_h >= 4.0)) throw SequenceSpecError(name + ": target must be at least 4x4");
  if (target_w > static_cast<double>(width) / 2 || target_h > static_cast<double>(height) / 2) {
    throw SequenceSpecError(name + ": target larger than half the frame");
  }
  if (walk_sigma < 0.0 || max_speed < 0.0) throw SequenceSpecError(name + ": negative motion parameter");
  for (const OcclusionEvent& o : occlusions) {
    if (o.coverage < 0.0 || o.coverage > 1.0) throw SequenceSpecError(name + ": occlusion coverage outside [0, 1]");
  }
  if (appearance_drift < 0.0 || appearance_drift > 1.0) {
    throw SequenceSpecError(name + ": appearance_drift outside [0, 1]");
  }
}

namespace {

constexpr std::size_t kCells = 4;

// kCells x kCells grid of random colors, stored CHW at cell resolution.
Tensor random_cells(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> color(0.05, 0.95);
  Tensor t({3, kCells, kCells});
  for (double& v : t.values()) v = color(rng);
  return t;
}

Tensor shuffled_cells(const Tensor& cells, std::mt19937_64& rng) {
  std::vector<std::size_t> order(kCells * kCells);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  Tensor out(cells.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < order.size(); ++i) out[c * order.size() + i] = cells[c * order.size() + order[i]];
  return out;
}

Tensor make_background(std::size_t w, std::size_t h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor bg({3, h, w});
  double base[3];
  for (double& b : base) b = 0.3 + 0.4 * unit(rng);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        bg.at(c, y, x) = base[c] + 0.1 * (static_cast<double>(x + y) / static_cast<double>(w + h) - 0.5);
  for (int r = 0; r < 40; ++r) {
    const double rw = 5 + 25 * unit(rng), rh = 5 + 25 * unit(rng);
    const double rx = unit(rng) * static_cast<double>(w) - rw / 2, ry = unit(rng) * static_cast<double>(h) - rh / 2;
    double col[3];
    for (double& c : col) c = unit(rng);
    for (std::size_t y = static_cast<std::size_t>(std::max(0.0, ry)); y < std::min<double>(h, ry + rh); ++y)
      for (std::size_t x = static_cast<std::size_t>(std::max(0.0, rx)); x < std::min<double>(w, rx + rw); ++x)
        for (std::size_t c = 0; c < 3; ++c) bg.at(c, y, x) = 0.7 * bg.at(c, y, x) + 0.3 * col[c];
  }
  for (double& v : bg.values()) v += 0.04 * (unit(rng) - 0.5);
  return bg;
}

// Nearest-cell rendering of a texture blend into box (integer coords), clipped to the frame.
void paint(Tensor& frame, const Box& box, const Tensor& cells, const Tensor* other, double blend) {
  const long x0 = static_cast<long>(box.x), y0 = static_cast<long>(box.y);
  const long w = static_cast<long>(box.w), h = static_cast<long>(box.h);
  const long fw = static_cast<long>(frame.dim(2)), fh = static_cast<long>(frame.dim(1));
  for (long y = std::max(0L, y0); y < std::min(fh, y0 + h); ++y) {
    const std::size_t cy = static_cast<std::size_t>((y - y0) * static_cast<long>(kCells) / h);
    for (long x = std::max(0L, x0); x < std::min(fw, x0 + w); ++x) {
      const std::size_t cx = static_cast<std::size_t>((x - x0) * static_cast<long>(kCells) / w);
      for (std::size_t c = 0; c < 3; ++c) {
        double v = cells.at(c, cy, cx);
        if (other) v = (1.0 - blend) * v + blend * other->at(c, cy, cx);
        frame.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = v;
      }
    }
  }
}

struct Walker {
  double cx, cy, vx = 0.0, vy = 0.0;
};

void step_walker(Walker& wk, double sigma, double max_speed, double half_w, double half_h,
                 double frame_w, double frame_h, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  if (sigma > 0.0) {
    wk.vx += sigma * normal(rng);
    wk.vy += sigma * normal(rng);
  }
  const double speed = std::hypot(wk.vx, wk.vy);
  if (speed > max_speed && speed > 0.0) {
    wk.vx *= max_speed / speed;
    wk.vy *= max_speed / speed;
  }
  wk.cx += wk.vx;
  wk.cy += wk.vy;
  const double lo_x = half_w + 2, hi_x = frame_w - half_w - 2;
  const double lo_y = half_h + 2, hi_y = frame_h - half_h - 2;
  if (wk.cx < lo_x) { wk.cx = lo_x; wk.vx = std::abs(wk.vx); }
  if (wk.cx > hi_x) { wk.cx = hi_x; wk.vx = -std::abs(wk.vx); }
  if (wk.cy < lo_y) { wk.cy = lo_y; wk.vy = std::abs(wk.vy); }
  if (wk.cy > hi_y) { wk.cy = hi_y; wk.vy = -std::abs(wk.vy); }
}

}  // namespace

Sequence generate_sequence(const SequenceSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::mt19937_64 tex_rng(spec.texture_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fw = static_cast<double>(spec.width), fh = static_cast<double>(spec.height);

  const Tensor background = make_background(spec.width, spec.height, rng);
  const Tensor cells = random_cells(tex_rng);
  const Tensor late_cells = random_cells(tex_rng);
  std::vector<Tensor> distractor_cells;
  std::vector<Walker> distractors;
  for (std::size_t d = 0; d < spec.distractors; ++d) {
    distractor_cells.push_back(shuffled_cells(cells, tex_rng));
    distractors.push_back(Walker{fw * (0.15 + 0.7 * unit(rng)), fh * (0.15 + 0.7 * unit(rng))});
  }
  Tensor occluder_cells({3, kCells, kCells});
  for (double& v : occluder_cells.values()) v = 0.35 + 0.3 * unit(rng);

  Sequence seq;
  seq.name = spec.name;
  Walker target{fw * (0.3 + 0.4 * unit(rng)), fh * (0.3 + 0.4 * unit(rng))};
  double log_scale = 0.0;
  for (std::size_t t = 0; t < spec.length; ++t) {
    const double scale = std::exp(log_scale);
    const double w = std::max(4.0, std::round(spec.target_w * scale));
    const double h = std::max(4.0, std::round(spec.target_h * scale));
    if (t > 0) {
      bool jumped = false;
      for (const JumpEvent& j : spec.jumps) {
        if (j.frame == t) {
          target.cx += j.dx;
          target.cy += j.dy;
          jumped = true;
        }
      }
      if (!jumped) step_walker(target, spec.walk_sigma, spec.max_speed, w / 2, h / 2, fw, fh, rng);
    }
    const Box gt{std::round(target.cx - w / 2), std::round(target.cy - h / 2), w, h};
    if (gt.right() <= 0 || gt.bottom() <= 0 || gt.x >= fw || gt.y >= fh) {
      throw SequenceSpecError(spec.name + ": target leaves the frame at frame " + std::to_string(t + 1));
    }

    Tensor frame = background;
    for (std::size_t d = 0; d < distractors.size(); ++d) {
      if (t > 0) step_walker(distractors[d], 0.8, 2.5, w / 2, h / 2, fw, fh, rng);
      const Box db{std::round(distractors[d].cx - w / 2), std::round(distractors[d].cy - h / 2), w, h};
      paint(frame, db, distractor_cells[d], nullptr, 0.0);
    }
    const double progress = spec.length > 1 ? static_cast<double>(t) / static_cast<double>(spec.length - 1) : 0.0;
    paint(frame, gt, cells, spec.appearance_drift > 0 ? &late_cells : nullptr, spec.appearance_drift * progress);
    for (const OcclusionEvent& o : spec.occlusions) {
      if (t >= o.start && t < o.start + o.duration && o.coverage > 0.0) {
        const Box cover{gt.x - 2, gt.y - 2, std::round(o.coverage * gt.w) + 2, gt.h + 4};
        paint(frame, cover, occluder_cells, nullptr, 0.0);
      }
    }
    const double gain = 1.0 + spec.illumination_ramp * progress;
    for (double& v : frame.values()) v = std::round(std::clamp(v * gain, 0.0, 1.0) * 255.0) / 255.0;

    seq.frames.push_back(std::move(frame));
    seq.ground_truth.push_back(gt);
    log_scale += spec.scale_drift;
  }
  return seq;
}

}  // namespace adasiam
