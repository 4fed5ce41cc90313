#pragma once

// The online loop: first-frame initialization, per-frame MEN + Siamese +
// WCNN scoring, gated buffer updates and short/long-term model updates.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "adasiam/config.hpp"
#include "adasiam/eval.hpp"
#include "adasiam/men.hpp"
#include "adasiam/models.hpp"
#include "adasiam/sequence.hpp"
#include "adasiam/wcnn.hpp"

namespace adasiam {

enum class Variant { kFull, kNoMen, kNoWcnn, kNoBuffer };

/// "full", "no-men", "no-wcnn", "no-buffer"; anything else throws ConfigError.
Variant parse_variant(std::string_view name);
std::string variant_name(Variant v);

// Training material gathered on one frame, kept as float.
struct FrameCache {
  std::vector<std::vector<float>> positives;      // Siamese embeddings
  std::vector<std::vector<float>> negatives;
  std::vector<std::vector<float>> men_positives;  // windowed F-MEN maps
};

/// Frame-index windows S_short and S_long over per-frame caches.
class MemoryStore {
 public:
  MemoryStore(std::size_t tau_short, std::size_t tau_long);

  /// Adds t to both sets, evicting the smallest index of a set that grows past
  /// its bound. Frames leaving S_short lose their negatives; frames leaving
  /// S_long are dropped. t must exceed every index inserted before.
  void insert(std::size_t t, FrameCache cache);

  const std::set<std::size_t>& short_term() const { return short_; }
  const std::set<std::size_t>& long_term() const { return long_; }
  /// nullptr once the frame has been dropped.
  const FrameCache* cache(std::size_t t) const;
  std::size_t cached_frames() const { return caches_.size(); }

 private:
  std::size_t tau_short_, tau_long_;
  std::set<std::size_t> short_, long_;
  std::map<std::size_t, FrameCache> caches_;
};

struct GateDecision {
  bool collect = false;     // buffer update + new caches
  bool short_term = false;
  bool long_term = false;
};

/// collect: score > gate or t < warmup. short: score < gate.
/// long: otherwise, when t is a multiple of tau_int.
GateDecision decide_gates(std::size_t t, double score, const TrackerOptions& opts);

struct FrameRecord {
  std::size_t frame = 0;  // 1-based
  Box box;
  double score = 0.0;
  std::size_t buffer_size = 0;
  bool updated_short = false;
  bool updated_long = false;
  bool collected = false;
  bool lost = false;
  std::vector<ScoredCandidate> candidates;
  std::optional<ScoreMap> score_map;
  Box window;
};

class Tracker {
 public:
  /// models must outlive the tracker; they are never modified.
  Tracker(const Models& models, const TrackerConfig& cfg, Variant variant);

  /// Frame 1. Throws GeometryError on a degenerate box.
  void initialize(const Tensor& frame, const Box& ground_truth);
  FrameRecord track(const Tensor& frame);

  /// Replaces the fused score before gating (scripted gating runs).
  void set_score_override(std::function<double(std::size_t frame, double score)> fn) {
    score_override_ = std::move(fn);
  }

  const AdaptiveBuffer& buffer() const { return *buffer_; }
  const MemoryStore& memory() const { return memory_; }
  const PointwiseHead& amen() const { return amen_; }
  const PointwiseHead& wcnn() const { return wcnn_; }
  const BoxState& state() const { return state_; }
  double score() const { return score_; }
  std::size_t frame_index() const { return t_; }
  Variant variant() const { return variant_; }

 private:
  FrameCache collect_samples(const Tensor& frame, const SiameseNet::Features& features,
                             const Box& around, std::size_t n_pos, std::size_t n_neg,
                             std::size_t n_men, std::uint64_t seed) const;
  void update_models(bool long_term);

  const Models& models_;
  TrackerConfig cfg_;
  Variant variant_;
  double eta_;
  TargetSize base_;
  std::size_t image_w_ = 0, image_h_ = 0;
  std::optional<AdaptiveBuffer> buffer_;
  MemoryStore memory_;
  PointwiseHead amen_, wcnn_;
  SgdState amen_sgd_, wcnn_sgd_;
  ScoreLabels labels_;
  BoxState state_;
  double score_ = 0.0;
  std::size_t t_ = 0;
  std::function<double(std::size_t, double)> score_override_;
};

struct SequenceRun {
  std::string name;
  std::vector<FrameRecord> records;  // frames 2..n
  std::vector<Box> predictions;      // frames 1..n, frame 1 = ground truth
  EvalResult result;
};

/// One pass from the frame-1 ground truth. An initialization failure yields
/// a failed result instead of an exception.
SequenceRun run_sequence(const Models& models, const TrackerConfig& cfg, Variant variant,
                         const Sequence& seq, bool keep_maps = false);

struct AblationRow {
  Variant variant;
  std::vector<EvalResult> per_sequence;
  EvalResult aggregate;
};

std::vector<AblationRow> run_ablation(const Models& models, const TrackerConfig& cfg,
                                      std::span<const Variant> variants,
                                      std::span<const Sequence> sequences);

/// frame,x,y,w,h,score,buffer_size,updated_short,updated_long
std::string frames_csv(std::span<const FrameRecord> records);
/// frame,candidate,sim,weight,fused
std::string fused_csv(std::span<const FrameRecord> records);
/// Copy of frame with the prediction in green and the ground truth in pink.
Tensor overlay(const Tensor& frame, const Box& prediction, const std::optional<Box>& ground_truth);

}  // namespace adasiam
