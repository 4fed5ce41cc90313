#include "adasiam/tracker.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

#include "adasiam/errors.hpp"
#include "adasiam/io.hpp"
#include "adasiam/seed.hpp"

namespace adasiam {

namespace {

enum Purpose : std::uint64_t {
  kCandidates = 1,
  kSamples = 2,
  kWcnnTrain = 3,
  kAmenTrain = 4,
  kInit = 5,
};

std::vector<float> to_float(const Tensor& t) { return std::vector<float>(t.values().begin(), t.values().end()); }

Tensor from_float(const std::vector<float>& v, Shape shape, double scale = 1.0) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * static_cast<double>(v[i]);
  return Tensor(std::move(shape), std::move(out));
}

Tensor scaled(const Tensor& t, double scale) {
  Tensor out = t;
  for (double& x : out.values()) x *= scale;
  return out;
}

}  // namespace

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::kFull;
  if (name == "no-men") return Variant::kNoMen;
  if (name == "no-wcnn") return Variant::kNoWcnn;
  if (name == "no-buffer") return Variant::kNoBuffer;
  throw ConfigError("unknown variant '" + std::string(name) + "' (full, no-men, no-wcnn, no-buffer)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoMen: return "no-men";
    case Variant::kNoWcnn: return "no-wcnn";
    case Variant::kNoBuffer: return "no-buffer";
  }
  return "full";
}

// ---------------------------------------------------------------- memory

MemoryStore::MemoryStore(std::size_t tau_short, std::size_t tau_long)
    : tau_short_(tau_short), tau_long_(tau_long) {
  if (tau_short == 0 || tau_short > tau_long) throw ConfigError("MemoryStore: need 0 < tau_short <= tau_long");
}

void MemoryStore::insert(std::size_t t, FrameCache cache) {
  if (!long_.empty() && t <= *long_.rbegin()) {
    throw ConfigError("MemoryStore: frame " + std::to_string(t) + " is not newer than " +
                      std::to_string(*long_.rbegin()));
  }
  short_.insert(t);
  long_.insert(t);
  caches_[t] = std::move(cache);
  if (short_.size() > tau_short_) {
    const std::size_t old = *short_.begin();
    short_.erase(short_.begin());
    if (auto it = caches_.find(old); it != caches_.end()) {
      it->second.negatives.clear();
      it->second.negatives.shrink_to_fit();
    }
  }
  if (long_.size() > tau_long_) {
    const std::size_t old = *long_.begin();
    long_.erase(long_.begin());
    caches_.erase(old);
  }
}

const FrameCache* MemoryStore::cache(std::size_t t) const {
  auto it = caches_.find(t);
  return it == caches_.end() ? nullptr : &it->second;
}

GateDecision decide_gates(std::size_t t, double score, const TrackerOptions& opts) {
  GateDecision d;
  d.collect = score > opts.score_gate || t < opts.warmup_frames;
  d.short_term = score < opts.score_gate;
  d.long_term = !d.short_term && t % opts.tau_int == 0;
  return d;
}

// ---------------------------------------------------------------- tracker

Tracker::Tracker(const Models& models, const TrackerConfig& cfg, Variant variant)
    : models_(models),
      cfg_(cfg),
      variant_(variant),
      eta_(variant == Variant::kNoBuffer ? 1.0 : cfg.tracker.eta),
      memory_(cfg.tracker.tau_short, cfg.tracker.tau_long) {
  cfg_.validate();
  const TrackerOptions& o = cfg_.tracker;
  amen_sgd_ = SgdState{o.amen_lr, o.amen_momentum, o.amen_weight_decay, o.amen_batch, {}};
  wcnn_sgd_ = cfg_.wcnn.make_sgd();
  labels_ = make_score_labels(cfg_.men);
}

FrameCache Tracker::collect_samples(const Tensor& frame, const SiameseNet::Features& features,
                                    const Box& around, std::size_t n_pos, std::size_t n_neg,
                                    std::size_t n_men, std::uint64_t seed) const {
  const TrackerOptions& o = cfg_.tracker;
  const LabeledSamples samples = sample_training_boxes(around, image_w_, image_h_, n_pos, n_neg,
                                                       o.pos_iou, o.neg_iou, seed);
  FrameCache cache;
  const EmbedBatch pos = models_.siamese.embed_features(features, samples.positives);
  for (std::size_t i = 0; i < pos.embeddings.size(); ++i)
    if (pos.valid[i]) cache.positives.push_back(to_float(pos.embeddings[i]));
  if (variant_ != Variant::kNoWcnn) {
    const EmbedBatch neg = models_.siamese.embed_features(features, samples.negatives);
    for (std::size_t i = 0; i < neg.embeddings.size(); ++i)
      if (neg.valid[i]) cache.negatives.push_back(to_float(neg.embeddings[i]));
  }
  if (variant_ != Variant::kNoMen) {
    // The exact box first, then positive samples.
    std::vector<Box> centers{around};
    for (const Box& b : samples.positives) {
      if (centers.size() >= n_men) break;
      centers.push_back(b);
    }
    centers.resize(std::min(centers.size(), n_men));
    for (const Box& b : centers) {
      try {
        cache.men_positives.push_back(
            to_float(search_features(models_.fmen, frame, search_window(b, cfg_.men.search_factor), cfg_.men)));
      } catch (const GeometryError&) {
      }
    }
  }
  return cache;
}

void Tracker::initialize(const Tensor& frame, const Box& gt) {
  if (!gt.valid()) throw GeometryError("initialize: degenerate ground-truth box");
  image_w_ = frame.dim(2);
  image_h_ = frame.dim(1);
  base_ = TargetSize{gt.w, gt.h};
  t_ = 1;
  state_ = to_state(gt, base_);
  score_ = 0.0;

  const SiameseNet::Features features = models_.siamese.backbone(frame);
  const Box anchor_box = gt;
  const EmbedBatch anchor = models_.siamese.embed_features(features, std::span(&anchor_box, 1));
  if (!anchor.valid[0]) throw GeometryError("initialize: ground-truth box pools to nothing");
  buffer_.emplace(anchor.embeddings[0], cfg_.tracker.buffer_capacity);

  std::mt19937_64 rng(derive_seed(cfg_.tracker.seed, 1, kInit));
  wcnn_ = make_wcnn(cfg_.siamese.embed_dim(), cfg_.wcnn, rng);
  amen_ = make_amen(cfg_.men, rng);

  const TrackerOptions& o = cfg_.tracker;
  FrameCache cache = collect_samples(frame, features, gt, o.first_positives, o.first_negatives,
                                     o.men_first_positives, derive_seed(o.seed, 1, kSamples));

  if (variant_ != Variant::kNoWcnn) {
    const std::size_t dim = cfg_.siamese.embed_dim();
    const double k = cfg_.wcnn.input_scale;
    const auto& p = cache.positives;
    const auto& n = cache.negatives;
    train_wcnn(
        wcnn_, p.size(), [&](std::size_t i) { return from_float(p[i], {dim}, k); }, n.size(),
        [&](std::size_t i) { return from_float(n[i], {dim}, k); }, cfg_.wcnn, cfg_.wcnn.initial_iterations,
        wcnn_sgd_, derive_seed(o.seed, 1, kWcnnTrain));
  }
  if (variant_ != Variant::kNoMen) {
    const auto& m = cache.men_positives;
    const Shape shape{cfg_.men.channels, cfg_.men.score_size, cfg_.men.score_size};
    train_amen(
        amen_, m.size(), [&](std::size_t i) { return from_float(m[i], shape); }, labels_,
        o.amen_initial_iterations, amen_sgd_, derive_seed(o.seed, 1, kAmenTrain));
  }
  memory_.insert(1, std::move(cache));
}

FrameRecord Tracker::track(const Tensor& frame) {
  if (!buffer_) throw ConfigError("track: tracker not initialized");
  if (frame.dim(2) != image_w_ || frame.dim(1) != image_h_) throw ConfigError("track: frame size changed");
  ++t_;
  const TrackerOptions& o = cfg_.tracker;
  FrameRecord rec;
  rec.frame = t_;

  const Box prev_box = to_box(state_, base_);
  std::vector<BoxState> centers;
  rec.window = search_window(prev_box, cfg_.men.search_factor);
  if (variant_ != Variant::kNoMen) {
    try {
      const Tensor feats = search_features(models_.fmen, frame, rec.window, cfg_.men);
      ScoreMap map = amen_forward(amen_, feats);
      const Point p = backproject_argmax(map, rec.window);
      centers.push_back(BoxState{p.x, p.y, state_.s});
      rec.score_map = std::move(map);
    } catch (const GeometryError&) {
    }
  }
  centers.push_back(state_);
  const std::vector<BoxState> states =
      sample_candidates(centers, base_, cfg_.sampler, derive_seed(o.seed, t_, kCandidates));

  std::vector<Box> boxes;
  boxes.reserve(states.size());
  for (const BoxState& s : states) boxes.push_back(to_box(s, base_));
  const SiameseNet::Features features = models_.siamese.backbone(frame);
  const EmbedBatch emb = models_.siamese.embed_features(features, boxes);

  std::vector<std::size_t> kept;
  std::vector<Embedding> kept_embeddings;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!emb.valid[i]) continue;
    kept.push_back(i);
    kept_embeddings.push_back(emb.embeddings[i]);
  }
  std::vector<double> weights(kept.size(), 0.0);
  if (variant_ != Variant::kNoWcnn && !kept.empty()) {
    const double k = cfg_.wcnn.input_scale;
    std::vector<Embedding> inputs;
    inputs.reserve(kept_embeddings.size());
    for (const Embedding& e : kept_embeddings) inputs.push_back(scaled(e, k));
    weights = wcnn_scores(wcnn_, inputs);
  }
  for (std::size_t j = 0; j < kept.size(); ++j) {
    ScoredCandidate c;
    c.state = states[kept[j]];
    c.sim = buffered_similarity(kept_embeddings[j], *buffer_, eta_);
    c.weight = weights[j];
    c.fused = variant_ == Variant::kNoWcnn ? c.sim : combine_scores(c.sim, c.weight, cfg_.wcnn.beta);
    rec.candidates.push_back(c);
  }

  if (rec.candidates.empty()) {
    rec.lost = true;
    rec.box = prev_box;
    rec.score = score_;
    rec.buffer_size = buffer_->size();
    return rec;
  }

  const StateEstimate est = estimate_state(rec.candidates, o.top_k);
  state_ = est.state;
  state_.cx = std::clamp(state_.cx, 0.0, static_cast<double>(image_w_ - 1));
  state_.cy = std::clamp(state_.cy, 0.0, static_cast<double>(image_h_ - 1));
  score_ = score_override_ ? score_override_(t_, est.score) : est.score;
  rec.box = to_box(state_, base_);
  rec.score = score_;

  const GateDecision gate = decide_gates(t_, score_, o);
  if (gate.collect) {
    if (variant_ != Variant::kNoBuffer) buffer_->push(kept_embeddings[est.top.front()]);
    memory_.insert(t_, collect_samples(frame, features, rec.box, o.frame_positives, o.frame_negatives,
                                       o.men_frame_positives, derive_seed(o.seed, t_, kSamples)));
    rec.collected = true;
  }
  if (gate.short_term) {
    update_models(false);
    rec.updated_short = true;
  } else if (gate.long_term) {
    update_models(true);
    rec.updated_long = true;
  }
  rec.buffer_size = buffer_->size();
  return rec;
}

void Tracker::update_models(bool long_term) {
  const TrackerOptions& o = cfg_.tracker;
  const std::set<std::size_t>& pos_frames = long_term ? memory_.long_term() : memory_.short_term();
  std::vector<const std::vector<float>*> pos, neg, men;
  for (std::size_t f : pos_frames) {
    const FrameCache* c = memory_.cache(f);
    if (!c) continue;
    for (const auto& v : c->positives) pos.push_back(&v);
    for (const auto& v : c->men_positives) men.push_back(&v);
  }
  for (std::size_t f : memory_.short_term()) {
    const FrameCache* c = memory_.cache(f);
    if (!c) continue;
    for (const auto& v : c->negatives) neg.push_back(&v);
  }
  if (variant_ != Variant::kNoWcnn) {
    const std::size_t dim = cfg_.siamese.embed_dim();
    const double k = cfg_.wcnn.input_scale;
    train_wcnn(
        wcnn_, pos.size(), [&](std::size_t i) { return from_float(*pos[i], {dim}, k); }, neg.size(),
        [&](std::size_t i) { return from_float(*neg[i], {dim}, k); }, cfg_.wcnn, cfg_.wcnn.online_iterations,
        wcnn_sgd_, derive_seed(o.seed, t_, kWcnnTrain));
  }
  if (variant_ != Variant::kNoMen) {
    const Shape shape{cfg_.men.channels, cfg_.men.score_size, cfg_.men.score_size};
    train_amen(
        amen_, men.size(), [&](std::size_t i) { return from_float(*men[i], shape); }, labels_,
        o.amen_online_iterations, amen_sgd_, derive_seed(o.seed, t_, kAmenTrain));
  }
}

// ---------------------------------------------------------------- runs

SequenceRun run_sequence(const Models& models, const TrackerConfig& cfg, Variant variant,
                         const Sequence& seq, bool keep_maps) {
  SequenceRun run;
  run.name = seq.name;
  if (seq.length() == 0) throw ConfigError(seq.name + ": empty sequence");
  Tracker tracker(models, cfg, variant);
  try {
    tracker.initialize(seq.frames[0], seq.ground_truth[0]);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "warning: %s: initialization failed: %s\n", seq.name.c_str(), e.what());
    run.result = failed_result(seq.name);
    return run;
  }
  run.predictions.push_back(seq.ground_truth[0]);
  for (std::size_t i = 1; i < seq.length(); ++i) {
    FrameRecord rec = tracker.track(seq.frames[i]);
    if (!keep_maps) rec.score_map.reset();
    run.predictions.push_back(rec.box);
    run.records.push_back(std::move(rec));
  }
  run.result = evaluate(run.predictions, seq.ground_truth, seq.name);
  return run;
}

std::vector<AblationRow> run_ablation(const Models& models, const TrackerConfig& cfg,
                                      std::span<const Variant> variants,
                                      std::span<const Sequence> sequences) {
  std::vector<AblationRow> rows;
  for (Variant v : variants) {
    AblationRow row{v, {}, {}};
    for (const Sequence& seq : sequences) row.per_sequence.push_back(run_sequence(models, cfg, v, seq).result);
    row.aggregate = aggregate(row.per_sequence);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string frames_csv(std::span<const FrameRecord> records) {
  std::ostringstream out;
  out << "frame,x,y,w,h,score,buffer_size,updated_short,updated_long\n";
  for (const FrameRecord& r : records) {
    out << r.frame << ',' << format_double(r.box.x) << ',' << format_double(r.box.y) << ','
        << format_double(r.box.w) << ',' << format_double(r.box.h) << ',' << format_double(r.score) << ','
        << r.buffer_size << ',' << (r.updated_short ? 1 : 0) << ',' << (r.updated_long ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string fused_csv(std::span<const FrameRecord> records) {
  std::ostringstream out;
  out << "frame,candidate,sim,weight,fused\n";
  for (const FrameRecord& r : records) {
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
      const ScoredCandidate& c = r.candidates[i];
      out << r.frame << ',' << i << ',' << format_double(c.sim) << ',' << format_double(c.weight) << ','
          << format_double(c.fused) << '\n';
    }
  }
  return out.str();
}

Tensor overlay(const Tensor& frame, const Box& prediction, const std::optional<Box>& ground_truth) {
  Tensor out = frame;
  static constexpr double kGreen[3] = {0.0, 1.0, 0.0};
  static constexpr double kPink[3] = {1.0, 0.41, 0.71};
  if (ground_truth) draw_box(out, *ground_truth, kPink);
  draw_box(out, prediction, kGreen);
  return out;
}

}  // namespace adasiam
