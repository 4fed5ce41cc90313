#include "adasiam/config.hpp"

#include <fstream>
#include <set>

#include "adasiam/errors.hpp"

namespace adasiam {

using nlohmann::json;

namespace {

// Reads fields from one JSON object and remembers which keys were consumed.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      }
      field = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  // Key handled elsewhere.
  void accept(const char* key) { seen_.insert(key); }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    static const json empty = json::object();
    return Section(it == doc_.end() ? empty : *it, path_ + "." + key);
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

// One field list drives both directions.
template <typename Visit>
void visit_tracker(TrackerOptions& t, Visit&& v) {
  v("score_gate", t.score_gate);
  v("warmup_frames", t.warmup_frames);
  v("tau_long", t.tau_long);
  v("tau_short", t.tau_short);
  v("tau_int", t.tau_int);
  v("eta", t.eta);
  v("buffer_capacity", t.buffer_capacity);
  v("first_positives", t.first_positives);
  v("first_negatives", t.first_negatives);
  v("frame_positives", t.frame_positives);
  v("frame_negatives", t.frame_negatives);
  v("pos_iou", t.pos_iou);
  v("neg_iou", t.neg_iou);
  v("men_first_positives", t.men_first_positives);
  v("men_frame_positives", t.men_frame_positives);
  v("top_k", t.top_k);
  v("amen_lr", t.amen_lr);
  v("amen_momentum", t.amen_momentum);
  v("amen_weight_decay", t.amen_weight_decay);
  v("amen_batch", t.amen_batch);
  v("amen_initial_iterations", t.amen_initial_iterations);
  v("amen_online_iterations", t.amen_online_iterations);
  v("seed", t.seed);
}

template <typename Visit>
void visit_sampler(SamplerConfig& s, Visit&& v) {
  v("n_candidates", s.n_candidates);
  v("xy_variance_factor", s.xy_variance_factor);
  v("scale_variance", s.scale_variance);
  v("scale_step", s.scale_step);
  v("split_ratio", s.split_ratio);
  v("min_scale", s.min_scale);
  v("max_scale", s.max_scale);
}

template <typename Visit>
void visit_wcnn(WcnnConfig& w, Visit&& v) {
  v("hidden", w.hidden);
  v("beta", w.beta);
  v("lr", w.lr);
  v("momentum", w.momentum);
  v("weight_decay", w.weight_decay);
  v("batch_positives", w.batch_positives);
  v("batch_negatives", w.batch_negatives);
  v("negative_pool", w.negative_pool);
  v("initial_iterations", w.initial_iterations);
  v("online_iterations", w.online_iterations);
  v("input_scale", w.input_scale);
}

template <typename Visit>
void visit_men(MenConfig& m, Visit&& v) {
  v("search_input", m.search_input);
  v("kernel", m.kernel);
  v("stride", m.stride);
  v("channels", m.channels);
  v("amen_hidden", m.amen_hidden);
  v("score_size", m.score_size);
  v("radius", m.radius);
  v("search_factor", m.search_factor);
  v("input_mean", m.input_mean);
  v("input_scale", m.input_scale);
}

template <typename Visit>
void visit_lrn(LrnParams& l, Visit&& v) {
  v("depth_radius", l.depth_radius);
  v("alpha", l.alpha);
  v("beta", l.beta);
  v("k", l.k);
}

template <typename Visit>
void visit_siamese(SiameseConfig& s, Visit&& v) {
  v("input_size", s.input_size);
  v("widths", s.widths);
  v("fc_width", s.fc_width);
  v("margin", s.margin);
}

template <typename Visit>
void visit_training(TrainingOptions& t, Visit&& v) {
  v("siamese_epochs", t.siamese_epochs);
  v("groups_per_sequence", t.groups_per_sequence);
  v("candidates_per_group", t.candidates_per_group);
  v("siamese_lr", t.siamese_lr);
  v("siamese_momentum", t.siamese_momentum);
  v("siamese_weight_decay", t.siamese_weight_decay);
  v("pair_seed", t.pair_seed);
  v("shuffle_seed", t.shuffle_seed);
  v("init_seed", t.init_seed);
  v("fmen_iterations", t.fmen_iterations);
  v("fmen_batch", t.fmen_batch);
  v("fmen_lr", t.fmen_lr);
  v("fmen_max_shift", t.fmen_max_shift);
  v("fmen_seed", t.fmen_seed);
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

void TrackerConfig::validate() const {
  const TrackerOptions& t = tracker;
  require(t.tau_short > 0 && t.tau_short <= t.tau_long, "tracker.tau_short", "must satisfy 0 < tau_short <= tau_long");
  require(t.tau_int > 0, "tracker.tau_int", "must be positive");
  require(t.eta >= 0.0 && t.eta <= 1.0, "tracker.eta", "must lie in [0, 1]");
  require(t.buffer_capacity > 0, "tracker.buffer_capacity", "must be positive");
  require(t.first_positives > 0 && t.first_negatives > 0 && t.frame_positives > 0 && t.frame_negatives > 0,
          "tracker.*_positives/negatives", "counts must be positive");
  require(t.neg_iou >= 0.0 && t.neg_iou <= t.pos_iou && t.pos_iou <= 1.0, "tracker.pos_iou/neg_iou",
          "must satisfy 0 <= neg_iou <= pos_iou <= 1");
  require(t.men_first_positives > 0 && t.men_frame_positives > 0, "tracker.men_*_positives", "must be positive");
  require(t.top_k > 0, "tracker.top_k", "must be positive");
  require(t.amen_batch > 0, "tracker.amen_batch", "must be positive");
  require(t.amen_momentum >= 0.0 && t.amen_momentum < 1.0, "tracker.amen_momentum", "must lie in [0, 1)");
  require(sampler.n_candidates > 0, "sampler.n_candidates", "must be positive");
  require(sampler.split_ratio >= 0.0 && sampler.split_ratio <= 1.0, "sampler.split_ratio", "must lie in [0, 1]");
  require(sampler.min_scale > 0.0 && sampler.min_scale <= sampler.max_scale, "sampler.min_scale", "must satisfy 0 < min <= max");
  require(wcnn.beta >= 0.0, "wcnn.beta", "must be non-negative");
  require(wcnn.input_scale > 0.0, "wcnn.input_scale", "must be positive");
  require(wcnn.hidden > 0, "wcnn.hidden", "must be positive");
  require(wcnn.batch_positives > 0 && wcnn.batch_negatives > 0, "wcnn.batch_*", "must be positive");
  require(wcnn.momentum >= 0.0 && wcnn.momentum < 1.0, "wcnn.momentum", "must lie in [0, 1)");
  men.validate();
  siamese.validate();
  require(training.fmen_batch > 0, "training.fmen_batch", "must be positive");
}

TrackerConfig config_from_json(const json& doc) {
  TrackerConfig cfg;
  Section root(doc, "config");
  const auto reader = [](Section& s) { return [&s](const char* k, auto& f) { s.get(k, f); }; };
  {
    Section s = root.child("tracker");
    visit_tracker(cfg.tracker, reader(s));
    s.finish();
  }
  {
    Section s = root.child("sampler");
    visit_sampler(cfg.sampler, reader(s));
    s.finish();
  }
  {
    Section s = root.child("wcnn");
    visit_wcnn(cfg.wcnn, reader(s));
    s.finish();
  }
  {
    Section s = root.child("men");
    visit_men(cfg.men, reader(s));
    Section l = s.child("lrn");
    visit_lrn(cfg.men.lrn, reader(l));
    l.finish();
    s.finish();
  }
  {
    Section s = root.child("siamese");
    visit_siamese(cfg.siamese, reader(s));
    s.finish();
  }
  {
    Section s = root.child("training");
    visit_training(cfg.training, reader(s));
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

json config_to_json(const TrackerConfig& cfg_in) {
  TrackerConfig cfg = cfg_in;
  json doc = json::object();
  const auto writer = [](json& j) { return [&j](const char* k, const auto& f) { j[k] = f; }; };
  visit_tracker(cfg.tracker, writer(doc["tracker"]));
  visit_sampler(cfg.sampler, writer(doc["sampler"]));
  visit_wcnn(cfg.wcnn, writer(doc["wcnn"]));
  visit_men(cfg.men, writer(doc["men"]));
  visit_lrn(cfg.men.lrn, writer(doc["men"]["lrn"]));
  visit_siamese(cfg.siamese, writer(doc["siamese"]));
  visit_training(cfg.training, writer(doc["training"]));
  return doc;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

TrackerConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

namespace {

template <typename Visit>
void visit_spec(SequenceSpec& s, Visit&& v) {
  v("name", s.name);
  v("length", s.length);
  v("width", s.width);
  v("height", s.height);
  v("target_w", s.target_w);
  v("target_h", s.target_h);
  v("texture_seed", s.texture_seed);
  v("walk_sigma", s.walk_sigma);
  v("max_speed", s.max_speed);
  v("illumination_ramp", s.illumination_ramp);
  v("scale_drift", s.scale_drift);
  v("appearance_drift", s.appearance_drift);
  v("distractors", s.distractors);
}

template <typename Visit>
void visit_jump(JumpEvent& j, Visit&& v) {
  v("frame", j.frame);
  v("dx", j.dx);
  v("dy", j.dy);
}

template <typename Visit>
void visit_occlusion(OcclusionEvent& o, Visit&& v) {
  v("start", o.start);
  v("duration", o.duration);
  v("coverage", o.coverage);
}

template <typename T, typename VisitItem>
std::vector<T> read_list(const json& doc, const char* key, VisitItem visit) {
  std::vector<T> out;
  auto it = doc.find(key);
  if (it == doc.end()) return out;
  if (!it->is_array()) throw ConfigError(std::string("spec.") + key + ": expected an array");
  for (std::size_t i = 0; i < it->size(); ++i) {
    T item;
    Section s((*it)[i], std::string("spec.") + key + "[" + std::to_string(i) + "]");
    visit(item, [&s](const char* k, auto& f) { s.get(k, f); });
    s.finish();
    out.push_back(item);
  }
  return out;
}

}  // namespace

SequenceSpec sequence_spec_from_json(const json& doc) {
  SequenceSpec spec;
  Section root(doc, "spec");
  visit_spec(spec, [&root](const char* k, auto& f) { root.get(k, f); });
  root.accept("jumps");
  root.accept("occlusions");
  root.finish();
  spec.jumps = read_list<JumpEvent>(doc, "jumps", [](JumpEvent& j, auto&& v) { visit_jump(j, v); });
  spec.occlusions =
      read_list<OcclusionEvent>(doc, "occlusions", [](OcclusionEvent& o, auto&& v) { visit_occlusion(o, v); });
  try {
    spec.validate();
  } catch (const SequenceSpecError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

json sequence_spec_to_json(const SequenceSpec& spec_in) {
  SequenceSpec spec = spec_in;
  json doc = json::object();
  visit_spec(spec, [&doc](const char* k, const auto& f) { doc[k] = f; });
  doc["jumps"] = json::array();
  for (JumpEvent j : spec.jumps) {
    json item = json::object();
    visit_jump(j, [&item](const char* k, const auto& f) { item[k] = f; });
    doc["jumps"].push_back(item);
  }
  doc["occlusions"] = json::array();
  for (OcclusionEvent o : spec.occlusions) {
    json item = json::object();
    visit_occlusion(o, [&item](const char* k, const auto& f) { item[k] = f; });
    doc["occlusions"].push_back(item);
  }
  return doc;
}

}  // namespace adasiam
