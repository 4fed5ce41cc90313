// adasiam: synth | train | track | eval | rerun

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adasiam/config.hpp"
#include "adasiam/errors.hpp"
#include "adasiam/eval.hpp"
#include "adasiam/io.hpp"
#include "adasiam/models.hpp"
#include "adasiam/synth.hpp"
#include "adasiam/tracker.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adasiam;

namespace {

constexpr char kManifestFile[] = "manifest.json";
constexpr char kModelFile[] = "models.adsm";

// Everything a subcommand reads from the command line. Stored verbatim in the
// manifest so a rerun can rebuild it.
struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string ablate = "full";
  bool overlay = false;
  bool maps = false;
  int threads = 1;
  std::string spec;
  std::string corpus;
  std::string model;
  std::string sequence;
  std::vector<std::string> pred;
  std::vector<std::string> gt;
};

json args_to_json(const Args& a) {
  json j;
  j["config"] = a.config;
  j["seed"] = a.seed ? json(*a.seed) : json(nullptr);
  j["out"] = a.out;
  j["ablate"] = a.ablate;
  j["overlay"] = a.overlay;
  j["maps"] = a.maps;
  j["threads"] = a.threads;
  j["spec"] = a.spec;
  j["corpus"] = a.corpus;
  j["model"] = a.model;
  j["sequence"] = a.sequence;
  j["pred"] = a.pred;
  j["gt"] = a.gt;
  return j;
}

Args args_from_json(const json& j) {
  Args a;
  try {
    a.config = j.at("config").get<std::string>();
    if (!j.at("seed").is_null()) a.seed = j.at("seed").get<std::uint64_t>();
    a.out = j.at("out").get<std::string>();
    a.ablate = j.at("ablate").get<std::string>();
    a.overlay = j.at("overlay").get<bool>();
    a.maps = j.at("maps").get<bool>();
    a.threads = j.at("threads").get<int>();
    a.spec = j.at("spec").get<std::string>();
    a.corpus = j.at("corpus").get<std::string>();
    a.model = j.at("model").get<std::string>();
    a.sequence = j.at("sequence").get<std::string>();
    a.pred = j.at("pred").get<std::vector<std::string>>();
    a.gt = j.at("gt").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest arguments: ") + e.what());
  }
  return a;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void prepare_out_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

void write_manifest(const std::string& subcommand, const Args& args, const json& resolved,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  json m;
  m["subcommand"] = subcommand;
  m["arguments"] = args_to_json(args);
  m["config_path"] = args.config;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["timestamp"] = utc_timestamp();
  m["resolved"] = resolved;
  write_text_file(fs::path(args.out) / kManifestFile, m.dump(2) + "\n");
}

// Config from --config (or defaults), --seed applied to the given field.
TrackerConfig resolve_config(const Args& a, const std::optional<json>& snapshot) {
  TrackerConfig cfg = snapshot ? config_from_json(*snapshot) : a.config.empty() ? TrackerConfig{} : load_config(a.config);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Args& a, const std::optional<json>& snapshot) {
  const json doc = snapshot ? snapshot->at("specs") : read_json_file(a.spec);
  std::vector<SequenceSpec> specs;
  if (doc.is_array()) {
    for (const json& item : doc) specs.push_back(sequence_spec_from_json(item));
    if (specs.empty()) throw ConfigError(a.spec + ": empty spec list");
  } else {
    specs.push_back(sequence_spec_from_json(doc));
  }
  const std::uint64_t seed = a.seed.value_or(1);
  prepare_out_dir(a.out);
  json resolved;
  resolved["seed"] = seed;
  resolved["specs"] = json::array();
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Sequence seq;
    try {
      seq = generate_sequence(specs[i], seed + i);
    } catch (const SequenceSpecError& e) {
      throw ConfigError(e.what());
    }
    const fs::path dir = doc.is_array() ? fs::path(a.out) / specs[i].name : fs::path(a.out);
    save_sequence(dir, seq);
    outputs.push_back(dir.string());
    resolved["specs"].push_back(sequence_spec_to_json(specs[i]));
  }
  if (!doc.is_array()) resolved["specs"] = resolved["specs"][0];
  write_manifest("synth", a, resolved, {a.spec}, outputs);
  std::cout << "wrote " << specs.size() << " sequence(s) to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

std::vector<Sequence> load_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("corpus directory not found: " + root.string());
  std::vector<fs::path> dirs;
  if (fs::exists(root / kGroundTruthFile)) dirs.push_back(root);
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / kGroundTruthFile)) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ConfigError("corpus is empty: " + root.string());
  std::vector<Sequence> corpus;
  for (const fs::path& d : dirs) corpus.push_back(load_sequence(d));
  return corpus;
}

int cmd_train(const Args& a, const std::optional<json>& snapshot) {
  TrackerConfig cfg = resolve_config(a, snapshot ? std::optional<json>(snapshot->at("config")) : std::nullopt);
  if (a.seed && !snapshot) cfg.training.init_seed = *a.seed;
  const std::vector<Sequence> corpus = load_corpus(a.corpus);
  prepare_out_dir(a.out);
  Models models = make_models(cfg);
  const OfflineTrainingLog log = train_models(models, corpus, cfg);
  const fs::path out(a.out);
  save_models(out / kModelFile, models);
  std::ostringstream loss;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < log.siamese.epoch_losses.size(); ++e)
    loss << e + 1 << ',' << format_double(log.siamese.epoch_losses[e]) << '\n';
  write_text_file(out / "loss.csv", loss.str());
  std::ostringstream fmen;
  fmen << "iteration,loss\n";
  for (std::size_t i = 0; i < log.fmen_losses.size(); ++i) fmen << i + 1 << ',' << format_double(log.fmen_losses[i]) << '\n';
  write_text_file(out / "fmen_loss.csv", fmen.str());
  write_manifest("train", a, json{{"config", config_to_json(cfg)}}, {a.corpus},
                 {(out / kModelFile).string(), (out / "loss.csv").string(), (out / "fmen_loss.csv").string()});
  std::cout << "initial loss " << format_double(log.siamese.initial_loss) << ", final loss "
            << format_double(log.siamese.epoch_losses.empty() ? log.siamese.initial_loss : log.siamese.epoch_losses.back())
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- track

int cmd_track(const Args& a, const std::optional<json>& snapshot) {
  TrackerConfig cfg = resolve_config(a, snapshot ? std::optional<json>(snapshot->at("config")) : std::nullopt);
  if (a.seed && !snapshot) cfg.tracker.seed = *a.seed;
  const Variant variant = parse_variant(a.ablate);
  if (a.model.empty()) throw ConfigError("--model is required");
  if (!fs::exists(a.model)) throw ConfigError("model checkpoint not found: " + a.model);
  const Models models = load_models(a.model, cfg);
  const Sequence seq = load_sequence(a.sequence);
  prepare_out_dir(a.out);
  const fs::path out(a.out);

  const SequenceRun run = run_sequence(models, cfg, variant, seq, a.maps);
  if (run.result.failed) throw std::runtime_error(seq.name + ": tracker initialization failed");
  std::vector<std::string> outputs{(out / "frames.csv").string(), (out / "fused.csv").string()};
  write_text_file(out / "frames.csv", frames_csv(run.records));
  write_text_file(out / "fused.csv", fused_csv(run.records));
  if (a.overlay) {
    fs::create_directories(out / "overlays");
    for (std::size_t t = 0; t < seq.length(); ++t) {
      write_png(out / "overlays" / frame_file_name(t + 1), overlay(seq.frames[t], run.predictions[t], seq.ground_truth[t]));
    }
    outputs.push_back((out / "overlays").string());
  }
  if (a.maps) {
    fs::create_directories(out / "maps");
    for (const FrameRecord& r : run.records) {
      if (!r.score_map) continue;
      const std::string stem = frame_file_name(r.frame).substr(0, 4);
      write_text_file(out / "maps" / (stem + ".csv"), score_map_csv(*r.score_map));
      write_png(out / "maps" / (stem + ".png"), score_heatmap(*r.score_map));
    }
    outputs.push_back((out / "maps").string());
  }
  write_manifest("track", a, json{{"config", config_to_json(cfg)}}, {a.model, a.sequence}, outputs);
  std::cout << seq.name << " " << variant_name(variant) << " " << summary_line(run.result) << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

// frames.csv rows keyed by frame number.
std::map<std::size_t, Box> read_predictions(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::map<std::size_t, Box> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("frame", 0) == 0)) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() < 5) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected frame,x,y,w,h,...");
    try {
      rows[std::stoul(cells[0])] = Box{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])};
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return rows;
}

int cmd_eval(const Args& a, const std::optional<json>&) {
  if (a.pred.empty()) throw ConfigError("eval: no prediction files given");
  if (a.pred.size() != a.gt.size()) {
    throw ConfigError("eval: " + std::to_string(a.pred.size()) + " prediction files but " +
                      std::to_string(a.gt.size()) + " ground-truth files");
  }
  std::vector<EvalResult> results;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    fs::path gt_path = a.gt[i];
    if (fs::is_directory(gt_path)) gt_path /= kGroundTruthFile;
    if (!fs::exists(gt_path)) throw ConfigError("missing ground truth: " + gt_path.string());
    if (!fs::exists(a.pred[i])) throw ConfigError("missing predictions: " + a.pred[i]);
    const std::vector<Box> gt = read_ground_truth(gt_path);
    const std::map<std::size_t, Box> rows = read_predictions(a.pred[i]);
    std::vector<Box> pred;
    for (std::size_t t = 1; t <= gt.size(); ++t) {
      auto it = rows.find(t);
      if (it != rows.end()) {
        pred.push_back(it->second);
      } else if (t == 1) {
        pred.push_back(gt[0]);  // frame 1 is the initialization
      } else {
        throw ConfigError(a.pred[i] + ": no prediction for frame " + std::to_string(t));
      }
    }
    if (rows.size() > gt.size()) throw ConfigError(a.pred[i] + ": more predictions than ground-truth frames");
    std::string name = gt_path.parent_path().filename().string();
    if (name.empty()) name = "sequence" + std::to_string(i + 1);
    results.push_back(evaluate(pred, gt, name));
  }
  prepare_out_dir(a.out);
  const fs::path out(a.out);
  std::vector<std::string> outputs;
  std::ostringstream summary;
  std::map<std::string, int> seen;
  for (const EvalResult& r : results) {
    std::string stem = r.name;
    if (seen[stem]++) stem += "_" + std::to_string(seen[stem]);
    write_text_file(out / (stem + ".csv"), eval_csv(r));
    outputs.push_back((out / (stem + ".csv")).string());
    summary << r.name << ": " << summary_line(r) << "\n";
  }
  const EvalResult agg = aggregate(results);
  write_text_file(out / "aggregate.csv", eval_csv(agg));
  summary << summary_line(agg) << "\n";
  write_text_file(out / "summary.txt", summary.str());
  outputs.push_back((out / "aggregate.csv").string());
  outputs.push_back((out / "summary.txt").string());
  std::vector<std::string> inputs = a.pred;
  inputs.insert(inputs.end(), a.gt.begin(), a.gt.end());
  write_manifest("eval", a, json::object(), inputs, outputs);
  std::cout << summary_line(agg) << "\n";
  return 0;
}

int dispatch(const std::string& sub, Args a, const std::optional<json>& snapshot) {
  if (a.threads < 1) throw ConfigError("--threads must be at least 1");
  omp_set_num_threads(a.threads);
  if (sub == "synth") return cmd_synth(a, snapshot);
  if (sub == "train") return cmd_train(a, snapshot);
  if (sub == "track") return cmd_track(a, snapshot);
  if (sub == "eval") return cmd_eval(a, snapshot);
  throw ConfigError("unknown subcommand in manifest: " + sub);
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_override) {
  const json m = read_json_file(manifest_path);
  if (!m.contains("subcommand") || !m.contains("arguments") || !m.contains("resolved")) {
    throw ConfigError(manifest_path + ": not a run manifest");
  }
  Args a = args_from_json(m.at("arguments"));
  if (!out_override.empty()) a.out = out_override;
  const std::string sub = m.at("subcommand").get<std::string>();
  const json& resolved = m.at("resolved");
  std::optional<json> snapshot;
  if (sub != "eval") snapshot = resolved;
  if (sub == "synth") a.seed = resolved.at("seed").get<std::uint64_t>();
  return dispatch(sub, a, snapshot);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive Siamese tracker: synthetic data, training, tracking and evaluation"};
  app.require_subcommand(1);
  Args a;
  std::string manifest;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "JSON config file (defaults when omitted)");
    sub->add_option("--seed", a.seed, "Seed override");
    sub->add_option("--out", a.out, "Output directory")->required();
    sub->add_option("--threads", a.threads, "Worker threads for candidate scoring")->capture_default_str();
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic sequence(s) from a spec file");
  common(synth);
  synth->add_option("--spec", a.spec, "Sequence spec JSON (object or array of objects)")->required();

  CLI::App* train = app.add_subcommand("train", "Offline training of the Siamese matcher and F-MEN");
  common(train);
  train->add_option("--corpus", a.corpus, "Directory of sequence directories")->required();

  CLI::App* track = app.add_subcommand("track", "Track one sequence");
  common(track);
  track->add_option("--model", a.model, "Checkpoint written by train")->required();
  track->add_option("--sequence", a.sequence, "Sequence directory")->required();
  track->add_option("--ablate", a.ablate, "full | no-men | no-wcnn | no-buffer")->capture_default_str();
  track->add_flag("--overlay", a.overlay, "Write box overlay images");
  track->add_flag("--maps", a.maps, "Write MEN score maps (CSV and heat map)");

  CLI::App* eval = app.add_subcommand("eval", "Precision/success curves for prediction files");
  common(eval);
  eval->add_option("--pred", a.pred, "Per-frame CSV written by track (repeatable)");
  eval->add_option("--gt", a.gt, "Ground-truth file or sequence directory, paired with --pred by position");

  std::string rerun_out;
  CLI::App* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest");
  rerun->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  rerun->add_option("--out", rerun_out, "Write to this directory instead of the recorded one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (rerun->parsed()) return cmd_rerun(manifest, rerun_out);
    return dispatch(app.get_subcommands().front()->get_name(), a, std::nullopt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SequenceSpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
