// scenediff: command-line front end for the change-detection pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenediff/change_detection.hpp"
#include "scenediff/error.hpp"
#include "scenediff/evaluation.hpp"
#include "scenediff/feature_store.hpp"
#include "scenediff/io.hpp"
#include "scenediff/localization.hpp"
#include "scenediff/motion_prior.hpp"
#include "scenediff/run_config.hpp"
#include "scenediff/synthworld.hpp"
#include "scenediff/vocabulary.hpp"

namespace fs = std::filesystem;
using namespace scenediff;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

constexpr char kVocabFile[] = "vocab.vvf";
constexpr char kMotionFile[] = "motion.mvf";
constexpr char kIndexFile[] = "index.bif";
constexpr char kLocalizationHeader[] = "query_frame,rank,frame_id,distance";

struct Inputs {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  bool no_motion = false;
  std::string query;
  std::string vocab;
  std::string tracks;
  std::string scores;
  std::string gt;
  std::string localization;
};

void log(const std::string& line) { std::cout << line << "\n"; }

RunConfig resolve_config(const Inputs& in) {
  RunConfig config;
  if (!in.config_file.empty()) load_config_file(config, in.config_file);
  for (const auto& [key, value] : in.overrides) set_config_value(config, key, value);
  if (in.no_motion) config.motion = false;
  config.world.seed = config.seed;
  config.world.exclusion = config.exclusion;
  config.world.keyframe_stride = config.stride;
  config.validate();
  return config;
}

fs::path need_path(const std::string& value, const char* flag) {
  require(!value.empty(), ErrorKind::configuration, std::string("missing required ") + flag);
  return value;
}

fs::path output_dir(const RunConfig& config) {
  fs::path out = config.output.empty() ? fs::path(".") : fs::path(config.output);
  fs::create_directories(out);
  return out;
}

fs::path models_dir(const RunConfig& config, bool create) {
  fs::path dir = need_path(config.models, "--models");
  if (create) fs::create_directories(dir);
  return dir;
}

void write_meta(const RunConfig& config, std::string_view subcommand, const fs::path& dir) {
  io::write_text(dir / "run_meta.json", config_to_json(config, subcommand));
}

ViewSequenceMap load_map(const RunConfig& config) {
  return read_feature_store(need_path(config.map, "--map"));
}

/// Query frames from either a feature store directory or a single frame
/// file named `<frame_id>.vsf` laid out like the map.
ViewSequenceMap load_queries(const std::string& query, const ViewSequenceMap& map) {
  const fs::path path = need_path(query, "--query");
  if (fs::is_directory(path)) {
    ViewSequenceMap store = read_feature_store(path);
    require(store.layout == map.layout, ErrorKind::validation,
            "query descriptor layout differs from the map");
    return store;
  }
  ViewSequenceMap single;
  single.layout = map.layout;
  single.image_width = map.image_width;
  single.image_height = map.image_height;
  const FrameId id = static_cast<FrameId>(io::parse_int(path.stem().string()));
  single.frames.push_back(
      read_frame_file(path, map.layout, id, map.image_width, map.image_height));
  return single;
}

std::shared_ptr<const Vocabulary> load_vocab(const RunConfig& config, const Inputs& in) {
  const fs::path file = in.vocab.empty() ? models_dir(config, false) / kVocabFile : fs::path(in.vocab);
  return std::make_shared<const Vocabulary>(read_vocabulary(file));
}

BolcfIndex load_index(const RunConfig& config, const ViewSequenceMap& map,
                      std::shared_ptr<const Vocabulary> vocab) {
  if (!config.models.empty() && fs::exists(fs::path(config.models) / kIndexFile)) {
    return read_index(fs::path(config.models) / kIndexFile, std::move(vocab));
  }
  return build_index(map, std::move(vocab), config.keyframes_only);
}

/// Restricts the map and its index to frames far enough in time from the query.
struct Pairing {
  ViewSequenceMap map;
  BolcfIndex index;
};

Pairing pair_for_query(const ViewSequenceMap& map, const BolcfIndex& index, const Frame& query,
                       std::int64_t exclusion) {
  Pairing p;
  p.map = build_test_pairing(map, query.timestamp_index, exclusion);
  p.index.vocab = index.vocab;
  for (const IndexedFrame& f : index.frames) {
    if (p.map.find_frame(f.frame_id) != nullptr) p.index.frames.push_back(f);
  }
  require(!p.index.frames.empty(), ErrorKind::pairing,
          "no indexed frame remains for query " + std::to_string(query.frame_id));
  return p;
}

void append_localization(std::string& text, FrameId query, const LocalizationResult& result) {
  for (std::size_t r = 0; r < result.ranked.size(); ++r) {
    text += std::to_string(query) + "," + std::to_string(r + 1) + "," +
            std::to_string(result.ranked[r].frame_id) + "," +
            io::format_double(result.ranked[r].distance) + "\n";
  }
}

std::vector<QueryLocalization> read_top_frames(const fs::path& file) {
  std::vector<QueryLocalization> tops;
  for (const auto& row : io::read_csv(file, kLocalizationHeader)) {
    if (io::parse_int(row[1]) != 1) continue;
    tops.push_back({static_cast<FrameId>(io::parse_int(row[0])),
                    static_cast<FrameId>(io::parse_int(row[2]))});
  }
  return tops;
}

std::vector<ChangeScore> load_scores(const std::string& path) {
  const fs::path file = need_path(path, "--scores");
  require(!fs::exists(file) || io::read_text(file).find_first_not_of(" \t\r\n") != std::string::npos,
          ErrorKind::validation, "score file " + path + " is empty");
  std::vector<ChangeScore> scores = read_change_scores(file);
  require(!scores.empty(), ErrorKind::validation, "score file " + path + " holds no scores");
  return scores;
}

void run_gen(const RunConfig& config) {
  const fs::path out = output_dir(config);
  const SyntheticWorld world = generate_world(config.world);
  write_world(world, out);
  write_meta(config, "gen", out);
  log("gen: " + std::to_string(world.map.frames.size()) + " map frames, " +
      std::to_string(world.queries.size()) + " queries, " +
      std::to_string(world.ground_truth.size()) + " boxes -> " + out.string());
}

void run_learn_vocab(const RunConfig& config) {
  const ViewSequenceMap map = load_map(config);
  require(map.layout.kind == DescriptorKind::dense, ErrorKind::validation,
          "vocabulary learning needs dense descriptors");
  const fs::path dir = models_dir(config, true);
  KMeansOptions options;
  options.max_iterations = config.kmeans_iterations;
  std::vector<DenseVector> training;
  for (std::size_t i = 0; i < map.frames.size(); i += config.vocab_stride) {
    for (const LocalFeature& f : map.frames[i].features) training.push_back(f.dense());
  }
  const Vocabulary vocab = learn_vocabulary(training, config.word_count, config.vocab_seed, options);
  write_vocabulary(vocab, dir / kVocabFile);
  write_meta(config, "learn-vocab", dir);
  log("learn-vocab: " + std::to_string(vocab.word_count()) + " words from " +
      std::to_string(training.size()) + " descriptors");
}

void run_learn_motion(const RunConfig& config, const Inputs& in) {
  const ViewSequenceMap map = load_map(config);
  const fs::path dir = models_dir(config, true);
  const std::vector<Track> tracks = read_tracks(need_path(in.tracks, "--tracks"));
  const auto labels =
      detect_anomaly_ego_motion(map.poses, config.window, config.curvature_threshold());
  const auto features = extract_motion_features(tracks, map.poses, config.unit_length, labels);
  const MotionVocabulary vocab = learn_motion_vocabulary(features, config.motion_options());
  write_motion_vocabulary(vocab, dir / kMotionFile);
  write_meta(config, "learn-motion", dir);
  log("learn-motion: " + std::to_string(vocab.words.size()) + " motion words from " +
      std::to_string(features.size()) + " motion features");
}

void run_index(const RunConfig& config, const Inputs& in) {
  const ViewSequenceMap map = load_map(config);
  const fs::path dir = models_dir(config, true);
  const BolcfIndex index = build_index(map, load_vocab(config, in), config.keyframes_only);
  write_index(index, dir / kIndexFile);
  write_meta(config, "index", dir);
  log("index: " + std::to_string(index.frames.size()) + " frames indexed");
}

void run_localize(const RunConfig& config, const Inputs& in) {
  const ViewSequenceMap map = load_map(config);
  const ViewSequenceMap queries = load_queries(in.query, map);
  const BolcfIndex index = load_index(config, map, load_vocab(config, in));
  const fs::path out = output_dir(config);
  LocalizeOptions options;
  options.inverted_shortlist = config.shortlist;
  std::string text = std::string(kLocalizationHeader) + "\n";
  for (const Frame& q : queries.frames) {
    const Pairing p = pair_for_query(map, index, q, config.exclusion);
    append_localization(text, q.frame_id, localize(q, p.index, config.R, options));
  }
  io::write_text(out / "localization.csv", text);
  write_meta(config, "localize", out);
  log("localize: " + std::to_string(queries.frames.size()) + " queries");
}

void run_detect(const RunConfig& config, const Inputs& in) {
  const ViewSequenceMap map = load_map(config);
  const ViewSequenceMap queries = load_queries(in.query, map);
  const BolcfIndex index = load_index(config, map, load_vocab(config, in));
  const ProjectionDictionary dict(config.projection_seed, config.B, map.layout.dimension);

  std::optional<MotionVocabulary> motion;
  if (config.motion) motion = read_motion_vocabulary(models_dir(config, false) / kMotionFile);
  const auto labels =
      detect_anomaly_ego_motion(map.poses, config.window, config.curvature_threshold());

  DetectionOptions options = config.detection_options();
  options.map_labels = labels;

  const fs::path out = output_dir(config);
  std::vector<ChangeScore> all;
  std::string loc = std::string(kLocalizationHeader) + "\n";
  for (const Frame& q : queries.frames) {
    const Pairing p = pair_for_query(map, index, q, config.exclusion);
    const DetectionResult r =
        detect_changes(q, p.map, p.index, dict, motion ? &*motion : nullptr, options);
    append_localization(loc, q.frame_id, r.localization);
    all.insert(all.end(), r.scores.begin(), r.scores.end());
  }
  write_change_scores(all, out / "changes.csv");
  io::write_text(out / "localization.csv", loc);
  write_meta(config, "detect", out);
  log("detect: " + std::to_string(all.size()) + " scored features over " +
      std::to_string(queries.frames.size()) + " queries (motion " +
      (config.motion ? "on" : "off") + ")");
}

void run_evaluate(const RunConfig& config, const Inputs& in) {
  const std::vector<ChangeScore> scores = load_scores(in.scores);
  const std::vector<GroundTruthBox> boxes = read_ground_truth(need_path(in.gt, "--gt"));
  const RankReport report = rank_changed_features(scores, boxes);
  const fs::path out = output_dir(config);
  write_report(report, out / "report.csv");
  write_meta(config, "evaluate", out);
  log("evaluate: " + std::to_string(report.covered()) + "/" + std::to_string(report.boxes.size()) +
      " boxes covered, " + std::to_string(report.total_features) + " features ranked");
}

void run_plot_data(const RunConfig& config, const Inputs& in) {
  const std::vector<ChangeScore> scores = load_scores(in.scores);
  const std::vector<GroundTruthBox> boxes = read_ground_truth(need_path(in.gt, "--gt"));
  const ViewSequenceMap map = load_map(config);
  const ViewSequenceMap queries = read_feature_store(need_path(in.query, "--query"));
  const auto tops = read_top_frames(need_path(in.localization, "--localization"));
  const RankReport report = rank_changed_features(scores, boxes);
  const auto points = rank_vs_localization_error(report, tops, queries.poses, map.poses);
  const fs::path out = output_dir(config);
  write_plot_data(points, out / "plot.csv");
  write_meta(config, "plot-data", out);
  log("plot-data: " + std::to_string(points.size()) + " points");
}

std::string quote(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int report_error(std::string_view kind, std::string_view message, int code) {
  std::cerr << "error: kind=" << kind << " message=\"" << quote(message) << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change detection against a view-sequence map"};
  app.require_subcommand(1);

  Inputs in;
  struct Sub {
    const char* name;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {"gen", "Generate a synthetic world"},
      {"learn-vocab", "Learn the appearance vocabulary from a map"},
      {"learn-motion", "Learn the motion vocabulary from feature tracks"},
      {"index", "Build the bag-of-words index of a map"},
      {"localize", "Rank map frames for query frames"},
      {"detect", "Score query features for change"},
      {"evaluate", "Rank-based evaluation against ground-truth boxes"},
      {"plot-data", "Best rank against localization error"},
  };
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", in.config_file, "Run configuration file")->check(CLI::ExistingFile);
    for (const std::string& key : config_keys()) {
      std::string name = "--" + key;
      if (key == "output") name = "-o,--out,--output";
      if (key.size() == 1) name = "-" + key + ",--" + key;
      sub->add_option_function<std::string>(
          name, [&in, key](const std::string& v) { in.overrides[key] = v; }, "Override " + key);
    }
    sub->add_flag("--no-motion", in.no_motion, "Score without the motion prior");
    sub->add_option("--query", in.query, "Query frame file or query feature store");
    sub->add_option("--vocab", in.vocab, "Vocabulary file (default <models>/vocab.vvf)");
    sub->add_option("--tracks", in.tracks, "Feature tracks CSV");
    sub->add_option("--scores", in.scores, "changes.csv from detect");
    sub->add_option("--gt", in.gt, "Ground-truth boxes CSV");
    sub->add_option("--localization", in.localization, "localization.csv from detect");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kExitUsage);
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    const RunConfig config = resolve_config(in);
    if (sub == "gen") run_gen(config);
    else if (sub == "learn-vocab") run_learn_vocab(config);
    else if (sub == "learn-motion") run_learn_motion(config, in);
    else if (sub == "index") run_index(config, in);
    else if (sub == "localize") run_localize(config, in);
    else if (sub == "detect") run_detect(config, in);
    else if (sub == "evaluate") run_evaluate(config, in);
    else run_plot_data(config, in);
  } catch (const Error& e) {
    const int code = e.kind() == ErrorKind::configuration ? kExitUsage : kExitValidation;
    return report_error(to_string(e.kind()), e.what(), code);
  } catch (const std::exception& e) {
    return report_error("io", e.what(), kExitValidation);
  }
  return 0;
}
