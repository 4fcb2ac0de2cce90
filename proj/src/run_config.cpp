#include "scenediff/run_config.hpp"

#include <algorithm>
#include <functional>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "scenediff/error.hpp"
#include "scenediff/io.hpp"

namespace scenediff {

namespace {

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_unsigned(std::string_view key, std::string_view v) {
  const std::int64_t x = io::parse_int(v);
  require(x >= 0, ErrorKind::configuration, std::string(key) + " must be non-negative");
  return static_cast<T>(x);
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::configuration, std::string(key) + ": expected true or false, got '" +
                                     std::string(v) + "'");
}

std::string format_curves(const std::vector<CurveSegment>& curves) {
  std::string out;
  for (const CurveSegment& c : curves) {
    if (!out.empty()) out += ",";
    out += std::to_string(c.start_frame) + ":" +
           io::format_double(c.arc_angle * 180.0 / std::numbers::pi) + ":" +
           io::format_double(c.length);
  }
  return out;
}

std::vector<CurveSegment> parse_curves(std::string_view text) {
  std::vector<CurveSegment> curves;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = text.substr(start, end - start);
    const std::size_t a = item.find(':');
    const std::size_t b = a == std::string_view::npos ? a : item.find(':', a + 1);
    require(b != std::string_view::npos, ErrorKind::configuration,
            "curves: expected start:angle_deg:length, got '" + std::string(item) + "'");
    CurveSegment c;
    c.start_frame = static_cast<FrameId>(io::parse_int(item.substr(0, a)));
    c.arc_angle = io::parse_double(item.substr(a + 1, b - a - 1)) * std::numbers::pi / 180.0;
    c.length = io::parse_double(item.substr(b + 1));
    curves.push_back(c);
    start = end + 1;
  }
  return curves;
}

#define SD_STRING(field)                                                          \
  KeySpec{#field, [](RunConfig& c, std::string_view v) { c.field = std::string(v); }, \
          [](const RunConfig& c) { return c.field; }}
#define SD_UNSIGNED(name, field)                                                       \
  KeySpec{name,                                                                        \
          [](RunConfig& c, std::string_view v) {                                       \
            c.field = parse_unsigned<decltype(c.field)>(name, v);                      \
          },                                                                           \
          [](const RunConfig& c) { return std::to_string(c.field); }}
#define SD_REAL(name, field)                                                                 \
  KeySpec{name, [](RunConfig& c, std::string_view v) { c.field = io::parse_double(v); }, \
          [](const RunConfig& c) { return io::format_double(c.field); }}
#define SD_BOOL(name, field)                                                                 \
  KeySpec{name, [](RunConfig& c, std::string_view v) { c.field = parse_bool(name, v); }, \
          [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}

const std::vector<KeySpec>& registry() {
  static const std::vector<KeySpec> keys = {
      SD_STRING(map),
      SD_STRING(models),
      SD_STRING(output),
      SD_UNSIGNED("R", R),
      SD_UNSIGNED("K", K),
      SD_REAL("Tm", Tm),
      SD_REAL("Tc", Tc),
      SD_UNSIGNED("B", B),
      SD_UNSIGNED("word_count", word_count),
      SD_UNSIGNED("kmeans_iterations", kmeans_iterations),
      SD_UNSIGNED("vocab_stride", vocab_stride),
      SD_UNSIGNED("stride", stride),
      SD_REAL("unit_length", unit_length),
      SD_UNSIGNED("window", window),
      KeySpec{"exclusion", [](RunConfig& c, std::string_view v) { c.exclusion = io::parse_int(v); },
              [](const RunConfig& c) { return std::to_string(c.exclusion); }},
      SD_UNSIGNED("motion_sample", motion_sample),
      SD_UNSIGNED("motion_iterations", motion_iterations),
      SD_UNSIGNED("motion_words", motion_words),
      SD_UNSIGNED("seed", seed),
      SD_UNSIGNED("vocab_seed", vocab_seed),
      SD_UNSIGNED("motion_seed", motion_seed),
      SD_UNSIGNED("projection_seed", projection_seed),
      SD_BOOL("motion", motion),
      SD_BOOL("keyframes_only", keyframes_only),
      SD_BOOL("shortlist", shortlist),
      SD_STRING(motion_term),
      SD_STRING(motion_eval),
      SD_STRING(candidate_scope),
      SD_UNSIGNED("route_length", world.route_length),
      SD_REAL("frame_spacing", world.frame_spacing),
      SD_REAL("facade_distance", world.facade_distance),
      SD_REAL("column_spacing", world.column_spacing),
      SD_UNSIGNED("landmark_rows", world.landmark_rows),
      SD_REAL("row_spacing", world.row_spacing),
      SD_REAL("position_jitter", world.position_jitter),
      SD_UNSIGNED("changed_objects", world.changed_objects),
      SD_UNSIGNED("query_count", world.query_count),
      SD_BOOL("loop_closure", world.loop_closure),
      SD_UNSIGNED("query_margin", world.query_margin),
      SD_UNSIGNED("descriptor_dim", world.descriptor_dim),
      SD_REAL("descriptor_noise", world.descriptor_noise),
      SD_REAL("focal_length", world.camera.focal_length),
      SD_UNSIGNED("image_width", world.camera.image_width),
      SD_UNSIGNED("image_height", world.camera.image_height),
      KeySpec{"curves",
              [](RunConfig& c, std::string_view v) { c.world.curves = parse_curves(v); },
              [](const RunConfig& c) { return format_curves(c.world.curves); }},
  };
  return keys;
}

#undef SD_STRING
#undef SD_UNSIGNED
#undef SD_REAL
#undef SD_BOOL

const KeySpec& find_key(std::string_view key) {
  const auto& keys = registry();
  auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.name == key; });
  if (it == keys.end()) fail(ErrorKind::configuration, "unknown configuration key '" + std::string(key) + "'");
  return *it;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

ScoringOptions RunConfig::scoring_options() const {
  ScoringOptions o;
  o.neighbours = K;
  o.motion_threshold = Tm;
  o.use_motion = motion;
  o.motion_term = motion_term == "separate" ? MotionTerm::separate : MotionTerm::literal;
  o.motion_evaluation = motion_eval == "nearest-only" ? MotionEvaluation::nearest_only
                                                      : MotionEvaluation::per_candidate;
  return o;
}

DetectionOptions RunConfig::detection_options() const {
  DetectionOptions o;
  o.top_r = R;
  o.scoring = scoring_options();
  o.scope = candidate_scope == "top" ? CandidateScope::top_reference : CandidateScope::all_references;
  o.localize.inverted_shortlist = shortlist;
  return o;
}

MotionVocabularyOptions RunConfig::motion_options() const {
  return {motion_sample, motion_iterations, motion_words, motion_seed};
}

double RunConfig::curvature_threshold() const { return Tc * std::numbers::pi / 180.0; }

void RunConfig::validate() const {
  auto positive = [](bool ok, const char* key) {
    require(ok, ErrorKind::configuration, std::string(key) + " must be positive");
  };
  positive(R > 0, "R");
  positive(K > 0, "K");
  positive(Tm > 0.0, "Tm");
  positive(Tc > 0.0, "Tc");
  positive(B > 0, "B");
  require(B % 8 == 0, ErrorKind::configuration, "B must be a multiple of 8");
  positive(word_count > 0, "word_count");
  positive(vocab_stride > 0, "vocab_stride");
  positive(stride > 0, "stride");
  positive(unit_length > 0.0, "unit_length");
  positive(window > 0, "window");
  require(window % 2 == 0, ErrorKind::configuration, "window must be even");
  positive(exclusion > 0, "exclusion");
  positive(motion_sample > 0, "motion_sample");
  positive(motion_iterations > 0, "motion_iterations");
  positive(motion_words > 0, "motion_words");
  require(motion_term == "literal" || motion_term == "separate", ErrorKind::configuration,
          "motion_term must be literal or separate");
  require(motion_eval == "per-candidate" || motion_eval == "nearest-only", ErrorKind::configuration,
          "motion_eval must be per-candidate or nearest-only");
  require(candidate_scope == "union" || candidate_scope == "top", ErrorKind::configuration,
          "candidate_scope must be union or top");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const KeySpec& k : registry()) out.push_back(k.name);
    return out;
  }();
  return names;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  try {
    find_key(key).set(config, value);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::configuration) throw;
    fail(ErrorKind::configuration, std::string(key) + ": " + e.what());
  }
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return find_key(key).get(config);
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::istringstream lines{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    std::string_view line = raw;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string_view::npos, ErrorKind::configuration,
            "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    set_config_value(config, key, value);
  }
}

void load_config_file(RunConfig& config, const std::filesystem::path& file) {
  apply_config_text(config, io::read_text(file));
}

std::string config_to_json(const RunConfig& config, std::string_view subcommand) {
  nlohmann::ordered_json meta;
  meta["subcommand"] = std::string(subcommand);
  nlohmann::ordered_json values = nlohmann::ordered_json::object();
  for (const KeySpec& k : registry()) values[k.name] = k.get(config);
  meta["config"] = values;
  return meta.dump(2) + "\n";
}

}  // namespace scenediff
