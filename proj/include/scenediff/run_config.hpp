#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scenediff/change_detection.hpp"
#include "scenediff/synthworld.hpp"

namespace scenediff {

/// Everything a pipeline run depends on. Loaded from a TOML-style
/// `key = value` file; every key can be overridden by a `--key value` flag.
/// Defaults reproduce the published constants.
struct RunConfig {
  // paths
  std::string map;
  std::string models;
  std::string output;

  // hyperparameters
  std::uint32_t R = kDefaultTopR;
  std::uint32_t K = kDefaultNeighbourCount;
  double Tm = kDefaultMotionThreshold;              // pixels
  double Tc = 5.0;                                  // degrees
  std::uint32_t B = 128;
  std::uint32_t word_count = 4096;
  std::uint32_t kmeans_iterations = 100;
  std::uint32_t vocab_stride = 1;                   // train on every n-th map frame
  std::uint32_t stride = kDefaultKeyframeStride;
  double unit_length = kDefaultUnitLength;
  std::uint32_t window = kDefaultWindowLength;
  std::int64_t exclusion = kDefaultExclusion;
  std::uint32_t motion_sample = 10000;
  std::uint32_t motion_iterations = 100;
  std::uint32_t motion_words = 1000;

  // seeds
  std::uint64_t seed = 1;
  std::uint64_t vocab_seed = 7;
  std::uint64_t motion_seed = 11;
  std::uint64_t projection_seed = 42;

  // toggles
  bool motion = true;
  bool keyframes_only = false;
  bool shortlist = false;
  std::string motion_term = "literal";      // literal | separate
  std::string motion_eval = "per-candidate";  // per-candidate | nearest-only
  std::string candidate_scope = "union";    // union | top

  // synthetic world (gen)
  WorldConfig world;

  ScoringOptions scoring_options() const;
  DetectionOptions detection_options() const;
  MotionVocabularyOptions motion_options() const;
  double curvature_threshold() const;

  /// Throws ErrorKind::configuration on non-positive hyperparameters or
  /// unknown enumerated values.
  void validate() const;
};

/// Names of all configuration keys, in a fixed order.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value; throws ErrorKind::configuration for
/// unknown keys or malformed values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Current value of a key rendered as text (round-trips through
/// set_config_value).
std::string get_config_value(const RunConfig& config, std::string_view key);

/// Parses `key = value` lines. `#` starts a comment, `[section]` headers are
/// accepted and ignored, strings may be double-quoted.
void apply_config_text(RunConfig& config, std::string_view text);
void load_config_file(RunConfig& config, const std::filesystem::path& file);

/// JSON object with every key, used for run_meta.json.
std::string config_to_json(const RunConfig& config, std::string_view subcommand);

}  // namespace scenediff
