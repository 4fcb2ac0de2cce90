#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "scenediff/localization.hpp"
#include "scenediff/motion_prior.hpp"
#include "scenediff/types.hpp"
#include "scenediff/vocabulary.hpp"

namespace scenediff {

inline constexpr std::uint32_t kDefaultNeighbourCount = 10;

struct ChangeScore {
  FrameId query_frame = 0;
  FeatureId feature_id = 0;
  Keypoint keypoint;
  double likelihood = 0.0;
  FrameId matched_frame = 0;
  FeatureId matched_feature = 0;
  bool anomaly_motion = false;

  friend bool operator==(const ChangeScore&, const ChangeScore&) = default;
};

struct PoolFeature {
  FrameId frame_id = 0;
  FeatureId feature_id = 0;
  Keypoint keypoint;
  BinaryCode code;
};

/// Binarized features of the top-ranked reference frames, with provenance.
struct ReferencePool {
  std::vector<PoolFeature> features;

  bool empty() const { return features.empty(); }
};

/// Binarizes the features of the given frames (dense descriptors go through
/// `dict`, binary ones are taken as stored), in the order the frames are listed.
ReferencePool build_reference_pool(const ViewSequenceMap& map, std::span<const FrameId> frames,
                                   const ProjectionDictionary* dict);

/// Minimum Hamming distance from the query code to any pool feature.
std::uint32_t likelihood_eq1(const BinaryCode& query, const ReferencePool& pool);

enum class MotionTerm {
  /// (1 + M) * d, with d the Hamming distance.
  literal,
  /// d + M * (4D distance to the nearest motion word).
  separate,
};

enum class MotionEvaluation {
  /// Every candidate is paired with its own hypothesized motion.
  per_candidate,
  /// M is evaluated once, at the appearance-nearest candidate.
  nearest_only,
};

struct ScoringOptions {
  std::uint32_t neighbours = kDefaultNeighbourCount;
  double motion_threshold = kDefaultMotionThreshold;
  bool use_motion = true;
  MotionTerm motion_term = MotionTerm::literal;
  MotionEvaluation motion_evaluation = MotionEvaluation::per_candidate;
};

/// Motion-weighted nearest-neighbour score of one query feature. The K
/// candidates are the pool features nearest in Hamming distance (ties by
/// frame id, then feature id); with motion enabled, each candidate's
/// hypothesized motion (query keypoint -> candidate keypoint) is checked
/// against the motion vocabulary. `query_anomaly_ego` forces M to 0.
ChangeScore likelihood_eq3(FrameId query_frame, const LocalFeature& query_feature,
                           const BinaryCode& query_code, const ReferencePool& pool,
                           const MotionVocabulary* motion_vocab, bool query_anomaly_ego,
                           const ScoringOptions& options = {});

enum class CandidateScope {
  /// Candidates come from the union of all R references.
  all_references,
  /// Candidates come from the top-ranked reference only.
  top_reference,
};

struct DetectionOptions {
  std::uint32_t top_r = kDefaultTopR;
  ScoringOptions scoring;
  CandidateScope scope = CandidateScope::all_references;
  LocalizeOptions localize;
  /// Ego-motion labels of the map frames. The query takes the label of its
  /// top-ranked reference frame unless `query_anomaly_ego` is set.
  std::span<const EgoMotionSegmentLabel> map_labels;
  std::optional<bool> query_anomaly_ego;
};

struct DetectionResult {
  LocalizationResult localization;
  bool query_anomaly_ego = false;
  /// One score per query feature, ordered by feature id.
  std::vector<ChangeScore> scores;
};

DetectionResult detect_changes(const Frame& query, const ViewSequenceMap& map,
                               const BolcfIndex& index, const ProjectionDictionary& dict,
                               const MotionVocabulary* motion_vocab,
                               const DetectionOptions& options = {});

inline constexpr char kChangesHeader[] =
    "query_frame,feature_id,x,y,likelihood,matched_frame,matched_feature,anomaly_motion";

void write_change_scores(std::span<const ChangeScore> scores, const std::filesystem::path& file);
std::vector<ChangeScore> read_change_scores(const std::filesystem::path& file);

}  // namespace scenediff
