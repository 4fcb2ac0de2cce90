#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "scenediff/types.hpp"

namespace scenediff {

inline constexpr double kDefaultUnitLength = 1.0;            // meters of ego-motion
inline constexpr std::uint32_t kDefaultWindowLength = 20;    // frames
inline constexpr double kDefaultCurvatureThreshold = 5.0 * std::numbers::pi / 180.0;
inline constexpr double kDefaultMotionThreshold = 10.0;      // pixels, 4D Euclidean
inline constexpr std::uint32_t kDefaultKeyframeStride = 10;

struct TrackPoint {
  FrameId frame_id = 0;
  Keypoint position;

  friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

/// A keypoint followed across frames; frame ids strictly increase.
struct Track {
  std::uint32_t track_id = 0;
  std::vector<TrackPoint> points;

  friend bool operator==(const Track&, const Track&) = default;
};

/// Start and end pixel positions of a track over one unit of ego-motion,
/// read as the 4D vector (x_s, y_s, x_e, y_e).
struct MotionFeature {
  Keypoint start;
  Keypoint end;

  std::array<double, 4> vec() const { return {start.x, start.y, end.x, end.y}; }

  friend bool operator==(const MotionFeature&, const MotionFeature&) = default;
};

double motion_distance(const MotionFeature& a, const MotionFeature& b);

/// Motion words sorted by descending vote count (consistency checks passed).
struct MotionVocabulary {
  std::vector<MotionFeature> words;
  std::vector<std::uint32_t> votes;

  bool empty() const { return words.empty(); }

  friend bool operator==(const MotionVocabulary&, const MotionVocabulary&) = default;
};

struct EgoMotionSegmentLabel {
  FrameId frame_id = 0;
  bool anomaly = false;
  /// Circular standard deviation of the window's chord directions [rad].
  double curvature = 0.0;
  /// Every chord in the window had zero length; curvature is reported as 0.
  bool degenerate = false;
};

/// Motion features for every (track, start frame) pair whose track survives
/// until the ego-motion accumulated from the start frame reaches
/// `unit_length`. The end point is the track position at that moment,
/// interpolated linearly in frame time. Start frames labeled anomalous in
/// `labels` are skipped.
std::vector<MotionFeature> extract_motion_features(std::span<const Track> tracks,
                                                   std::span<const OdometryPose> poses,
                                                   double unit_length,
                                                   std::span<const EgoMotionSegmentLabel> labels = {});

struct MotionVocabularyOptions {
  std::uint32_t sample_size = 10000;
  std::uint32_t iterations = 100;
  std::uint32_t output_words = 1000;
  std::uint64_t seed = 0;
};

/// Reciprocal 1-NN voting. Each iteration samples `sample_size` features
/// without replacement; a sampled feature q with nearest neighbour r (ties to
/// the smallest feature index) passes when q is at r's nearest-neighbour
/// distance, i.e. q is itself a 1-NN of r. The most-voted features become
/// the words; features that never passed are not returned.
MotionVocabulary learn_motion_vocabulary(std::span<const MotionFeature> features,
                                         const MotionVocabularyOptions& options = {});

/// Curvature of the trajectory window starting at `window.front()`.
/// Chords run from pose i to pose i + L/2 for i in [0, L/2 - 1].
EgoMotionSegmentLabel window_curvature(std::span<const OdometryPose> window);

/// One label per pose. Frames whose window would run past the end inherit
/// the label of the last full window.
std::vector<EgoMotionSegmentLabel> detect_anomaly_ego_motion(
    std::span<const OdometryPose> poses, std::uint32_t window_length = kDefaultWindowLength,
    double threshold = kDefaultCurvatureThreshold);

std::vector<FrameId> select_keyframes(const ViewSequenceMap& map,
                                      std::uint32_t stride = kDefaultKeyframeStride);

/// Distance from `candidate` to its nearest motion word.
double nearest_motion_distance(const MotionFeature& candidate, const MotionVocabulary& vocab);

/// True when the candidate lies farther than `threshold` from every word.
bool classify_motion(const MotionFeature& candidate, const MotionVocabulary& vocab,
                     double threshold = kDefaultMotionThreshold);

/// `motion.mvf`: "MVF1", u32 word count, then per word 4 x f32 + u32 votes.
void write_motion_vocabulary(const MotionVocabulary& vocab, const std::filesystem::path& file);
MotionVocabulary read_motion_vocabulary(const std::filesystem::path& file);

/// Tracks CSV with header `track_id,frame_id,x,y`.
void write_tracks(std::span<const Track> tracks, const std::filesystem::path& file);
std::vector<Track> read_tracks(const std::filesystem::path& file);

}  // namespace scenediff
