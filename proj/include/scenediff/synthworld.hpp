#pragma once

// Deterministic synthetic street: a camera driven along a ground-plane route
// looks sideways at a facade of landmarks laid out in rows and columns
// alongside the route. Every landmark has a latent appearance descriptor that
// is observed with per-frame noise. Changed objects are small clusters of
// extra landmarks standing between the camera and the facade, visible only in
// query frames.

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "scenediff/evaluation.hpp"
#include "scenediff/motion_prior.hpp"
#include "scenediff/types.hpp"

namespace scenediff {

struct CurveSegment {
  /// Map frame at which the arc starts.
  FrameId start_frame = 0;
  /// Signed turn angle [rad]; positive turns left. Zero gives a straight run.
  double arc_angle = 0.0;
  /// Arc length of the segment [m].
  double length = 0.0;
};

struct CameraModel {
  double focal_length = 500.0;  // pixels
  std::uint32_t image_width = kCanonicalImageWidth;
  std::uint32_t image_height = kCanonicalImageHeight;
  double height = 1.5;                        // meters above ground
  double yaw = std::numbers::pi / 2.0;        // relative to heading; +90 deg looks left
  double near_plane = 0.5;                    // meters
};

struct WorldConfig {
  std::uint64_t seed = 1;
  std::uint32_t route_length = 300;   // map frames
  double frame_spacing = 1.0;         // meters between consecutive map frames

  // Facade landmarks: one column every `column_spacing` meters of route,
  // `landmark_rows` rows stacked from `first_row_height`.
  double facade_distance = 10.0;
  double column_spacing = 1.0;
  std::uint32_t landmark_rows = 8;
  double first_row_height = 0.3;
  double row_spacing = 0.9;
  double position_jitter = 0.02;      // meters, per axis

  std::uint32_t changed_objects = 1;
  std::uint32_t query_count = 1;
  /// Query viewpoints coincide with mapped viewpoints when set; otherwise
  /// they sit a random fraction of a frame further along the route.
  bool loop_closure = true;
  std::int64_t exclusion = kDefaultExclusion;
  /// Queries are drawn at least this many frames away from either route end.
  std::uint32_t query_margin = 12;

  std::uint32_t descriptor_dim = 64;
  double descriptor_noise = 0.05;     // per-component standard deviation

  CameraModel camera;
  std::vector<CurveSegment> curves;
  std::uint32_t keyframe_stride = kDefaultKeyframeStride;

  /// Number of facade landmarks generated for this configuration.
  std::size_t landmark_count() const;
};

struct SyntheticWorld {
  ViewSequenceMap map;
  std::vector<Track> tracks;
  std::vector<GroundTruthBox> ground_truth;
  std::vector<Frame> queries;
  std::vector<OdometryPose> query_poses;
};

/// Throws ErrorKind::generation when the route cannot host the queries or a
/// changed object cannot be placed in view.
SyntheticWorld generate_world(const WorldConfig& config);

/// Poses following `start` along a constant-curvature arc at
/// `spacing`-meter arc-length steps, floor(length / spacing) of them.
std::vector<OdometryPose> generate_curved_segment(const OdometryPose& start,
                                                  const CurveSegment& segment, double spacing);

/// Route poses for the map frames (ids 0..route_length-1).
std::vector<OdometryPose> generate_route(const WorldConfig& config);

/// Every dense descriptor of the map, in frame and feature order.
std::vector<DenseVector> map_descriptors(const ViewSequenceMap& map);

/// Writes map/, queries/, tracks.csv and gt_boxes.csv under `dir`.
void write_world(const SyntheticWorld& world, const std::filesystem::path& dir);

}  // namespace scenediff
