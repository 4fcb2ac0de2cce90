#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "scenediff/change_detection.hpp"
#include "scenediff/types.hpp"

namespace scenediff {

inline constexpr std::int64_t kDefaultExclusion = 400;

/// Annotated changed object in a query image. Features belong to the box
/// when their keypoint lies strictly inside it.
struct GroundTruthBox {
  FrameId query_frame = 0;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool contains(const Keypoint& k) const { return x0 < k.x && k.x < x1 && y0 < k.y && k.y < y1; }

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

struct BoxRank {
  GroundTruthBox box;
  /// Rank of the in-box feature with the largest likelihood; empty when no
  /// scored feature falls inside the box.
  std::optional<std::size_t> best_rank;
  /// Ranks of every in-box feature, ascending.
  std::vector<std::size_t> in_box_ranks;
};

struct QuerySummary {
  FrameId query_frame = 0;
  std::size_t feature_count = 0;
  double max_likelihood = 0.0;
};

struct RankReport {
  std::vector<BoxRank> boxes;
  std::size_t total_features = 0;
  std::vector<QuerySummary> queries;

  std::size_t covered() const;
};

/// Copy of the map without every frame whose timestamp lies closer than
/// `exclusion` to the query's. Throws ErrorKind::pairing when nothing is left.
ViewSequenceMap build_test_pairing(const ViewSequenceMap& full_map, std::int64_t query_timestamp,
                                   std::int64_t exclusion = kDefaultExclusion);

/// Merges all scores, sorts them by descending likelihood (ties ascending by
/// query frame, then feature id) and ranks them from 1.
RankReport rank_changed_features(std::span<const ChangeScore> all_scores,
                                 std::span<const GroundTruthBox> boxes);

struct MethodComparison {
  /// Boxes where a ranks strictly better, over all boxes.
  double win_fraction = 0.0;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  /// rank_a - rank_b per box; empty when either side is uncovered.
  std::vector<std::optional<std::int64_t>> deltas;
};

MethodComparison compare_methods(const RankReport& report_a, const RankReport& report_b);

struct QueryLocalization {
  FrameId query_frame = 0;
  FrameId top_frame = 0;
};

struct PlotPoint {
  FrameId query_frame = 0;
  std::size_t box_index = 0;
  std::optional<std::size_t> rank;
  /// Distance between the query viewpoint and its top-ranked reference [m].
  double localization_error = 0.0;
};

std::vector<PlotPoint> rank_vs_localization_error(const RankReport& report,
                                                  std::span<const QueryLocalization> tops,
                                                  std::span<const OdometryPose> query_poses,
                                                  std::span<const OdometryPose> map_poses);

void write_ground_truth(std::span<const GroundTruthBox> boxes, const std::filesystem::path& file);
std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& file);

void write_report(const RankReport& report, const std::filesystem::path& file);
void write_plot_data(std::span<const PlotPoint> points, const std::filesystem::path& file);

}  // namespace scenediff
