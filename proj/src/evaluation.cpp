#include "scenediff/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "scenediff/error.hpp"
#include "scenediff/io.hpp"

namespace scenediff {

std::size_t RankReport::covered() const {
  return static_cast<std::size_t>(std::count_if(
      boxes.begin(), boxes.end(), [](const BoxRank& b) { return b.best_rank.has_value(); }));
}

ViewSequenceMap build_test_pairing(const ViewSequenceMap& full_map, std::int64_t query_timestamp,
                                   std::int64_t exclusion) {
  require(exclusion >= 0, ErrorKind::validation, "exclusion must be non-negative");
  ViewSequenceMap out;
  out.layout = full_map.layout;
  out.image_width = full_map.image_width;
  out.image_height = full_map.image_height;
  auto far_enough = [&](std::int64_t ts) {
    const std::int64_t gap = ts > query_timestamp ? ts - query_timestamp : query_timestamp - ts;
    return gap >= exclusion;
  };
  for (const Frame& f : full_map.frames) {
    if (!far_enough(f.timestamp_index)) continue;
    out.frames.push_back(f);
    if (const OdometryPose* p = full_map.find_pose(f.frame_id)) out.poses.push_back(*p);
  }
  for (FrameId id : full_map.keyframe_ids) {
    if (out.find_frame(id) != nullptr) out.keyframe_ids.push_back(id);
  }
  require(!out.frames.empty(), ErrorKind::pairing,
          "no map frame lies at least " + std::to_string(exclusion) + " frames from query " +
              std::to_string(query_timestamp));
  return out;
}

RankReport rank_changed_features(std::span<const ChangeScore> all_scores,
                                 std::span<const GroundTruthBox> boxes) {
  std::vector<std::size_t> order(all_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const ChangeScore& sa = all_scores[a];
    const ChangeScore& sb = all_scores[b];
    if (sa.likelihood != sb.likelihood) return sa.likelihood > sb.likelihood;
    if (sa.query_frame != sb.query_frame) return sa.query_frame < sb.query_frame;
    return sa.feature_id < sb.feature_id;
  });

  RankReport report;
  report.total_features = all_scores.size();
  report.boxes.resize(boxes.size());
  std::multimap<FrameId, std::size_t> boxes_by_query;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    report.boxes[b].box = boxes[b];
    boxes_by_query.emplace(boxes[b].query_frame, b);
  }

  std::map<FrameId, QuerySummary> summaries;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const ChangeScore& s = all_scores[order[pos]];
    const std::size_t rank = pos + 1;
    auto [it, inserted] = summaries.try_emplace(s.query_frame);
    QuerySummary& q = it->second;
    if (inserted) {
      q.query_frame = s.query_frame;
      q.max_likelihood = s.likelihood;
    }
    ++q.feature_count;

    auto [lo, hi] = boxes_by_query.equal_range(s.query_frame);
    for (auto b = lo; b != hi; ++b) {
      BoxRank& br = report.boxes[b->second];
      if (!br.box.contains(s.keypoint)) continue;
      br.in_box_ranks.push_back(rank);
      if (!br.best_rank) br.best_rank = rank;
    }
  }
  for (auto& [id, q] : summaries) report.queries.push_back(q);
  return report;
}

MethodComparison compare_methods(const RankReport& report_a, const RankReport& report_b) {
  require(report_a.boxes.size() == report_b.boxes.size(), ErrorKind::validation,
          "reports cover different box sets");
  MethodComparison out;
  for (std::size_t i = 0; i < report_a.boxes.size(); ++i) {
    const BoxRank& a = report_a.boxes[i];
    const BoxRank& b = report_b.boxes[i];
    require(a.box == b.box, ErrorKind::validation, "reports cover different box sets");
    if (!a.best_rank || !b.best_rank) {
      out.deltas.push_back(std::nullopt);
      ++out.ties;
      continue;
    }
    const auto delta =
        static_cast<std::int64_t>(*a.best_rank) - static_cast<std::int64_t>(*b.best_rank);
    out.deltas.push_back(delta);
    if (delta < 0) {
      ++out.wins;
    } else if (delta > 0) {
      ++out.losses;
    } else {
      ++out.ties;
    }
  }
  if (!report_a.boxes.empty()) {
    out.win_fraction = static_cast<double>(out.wins) / static_cast<double>(report_a.boxes.size());
  }
  return out;
}

std::vector<PlotPoint> rank_vs_localization_error(const RankReport& report,
                                                  std::span<const QueryLocalization> tops,
                                                  std::span<const OdometryPose> query_poses,
                                                  std::span<const OdometryPose> map_poses) {
  auto find_pose = [](std::span<const OdometryPose> poses, FrameId id) -> const OdometryPose* {
    for (const OdometryPose& p : poses) {
      if (p.frame_id == id) return &p;
    }
    return nullptr;
  };
  std::vector<PlotPoint> points;
  for (std::size_t b = 0; b < report.boxes.size(); ++b) {
    const BoxRank& br = report.boxes[b];
    const auto top = std::find_if(tops.begin(), tops.end(), [&](const QueryLocalization& t) {
      return t.query_frame == br.box.query_frame;
    });
    require(top != tops.end(), ErrorKind::validation,
            "no localization result for query " + std::to_string(br.box.query_frame));
    const OdometryPose* q = find_pose(query_poses, br.box.query_frame);
    const OdometryPose* r = find_pose(map_poses, top->top_frame);
    require(q != nullptr && r != nullptr, ErrorKind::validation,
            "missing pose for query " + std::to_string(br.box.query_frame) + " or its reference");
    points.push_back({br.box.query_frame, b, br.best_rank, std::hypot(q->x - r->x, q->y - r->y)});
  }
  return points;
}

void write_ground_truth(std::span<const GroundTruthBox> boxes, const std::filesystem::path& file) {
  std::string text = "query_frame,x0,y0,x1,y1\n";
  for (const GroundTruthBox& b : boxes) {
    text += std::to_string(b.query_frame) + "," + io::format_double(b.x0) + "," +
            io::format_double(b.y0) + "," + io::format_double(b.x1) + "," +
            io::format_double(b.y1) + "\n";
  }
  io::write_text(file, text);
}

std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& file) {
  std::vector<GroundTruthBox> boxes;
  for (const auto& row : io::read_csv(file, "query_frame,x0,y0,x1,y1")) {
    GroundTruthBox b;
    b.query_frame = static_cast<FrameId>(io::parse_int(row[0]));
    b.x0 = io::parse_double(row[1]);
    b.y0 = io::parse_double(row[2]);
    b.x1 = io::parse_double(row[3]);
    b.y1 = io::parse_double(row[4]);
    require(b.x0 < b.x1 && b.y0 < b.y1, ErrorKind::validation,
            "degenerate box for query " + std::to_string(b.query_frame));
    boxes.push_back(b);
  }
  return boxes;
}

void write_report(const RankReport& report, const std::filesystem::path& file) {
  std::string text = "query_frame,x0,y0,x1,y1,best_rank,in_box_count,in_box_ranks\n";
  std::size_t rank_sum = 0;
  for (const BoxRank& b : report.boxes) {
    std::string ranks;
    for (std::size_t r : b.in_box_ranks) ranks += (ranks.empty() ? "" : " ") + std::to_string(r);
    text += std::to_string(b.box.query_frame) + "," + io::format_double(b.box.x0) + "," +
            io::format_double(b.box.y0) + "," + io::format_double(b.box.x1) + "," +
            io::format_double(b.box.y1) + "," +
            (b.best_rank ? std::to_string(*b.best_rank) : std::string("uncovered")) + "," +
            std::to_string(b.in_box_ranks.size()) + "," + ranks + "\n";
    if (b.best_rank) rank_sum += *b.best_rank;
  }
  const std::size_t covered = report.covered();
  text += "summary,boxes=" + std::to_string(report.boxes.size()) +
          ",covered=" + std::to_string(covered) +
          ",total_features=" + std::to_string(report.total_features) + ",mean_best_rank=" +
          (covered > 0 ? io::format_double(static_cast<double>(rank_sum) / covered)
                       : std::string("nan")) +
          "\n";
  io::write_text(file, text);
}

void write_plot_data(std::span<const PlotPoint> points, const std::filesystem::path& file) {
  std::string text = "query_frame,box,best_rank,localization_error\n";
  for (const PlotPoint& p : points) {
    text += std::to_string(p.query_frame) + "," + std::to_string(p.box_index) + "," +
            (p.rank ? std::to_string(*p.rank) : std::string("uncovered")) + "," +
            io::format_double(p.localization_error) + "\n";
  }
  io::write_text(file, text);
}

}  // namespace scenediff
