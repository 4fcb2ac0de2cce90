#include <algorithm>
#include <cmath>
#include <numeric>

#include "scenediff/evaluation.hpp"
#include "scenediff/io.hpp"
#include "support.hpp"

using namespace scenediff;
using testing::TempDir;

namespace {

ViewSequenceMap timeline(std::uint32_t frames) {
  ViewSequenceMap map;
  map.layout = {DescriptorKind::dense, 2};
  for (std::uint32_t i = 0; i < frames; ++i) {
    Frame f;
    f.frame_id = i;
    f.timestamp_index = i;
    map.frames.push_back(f);
    map.poses.push_back({i, static_cast<double>(i), 0.0, 0.0});
  }
  return map;
}

std::vector<ChangeScore> random_scores(PortableRng& rng, std::uint32_t queries, std::uint32_t per_query,
                                       bool coarse) {
  std::vector<ChangeScore> scores;
  for (std::uint32_t q = 0; q < queries; ++q) {
    for (FeatureId j = 0; j < per_query; ++j) {
      ChangeScore s;
      s.query_frame = 100 + q;
      s.feature_id = j;
      s.keypoint = testing::random_keypoint(rng);
      s.likelihood = coarse ? static_cast<double>(rng.index(6)) : rng.uniform();
      scores.push_back(s);
    }
  }
  return scores;
}

std::vector<GroundTruthBox> random_boxes(PortableRng& rng, std::uint32_t queries, std::size_t count) {
  std::vector<GroundTruthBox> boxes;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = rng.uniform() * 900, y = rng.uniform() * 650;
    boxes.push_back({static_cast<FrameId>(100 + rng.index(queries)), x, y, x + 20 + rng.uniform() * 300,
                     y + 20 + rng.uniform() * 300});
  }
  return boxes;
}

/// Sort-and-scan: position of each score in the descending order, then the
/// smallest position among the scores strictly inside each box.
std::vector<std::optional<std::size_t>> oracle_ranks(const std::vector<ChangeScore>& scores,
                                                     const std::vector<GroundTruthBox>& boxes) {
  std::vector<ChangeScore> sorted = scores;
  std::stable_sort(sorted.begin(), sorted.end(), [](const ChangeScore& a, const ChangeScore& b) {
    return std::tie(b.likelihood, a.query_frame, a.feature_id) < std::tie(a.likelihood, b.query_frame, b.feature_id);
  });
  std::vector<std::optional<std::size_t>> out;
  for (const GroundTruthBox& box : boxes) {
    std::optional<std::size_t> best;
    for (std::size_t i = sorted.size(); i-- > 0;) {
      const ChangeScore& s = sorted[i];
      if (s.query_frame == box.query_frame && s.keypoint.x > box.x0 && s.keypoint.x < box.x1 &&
          s.keypoint.y > box.y0 && s.keypoint.y < box.y1) {
        best = i + 1;
      }
    }
    out.push_back(best);
  }
  return out;
}

RankReport report_with_ranks(const std::vector<std::optional<std::size_t>>& ranks) {
  RankReport r;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    BoxRank b;
    b.box = {static_cast<FrameId>(i), 0, 0, 10, 10};
    b.best_rank = ranks[i];
    r.boxes.push_back(b);
  }
  return r;
}

}  // namespace

TEST_CASE("pairing drops frames closer than the exclusion window") {
  CHECK(kDefaultExclusion == 400);
  CHECK_ERROR_KIND(build_test_pairing(timeline(400), 0), ErrorKind::pairing);

  const ViewSequenceMap full = timeline(2000);
  const ViewSequenceMap paired = build_test_pairing(full, 1000);
  CHECK(paired.frames.size() == 1201);
  CHECK(paired.poses.size() == 1201);
  CHECK(paired.find_frame(600) != nullptr);
  CHECK(paired.find_frame(601) == nullptr);
  CHECK(paired.find_frame(1399) == nullptr);
  CHECK(paired.find_frame(1400) != nullptr);
  CHECK_NOTHROW(validate(paired));
}

TEST_CASE("pairing never keeps a frame inside the window") {
  PortableRng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto frames = static_cast<std::uint32_t>(50 + rng.index(900));
    ViewSequenceMap map = timeline(frames);
    for (FrameId id = 0; id < frames; id += 10) map.keyframe_ids.push_back(id);
    const auto exclusion = static_cast<std::int64_t>(rng.index(300));
    const auto query = static_cast<std::int64_t>(rng.index(frames + 200));
    std::size_t expected = 0;
    for (const Frame& f : map.frames) expected += std::llabs(f.timestamp_index - query) >= exclusion;
    if (expected == 0) {
      CHECK_ERROR_KIND(build_test_pairing(map, query, exclusion), ErrorKind::pairing);
      continue;
    }
    const ViewSequenceMap paired = build_test_pairing(map, query, exclusion);
    CHECK(paired.frames.size() == expected);
    for (const Frame& f : paired.frames) CHECK(std::llabs(f.timestamp_index - query) >= exclusion);
    for (FrameId id : paired.keyframe_ids) CHECK(paired.find_frame(id) != nullptr);
  }
}

TEST_CASE("box rank is the rank of its most likely feature") {
  std::vector<ChangeScore> scores;
  for (FeatureId j = 0; j < 100; ++j) {
    scores.push_back({5, j, {900.0f, 700.0f}, 0.5 + 0.004 * j, 0, 0, false});
  }
  scores[10].keypoint = {50.0f, 50.0f};
  scores[10].likelihood = 0.9;
  scores[20].keypoint = {60.0f, 60.0f};
  scores[20].likelihood = 0.3;
  const std::vector<GroundTruthBox> boxes{{5, 0, 0, 100, 100}};
  const RankReport r = rank_changed_features(scores, boxes);
  std::size_t above = 0;
  for (const ChangeScore& s : scores) above += s.likelihood > 0.9;
  REQUIRE(r.boxes[0].best_rank);
  CHECK(*r.boxes[0].best_rank == above + 1);
  CHECK(r.boxes[0].in_box_ranks == std::vector<std::size_t>{above + 1, 100});
  CHECK(r.total_features == 100);
  REQUIRE(r.queries.size() == 1);
  CHECK(r.queries[0].feature_count == 100);

  scores[10].likelihood = 5.0;
  CHECK(*rank_changed_features(scores, boxes).boxes[0].best_rank == 1);
}

TEST_CASE("boxes without features are uncovered and boundaries are exclusive") {
  const std::vector<ChangeScore> scores{{1, 0, {10.0f, 10.0f}, 3.0, 0, 0, false},
                                        {1, 1, {20.0f, 20.0f}, 2.0, 0, 0, false}};
  const std::vector<GroundTruthBox> boxes{{1, 10, 10, 20, 20}, {2, 0, 0, 100, 100}, {1, 15, 15, 25, 25}};
  const RankReport r = rank_changed_features(scores, boxes);
  CHECK_FALSE(r.boxes[0].best_rank);
  CHECK_FALSE(r.boxes[1].best_rank);
  CHECK(r.boxes[2].best_rank == std::optional<std::size_t>(2));
  CHECK(r.covered() == 1);
}

TEST_CASE("ranks match the sort-and-scan oracle") {
  PortableRng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const bool coarse = trial % 2 == 0;
    const std::vector<ChangeScore> scores = random_scores(rng, 3, 50, coarse);
    const std::vector<GroundTruthBox> boxes = random_boxes(rng, 3, 4);
    const RankReport r = rank_changed_features(scores, boxes);
    const auto expected = oracle_ranks(scores, boxes);
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      CHECK(r.boxes[b].best_rank == expected[b]);
      for (std::size_t rank : r.boxes[b].in_box_ranks) CHECK((rank >= 1 && rank <= scores.size()));
    }
  }
}

TEST_CASE("ranking ignores input order and increasing transforms") {
  PortableRng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ChangeScore> scores = random_scores(rng, 4, 30, trial % 2 == 0);
    const std::vector<GroundTruthBox> boxes = random_boxes(rng, 4, 5);
    const RankReport base = rank_changed_features(scores, boxes);
    for (std::size_t i = scores.size(); i > 1; --i) std::swap(scores[i - 1], scores[rng.index(i)]);
    const RankReport shuffled = rank_changed_features(scores, boxes);
    for (ChangeScore& s : scores) s.likelihood = std::atan(3.0 * s.likelihood) + 2.0;
    const RankReport transformed = rank_changed_features(scores, boxes);
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      CHECK(shuffled.boxes[b].best_rank == base.boxes[b].best_rank);
      CHECK(shuffled.boxes[b].in_box_ranks == base.boxes[b].in_box_ranks);
      CHECK(transformed.boxes[b].in_box_ranks == base.boxes[b].in_box_ranks);
    }
  }
}

TEST_CASE("method comparison counts strict wins over all boxes") {
  std::vector<std::optional<std::size_t>> a, b;
  for (std::size_t i = 0; i < 50; ++i) {
    a.push_back(i < 47 ? 1 : 9);
    b.push_back(5);
  }
  const MethodComparison c = compare_methods(report_with_ranks(a), report_with_ranks(b));
  CHECK(c.wins == 47);
  CHECK(c.losses == 3);
  CHECK(c.win_fraction == doctest::Approx(0.94));
  CHECK(c.deltas[0] == std::optional<std::int64_t>(-4));

  const MethodComparison self = compare_methods(report_with_ranks(a), report_with_ranks(a));
  CHECK(self.wins == 0);
  CHECK(self.ties == 50);

  RankReport shifted = report_with_ranks(a);
  shifted.boxes[3].box.x1 = 11;
  CHECK_ERROR_KIND(compare_methods(report_with_ranks(a), shifted), ErrorKind::validation);
  a.pop_back();
  CHECK_ERROR_KIND(compare_methods(report_with_ranks(a), report_with_ranks(b)), ErrorKind::validation);
}

TEST_CASE("method comparison matches an element-wise oracle") {
  PortableRng rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<std::optional<std::size_t>> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(rng.index(8) == 0 ? std::nullopt : std::optional<std::size_t>(1 + rng.index(10)));
      b.push_back(rng.index(8) == 0 ? std::nullopt : std::optional<std::size_t>(1 + rng.index(10)));
    }
    std::size_t wins = 0, losses = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] && b[i]) {
        wins += *a[i] < *b[i];
        losses += *a[i] > *b[i];
      }
    }
    const MethodComparison c = compare_methods(report_with_ranks(a), report_with_ranks(b));
    CHECK(c.wins == wins);
    CHECK(c.losses == losses);
    CHECK(c.ties == n - wins - losses);
    CHECK(c.win_fraction == static_cast<double>(wins) / static_cast<double>(n));
  }
}

TEST_CASE("ground truth file round trip and validation") {
  TempDir dir;
  const std::vector<GroundTruthBox> boxes{{3, 10.5, 20, 30, 40.25}, {9, 0, 0, 1024, 768}};
  write_ground_truth(boxes, dir / "gt.csv");
  CHECK(read_ground_truth(dir / "gt.csv") == boxes);
  io::write_text(dir / "bad.csv", "query_frame,x0,y0,x1,y1\n1,5,5,5,9\n");
  CHECK_ERROR_KIND(read_ground_truth(dir / "bad.csv"), ErrorKind::validation);
  io::write_text(dir / "header.csv", "frame,x0,y0,x1,y1\n");
  CHECK_ERROR_KIND(read_ground_truth(dir / "header.csv"), ErrorKind::format);
}

TEST_CASE("report and plot files") {
  TempDir dir;
  const std::vector<ChangeScore> scores{{1, 0, {10.0f, 10.0f}, 3.0, 0, 0, false},
                                        {1, 1, {50.0f, 50.0f}, 2.0, 0, 0, false},
                                        {2, 0, {50.0f, 50.0f}, 1.0, 0, 0, false}};
  const std::vector<GroundTruthBox> boxes{{1, 0, 0, 100, 100}, {2, 200, 200, 300, 300}};
  const RankReport r = rank_changed_features(scores, boxes);
  write_report(r, dir / "report.csv");
  CHECK(testing::slurp(dir / "report.csv") ==
        "query_frame,x0,y0,x1,y1,best_rank,in_box_count,in_box_ranks\n"
        "1,0,0,100,100,1,2,1 2\n"
        "2,200,200,300,300,uncovered,0,\n"
        "summary,boxes=2,covered=1,total_features=3,mean_best_rank=1\n");

  const std::vector<QueryLocalization> tops{{1, 7}, {2, 8}};
  const std::vector<OdometryPose> query_poses{{1, 0, 0, 0}, {2, 10, 0, 0}};
  const std::vector<OdometryPose> map_poses{{7, 3, 4, 0}, {8, 10, 0, 0}};
  const auto points = rank_vs_localization_error(r, tops, query_poses, map_poses);
  REQUIRE(points.size() == 2);
  CHECK(points[0].localization_error == 5.0);
  CHECK(points[1].localization_error == 0.0);
  CHECK_FALSE(points[1].rank);
  write_plot_data(points, dir / "plot.csv");
  CHECK(testing::slurp(dir / "plot.csv") ==
        "query_frame,box,best_rank,localization_error\n1,0,1,5\n2,1,uncovered,0\n");
  CHECK_ERROR_KIND(rank_vs_localization_error(r, std::vector<QueryLocalization>{{1, 7}}, query_poses, map_poses),
                   ErrorKind::validation);
}
