#include "scenediff/motion_prior.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "scenediff/error.hpp"
#include "scenediff/io.hpp"
#include "scenediff/parallel.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

namespace {

using Point4 = std::array<double, 4>;

double squared_distance4(const Point4& a, const Point4& b) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Exact 1-NN over a fixed point set. Ties resolve to the smallest id; every
/// subtree records its smallest id so equal-distance branches can be pruned.
class KdTree4 {
 public:
  KdTree4(std::vector<Point4> points, std::vector<std::uint32_t> ids)
      : points_(std::move(points)), ids_(std::move(ids)), order_(points_.size()) {
    std::iota(order_.begin(), order_.end(), 0);
    if (!order_.empty()) build(0, order_.size(), 0);
  }

  struct Hit {
    std::size_t slot = std::numeric_limits<std::size_t>::max();
    double distance = std::numeric_limits<double>::infinity();
  };

  /// Nearest point to slot `self`, excluding itself.
  Hit nearest_other(std::size_t self) const {
    Hit best;
    if (!nodes_.empty()) search(0, points_[self], self, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0, end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0, right = 0;
    std::uint32_t min_id = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end, int depth) {
    const std::size_t node = nodes_.size();
    nodes_.push_back({});
    std::uint32_t min_id = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t i = begin; i < end; ++i) min_id = std::min(min_id, ids_[order_[i]]);
    if (end - begin <= kLeafSize) {
      nodes_[node] = {begin, end, -1, 0.0, 0, 0, min_id};
      return node;
    }
    const int axis = depth % 4;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid, depth + 1);
    const std::size_t right = build(mid, end, depth + 1);
    nodes_[node] = {begin, end, axis, split, left, right, min_id};
    return node;
  }

  bool better(double d, std::size_t slot, const Hit& best) const {
    if (d != best.distance) return d < best.distance;
    return best.slot == std::numeric_limits<std::size_t>::max() || ids_[slot] < ids_[best.slot];
  }

  bool worth_visiting(double bound, std::size_t node, const Hit& best) const {
    if (bound != best.distance) return bound < best.distance;
    return best.slot == std::numeric_limits<std::size_t>::max() ||
           nodes_[node].min_id < ids_[best.slot];
  }

  void search(std::size_t node_index, const Point4& q, std::size_t self, Hit& best) const {
    const Node& node = nodes_[node_index];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t slot = order_[i];
        if (slot == self) continue;
        const double d = squared_distance4(q, points_[slot]);
        if (better(d, slot, best)) best = {slot, d};
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, self, best);
    if (worth_visiting(diff * diff, far, best)) search(far, q, self, best);
  }

  std::vector<Point4> points_;
  std::vector<std::uint32_t> ids_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace

double motion_distance(const MotionFeature& a, const MotionFeature& b) {
  return std::sqrt(squared_distance4(a.vec(), b.vec()));
}

std::vector<MotionFeature> extract_motion_features(std::span<const Track> tracks,
                                                   std::span<const OdometryPose> poses,
                                                   double unit_length,
                                                   std::span<const EgoMotionSegmentLabel> labels) {
  require(unit_length > 0.0, ErrorKind::validation, "unit_length must be positive");
  std::map<FrameId, std::size_t> pose_slot;
  for (std::size_t i = 0; i < poses.size(); ++i) pose_slot[poses[i].frame_id] = i;
  std::map<FrameId, bool> anomalous;
  for (const auto& l : labels) anomalous[l.frame_id] = l.anomaly;

  // Odometric distance travelled from the first pose, in pose order.
  std::vector<double> travelled(poses.size(), 0.0);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    travelled[i] = travelled[i - 1] + std::hypot(poses[i].x - poses[i - 1].x,
                                                 poses[i].y - poses[i - 1].y);
  }

  std::vector<MotionFeature> out;
  for (const Track& track : tracks) {
    std::vector<std::size_t> slots;
    slots.reserve(track.points.size());
    for (const TrackPoint& p : track.points) {
      auto it = pose_slot.find(p.frame_id);
      require(it != pose_slot.end(), ErrorKind::validation,
              "track " + std::to_string(track.track_id) + ": no pose for frame " +
                  std::to_string(p.frame_id));
      slots.push_back(it->second);
    }
    for (std::size_t a = 0; a < track.points.size(); ++a) {
      if (auto it = anomalous.find(track.points[a].frame_id); it != anomalous.end() && it->second) {
        continue;
      }
      const double target = travelled[slots[a]] + unit_length;
      const auto reach = std::lower_bound(travelled.begin() + static_cast<std::ptrdiff_t>(slots[a]),
                                          travelled.end(), target);
      if (reach == travelled.end()) continue;
      const std::size_t e = static_cast<std::size_t>(reach - travelled.begin());
      // Fractional frame time at which the unit length is reached.
      const double segment = travelled[e] - travelled[e - 1];
      const double time = static_cast<double>(e - 1) + (target - travelled[e - 1]) / segment;
      if (time > static_cast<double>(slots.back())) continue;

      std::size_t b = a + 1;
      while (b < slots.size() && static_cast<double>(slots[b]) < time) ++b;
      const TrackPoint& p1 = track.points[b];
      const TrackPoint& p0 = track.points[b - 1];
      const double span = static_cast<double>(slots[b] - slots[b - 1]);
      const double u = (time - static_cast<double>(slots[b - 1])) / span;
      MotionFeature mf;
      mf.start = track.points[a].position;
      mf.end.x = static_cast<float>(p0.position.x + u * (p1.position.x - p0.position.x));
      mf.end.y = static_cast<float>(p0.position.y + u * (p1.position.y - p0.position.y));
      out.push_back(mf);
    }
  }
  return out;
}

MotionVocabulary learn_motion_vocabulary(std::span<const MotionFeature> features,
                                         const MotionVocabularyOptions& options) {
  const std::size_t n = features.size();
  require(n >= 2, ErrorKind::learning, "motion vocabulary needs at least 2 features");
  require(options.iterations >= 1 && options.output_words >= 1, ErrorKind::learning,
          "iterations and output_words must be positive");
  const std::size_t sample = std::clamp<std::size_t>(options.sample_size, 2, n);

  std::vector<std::vector<std::uint32_t>> passed(options.iterations);
  parallel_for(options.iterations, [&](std::size_t iteration) {
    PortableRng rng(derive_seed(options.seed, iteration));
    std::vector<std::uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t j = 0; j < sample; ++j) {
      std::swap(pool[j], pool[j + static_cast<std::size_t>(rng.index(n - j))]);
    }
    pool.resize(sample);
    std::sort(pool.begin(), pool.end());

    std::vector<Point4> points(sample);
    for (std::size_t i = 0; i < sample; ++i) points[i] = features[pool[i]].vec();
    const KdTree4 tree(points, pool);
    std::vector<KdTree4::Hit> nearest(sample);
    for (std::size_t i = 0; i < sample; ++i) nearest[i] = tree.nearest_other(i);
    for (std::size_t i = 0; i < sample; ++i) {
      const std::size_t r = nearest[i].slot;
      if (nearest[i].distance <= nearest[r].distance) passed[iteration].push_back(pool[i]);
    }
  });

  std::vector<std::uint32_t> votes(n, 0);
  for (const auto& list : passed) {
    for (std::uint32_t idx : list) ++votes[idx];
  }
  std::vector<std::uint32_t> ranked;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (votes[i] > 0) ranked.push_back(i);
  }
  const std::size_t keep = std::min<std::size_t>(options.output_words, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), [&](std::uint32_t a, std::uint32_t b) {
                      return votes[a] != votes[b] ? votes[a] > votes[b] : a < b;
                    });
  MotionVocabulary vocab;
  for (std::size_t i = 0; i < keep; ++i) {
    vocab.words.push_back(features[ranked[i]]);
    vocab.votes.push_back(votes[ranked[i]]);
  }
  return vocab;
}

EgoMotionSegmentLabel window_curvature(std::span<const OdometryPose> window) {
  require(window.size() >= 2 && window.size() % 2 == 0, ErrorKind::validation,
          "window length must be even and at least 2");
  const std::size_t half = window.size() / 2;
  std::vector<double> directions;
  for (std::size_t i = 0; i < half; ++i) {
    const double dx = window[i + half].x - window[i].x;
    const double dy = window[i + half].y - window[i].y;
    if (dx == 0.0 && dy == 0.0) continue;
    directions.push_back(std::atan2(dy, dx));
  }
  EgoMotionSegmentLabel label;
  label.frame_id = window.front().frame_id;
  if (directions.empty()) {
    label.degenerate = true;
    return label;
  }
  // n^2 - |sum u|^2 = sum_{i<j} |u_i - u_j|^2
  const double n = static_cast<double>(directions.size());
  double spread = 0.0;
  for (std::size_t i = 0; i < directions.size(); ++i) {
    for (std::size_t j = i + 1; j < directions.size(); ++j) {
      const double s = std::sin((directions[i] - directions[j]) / 2.0);
      spread += 4.0 * s * s;
    }
  }
  label.curvature = std::sqrt(-std::log1p(-std::min(1.0, spread / (n * n))));
  return label;
}

std::vector<EgoMotionSegmentLabel> detect_anomaly_ego_motion(std::span<const OdometryPose> poses,
                                                             std::uint32_t window_length,
                                                             double threshold) {
  require(window_length >= 2 && window_length % 2 == 0, ErrorKind::validation,
          "window length must be even and at least 2");
  require(poses.size() >= window_length, ErrorKind::validation,
          "need at least " + std::to_string(window_length) + " poses, got " +
              std::to_string(poses.size()));
  const std::size_t full = poses.size() - window_length + 1;
  std::vector<EgoMotionSegmentLabel> labels(poses.size());
  std::size_t degenerate = 0;
  for (std::size_t a = 0; a < full; ++a) {
    labels[a] = window_curvature(poses.subspan(a, window_length));
    labels[a].anomaly = labels[a].curvature > threshold;
    degenerate += labels[a].degenerate ? 1 : 0;
  }
  for (std::size_t a = full; a < poses.size(); ++a) {
    labels[a] = labels[full - 1];
    labels[a].frame_id = poses[a].frame_id;
  }
  if (degenerate > 0) {
    std::clog << "warning: " << degenerate
              << " trajectory window(s) without displacement; curvature set to 0\n";
  }
  return labels;
}

std::vector<FrameId> select_keyframes(const ViewSequenceMap& map, std::uint32_t stride) {
  require(stride >= 1, ErrorKind::validation, "keyframe stride must be at least 1");
  std::vector<FrameId> ids;
  for (const Frame& f : map.frames) {
    if (f.frame_id % stride == 0) ids.push_back(f.frame_id);
  }
  return ids;
}

double nearest_motion_distance(const MotionFeature& candidate, const MotionVocabulary& vocab) {
  require(!vocab.empty(), ErrorKind::classification, "motion vocabulary is empty");
  const Point4 q = candidate.vec();
  double best = std::numeric_limits<double>::infinity();
  for (const MotionFeature& w : vocab.words) best = std::min(best, squared_distance4(q, w.vec()));
  return std::sqrt(best);
}

bool classify_motion(const MotionFeature& candidate, const MotionVocabulary& vocab,
                     double threshold) {
  return nearest_motion_distance(candidate, vocab) > threshold;
}

void write_motion_vocabulary(const MotionVocabulary& vocab, const std::filesystem::path& file) {
  require(vocab.words.size() == vocab.votes.size(), ErrorKind::validation,
          "motion vocabulary word/vote counts differ");
  io::BinaryWriter out;
  out.magic("MVF1");
  out.u32(static_cast<std::uint32_t>(vocab.words.size()));
  for (std::size_t i = 0; i < vocab.words.size(); ++i) {
    const MotionFeature& w = vocab.words[i];
    out.f32(w.start.x);
    out.f32(w.start.y);
    out.f32(w.end.x);
    out.f32(w.end.y);
    out.u32(vocab.votes[i]);
  }
  out.save(file);
}

MotionVocabulary read_motion_vocabulary(const std::filesystem::path& file) {
  io::BinaryReader in(file);
  in.expect_magic("MVF1");
  const std::uint32_t count = in.u32();
  require(in.remaining() == 20ull * count, ErrorKind::format,
          file.string() + ": size does not match the declared word count");
  MotionVocabulary vocab;
  for (std::uint32_t i = 0; i < count; ++i) {
    MotionFeature w;
    w.start.x = in.f32();
    w.start.y = in.f32();
    w.end.x = in.f32();
    w.end.y = in.f32();
    vocab.words.push_back(w);
    vocab.votes.push_back(in.u32());
  }
  return vocab;
}

void write_tracks(std::span<const Track> tracks, const std::filesystem::path& file) {
  std::string text = "track_id,frame_id,x,y\n";
  for (const Track& t : tracks) {
    for (const TrackPoint& p : t.points) {
      text += std::to_string(t.track_id) + "," + std::to_string(p.frame_id) + "," +
              io::format_float(p.position.x) + "," + io::format_float(p.position.y) + "\n";
    }
  }
  io::write_text(file, text);
}

std::vector<Track> read_tracks(const std::filesystem::path& file) {
  std::map<std::uint32_t, Track> by_id;
  for (const auto& row : io::read_csv(file, "track_id,frame_id,x,y")) {
    const auto id = static_cast<std::uint32_t>(io::parse_int(row[0]));
    Track& t = by_id[id];
    t.track_id = id;
    TrackPoint p;
    p.frame_id = static_cast<FrameId>(io::parse_int(row[1]));
    p.position.x = static_cast<float>(io::parse_double(row[2]));
    p.position.y = static_cast<float>(io::parse_double(row[3]));
    require(t.points.empty() || p.frame_id > t.points.back().frame_id, ErrorKind::validation,
            "track " + std::to_string(id) + ": frame ids must be strictly increasing");
    t.points.push_back(p);
  }
  std::vector<Track> tracks;
  for (auto& [id, t] : by_id) {
    require(t.points.size() >= 2, ErrorKind::validation,
            "track " + std::to_string(id) + " has fewer than 2 points");
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace scenediff
