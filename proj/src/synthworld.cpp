#include "scenediff/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "scenediff/error.hpp"
#include "scenediff/feature_store.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

namespace {

// Stream salts for derive_seed; each consumer gets its own generator.
constexpr std::uint64_t kLandmarkStream = 1;
constexpr std::uint64_t kQueryStream = 2;
constexpr std::uint64_t kFrameStreamBase = 1ull << 32;
constexpr std::uint64_t kQueryFrameStreamBase = 2ull << 32;

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Landmark {
  Point3 position;
  DenseVector latent;
};

struct RoutePoint {
  double x = 0.0, y = 0.0, heading = 0.0;
};

DenseVector unit_gaussian(std::uint32_t dim, PortableRng& rng) {
  DenseVector v(dim);
  double norm = 0.0;
  std::vector<double> raw(dim);
  for (double& c : raw) {
    c = rng.normal();
    norm += c * c;
  }
  norm = std::sqrt(norm);
  for (std::uint32_t i = 0; i < dim; ++i) v[i] = static_cast<float>(raw[i] / norm);
  return v;
}

DenseVector observe(const DenseVector& latent, double noise, PortableRng& rng) {
  DenseVector v(latent.size());
  for (std::size_t i = 0; i < latent.size(); ++i) {
    v[i] = noise > 0.0 ? static_cast<float>(latent[i] + noise * rng.normal()) : latent[i];
  }
  return v;
}

/// Route position at arc length `s`, extrapolated straight beyond the ends.
RoutePoint route_point(const std::vector<OdometryPose>& route, double spacing, double s) {
  const double last = static_cast<double>(route.size() - 1) * spacing;
  if (s <= 0.0 || route.size() == 1) {
    const OdometryPose& p = route.front();
    const double t = route.size() == 1 ? s : std::min(s, 0.0);
    return {p.x + t * std::cos(p.heading), p.y + t * std::sin(p.heading), p.heading};
  }
  if (s >= last) {
    const OdometryPose& p = route.back();
    const double t = s - last;
    return {p.x + t * std::cos(p.heading), p.y + t * std::sin(p.heading), p.heading};
  }
  const auto i = static_cast<std::size_t>(s / spacing);
  const double u = s / spacing - static_cast<double>(i);
  const OdometryPose& a = route[i];
  const OdometryPose& b = route[std::min(i + 1, route.size() - 1)];
  return {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y),
          a.heading + u * wrap_angle(b.heading - a.heading)};
}

std::optional<Keypoint> project(const Point3& p, const RoutePoint& pose, const CameraModel& cam) {
  const double view = pose.heading + cam.yaw;
  const double fx = std::cos(view), fy = std::sin(view);
  const double rx = std::sin(view), ry = -std::cos(view);
  const double dx = p.x - pose.x, dy = p.y - pose.y;
  const double depth = dx * fx + dy * fy;
  if (depth < cam.near_plane) return std::nullopt;
  const double lateral = dx * rx + dy * ry;
  const double u = cam.image_width / 2.0 + cam.focal_length * lateral / depth;
  const double v = cam.image_height / 2.0 - cam.focal_length * (p.z - cam.height) / depth;
  const Keypoint k{static_cast<float>(u), static_cast<float>(v)};
  if (!(k.x >= 0.0f && k.y >= 0.0f && k.x < static_cast<float>(cam.image_width) &&
        k.y < static_cast<float>(cam.image_height))) {
    return std::nullopt;
  }
  return k;
}

RoutePoint as_route_point(const OdometryPose& p) { return {p.x, p.y, p.heading}; }

std::vector<Landmark> build_facade(const WorldConfig& config,
                                   const std::vector<OdometryPose>& route) {
  const CameraModel& cam = config.camera;
  const double half_view = config.facade_distance * (cam.image_width / 2.0) / cam.focal_length;
  const double pad = half_view + 2.0 * config.column_spacing;
  const double route_end = static_cast<double>(route.size() - 1) * config.frame_spacing;
  const auto first = static_cast<std::int64_t>(std::floor(-pad / config.column_spacing));
  const auto last = static_cast<std::int64_t>(std::ceil((route_end + pad) / config.column_spacing));

  PortableRng rng(derive_seed(config.seed, kLandmarkStream));
  std::vector<Landmark> landmarks;
  for (std::int64_t column = first; column <= last; ++column) {
    const RoutePoint base =
        route_point(route, config.frame_spacing, static_cast<double>(column) * config.column_spacing);
    const double out = base.heading + cam.yaw;
    for (std::uint32_t row = 0; row < config.landmark_rows; ++row) {
      Landmark l;
      l.position.x = base.x + config.facade_distance * std::cos(out) + config.position_jitter * rng.normal();
      l.position.y = base.y + config.facade_distance * std::sin(out) + config.position_jitter * rng.normal();
      l.position.z = config.first_row_height + row * config.row_spacing +
                     config.position_jitter * rng.normal();
      l.latent = unit_gaussian(config.descriptor_dim, rng);
      landmarks.push_back(std::move(l));
    }
  }
  return landmarks;
}

struct PlacedObject {
  std::vector<Landmark> landmarks;
  std::vector<Keypoint> keypoints;
  GroundTruthBox box;
};

PlacedObject place_object(const WorldConfig& config, const RoutePoint& pose, FrameId query_frame,
                          PortableRng& rng) {
  const CameraModel& cam = config.camera;
  const double view = pose.heading + cam.yaw;
  const double fx = std::cos(view), fy = std::sin(view);
  const double rx = std::sin(view), ry = -std::cos(view);
  const double far = std::max(3.6, 0.7 * config.facade_distance);
  constexpr double kMarginPx = 40.0;

  for (int attempt = 0; attempt < 50; ++attempt) {
    const double depth = 3.5 + rng.uniform() * (far - 3.5);
    const double width = 1.0 + rng.uniform() * 1.5;
    const double height = 0.8 + rng.uniform() * 1.0;
    const double base = rng.uniform() * 0.8;
    const double reach = std::max(0.0, (cam.image_width / 2.0 - kMarginPx) * depth / cam.focal_length -
                                           width / 2.0);
    const double center = (2.0 * rng.uniform() - 1.0) * reach;
    const auto count = static_cast<std::uint32_t>(5 + rng.index(16));

    PlacedObject obj;
    for (std::uint32_t i = 0; i < count; ++i) {
      const double lateral = center + (rng.uniform() - 0.5) * width;
      const double d = depth + (rng.uniform() - 0.5) * 0.6;
      Landmark l;
      l.position = {pose.x + d * fx + lateral * rx, pose.y + d * fy + lateral * ry,
                    base + rng.uniform() * height};
      l.latent = unit_gaussian(config.descriptor_dim, rng);
      if (auto k = project(l.position, pose, cam)) {
        obj.keypoints.push_back(*k);
        obj.landmarks.push_back(std::move(l));
      }
    }
    if (obj.landmarks.size() < 5) continue;
    double x0 = obj.keypoints[0].x, x1 = x0, y0 = obj.keypoints[0].y, y1 = y0;
    for (const Keypoint& k : obj.keypoints) {
      x0 = std::min<double>(x0, k.x);
      x1 = std::max<double>(x1, k.x);
      y0 = std::min<double>(y0, k.y);
      y1 = std::max<double>(y1, k.y);
    }
    obj.box = {query_frame, std::max(0.0, x0 - 2.0), std::max(0.0, y0 - 2.0),
               std::min<double>(cam.image_width, x1 + 2.0),
               std::min<double>(cam.image_height, y1 + 2.0)};
    return obj;
  }
  fail(ErrorKind::generation, "could not place a changed object in view of query " +
                                  std::to_string(query_frame));
}

}  // namespace

std::size_t WorldConfig::landmark_count() const {
  const double half_view = facade_distance * (camera.image_width / 2.0) / camera.focal_length;
  const double pad = half_view + 2.0 * column_spacing;
  const double route_end = static_cast<double>(route_length == 0 ? 0 : route_length - 1) * frame_spacing;
  const auto first = static_cast<std::int64_t>(std::floor(-pad / column_spacing));
  const auto last = static_cast<std::int64_t>(std::ceil((route_end + pad) / column_spacing));
  return static_cast<std::size_t>(last - first + 1) * landmark_rows;
}

std::vector<OdometryPose> generate_curved_segment(const OdometryPose& start,
                                                  const CurveSegment& segment, double spacing) {
  require(spacing > 0.0, ErrorKind::generation, "pose spacing must be positive");
  require(segment.length >= 0.0, ErrorKind::generation, "segment length must be non-negative");
  const auto steps = static_cast<std::size_t>(std::floor(segment.length / spacing + 1e-9));
  std::vector<OdometryPose> poses;
  poses.reserve(steps);
  const double h = start.heading;
  if (segment.arc_angle == 0.0) {
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t = static_cast<double>(k) * spacing;
      poses.push_back({static_cast<FrameId>(start.frame_id + k), start.x + t * std::cos(h),
                       start.y + t * std::sin(h), h});
    }
    return poses;
  }
  const double side = segment.arc_angle > 0.0 ? 1.0 : -1.0;
  const double radius = segment.length / std::abs(segment.arc_angle);
  const double cx = start.x - side * radius * std::sin(h);
  const double cy = start.y + side * radius * std::cos(h);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double heading = h + side * static_cast<double>(k) * spacing / radius;
    poses.push_back({static_cast<FrameId>(start.frame_id + k),
                     cx + side * radius * std::sin(heading), cy - side * radius * std::cos(heading),
                     wrap_angle(heading)});
  }
  return poses;
}

std::vector<OdometryPose> generate_route(const WorldConfig& config) {
  require(config.frame_spacing > 0.0, ErrorKind::generation, "frame spacing must be positive");
  std::map<FrameId, CurveSegment> curves;
  for (const CurveSegment& c : config.curves) curves[c.start_frame] = c;
  std::vector<OdometryPose> route;
  if (config.route_length == 0) return route;
  route.push_back({0, 0.0, 0.0, 0.0});
  while (route.size() < config.route_length) {
    const OdometryPose& current = route.back();
    std::vector<OdometryPose> next;
    if (auto it = curves.find(current.frame_id); it != curves.end()) {
      next = generate_curved_segment(current, it->second, config.frame_spacing);
    }
    if (next.empty()) {
      next = generate_curved_segment(current, CurveSegment{current.frame_id, 0.0, config.frame_spacing},
                                     config.frame_spacing);
    }
    for (const OdometryPose& p : next) {
      if (route.size() == config.route_length) break;
      route.push_back(p);
    }
  }
  return route;
}

SyntheticWorld generate_world(const WorldConfig& config) {
  require(config.route_length >= 2, ErrorKind::generation, "route needs at least 2 frames");
  require(config.descriptor_dim > 0, ErrorKind::generation, "descriptor_dim must be positive");
  require(config.descriptor_noise >= 0.0 && config.position_jitter >= 0.0, ErrorKind::generation,
          "noise levels must be non-negative");
  require(config.column_spacing > 0.0 && config.facade_distance > 0.0, ErrorKind::generation,
          "facade geometry must be positive");
  require(config.changed_objects == 0 || config.query_count > 0, ErrorKind::generation,
          "changed objects need at least one query");
  require(config.exclusion >= 0, ErrorKind::generation, "exclusion must be non-negative");
  const CameraModel& cam = config.camera;

  SyntheticWorld world;
  const std::vector<OdometryPose> route = generate_route(config);
  const std::vector<Landmark> facade = build_facade(config, route);

  ViewSequenceMap& map = world.map;
  map.layout = {DescriptorKind::dense, config.descriptor_dim};
  map.image_width = cam.image_width;
  map.image_height = cam.image_height;
  map.poses = route;

  std::vector<std::optional<std::size_t>> open_track(facade.size());
  for (std::size_t i = 0; i < route.size(); ++i) {
    PortableRng rng(derive_seed(config.seed, kFrameStreamBase + i));
    const RoutePoint pose = as_route_point(route[i]);
    Frame frame;
    frame.frame_id = route[i].frame_id;
    frame.timestamp_index = frame.frame_id;
    frame.image_width = cam.image_width;
    frame.image_height = cam.image_height;
    for (std::size_t l = 0; l < facade.size(); ++l) {
      const auto k = project(facade[l].position, pose, cam);
      if (!k) {
        open_track[l].reset();
        continue;
      }
      LocalFeature f;
      f.feature_id = static_cast<FeatureId>(frame.features.size());
      f.keypoint = *k;
      f.descriptor = observe(facade[l].latent, config.descriptor_noise, rng);
      frame.features.push_back(std::move(f));
      if (!open_track[l]) {
        open_track[l] = world.tracks.size();
        world.tracks.push_back(Track{static_cast<std::uint32_t>(world.tracks.size()), {}});
      }
      world.tracks[*open_track[l]].points.push_back({frame.frame_id, *k});
    }
    map.frames.push_back(std::move(frame));
  }
  std::erase_if(world.tracks, [](const Track& t) { return t.points.size() < 2; });
  for (std::size_t t = 0; t < world.tracks.size(); ++t) {
    world.tracks[t].track_id = static_cast<std::uint32_t>(t);
  }
  map.keyframe_ids = select_keyframes(map, config.keyframe_stride);

  // Query viewpoints on the mapped route, away from both ends.
  PortableRng query_rng(derive_seed(config.seed, kQueryStream));
  const std::size_t lo = config.query_margin;
  const std::size_t hi = route.size() > config.query_margin + 1 ? route.size() - 1 - config.query_margin : 0;
  const std::size_t available = hi >= lo && route.size() > 2 * config.query_margin ? hi - lo + 1 : 0;
  require(config.query_count <= available, ErrorKind::generation,
          "route of " + std::to_string(route.size()) + " frames has room for " +
              std::to_string(available) + " queries, " + std::to_string(config.query_count) +
              " requested");
  std::vector<std::size_t> slots(available);
  for (std::size_t i = 0; i < available; ++i) slots[i] = lo + i;
  for (std::size_t j = 0; j < config.query_count; ++j) {
    std::swap(slots[j], slots[j + static_cast<std::size_t>(query_rng.index(available - j))]);
  }
  slots.resize(config.query_count);

  const FrameId last_map_frame = route.back().frame_id;
  for (std::uint32_t q = 0; q < config.query_count; ++q) {
    const FrameId query_id = static_cast<FrameId>(last_map_frame + config.exclusion + 1 + q);
    RoutePoint pose = as_route_point(route[slots[q]]);
    if (!config.loop_closure) {
      const double s = (static_cast<double>(slots[q]) + query_rng.uniform()) * config.frame_spacing;
      pose = route_point(route, config.frame_spacing, s);
    }
    world.query_poses.push_back({query_id, pose.x, pose.y, wrap_angle(pose.heading)});

    std::vector<PlacedObject> objects;
    for (std::uint32_t o = q; o < config.changed_objects; o += config.query_count) {
      objects.push_back(place_object(config, pose, query_id, query_rng));
      world.ground_truth.push_back(objects.back().box);
    }
    auto occluded = [&](const Keypoint& k) {
      return std::any_of(objects.begin(), objects.end(), [&](const PlacedObject& o) {
        return k.x >= o.box.x0 && k.x <= o.box.x1 && k.y >= o.box.y0 && k.y <= o.box.y1;
      });
    };

    PortableRng rng(derive_seed(config.seed, kQueryFrameStreamBase + q));
    Frame frame;
    frame.frame_id = query_id;
    frame.timestamp_index = query_id;
    frame.image_width = cam.image_width;
    frame.image_height = cam.image_height;
    auto add = [&](const Keypoint& k, const DenseVector& latent) {
      LocalFeature f;
      f.feature_id = static_cast<FeatureId>(frame.features.size());
      f.keypoint = k;
      f.descriptor = observe(latent, config.descriptor_noise, rng);
      frame.features.push_back(std::move(f));
    };
    for (const Landmark& l : facade) {
      const auto k = project(l.position, pose, cam);
      if (k && !occluded(*k)) add(*k, l.latent);
    }
    for (const PlacedObject& o : objects) {
      for (std::size_t i = 0; i < o.landmarks.size(); ++i) add(o.keypoints[i], o.landmarks[i].latent);
    }
    world.queries.push_back(std::move(frame));
  }
  return world;
}

std::vector<DenseVector> map_descriptors(const ViewSequenceMap& map) {
  std::vector<DenseVector> out;
  for (const Frame& f : map.frames) {
    for (const LocalFeature& lf : f.features) out.push_back(lf.dense());
  }
  return out;
}

void write_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  write_feature_store(world.map, dir / "map");
  ViewSequenceMap queries;
  queries.layout = world.map.layout;
  queries.image_width = world.map.image_width;
  queries.image_height = world.map.image_height;
  queries.frames = world.queries;
  queries.poses = world.query_poses;
  write_feature_store(queries, dir / "queries");
  write_tracks(world.tracks, dir / "tracks.csv");
  write_ground_truth(world.ground_truth, dir / "gt_boxes.csv");
}

}  // namespace scenediff
