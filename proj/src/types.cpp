#include "scenediff/types.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "scenediff/error.hpp"

namespace scenediff {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
    case ErrorKind::learning: return "learning";
    case ErrorKind::retrieval: return "retrieval";
    case ErrorKind::scoring: return "scoring";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::classification: return "classification";
    case ErrorKind::pairing: return "pairing";
    case ErrorKind::generation: return "generation";
  }
  return "unknown";
}

std::uint32_t hamming_distance(const BinaryCode& a, const BinaryCode& b) {
  require(a.bits == b.bits, ErrorKind::validation,
          "hamming distance between codes of " + std::to_string(a.bits) + " and " +
              std::to_string(b.bits) + " bits");
  const std::size_t n = a.bytes.size();
  std::uint32_t total = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    std::uint64_t wa, wb;
    std::memcpy(&wa, a.bytes.data() + i, 8);
    std::memcpy(&wb, b.bytes.data() + i, 8);
    total += static_cast<std::uint32_t>(std::popcount(wa ^ wb));
  }
  for (; i < n; ++i) {
    total += static_cast<std::uint32_t>(
        std::popcount(static_cast<unsigned>(a.bytes[i] ^ b.bytes[i])));
  }
  return total;
}

DescriptorKind kind_of(const Descriptor& d) {
  return std::holds_alternative<DenseVector>(d) ? DescriptorKind::dense : DescriptorKind::binary;
}

std::uint32_t dimension_of(const Descriptor& d) {
  if (const auto* dense = std::get_if<DenseVector>(&d)) {
    return static_cast<std::uint32_t>(dense->size());
  }
  return std::get<BinaryCode>(d).bits;
}

const Frame* ViewSequenceMap::find_frame(FrameId id) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), id,
                             [](const Frame& f, FrameId v) { return f.frame_id < v; });
  return (it != frames.end() && it->frame_id == id) ? &*it : nullptr;
}

std::optional<std::size_t> ViewSequenceMap::frame_index(FrameId id) const {
  const Frame* f = find_frame(id);
  if (f == nullptr) return std::nullopt;
  return static_cast<std::size_t>(f - frames.data());
}

const OdometryPose* ViewSequenceMap::find_pose(FrameId id) const {
  auto it = std::lower_bound(poses.begin(), poses.end(), id,
                             [](const OdometryPose& p, FrameId v) { return p.frame_id < v; });
  return (it != poses.end() && it->frame_id == id) ? &*it : nullptr;
}

void validate(const ViewSequenceMap& map) {
  const auto where = [](const Frame& f) { return "frame " + std::to_string(f.frame_id) + ": "; };
  if (map.layout.kind == DescriptorKind::binary) {
    require(map.layout.dimension % 8 == 0, ErrorKind::validation,
            "binary descriptor width must be a multiple of 8 bits");
  }
  for (std::size_t i = 0; i < map.frames.size(); ++i) {
    const Frame& f = map.frames[i];
    if (i > 0) {
      require(f.frame_id > map.frames[i - 1].frame_id, ErrorKind::validation,
              where(f) + "frame ids must be strictly increasing");
      require(f.timestamp_index >= map.frames[i - 1].timestamp_index, ErrorKind::validation,
              where(f) + "timestamps must be non-decreasing");
    }
    for (std::size_t j = 0; j < f.features.size(); ++j) {
      const LocalFeature& lf = f.features[j];
      require(lf.feature_id == j, ErrorKind::validation,
              where(f) + "feature ids must follow file order");
      require(kind_of(lf.descriptor) == map.layout.kind &&
                  dimension_of(lf.descriptor) == map.layout.dimension,
              ErrorKind::validation, where(f) + "descriptor layout differs from the store");
      const Keypoint& k = lf.keypoint;
      require(std::isfinite(k.x) && std::isfinite(k.y) && k.x >= 0.0f && k.y >= 0.0f &&
                  k.x < static_cast<float>(f.image_width) &&
                  k.y < static_cast<float>(f.image_height),
              ErrorKind::validation,
              where(f) + "keypoint " + std::to_string(j) + " outside the image");
    }
    require(map.find_pose(f.frame_id) != nullptr, ErrorKind::validation,
            where(f) + "missing odometry pose");
  }
  for (std::size_t i = 1; i < map.poses.size(); ++i) {
    require(map.poses[i].frame_id > map.poses[i - 1].frame_id, ErrorKind::validation,
            "odometry frame ids must be strictly increasing");
  }
  require(map.poses.size() == map.frames.size(), ErrorKind::validation,
          "odometry must hold exactly one pose per frame");
  for (const OdometryPose& p : map.poses) {
    require(p.heading >= -std::numbers::pi && p.heading < std::numbers::pi, ErrorKind::validation,
            "pose " + std::to_string(p.frame_id) + ": heading outside [-pi, pi)");
  }
  for (FrameId id : map.keyframe_ids) {
    require(map.find_frame(id) != nullptr, ErrorKind::validation,
            "keyframe " + std::to_string(id) + " is not a frame of the map");
  }
}

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(radians + std::numbers::pi, two_pi);
  if (r < 0.0) r += two_pi;
  r -= std::numbers::pi;
  return r >= std::numbers::pi ? -std::numbers::pi : r;
}

}  // namespace scenediff
