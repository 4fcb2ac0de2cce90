#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace scenediff {

using FrameId = std::uint32_t;
using FeatureId = std::uint32_t;
using WordId = std::uint32_t;

inline constexpr std::uint32_t kCanonicalImageWidth = 1024;
inline constexpr std::uint32_t kCanonicalImageHeight = 768;

/// Pixel location in native image coordinates.
struct Keypoint {
  float x = 0.0f;
  float y = 0.0f;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using DenseVector = std::vector<float>;

/// Packed binary code. Bit i lives in byte i / 8 at position 7 - i % 8
/// (most significant bit first), which is also the on-disk layout.
struct BinaryCode {
  std::uint32_t bits = 0;
  std::vector<std::uint8_t> bytes;

  BinaryCode() = default;
  explicit BinaryCode(std::uint32_t bit_count)
      : bits(bit_count), bytes((bit_count + 7) / 8, 0) {}

  bool bit(std::size_t i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1u; }
  void set_bit(std::size_t i) { bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8)); }

  friend bool operator==(const BinaryCode&, const BinaryCode&) = default;
};

/// Number of differing bits. Both codes must have the same width.
std::uint32_t hamming_distance(const BinaryCode& a, const BinaryCode& b);

using Descriptor = std::variant<DenseVector, BinaryCode>;

enum class DescriptorKind { dense, binary };

DescriptorKind kind_of(const Descriptor& d);
/// Component count for dense descriptors, bit count for binary ones.
std::uint32_t dimension_of(const Descriptor& d);

struct LocalFeature {
  Keypoint keypoint;
  Descriptor descriptor;
  FeatureId feature_id = 0;

  const DenseVector& dense() const { return std::get<DenseVector>(descriptor); }
  const BinaryCode& binary() const { return std::get<BinaryCode>(descriptor); }

  friend bool operator==(const LocalFeature&, const LocalFeature&) = default;
};

/// One image of a sequence. frame_id doubles as the timestamp ordinal of
/// the capture, so timestamp_index is kept equal to it by the store.
struct Frame {
  FrameId frame_id = 0;
  std::int64_t timestamp_index = 0;
  std::vector<LocalFeature> features;
  std::uint32_t image_width = kCanonicalImageWidth;
  std::uint32_t image_height = kCanonicalImageHeight;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Ground-plane odometry; heading in [-pi, pi).
struct OdometryPose {
  FrameId frame_id = 0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  friend bool operator==(const OdometryPose&, const OdometryPose&) = default;
};

struct DescriptorLayout {
  DescriptorKind kind = DescriptorKind::dense;
  std::uint32_t dimension = 0;

  friend bool operator==(const DescriptorLayout&, const DescriptorLayout&) = default;
};

struct ViewSequenceMap {
  DescriptorLayout layout;
  std::uint32_t image_width = kCanonicalImageWidth;
  std::uint32_t image_height = kCanonicalImageHeight;
  std::vector<Frame> frames;
  std::vector<OdometryPose> poses;
  std::vector<FrameId> keyframe_ids;

  const Frame* find_frame(FrameId id) const;
  const OdometryPose* find_pose(FrameId id) const;
  /// Position of the frame in `frames`, if present.
  std::optional<std::size_t> frame_index(FrameId id) const;

  friend bool operator==(const ViewSequenceMap&, const ViewSequenceMap&) = default;
};

/// Throws ErrorKind::validation when the map breaks any structural invariant
/// (ordering, uniform descriptor layout, pose coverage, keypoint bounds).
void validate(const ViewSequenceMap& map);

/// Wraps an angle into [-pi, pi).
double wrap_angle(double radians);

}  // namespace scenediff
