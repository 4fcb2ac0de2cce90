#pragma once

// VSF store: the interchange format between feature extraction and the
// pipeline.
//
//   <dir>/manifest.json      version, descriptor_kind, dim|bits, frame_count,
//                            image_width, image_height
//   <dir>/odometry.csv       frame_id,x,y,heading (one row per frame)
//   <dir>/frames/<id>.vsf    "VSF1", u32 count, then per feature
//                            f32 x, f32 y, descriptor payload
//   <dir>/keyframes.txt      optional, one frame id per line
//
// Dense payloads are D little-endian f32; binary payloads are B/8 bytes with
// bit 0 in the most significant bit of the first byte.

#include <filesystem>

#include "scenediff/types.hpp"

namespace scenediff {

ViewSequenceMap read_feature_store(const std::filesystem::path& dir);

/// Deterministic: the same map always produces the same bytes.
void write_feature_store(const ViewSequenceMap& map, const std::filesystem::path& dir);

/// Reads a single frame file. Frame id and image size come from the caller
/// (usually the file stem and the store manifest).
Frame read_frame_file(const std::filesystem::path& file, const DescriptorLayout& layout,
                      FrameId frame_id, std::uint32_t image_width, std::uint32_t image_height);

void write_frame_file(const Frame& frame, const DescriptorLayout& layout,
                      const std::filesystem::path& file);

}  // namespace scenediff
