#pragma once

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <unistd.h>
#include <vector>

#include "scenediff/error.hpp"
#include "scenediff/rng.hpp"
#include "scenediff/types.hpp"

#define CHECK_ERROR_KIND(expr, expected_kind)                                  \
  do {                                                                         \
    bool sd_thrown = false;                                                    \
    try {                                                                      \
      (void)(expr);                                                            \
    } catch (const scenediff::Error& sd_e) {                                   \
      sd_thrown = true;                                                        \
      CHECK_MESSAGE(sd_e.kind() == (expected_kind), sd_e.what());              \
    }                                                                          \
    CHECK_MESSAGE(sd_thrown, "expected an error from " #expr);                 \
  } while (0)

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("scenediff_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline scenediff::DenseVector random_dense(scenediff::PortableRng& rng, std::uint32_t dim) {
  scenediff::DenseVector v(dim);
  for (float& c : v) c = static_cast<float>(rng.normal());
  return v;
}

inline scenediff::BinaryCode random_code(scenediff::PortableRng& rng, std::uint32_t bits) {
  scenediff::BinaryCode code(bits);
  for (std::uint32_t i = 0; i < bits; ++i) {
    if (rng.next() & 1u) code.set_bit(i);
  }
  return code;
}

inline scenediff::Keypoint random_keypoint(scenediff::PortableRng& rng, std::uint32_t width = 1024,
                                           std::uint32_t height = 768) {
  return {static_cast<float>(rng.uniform() * width), static_cast<float>(rng.uniform() * height)};
}

/// Valid map with straight-line poses and random features.
inline scenediff::ViewSequenceMap random_map(scenediff::PortableRng& rng, std::uint32_t frames,
                                             std::uint32_t max_features,
                                             scenediff::DescriptorLayout layout) {
  using namespace scenediff;
  ViewSequenceMap map;
  map.layout = layout;
  for (std::uint32_t i = 0; i < frames; ++i) {
    Frame f;
    f.frame_id = i;
    f.timestamp_index = i;
    const auto n = static_cast<std::uint32_t>(rng.index(max_features + 1));
    for (std::uint32_t j = 0; j < n; ++j) {
      LocalFeature lf;
      lf.feature_id = j;
      lf.keypoint = random_keypoint(rng);
      if (layout.kind == DescriptorKind::dense) {
        lf.descriptor = random_dense(rng, layout.dimension);
      } else {
        lf.descriptor = random_code(rng, layout.dimension);
      }
      f.features.push_back(std::move(lf));
    }
    map.frames.push_back(std::move(f));
    map.poses.push_back({i, static_cast<double>(i), 0.5 * rng.normal(), wrap_angle(rng.normal())});
  }
  return map;
}

}  // namespace testing
