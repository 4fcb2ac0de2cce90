#include <cmath>
#include <numbers>

#include "scenediff/feature_store.hpp"
#include "scenediff/io.hpp"
#include "support.hpp"

using namespace scenediff;
using testing::TempDir;

namespace {

ViewSequenceMap dense_map(std::uint32_t frames, std::uint32_t features, std::uint32_t dim,
                          std::uint64_t seed) {
  PortableRng rng(seed);
  ViewSequenceMap map = testing::random_map(rng, frames, features, {DescriptorKind::dense, dim});
  return map;
}

}  // namespace

TEST_CASE("binary code bit layout is most significant bit first") {
  BinaryCode code(16);
  code.set_bit(0);
  code.set_bit(9);
  CHECK(code.bytes[0] == 0x80);
  CHECK(code.bytes[1] == 0x40);
  CHECK(code.bit(0));
  CHECK_FALSE(code.bit(1));
  CHECK(code.bit(9));
}

TEST_CASE("hamming distance counts differing bits") {
  PortableRng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t bits = 8 * static_cast<std::uint32_t>(1 + rng.index(40));
    const BinaryCode a = testing::random_code(rng, bits);
    const BinaryCode b = testing::random_code(rng, bits);
    std::uint32_t expected = 0;
    for (std::uint32_t i = 0; i < bits; ++i) expected += a.bit(i) != b.bit(i);
    CHECK(hamming_distance(a, b) == expected);
    CHECK(hamming_distance(b, a) == expected);
    CHECK(hamming_distance(a, a) == 0);
  }
  CHECK_ERROR_KIND(hamming_distance(BinaryCode(8), BinaryCode(16)), ErrorKind::validation);
}

TEST_CASE("wrap_angle maps into [-pi, pi)") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(-std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(-std::numbers::pi));
  CHECK(wrap_angle(3.0 * std::numbers::pi / 2.0) == doctest::Approx(-std::numbers::pi / 2.0));
  PortableRng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double a = wrap_angle(40.0 * (rng.uniform() - 0.5));
    CHECK(a >= -std::numbers::pi);
    CHECK(a < std::numbers::pi);
  }
}

TEST_CASE("empty store with a valid manifest reads as an empty map") {
  TempDir dir;
  ViewSequenceMap map;
  map.layout = {DescriptorKind::dense, 256};
  write_feature_store(map, dir.path());
  const ViewSequenceMap back = read_feature_store(dir.path());
  CHECK(back.frames.empty());
  CHECK(back.layout == map.layout);
}

TEST_CASE("single frame of 169 dense 256-d descriptors") {
  TempDir dir;
  PortableRng rng(11);
  ViewSequenceMap map;
  map.layout = {DescriptorKind::dense, 256};
  Frame f;
  for (std::uint32_t j = 0; j < 169; ++j) {
    f.features.push_back({testing::random_keypoint(rng), testing::random_dense(rng, 256), j});
  }
  map.frames.push_back(f);
  map.poses.push_back({0, 0.0, 0.0, 0.0});
  write_feature_store(map, dir.path());
  const ViewSequenceMap back = read_feature_store(dir.path());
  REQUIRE(back.frames.size() == 1);
  CHECK(back.frames[0].features.size() == 169);
  CHECK(back == map);
}

TEST_CASE("20-frame map round-trips bitwise and writes identical bytes twice") {
  TempDir a, b;
  ViewSequenceMap map = dense_map(20, 30, 32, 17);
  map.keyframe_ids = {0, 10};
  write_feature_store(map, a.path());
  write_feature_store(map, b.path());
  CHECK(read_feature_store(a.path()) == map);
  for (const char* name : {"manifest.json", "odometry.csv", "keyframes.txt", "frames/7.vsf"}) {
    CHECK_MESSAGE(testing::slurp(a / name) == testing::slurp(b / name), name);
  }
}

TEST_CASE("binary 128-bit descriptors take 16 bytes each") {
  TempDir dir;
  PortableRng rng(2);
  ViewSequenceMap map = testing::random_map(rng, 3, 12, {DescriptorKind::binary, 128});
  write_feature_store(map, dir.path());
  for (const Frame& f : map.frames) {
    const auto size = std::filesystem::file_size(dir / ("frames/" + std::to_string(f.frame_id) + ".vsf"));
    CHECK(size == 8 + f.features.size() * (8 + 16));
  }
  CHECK(read_feature_store(dir.path()) == map);
}

TEST_CASE("round trip holds for random maps of both descriptor kinds") {
  PortableRng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    TempDir dir;
    const bool binary = rng.index(2) == 1;
    const DescriptorLayout layout = binary
        ? DescriptorLayout{DescriptorKind::binary, 8 * static_cast<std::uint32_t>(1 + rng.index(32))}
        : DescriptorLayout{DescriptorKind::dense, static_cast<std::uint32_t>(1 + rng.index(64))};
    ViewSequenceMap map = testing::random_map(rng, static_cast<std::uint32_t>(rng.index(12)), 20, layout);
    for (const Frame& f : map.frames) {
      if (rng.index(3) == 0) map.keyframe_ids.push_back(f.frame_id);
    }
    write_feature_store(map, dir.path());
    CHECK(read_feature_store(dir.path()) == map);
  }
}

TEST_CASE("validation rejects structural violations") {
  const ViewSequenceMap good = dense_map(4, 5, 8, 1);
  CHECK_NOTHROW(validate(good));

  SUBCASE("descriptor dimension differs across frames") {
    ViewSequenceMap m = good;
    m.frames[2].features.push_back({{1, 1}, DenseVector(9, 0.f), static_cast<FeatureId>(m.frames[2].features.size())});
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
  SUBCASE("descriptor kind differs across frames") {
    ViewSequenceMap m = good;
    m.frames[1].features.push_back({{1, 1}, BinaryCode(8), static_cast<FeatureId>(m.frames[1].features.size())});
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
  SUBCASE("missing pose") {
    ViewSequenceMap m = good;
    m.poses.pop_back();
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
  SUBCASE("frame ids not increasing") {
    ViewSequenceMap m = good;
    std::swap(m.frames[0], m.frames[1]);
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
  SUBCASE("keypoint out of bounds") {
    ViewSequenceMap m = good;
    m.frames[0].features.push_back({{1024.0f, 5.0f}, DenseVector(8, 0.f), static_cast<FeatureId>(m.frames[0].features.size())});
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
  SUBCASE("heading outside [-pi, pi)") {
    ViewSequenceMap m = good;
    m.poses[0].heading = std::numbers::pi;
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
  SUBCASE("keyframe that is not a frame") {
    ViewSequenceMap m = good;
    m.keyframe_ids = {42};
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
  SUBCASE("feature ids out of order") {
    ViewSequenceMap m = good;
    m.frames[0].features.push_back({{1, 1}, DenseVector(8, 0.f), 77});
    CHECK_ERROR_KIND(validate(m), ErrorKind::validation);
  }
}

TEST_CASE("reader reports malformed stores") {
  TempDir dir;
  const ViewSequenceMap map = dense_map(3, 4, 8, 4);
  write_feature_store(map, dir.path());

  SUBCASE("bad magic") {
    std::string bytes = testing::slurp(dir / "frames/1.vsf");
    bytes[0] = 'X';
    io::write_text(dir / "frames/1.vsf", bytes);
    CHECK_ERROR_KIND(read_feature_store(dir.path()), ErrorKind::format);
  }
  SUBCASE("frame payload of the wrong dimension") {
    Frame f = map.frames[1];
    f.features.push_back({{1, 1}, DenseVector(8, 0.f), static_cast<FeatureId>(f.features.size())});
    for (LocalFeature& lf : f.features) lf.descriptor = DenseVector(9, 0.5f);
    write_frame_file(f, {DescriptorKind::dense, 9}, dir / "frames/1.vsf");
    CHECK_ERROR_KIND(read_feature_store(dir.path()), ErrorKind::validation);
  }
  SUBCASE("frame without a pose") {
    write_frame_file(map.frames[0], map.layout, dir / "frames/9.vsf");
    CHECK_ERROR_KIND(read_feature_store(dir.path()), ErrorKind::validation);
  }
  SUBCASE("missing manifest") {
    std::filesystem::remove(dir / "manifest.json");
    CHECK_ERROR_KIND(read_feature_store(dir.path()), ErrorKind::io);
  }
  SUBCASE("unknown descriptor kind") {
    io::write_text(dir / "manifest.json",
                   R"({"version":1,"descriptor_kind":"sparse","dim":8,"frame_count":3,"image_width":1024,"image_height":768})");
    CHECK_ERROR_KIND(read_feature_store(dir.path()), ErrorKind::format);
  }
  SUBCASE("odometry header") {
    io::write_text(dir / "odometry.csv", "id,x,y,h\n");
    CHECK_ERROR_KIND(read_feature_store(dir.path()), ErrorKind::format);
  }
}

TEST_CASE("number formatting round-trips exactly") {
  PortableRng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.index(20)) - 10.0);
    CHECK(io::parse_double(io::format_double(v)) == v);
    const float f = static_cast<float>(v);
    CHECK(static_cast<float>(io::parse_double(io::format_float(f))) == f);
  }
  CHECK_ERROR_KIND(io::parse_double("1.5x"), ErrorKind::format);
  CHECK_ERROR_KIND(io::parse_int("12a"), ErrorKind::format);
}
