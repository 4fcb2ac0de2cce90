#include "scenediff/feature_store.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>

#include "scenediff/error.hpp"
#include "scenediff/io.hpp"

namespace scenediff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kOdometryHeader[] = "frame_id,x,y,heading";

DescriptorLayout parse_manifest(const json& m, std::uint32_t& frame_count,
                                std::uint32_t& width, std::uint32_t& height) {
  try {
    if (m.at("version").get<int>() != 1) fail(ErrorKind::format, "unsupported manifest version");
    DescriptorLayout layout;
    const std::string kind = m.at("descriptor_kind").get<std::string>();
    if (kind == "dense") {
      layout.kind = DescriptorKind::dense;
      layout.dimension = m.at("dim").get<std::uint32_t>();
    } else if (kind == "binary") {
      layout.kind = DescriptorKind::binary;
      layout.dimension = m.at("bits").get<std::uint32_t>();
      require(layout.dimension % 8 == 0, ErrorKind::format, "bits must be a multiple of 8");
    } else {
      fail(ErrorKind::format, "unknown descriptor_kind '" + kind + "'");
    }
    frame_count = m.at("frame_count").get<std::uint32_t>();
    width = m.at("image_width").get<std::uint32_t>();
    height = m.at("image_height").get<std::uint32_t>();
    return layout;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("manifest: ") + e.what());
  }
}

std::vector<OdometryPose> read_odometry(const fs::path& path) {
  std::vector<OdometryPose> poses;
  for (const auto& row : io::read_csv(path, kOdometryHeader)) {
    OdometryPose p;
    const std::int64_t id = io::parse_int(row[0]);
    require(id >= 0 && id <= 0xffffffffLL, ErrorKind::format, "odometry: bad frame id");
    p.frame_id = static_cast<FrameId>(id);
    p.x = io::parse_double(row[1]);
    p.y = io::parse_double(row[2]);
    p.heading = io::parse_double(row[3]);
    poses.push_back(p);
  }
  return poses;
}

}  // namespace

Frame read_frame_file(const fs::path& file, const DescriptorLayout& layout, FrameId frame_id,
                      std::uint32_t image_width, std::uint32_t image_height) {
  io::BinaryReader in(file);
  in.expect_magic("VSF1");
  const std::uint32_t count = in.u32();
  const std::size_t payload =
      layout.kind == DescriptorKind::dense ? 4u * layout.dimension : layout.dimension / 8u;
  if (in.remaining() != static_cast<std::size_t>(count) * (8 + payload)) {
    fail(ErrorKind::validation, file.string() + ": size does not match " +
                                    std::to_string(count) + " descriptors of dimension " +
                                    std::to_string(layout.dimension));
  }
  Frame frame;
  frame.frame_id = frame_id;
  frame.timestamp_index = frame_id;
  frame.image_width = image_width;
  frame.image_height = image_height;
  frame.features.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    LocalFeature f;
    f.feature_id = i;
    f.keypoint.x = in.f32();
    f.keypoint.y = in.f32();
    if (layout.kind == DescriptorKind::dense) {
      DenseVector v(layout.dimension);
      for (float& c : v) c = in.f32();
      f.descriptor = std::move(v);
    } else {
      BinaryCode code(layout.dimension);
      in.bytes(code.bytes.data(), code.bytes.size());
      f.descriptor = std::move(code);
    }
    frame.features.push_back(std::move(f));
  }
  in.expect_end();
  return frame;
}

void write_frame_file(const Frame& frame, const DescriptorLayout& layout, const fs::path& file) {
  io::BinaryWriter out;
  out.magic("VSF1");
  out.u32(static_cast<std::uint32_t>(frame.features.size()));
  for (const LocalFeature& f : frame.features) {
    require(kind_of(f.descriptor) == layout.kind && dimension_of(f.descriptor) == layout.dimension,
            ErrorKind::validation,
            "frame " + std::to_string(frame.frame_id) + ": descriptor layout differs from the store");
    out.f32(f.keypoint.x);
    out.f32(f.keypoint.y);
    if (const auto* dense = std::get_if<DenseVector>(&f.descriptor)) {
      for (float c : *dense) out.f32(c);
    } else {
      const BinaryCode& code = std::get<BinaryCode>(f.descriptor);
      out.bytes(code.bytes.data(), code.bytes.size());
    }
  }
  out.save(file);
}

ViewSequenceMap read_feature_store(const fs::path& dir) {
  ViewSequenceMap map;
  std::uint32_t frame_count = 0;
  {
    json manifest;
    try {
      manifest = json::parse(io::read_text(dir / "manifest.json"));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::format, std::string("manifest.json: ") + e.what());
    }
    map.layout = parse_manifest(manifest, frame_count, map.image_width, map.image_height);
  }
  map.poses = read_odometry(dir / "odometry.csv");

  std::set<FrameId> files;
  if (fs::exists(dir / "frames")) {
    for (const auto& entry : fs::directory_iterator(dir / "frames")) {
      if (entry.path().extension() != ".vsf") continue;
      const std::int64_t id = io::parse_int(entry.path().stem().string());
      require(id >= 0 && id <= 0xffffffffLL, ErrorKind::format,
              "bad frame file name " + entry.path().string());
      files.insert(static_cast<FrameId>(id));
    }
  }
  for (FrameId id : files) {
    require(std::any_of(map.poses.begin(), map.poses.end(),
                        [id](const OdometryPose& p) { return p.frame_id == id; }),
            ErrorKind::validation, "frame " + std::to_string(id) + ": missing odometry pose");
  }
  require(files.size() == frame_count, ErrorKind::validation,
          "manifest declares " + std::to_string(frame_count) + " frames but " +
              std::to_string(files.size()) + " frame files exist");

  for (const OdometryPose& p : map.poses) {
    require(files.count(p.frame_id) == 1, ErrorKind::validation,
            "pose for frame " + std::to_string(p.frame_id) + " has no frame file");
    map.frames.push_back(read_frame_file(dir / "frames" / (std::to_string(p.frame_id) + ".vsf"),
                                         map.layout, p.frame_id, map.image_width,
                                         map.image_height));
  }

  if (fs::exists(dir / "keyframes.txt")) {
    std::istringstream lines(io::read_text(dir / "keyframes.txt"));
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      map.keyframe_ids.push_back(static_cast<FrameId>(io::parse_int(line)));
    }
  }
  validate(map);
  return map;
}

void write_feature_store(const ViewSequenceMap& map, const fs::path& dir) {
  validate(map);
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) fail(ErrorKind::io, "cannot create " + (dir / "frames").string() + ": " + ec.message());
  for (const auto& entry : fs::directory_iterator(dir / "frames")) {
    if (entry.path().extension() == ".vsf") fs::remove(entry.path());
  }

  json manifest;
  manifest["version"] = 1;
  if (map.layout.kind == DescriptorKind::dense) {
    manifest["descriptor_kind"] = "dense";
    manifest["dim"] = map.layout.dimension;
  } else {
    manifest["descriptor_kind"] = "binary";
    manifest["bits"] = map.layout.dimension;
  }
  manifest["frame_count"] = map.frames.size();
  manifest["image_width"] = map.image_width;
  manifest["image_height"] = map.image_height;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::string odo = std::string(kOdometryHeader) + "\n";
  for (const OdometryPose& p : map.poses) {
    odo += std::to_string(p.frame_id) + "," + io::format_double(p.x) + "," +
           io::format_double(p.y) + "," + io::format_double(p.heading) + "\n";
  }
  io::write_text(dir / "odometry.csv", odo);

  for (const Frame& f : map.frames) {
    write_frame_file(f, map.layout, dir / "frames" / (std::to_string(f.frame_id) + ".vsf"));
  }

  if (!map.keyframe_ids.empty()) {
    std::string text;
    for (FrameId id : map.keyframe_ids) text += std::to_string(id) + "\n";
    io::write_text(dir / "keyframes.txt", text);
  } else if (fs::exists(dir / "keyframes.txt")) {
    fs::remove(dir / "keyframes.txt");
  }
}

}  // namespace scenediff
