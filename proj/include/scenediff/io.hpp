#pragma once

// Low-level helpers shared by the binary stores (VSF, VVF, BIF, MVF) and the
// CSV interchange files. All binary integers and floats are little-endian.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace scenediff::io {

class BinaryWriter {
 public:
  void magic(std::string_view tag) { buffer_.insert(buffer_.end(), tag.begin(), tag.end()); }
  void u32(std::uint32_t v);
  void f32(float v);
  void bytes(const std::uint8_t* data, std::size_t n) { buffer_.insert(buffer_.end(), data, data + n); }

  const std::vector<char>& data() const { return buffer_; }
  /// Writes the buffer to `path`, throwing ErrorKind::io on failure.
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<char> buffer_;
};

class BinaryReader {
 public:
  /// Loads the whole file; throws ErrorKind::io when unreadable.
  explicit BinaryReader(const std::filesystem::path& path);

  /// Throws ErrorKind::format when the next bytes differ from `tag`.
  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  float f32();
  void bytes(std::uint8_t* out, std::size_t n);

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  /// Throws ErrorKind::format unless every byte was consumed.
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::filesystem::path path_;
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
std::string format_float(float v);

double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

/// Minimal CSV reader for the comma-separated, unquoted files used here.
/// The first row is a header that must match `expected_header` exactly.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::string_view expected_header);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace scenediff::io
