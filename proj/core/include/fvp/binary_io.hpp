#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fvp {

/// Little-endian byte sink used by every file format in the library.
class ByteWriter {
 public:
  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> data);

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; every overrun raises a format error naming `context`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string context);

  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  double f64();
  std::span<const std::uint8_t> bytes(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::span<const std::uint8_t> data, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace fvp
