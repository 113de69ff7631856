#include "fvp/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fvp/error.hpp"

namespace fvp {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swapping");

namespace {

template <typename T>
void append(std::vector<std::uint8_t>& buf, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.insert(buf.end(), raw, raw + sizeof(T));
}

}  // namespace

void ByteWriter::magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }
void ByteWriter::u8(std::uint8_t v) { buf_.push_back(v); }
void ByteWriter::u16(std::uint16_t v) { append(buf_, v); }
void ByteWriter::u32(std::uint32_t v) { append(buf_, v); }
void ByteWriter::f32(float v) { append(buf_, v); }
void ByteWriter::f64(double v) { append(buf_, v); }
void ByteWriter::bytes(std::span<const std::uint8_t> data) {
  buf_.insert(buf_.end(), data.begin(), data.end());
}

ByteReader::ByteReader(std::span<const std::uint8_t> data, std::string context)
    : data_(data), context_(std::move(context)) {}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    fail(ErrorKind::kFormat, context_ + ": truncated (needed " + std::to_string(n) +
                                 " bytes at offset " + std::to_string(pos_) + ")");
  }
}

void ByteReader::expect_magic(std::string_view tag) {
  need(tag.size());
  if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
    fail(ErrorKind::kFormat, context_ + ": bad magic, expected '" + std::string(tag) + "'");
  }
  pos_ += tag.size();
}

namespace {
template <typename T>
T take(std::span<const std::uint8_t> data, std::size_t& pos) {
  T v;
  std::memcpy(&v, data.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace

std::uint8_t ByteReader::u8() { need(1); return take<std::uint8_t>(data_, pos_); }
std::uint16_t ByteReader::u16() { need(2); return take<std::uint16_t>(data_, pos_); }
std::uint32_t ByteReader::u32() { need(4); return take<std::uint32_t>(data_, pos_); }
float ByteReader::f32() { need(4); return take<float>(data_, pos_); }
double ByteReader::f64() { need(8); return take<double>(data_, pos_); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    fail(ErrorKind::kFormat, context_ + ": " + std::to_string(remaining()) + " trailing bytes");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::kIo, "read failure on '" + path.string() + "'");
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ErrorKind::kIo, "write failure on '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

std::uint64_t fnv1a(std::span<const std::uint8_t> data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fvp
