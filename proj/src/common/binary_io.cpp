#include "common/binary_io.hpp"

#include "common/errors.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <iterator>

namespace ibac {

namespace {

template <typename T>
void put_le(Bytes& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void put_u16(Bytes& out, std::uint16_t v) { put_le(out, v); }
void put_u32(Bytes& out, std::uint32_t v) { put_le(out, v); }
void put_u64(Bytes& out, std::uint64_t v) { put_le(out, v); }
void put_f32(Bytes& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(Bytes& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

std::span<const unsigned char> ByteReader::take(std::size_t n) {
  if (n > remaining()) throw FormatError("truncated data: needed " + std::to_string(n) + " bytes, " +
                                        std::to_string(remaining()) + " left");
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint16_t ByteReader::u16() {
  auto b = take(2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t ByteReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::uint32_t crc32_of(std::span<const unsigned char> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks
  std::size_t pos = 0;
  while (pos < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - pos, 1u << 30);
    crc = crc32(crc, data.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes encode_container(const std::string& magic, const Container& c) {
  if (magic.size() != 4) throw FormatError("magic must be 4 bytes");
  const std::string meta = c.meta.dump();
  Bytes out;
  out.reserve(4 + 2 + 4 + meta.size() + 8 + c.payload.size() + 4);
  out.insert(out.end(), magic.begin(), magic.end());
  put_u16(out, c.version);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  put_u64(out, c.payload.size());
  out.insert(out.end(), c.payload.begin(), c.payload.end());
  put_u32(out, crc32_of(c.payload));
  return out;
}

Container decode_container(std::span<const unsigned char> bytes, const std::string& magic,
                           std::uint16_t max_version) {
  ByteReader in(bytes);
  auto m = in.take(4);
  if (!std::equal(m.begin(), m.end(), magic.begin(), magic.end())) {
    throw FormatError("bad magic: expected '" + magic + "'");
  }
  Container c;
  c.version = in.u16();
  if (c.version == 0 || c.version > max_version) {
    throw VersionError("unsupported format version " + std::to_string(c.version) + " (this build reads up to " +
                       std::to_string(max_version) + ")");
  }
  const std::uint32_t meta_len = in.u32();
  auto meta = in.take(meta_len);
  try {
    c.meta = nlohmann::json::parse(meta.begin(), meta.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }
  const std::uint64_t payload_len = in.u64();
  if (payload_len > in.remaining() || in.remaining() - payload_len < 4) {
    throw FormatError("truncated payload: header declares " + std::to_string(payload_len) + " bytes");
  }
  auto payload = in.take(static_cast<std::size_t>(payload_len));
  const std::uint32_t stored = in.u32();
  if (in.remaining() != 0) throw FormatError("trailing bytes after checksum");
  if (crc32_of(payload) != stored) throw ChecksumError("payload checksum mismatch");
  c.payload.assign(payload.begin(), payload.end());
  return c;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  Bytes data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed for '" + path.string() + "'");
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return {b.begin(), b.end()};
}

}  // namespace ibac
