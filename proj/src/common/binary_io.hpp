#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ibac {

using Bytes = std::vector<unsigned char>;

// Byte appenders and a bounds-checked reader, all little-endian.
void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_f32(Bytes& out, float v);
void put_f64(Bytes& out, double v);

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> data) : data_(data) {}

  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::span<const unsigned char> take(std::size_t n);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const unsigned char> data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const unsigned char> data);

// Framed file layout shared by checkpoints, heads and datasets:
//   magic[4] | u16 version | u32 meta_len | meta JSON | u64 payload_len |
//   payload | u32 CRC32(payload)
struct Container {
  std::uint16_t version = 1;
  nlohmann::json meta;
  Bytes payload;
};

Bytes encode_container(const std::string& magic, const Container& c);

// Checks magic, rejects versions newer than `max_version` before touching the
// payload, then length and checksum.
Container decode_container(std::span<const unsigned char> bytes, const std::string& magic,
                           std::uint16_t max_version);

Bytes read_file(const std::filesystem::path& path);
// Writes to a sibling temporary and renames over the target.
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ibac
