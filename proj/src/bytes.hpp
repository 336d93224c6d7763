#pragma once

// Little-endian readers/writers shared by the TXSW, TXSG and UNRY formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "texturesmith/error.hpp"

namespace texturesmith::detail {

class ByteWriter {
 public:
  void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> vs) {
    for (float v : vs) f32(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void expect_magic(std::string_view m) {
    if (bytes_.size() < m.size() || std::memcmp(bytes_.data(), m.data(), m.size()) != 0) {
      throw FormatError(FormatErrc::BadMagic, what_ + ": bad magic, expected \"" + std::string(m) + "\"");
    }
    pos_ = m.size();
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  /// Reads `count` floats after checking the stream holds them, so a
  /// corrupt count cannot trigger a huge allocation.
  std::vector<float> f32s(std::uint64_t count) {
    if (count > remaining() / 4) {
      throw FormatError(FormatErrc::Truncated, what_ + ": declares " + std::to_string(count) +
                                                   " values but only " + std::to_string(remaining()) +
                                                   " bytes remain");
    }
    std::vector<float> out(static_cast<std::size_t>(count));
    for (auto& v : out) v = f32();
    return out;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  const std::string& what() const noexcept { return what_; }

  void expect_end() const {
    if (remaining() != 0) {
      throw FormatError(FormatErrc::SizeMismatch,
                        what_ + ": " + std::to_string(remaining()) + " trailing bytes after payload");
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError(FormatErrc::Truncated, what_ + ": unexpected end of stream");
  }

  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace texturesmith::detail
