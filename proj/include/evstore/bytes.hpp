#pragma once

// Little-endian encoding helpers shared by every persistent record type.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evstore/error.hpp"

namespace evstore {

/// Object reference: a record's segment and byte offset within it.
struct Oref {
  std::uint32_t segment = 0;
  std::uint64_t offset = 0;

  friend bool operator==(const Oref&, const Oref&) = default;
  friend auto operator<=>(const Oref&, const Oref&) = default;
};

struct OrefHash {
  std::size_t operator()(const Oref& ref) const noexcept {
    return std::hash<std::uint64_t>{}(ref.offset * 0x9E3779B97F4A7C15ULL ^ ref.segment);
  }
};

std::string to_string(const Oref& ref);

/// Encoded width of an Oref on disk (u32 segment + u64 offset).
inline constexpr std::size_t kOrefWireBytes = 12;

std::uint64_t fnv1a64(std::string_view text);
std::uint32_t crc32c(std::span<const std::byte> bytes);

static_assert(std::endian::native == std::endian::little, "evstore assumes a little-endian host");

class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

  void put_u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
  void put_u32(std::uint32_t v) { put_raw(&v, sizeof v); }
  void put_u64(std::uint64_t v) { put_raw(&v, sizeof v); }
  void put_i32(std::int32_t v) { put_raw(&v, sizeof v); }
  void put_f32(float v) { put_raw(&v, sizeof v); }
  void put_oref(const Oref& ref) {
    put_u32(ref.segment);
    put_u64(ref.offset);
  }
  /// u32 length prefix followed by the bytes.
  void put_string(std::string_view s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_raw(s.data(), s.size());
  }
  void put_bytes(std::span<const std::byte> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  std::size_t size() const { return buf_.size(); }
  const std::vector<std::byte>& bytes() const& { return buf_; }
  std::vector<std::byte> take() && { return std::move(buf_); }

 private:
  void put_raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  std::vector<std::byte> buf_;
};

/// Bounds-checked reader; running past the end raises CorruptRecord.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return get<std::int32_t>(); }
  float f32() { return get<float>(); }
  Oref oref() {
    Oref ref;
    ref.segment = u32();
    ref.offset = u64();
    return ref;
  }
  std::string string() {
    const auto n = u32();
    auto s = take(n);
    return std::string(reinterpret_cast<const char*>(s.data()), s.size());
  }
  std::span<const std::byte> take(std::size_t n) {
    if (n > remaining()) fail(ErrorCode::kCorruptRecord, "record payload truncated");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }
  void expect_end() const {
    if (remaining() != 0) fail(ErrorCode::kCorruptRecord, "trailing bytes in record payload");
  }

 private:
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

inline std::span<const std::byte> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::byte*>(s.data()), s.size()};
}

}  // namespace evstore
