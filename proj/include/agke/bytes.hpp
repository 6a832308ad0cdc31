#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agke/error.hpp"

namespace agke {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) noexcept {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline void append(Bytes& out, ByteView data) { out.insert(out.end(), data.begin(), data.end()); }

inline std::string to_hex(ByteView data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

inline Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw Error(Errc::malformed, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::malformed, "non-hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

// Length-prefixed framing: every field is a 4-byte big-endian length
// followed by its bytes, so concatenations of fields are injective.
inline void append_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void append_field(Bytes& out, ByteView field) {
  append_u32(out, static_cast<std::uint32_t>(field.size()));
  append(out, field);
}

inline void append_field(Bytes& out, std::string_view field) { append_field(out, as_bytes(field)); }

class FieldReader {
 public:
  explicit FieldReader(ByteView data) noexcept : data_(data) {}

  std::uint32_t u32() {
    if (data_.size() < 4) throw Error(Errc::malformed, "truncated length prefix");
    std::uint32_t v = (std::uint32_t{data_[0]} << 24) | (std::uint32_t{data_[1]} << 16) |
                      (std::uint32_t{data_[2]} << 8) | std::uint32_t{data_[3]};
    data_ = data_.subspan(4);
    return v;
  }

  ByteView field() {
    auto len = u32();
    if (data_.size() < len) throw Error(Errc::malformed, "truncated field");
    auto out = data_.first(len);
    data_ = data_.subspan(len);
    return out;
  }

  bool done() const noexcept { return data_.empty(); }

  void expect_done() const {
    if (!done()) throw Error(Errc::malformed, "trailing bytes");
  }

 private:
  ByteView data_;
};

// True iff `needle` occurs as a contiguous run inside `haystack`.
inline bool contains_run(ByteView haystack, ByteView needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + static_cast<std::ptrdiff_t>(i)))
      return true;
  }
  return false;
}

}  // namespace agke
