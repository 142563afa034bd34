#pragma once

#include <span>
#include <string>
#include <vector>

#include "seqoram/errors.hpp"
#include "seqoram/params.hpp"

namespace seqoram {

// Little-endian byte serialization for state blobs.
struct ByteWriter {
  std::vector<std::byte> bytes;

  void put_u8(u8 v) { bytes.push_back(static_cast<std::byte>(v)); }
  void put_u32(u32 v) {
    for (int i = 0; i < 4; ++i) put_u8(static_cast<u8>((v >> (8 * i)) & 0xff));
  }
  void put_u64(u64 v) {
    for (int i = 0; i < 8; ++i) put_u8(static_cast<u8>((v >> (8 * i)) & 0xff));
  }
  void put_bytes(std::span<const std::byte> data) {
    put_u64(data.size());
    bytes.insert(bytes.end(), data.begin(), data.end());
  }
};

struct ByteReader {
  std::span<const std::byte> rest;

  explicit ByteReader(std::span<const std::byte> data) : rest(data) {}

  u8 get_u8() {
    if (rest.empty()) throw SizeError("state blob truncated");
    const u8 v = static_cast<u8>(rest.front());
    rest = rest.subspan(1);
    return v;
  }
  u32 get_u32() {
    u32 v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<u32>(get_u8()) << (8 * i);
    return v;
  }
  u64 get_u64() {
    u64 v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<u64>(get_u8()) << (8 * i);
    return v;
  }
  std::vector<std::byte> get_bytes() {
    const u64 n = get_u64();
    if (n > rest.size()) throw SizeError("state blob truncated");
    std::vector<std::byte> out(rest.begin(), rest.begin() + static_cast<size_t>(n));
    rest = rest.subspan(static_cast<size_t>(n));
    return out;
  }
  bool exhausted() const { return rest.empty(); }
};

}  // namespace seqoram
