#pragma once

#include <vector>

#include "seqoram/params.hpp"

namespace seqoram {

enum class RegionKind : u8 { superblock, state, iv, level_data, level_map, last_level };

// One contiguous span of physical blocks. Data-capable regions (level_data,
// last_level) additionally own a span of 64-byte IV-region entries starting
// at iv_entry_base, one per block.
struct Region {
  RegionKind kind;
  u32 level = 0;   // level_data / level_map only
  u8 buffer = 0;   // deamortized: 0/1; amortized: always 0
  u8 gen = 0;      // deamortized: 0/1; amortized: always 0
  u64 start = 0;   // first physical block index
  u64 length = 0;  // blocks
  u64 iv_entry_base = ~u64{0};

  bool contains(u64 phys) const { return phys >= start && phys < start + length; }
};

// Per-block companion entry in the IV region (data-capable blocks only).
inline constexpr u32 kIvEntryBytes = 64;
inline constexpr u32 kIvOffIv = 0;      // 16 bytes: cleartext IV
inline constexpr u32 kIvOffHeader = 16; // 16 bytes: encrypted record header
inline constexpr u32 kIvOffAuth = 32;   // 16 bytes: AEAD tag (zero in CTR profile)

struct DeviceGeometry {
  static DeviceGeometry derive(const OramParams& params);

  OramParams params;
  u64 physical_blocks = 0;
  u64 state_blocks = 0;

  Region superblock;
  Region state;
  Region iv;
  Region last_level;
  // Index [level][buffer][gen]; amortized mode uses [level][0][0] only.
  std::vector<std::vector<std::vector<Region>>> level_data;
  std::vector<std::vector<std::vector<Region>>> level_map;

  const Region& data_region(u32 level, u8 buffer, u8 gen) const;
  const Region& map_region(u32 level, u8 buffer, u8 gen) const;

  // IV-region placement for a data-capable physical block.
  bool data_capable(u64 phys) const;
  u64 iv_entry_index(u64 phys) const;  // throws RangeError if not data-capable
  u64 iv_block_of_entry(u64 entry) const;
  u32 iv_byte_offset_of_entry(u64 entry) const;

  // Number of IV-region blocks covering `count` consecutive blocks starting
  // at a data-capable physical index. Constant for aligned bucket spans.
  u64 iv_span_blocks(u64 phys, u64 count) const;

  u64 bucket_start(const Region& r, u64 bucket_index) const;
};

}  // namespace seqoram
