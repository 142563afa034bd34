#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace seqoram {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;

enum class OramMode : u8 { amortized = 0, deamortized = 1 };
enum class CipherKind : u8 { ctr = 0, aead = 1, test_stream = 2 };

std::string to_string(OramMode m);
std::string to_string(CipherKind c);
OramMode mode_from_string(const std::string& s);
CipherKind cipher_from_string(const std::string& s);

inline bool is_pow2(u64 v) { return v != 0 && (v & (v - 1)) == 0; }
u32 log2_exact(u64 v);         // throws ParamError if v is not a power of two
u32 ceil_log2(u64 v);          // smallest e with 2^e >= v (v >= 1)
u64 ceil_div(u64 a, u64 b);

// Per-block payload tag marking a slot that holds no real data.
inline constexpr u64 kFakeAddress = ~u64{0};
// "Never written" access counter.
inline constexpr u64 kNeverWritten = ~u64{0};

// Static shape of the access-time map: one leaf per β logical addresses,
// parents packed β-to-one, a single root on top.
struct AtmShape {
  std::vector<u64> level_counts;  // level_counts[0] = leaves, back() = 1 (root)
  u64 node_count = 0;
  u32 height() const { return static_cast<u32>(level_counts.size()); }
};
AtmShape atm_shape(u64 logical_blocks, u32 bucket_blocks);

struct OramParams {
  u64 logical_blocks = 4096;  // N: client-visible data blocks
  u32 block_size = 4096;      // B bytes per physical block
  u32 bucket_blocks = 256;    // β blocks per bucket (default B / 16)
  u32 fanout = 2;             // k: level growth factor (amortized; 2 when deamortized)
  u32 memory_buckets = 0;     // c: merge read-ahead, 0 = max(2, ceil(log2 N))
  OramMode mode = OramMode::deamortized;
  bool atm_enabled = true;    // meaningful in deamortized mode only
  CipherKind cipher = CipherKind::ctr;
  u64 iv_seed = 0;

  void validate() const;  // throws ParamError

  // --- values derived from the validated parameters ---
  u32 merge_memory_buckets() const;   // resolved c
  u64 atm_node_count() const;         // 0 when ATM is off / amortized
  u64 total_addresses() const;        // logical_blocks + atm_node_count()
  u32 level_count() const;            // L: levels 0..L-1 ahead of the last level
  u64 last_level_buckets() const;
  u64 level_buckets(u32 level) const; // capacity of one generation / run at `level`
  bool atm_active() const { return mode == OramMode::deamortized && atm_enabled; }

  bool operator==(const OramParams&) const = default;
};

// Node-count arithmetic shared by level maps and region sizing.
u32 map_internal_levels(u64 leaves, u32 bucket_blocks);         // levels above the leaves
u64 map_tree_blocks(u64 leaves, u32 bucket_blocks);             // total nodes in a full build
u64 map_level_node_count(u64 leaves, u32 bucket_blocks, u32 tree_level);

}  // namespace seqoram
