#include "seqoram/params.hpp"

#include <algorithm>

#include "seqoram/errors.hpp"

namespace seqoram {

std::string to_string(OramMode m) {
  return m == OramMode::amortized ? "amortized" : "deamortized";
}

std::string to_string(CipherKind c) {
  switch (c) {
    case CipherKind::ctr: return "ctr";
    case CipherKind::aead: return "aead";
    case CipherKind::test_stream: return "test";
  }
  return "?";
}

OramMode mode_from_string(const std::string& s) {
  if (s == "amortized") return OramMode::amortized;
  if (s == "deamortized") return OramMode::deamortized;
  throw ParamError("unknown mode: " + s);
}

CipherKind cipher_from_string(const std::string& s) {
  if (s == "ctr") return CipherKind::ctr;
  if (s == "aead") return CipherKind::aead;
  if (s == "test") return CipherKind::test_stream;
  throw ParamError("unknown cipher: " + s);
}

u32 log2_exact(u64 v) {
  if (!is_pow2(v)) throw ParamError("value is not a power of two");
  u32 e = 0;
  while ((u64{1} << e) < v) ++e;
  return e;
}

u32 ceil_log2(u64 v) {
  if (v == 0) throw ParamError("ceil_log2(0)");
  u32 e = 0;
  while ((u64{1} << e) < v) ++e;
  return e;
}

u64 ceil_div(u64 a, u64 b) { return (a + b - 1) / b; }

AtmShape atm_shape(u64 logical_blocks, u32 bucket_blocks) {
  AtmShape shape;
  u64 n = ceil_div(logical_blocks, bucket_blocks);  // leaves
  shape.level_counts.push_back(n);
  shape.node_count = n;
  while (n > 1) {
    n = ceil_div(n, bucket_blocks);
    shape.level_counts.push_back(n);
    shape.node_count += n;
  }
  return shape;
}

void OramParams::validate() const {
  if (!is_pow2(block_size) || block_size < 512)
    throw ParamError("block_size must be a power of two >= 512");
  if (!is_pow2(bucket_blocks) || bucket_blocks < 2)
    throw ParamError("bucket_blocks must be a power of two >= 2");
  if (!is_pow2(logical_blocks) || logical_blocks < bucket_blocks)
    throw ParamError("logical_blocks must be a power of two >= bucket_blocks");
  if (!is_pow2(fanout) || fanout < 2)
    throw ParamError("fanout must be a power of two >= 2");
  if (logical_blocks / bucket_blocks < fanout)
    throw ParamError("logical_blocks / bucket_blocks must be >= fanout");
  // A map node carries up to β 8-byte addresses plus a 32-byte header. ATM
  // nodes reuse the same layout (β 8-byte access counters), so this single
  // bound covers both.
  if (u64{8} * bucket_blocks + 32 > block_size)
    throw ParamError("bucket_blocks too large for block_size (map node must fit one block)");
  if (mode == OramMode::deamortized) {
    if (fanout != 2) throw ParamError("deamortized mode requires fanout 2");
  } else {
    // Level i holds k^i buckets, so the level structure only closes when
    // N/β is an exact power of the fanout.
    u64 ratio = logical_blocks / bucket_blocks;
    u64 p = 1;
    while (p < ratio) p *= fanout;
    if (p != ratio) throw ParamError("logical_blocks / bucket_blocks must be a power of fanout");
  }
  if (memory_buckets == 1) throw ParamError("memory_buckets must be 0 (default) or >= 2");
  if (atm_active()) {
    // Each write stages one data record plus one node per tree level, and
    // spilled nodes must re-stage into the next epoch's queue with room to
    // spare, so the bucket must be larger than the tree is tall.
    const auto shape = atm_shape(logical_blocks, bucket_blocks);
    if (u64{bucket_blocks} < u64{shape.height()} + 1)
      throw ParamError("bucket_blocks too small for the access-time tree height");
  }
}

u32 OramParams::merge_memory_buckets() const {
  if (memory_buckets >= 2) return memory_buckets;
  return std::max<u32>(2, ceil_log2(logical_blocks));
}

u64 OramParams::atm_node_count() const {
  if (!atm_active()) return 0;
  return atm_shape(logical_blocks, bucket_blocks).node_count;
}

u64 OramParams::total_addresses() const { return logical_blocks + atm_node_count(); }

u32 OramParams::level_count() const {
  if (mode == OramMode::amortized) {
    u64 ratio = logical_blocks / bucket_blocks;
    u32 l = 0;
    while ((u64{1} << (l * log2_exact(fanout))) < ratio) ++l;
    return l;
  }
  // Deamortized: the last level must hold every address (data + ATM nodes)
  // at its static offset, and the two-buckets-per-flush pacing needs a
  // power-of-two bucket count.
  u64 buckets = ceil_div(total_addresses(), bucket_blocks);
  return std::max<u32>(1, ceil_log2(buckets));
}

u64 OramParams::last_level_buckets() const {
  if (mode == OramMode::amortized) return logical_blocks / bucket_blocks;
  return u64{1} << level_count();
}

u64 OramParams::level_buckets(u32 level) const {
  u64 k = mode == OramMode::amortized ? fanout : 2;
  u64 b = 1;
  for (u32 i = 0; i < level; ++i) b *= k;
  return b;
}

u32 map_internal_levels(u64 leaves, u32 bucket_blocks) {
  if (leaves <= 1) return 0;
  u32 levels = 0;
  u64 n = leaves;
  while (n > 1) {
    n = ceil_div(n, bucket_blocks);
    ++levels;
  }
  return levels;
}

u64 map_tree_blocks(u64 leaves, u32 bucket_blocks) {
  u64 total = leaves;
  u64 n = leaves;
  while (n > 1) {
    n = ceil_div(n, bucket_blocks);
    total += n;
  }
  return total;
}

u64 map_level_node_count(u64 leaves, u32 bucket_blocks, u32 tree_level) {
  u64 n = leaves;
  for (u32 i = 0; i < tree_level; ++i) n = ceil_div(n, bucket_blocks);
  return n;
}

}  // namespace seqoram
