#include "seqoram/atm.hpp"

#include "seqoram/errors.hpp"

namespace seqoram {

AtmIndex::AtmIndex(u64 logical_blocks, u32 bucket_blocks)
    : logical_blocks_(logical_blocks),
      bucket_blocks_(bucket_blocks),
      shape_(atm_shape(logical_blocks, bucket_blocks)) {
  u64 base = 0;
  for (u64 count : shape_.level_counts) {
    level_base_.push_back(base);
    base += count;
  }
}

u64 AtmIndex::node_address(u32 tree_level, u64 index) const {
  if (tree_level >= height() || index >= shape_.level_counts[tree_level])
    throw RangeError("ATM node coordinates out of range");
  return logical_blocks_ + level_base_[tree_level] + index;
}

u32 AtmIndex::level_of(u64 node_addr) const {
  if (!is_node(node_addr)) throw RangeError("address is not an ATM node");
  const u64 off = node_addr - logical_blocks_;
  for (u32 l = height(); l-- > 0;)
    if (off >= level_base_[l]) return l;
  throw RangeError("address is not an ATM node");
}

u64 AtmIndex::index_of(u64 node_addr) const {
  return node_addr - logical_blocks_ - level_base_[level_of(node_addr)];
}

u64 AtmIndex::slots(u32 tree_level, u64 index) const {
  // Covered range at the level below (or data addresses for leaves), capped
  // at that level's extent; every slot is full except possibly the last node.
  const u64 below = tree_level == 0 ? logical_blocks_ / bucket_blocks_ * u64{bucket_blocks_}
                                    : shape_.level_counts[tree_level - 1];
  const u64 lo = index * bucket_blocks_;
  if (tree_level == 0) return bucket_blocks_;  // N is a multiple of beta
  if (lo >= below) throw RangeError("ATM node covers nothing");
  return std::min<u64>(bucket_blocks_, below - lo);
}

PredictResult predict_location(u64 c, u64 g, u32 level_count) {
  PredictResult r;
  if (c >= g) return r;  // staged, not yet flushed
  // Close of level 0's fill cycle containing flush c.
  u64 cycle_end = (c & ~u64{1}) + 2;
  u64 prev_end = 0;
  for (u32 i = 0; i < level_count; ++i) {
    const u64 half = u64{1} << i;        // buckets per generation at level i
    const u64 cycle = half * 2;          // fill-cycle length in flushes
    const u64 entered = i == 0 ? c + 1 : prev_end + half;
    u32 gen;
    if (i == 0) {
      gen = static_cast<u32>(c & 1);
    } else {
      // The merge feeding this level always starts at a generation boundary:
      // E_{i-1} + 2 is a multiple of 2^i by induction on the recursion.
      const u64 phi = (prev_end + 2) & (cycle - 1);
      if ((phi & (half - 1)) != 0)
        throw CorruptionError("residency recursion left a generation boundary");
      gen = static_cast<u32>(phi >> i);
      cycle_end = prev_end + half * (gen == 1 ? 1 : 2);
    }
    if (g < cycle_end + cycle) {
      r.kind = ResidencyKind::level;
      r.level = i;
      r.in_write_buffer = g < cycle_end;
      r.generation = gen;
      r.cycle_phase = c & (cycle - 1);
      r.entered_at = entered;
      r.cycle_end = cycle_end;
      return r;
    }
    prev_end = cycle_end;
  }
  r.kind = ResidencyKind::last_level;
  return r;
}

}  // namespace seqoram
