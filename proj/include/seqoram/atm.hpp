#pragma once

#include <vector>

#include "seqoram/params.hpp"

namespace seqoram {

// Access-time map: a static-shape tree of per-address flush counters, stored
// in ordinary records whose tags sit just past the data address space. Leaf m
// statically covers data addresses [m*beta, (m+1)*beta); an internal node at
// index j covers children [j*beta, (j+1)*beta) of the level below. Because
// coverage is implied by position, a node only needs to store counters, and
// a node record reuses the level-map node layout (up to beta 8-byte values).
//
// This class is pure address arithmetic; it never touches the device.
class AtmIndex {
 public:
  AtmIndex(u64 logical_blocks, u32 bucket_blocks);

  // Tree levels including the leaf level; the root is level height()-1.
  u32 height() const { return static_cast<u32>(shape_.level_counts.size()); }
  u64 node_count() const { return shape_.node_count; }
  u64 nodes_at(u32 tree_level) const { return shape_.level_counts.at(tree_level); }

  // Record tag of a node. Leaves occupy [N, N + leaves), then each level up.
  u64 node_address(u32 tree_level, u64 index) const;
  u64 root_address() const { return node_address(height() - 1, 0); }

  // Inverse of node_address.
  u32 level_of(u64 node_addr) const;
  u64 index_of(u64 node_addr) const;
  bool is_node(u64 addr) const {
    return addr >= logical_blocks_ && addr < logical_blocks_ + node_count();
  }

  // Counter slots: a node at (tree_level, index) holds slots() counters; the
  // slot for a data address (in a leaf) or for a child node (elsewhere).
  u64 slots(u32 tree_level, u64 index) const;
  u64 leaf_index(u64 data_addr) const { return data_addr / bucket_blocks_; }
  u32 slot_in_parent(u64 child_index) const {
    return static_cast<u32>(child_index % bucket_blocks_);
  }
  u64 parent_index(u64 child_index) const { return child_index / bucket_blocks_; }

 private:
  u64 logical_blocks_;
  u32 bucket_blocks_;
  AtmShape shape_;
  std::vector<u64> level_base_;  // node-address offset of each tree level
};

// Where a record written at flush index c lives after g completed flushes.
enum class ResidencyKind : u8 { staging, level, last_level };

struct PredictResult {
  ResidencyKind kind = ResidencyKind::staging;
  u32 level = 0;           // meaningful when kind == level
  bool in_write_buffer = false;
  u32 generation = 0;
  // Derived quantities, exposed for inspection and tests (kind == level):
  u64 cycle_phase = 0;     // c mod 2^{level+1}: the record's slot in its cycle
  u64 entered_at = 0;      // flush after which this copy became readable here
  u64 cycle_end = 0;       // flush at which this copy's level cycle closes
};

// Pure schedule arithmetic (deamortized variant): no device access. c is the
// flush counter stamped when the record was staged; g is the number of
// completed flushes; level_count is the number of levels ahead of the last
// level. c >= g means the record has not flushed yet.
//
// The recursion tracks the close of each level's fill cycle containing the
// copy: E_0 = c - (c mod 2) + 2, and at each deeper level the copy enters
// the write buffer at E_{i-1} + 2^i, landing in generation
// phi_{i+1-form}: gen_i = ((E_{i-1} + 2) mod 2^{i+1}) >> i, with
// E_i = E_{i-1} + 2^i * (gen_i == 1 ? 1 : 2). The copy is readable in level
// i's write buffer until E_i and in its merge buffer for the following
// 2^{i+1} flushes, after which it has moved down (or, past the top level,
// into the last level at its static offset).
PredictResult predict_location(u64 c, u64 g, u32 level_count);

}  // namespace seqoram
