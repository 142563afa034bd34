#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "seqoram/blockio.hpp"

namespace seqoram {

// Static layout of a map tree over a fixed leaf count: nodes are packed
// level by level inside the map region, leaves first, root last. The shape
// depends only on (leaves, fanout), so node positions are known before the
// tree is full — partially built trees occupy their final slots.
struct MapShape {
  u64 leaves = 0;
  std::vector<u64> level_counts;  // [0] = leaves, back() = 1
  std::vector<u64> level_bases;   // region-relative block offset per level
  u64 total_blocks = 0;

  static MapShape over(u64 leaves, u32 fanout);
  u32 height() const { return static_cast<u32>(level_counts.size()); }
  u64 node_offset(u32 tree_level, u64 index) const;
};

enum class MapNodeType : u8 { leaf = 1, internal = 2 };

// One node: a leaf lists the addresses of one bucket in slot order (count
// real entries, then kFakeAddress padding); an internal node lists, per
// child, the maximum real address in that child's subtree.
struct MapNode {
  MapNodeType type = MapNodeType::leaf;
  std::vector<u64> entries;

  u32 valid_count() const;  // entries before the first kFakeAddress tail
};

void encode_map_node(const MapNode& node, std::span<std::byte> plain);
MapNode decode_map_node(std::span<const std::byte> plain, u32 fanout);

// Streaming bottom-up builder. `bulk` writes every node exactly once —
// map_tree_blocks(leaves, fanout) block writes total. `constant_rate`
// rewrites the pending ancestor chain on every append, so each append costs
// exactly 1 + internal-level-count writes and the on-disk tree is walkable
// after every append.
class MapBuilder {
 public:
  enum class Mode { bulk, constant_rate };

  MapBuilder(BlockIo& io, const Region& region, u64 shape_leaves, Mode mode);

  // Reconstructs a constant_rate builder whose first `leaves_fed` appends
  // already happened (reopen path): re-reads the written leaves to rebuild
  // the pending ancestor chain without writing anything.
  static MapBuilder resume(BlockIo& io, const Region& region, u64 shape_leaves, u64 leaves_fed);

  // Addresses of the next bucket, ascending, fakes (kFakeAddress) last.
  void append_leaf(std::span<const u64> bucket_addresses);
  // Bulk mode: writes the pending internal nodes. Requires all leaves fed.
  void finish();

  u64 leaves_fed() const { return fed_; }
  u64 blocks_written() const { return written_; }
  u32 writes_per_append() const;  // constant_rate cost per append_leaf

 private:
  void write_node(u32 tree_level, u64 index, const MapNode& node);
  void propagate_bulk(u32 tree_level, u64 child_index, u64 child_max);
  void update_pending_chain(bool emit);

  BlockIo& io_;
  const Region& region_;
  MapShape shape_;
  Mode mode_;
  u32 fanout_;
  u64 fed_ = 0;
  u64 written_ = 0;
  u64 last_leaf_max_ = kFakeAddress;
  std::vector<MapNode> pending_;  // one partial node per internal level
};

// Small FIFO memo of decoded map nodes keyed by physical block. Valid only
// within one flush epoch — flushes rewrite node positions, so the owner must
// clear it after every flush.
class MapNodeCache {
 public:
  explicit MapNodeCache(u32 capacity) : capacity_(capacity) {}

  const MapNode* find(u64 phys) const;
  void put(u64 phys, MapNode node);
  void clear() { entries_.clear(); }

 private:
  u32 capacity_;
  std::deque<std::pair<u64, MapNode>> entries_;
};

// Fixed-shape reader over a (possibly partially filled) map tree.
class MapReader {
 public:
  struct Hit {
    u64 bucket = 0;  // leaf index within the run
    u32 slot = 0;    // block offset within the bucket
  };

  MapReader(BlockIo& io, const Region& region, u64 shape_leaves,
            MapNodeCache* cache = nullptr);

  // Walks root → leaf; exactly height() physical reads on a hit path (fewer
  // when a shared node cache is supplied and warm).
  std::optional<Hit> lookup(u64 address);
  MapNode read_node(u32 tree_level, u64 index);
  const MapShape& shape() const { return shape_; }

 private:
  BlockIo& io_;
  const Region& region_;
  MapShape shape_;
  u32 fanout_;
  MapNodeCache* cache_;
};

}  // namespace seqoram
