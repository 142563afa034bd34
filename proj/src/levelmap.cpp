#include "seqoram/levelmap.hpp"

#include <algorithm>
#include <cstring>

#include "seqoram/errors.hpp"

namespace seqoram {

namespace {

constexpr u32 kNodeHeaderBytes = 16;  // [type u8][count u16][zero pad]

// Highest real address in an ascending entry list, or kFakeAddress if none.
u64 node_max(const std::vector<u64>& entries) {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it)
    if (*it != kFakeAddress) return *it;
  return kFakeAddress;
}

}  // namespace

MapShape MapShape::over(u64 leaves, u32 fanout) {
  if (leaves == 0) throw ParamError("map shape needs at least one leaf");
  MapShape s;
  s.leaves = leaves;
  u64 n = leaves;
  s.level_counts.push_back(n);
  while (n > 1) {
    n = ceil_div(n, fanout);
    s.level_counts.push_back(n);
  }
  u64 base = 0;
  for (u64 count : s.level_counts) {
    s.level_bases.push_back(base);
    base += count;
  }
  s.total_blocks = base;
  return s;
}

u64 MapShape::node_offset(u32 tree_level, u64 index) const {
  if (tree_level >= level_counts.size() || index >= level_counts[tree_level])
    throw RangeError("map node outside shape");
  return level_bases[tree_level] + index;
}

u32 MapNode::valid_count() const {
  u32 n = 0;
  while (n < entries.size() && entries[n] != kFakeAddress) ++n;
  return n;
}

void encode_map_node(const MapNode& node, std::span<std::byte> plain) {
  if (kNodeHeaderBytes + 8 * node.entries.size() > plain.size())
    throw SizeError("map node does not fit the block payload");
  std::memset(plain.data(), 0, plain.size());
  plain[0] = static_cast<std::byte>(node.type);
  const u16 count = static_cast<u16>(node.entries.size());
  plain[1] = static_cast<std::byte>(count & 0xff);
  plain[2] = static_cast<std::byte>(count >> 8);
  for (size_t i = 0; i < node.entries.size(); ++i) {
    const u64 v = node.entries[i];
    for (int b = 0; b < 8; ++b)
      plain[kNodeHeaderBytes + 8 * i + b] = static_cast<std::byte>((v >> (8 * b)) & 0xff);
  }
}

MapNode decode_map_node(std::span<const std::byte> plain, u32 fanout) {
  MapNode node;
  const u8 type = static_cast<u8>(plain[0]);
  if (type != static_cast<u8>(MapNodeType::leaf) && type != static_cast<u8>(MapNodeType::internal))
    throw CorruptionError("bad map node type");
  node.type = static_cast<MapNodeType>(type);
  const u16 count = static_cast<u16>(static_cast<u8>(plain[1])) |
                    static_cast<u16>(static_cast<u8>(plain[2])) << 8;
  if (count > fanout || kNodeHeaderBytes + 8 * u32{count} > plain.size())
    throw CorruptionError("map node entry count out of range");
  node.entries.resize(count);
  for (u32 i = 0; i < count; ++i) {
    u64 v = 0;
    for (int b = 0; b < 8; ++b)
      v |= static_cast<u64>(static_cast<u8>(plain[kNodeHeaderBytes + 8 * i + b])) << (8 * b);
    node.entries[i] = v;
  }
  return node;
}

MapBuilder::MapBuilder(BlockIo& io, const Region& region, u64 shape_leaves, Mode mode)
    : io_(io),
      region_(region),
      shape_(MapShape::over(shape_leaves, io.geometry().params.bucket_blocks)),
      mode_(mode),
      fanout_(io.geometry().params.bucket_blocks) {
  if (shape_.total_blocks > region.length)
    throw RangeError("map shape exceeds its region");
  pending_.resize(shape_.height() - 1);
  for (auto& n : pending_) n.type = MapNodeType::internal;
}

u32 MapBuilder::writes_per_append() const { return shape_.height() > 1 ? shape_.height() : 1; }

void MapBuilder::write_node(u32 tree_level, u64 index, const MapNode& node) {
  std::vector<std::byte> plain(io_.self_contained_capacity());
  encode_map_node(node, plain);
  io_.write_self_contained(region_.start + shape_.node_offset(tree_level, index), plain);
  ++written_;
}

// Bulk path: add `child_max` to the pending node at `tree_level`; when it
// completes (fanout children), emit it and push its own max upward.
void MapBuilder::propagate_bulk(u32 tree_level, u64 child_index, u64 child_max) {
  if (tree_level >= shape_.height()) return;
  MapNode& node = pending_[tree_level - 1];
  node.entries.push_back(child_max);
  const u64 index = child_index / fanout_;
  const bool last_child_of_node =
      node.entries.size() == fanout_ || child_index + 1 == shape_.level_counts[tree_level - 1];
  if (last_child_of_node) {
    write_node(tree_level, index, node);
    const u64 my_max = node_max(node.entries);
    node.entries.clear();
    propagate_bulk(tree_level + 1, index, my_max);
  }
}

void MapBuilder::update_pending_chain(bool emit) {
  // After a leaf append, refresh every ancestor at its final slot. Entry
  // lists carry the running per-child maxima; the node one level up always
  // has exactly ceil_div semantics over the children fed so far.
  u64 child_index = fed_ - 1;
  for (u32 level = 1; level < shape_.height(); ++level) {
    MapNode& node = pending_[level - 1];
    const u64 index = child_index / fanout_;
    const u32 pos = static_cast<u32>(child_index % fanout_);
    if (pos == 0) node.entries.clear();  // starting a fresh sibling
    u64 child_max;
    if (level == 1) {
      child_max = last_leaf_max_;
    } else {
      child_max = node_max(pending_[level - 2].entries);
    }
    if (node.entries.size() == pos)
      node.entries.push_back(child_max);
    else
      node.entries[pos] = child_max;
    if (emit) write_node(level, index, node);
    child_index = index;
  }
}

MapBuilder MapBuilder::resume(BlockIo& io, const Region& region, u64 shape_leaves,
                              u64 leaves_fed) {
  MapBuilder b(io, region, shape_leaves, Mode::constant_rate);
  if (leaves_fed > shape_leaves) throw RangeError("cannot resume past the leaf count");
  std::vector<std::byte> plain(io.self_contained_capacity());
  for (u64 i = 0; i < leaves_fed; ++i) {
    io.read_self_contained(region.start + b.shape_.node_offset(0, i), plain);
    const MapNode leaf = decode_map_node(plain, b.fanout_);
    if (leaf.type != MapNodeType::leaf) throw CorruptionError("resume found a non-leaf node");
    b.last_leaf_max_ = node_max(leaf.entries);
    ++b.fed_;
    b.update_pending_chain(false);
  }
  b.written_ = leaves_fed * b.writes_per_append();
  return b;
}

void MapBuilder::append_leaf(std::span<const u64> bucket_addresses) {
  if (fed_ == shape_.leaves) throw RangeError("map builder already has all leaves");
  if (bucket_addresses.size() != fanout_)
    throw SizeError("leaf must carry exactly one bucket of addresses");
  if (!std::is_sorted(bucket_addresses.begin(), bucket_addresses.end()))
    throw ParamError("bucket addresses must be ascending (fakes last)");

  MapNode leaf;
  leaf.type = MapNodeType::leaf;
  leaf.entries.assign(bucket_addresses.begin(), bucket_addresses.end());
  write_node(0, fed_, leaf);
  last_leaf_max_ = node_max(leaf.entries);
  ++fed_;

  if (mode_ == Mode::bulk)
    propagate_bulk(1, fed_ - 1, last_leaf_max_);
  else
    update_pending_chain(true);
}

void MapBuilder::finish() {
  if (fed_ != shape_.leaves) throw RangeError("map builder is missing leaves");
  if (mode_ == Mode::bulk && written_ != shape_.total_blocks)
    throw CorruptionError("map build did not cover the shape");
}

const MapNode* MapNodeCache::find(u64 phys) const {
  for (const auto& [p, node] : entries_)
    if (p == phys) return &node;
  return nullptr;
}

void MapNodeCache::put(u64 phys, MapNode node) {
  for (auto& [p, held] : entries_)
    if (p == phys) {
      held = std::move(node);
      return;
    }
  if (entries_.size() >= capacity_) entries_.pop_front();
  entries_.emplace_back(phys, std::move(node));
}

MapReader::MapReader(BlockIo& io, const Region& region, u64 shape_leaves, MapNodeCache* cache)
    : io_(io),
      region_(region),
      shape_(MapShape::over(shape_leaves, io.geometry().params.bucket_blocks)),
      fanout_(io.geometry().params.bucket_blocks),
      cache_(cache) {
  if (shape_.total_blocks > region.length) throw RangeError("map shape exceeds its region");
}

MapNode MapReader::read_node(u32 tree_level, u64 index) {
  const u64 phys = region_.start + shape_.node_offset(tree_level, index);
  if (cache_)
    if (const MapNode* held = cache_->find(phys)) return *held;
  std::vector<std::byte> plain(io_.self_contained_capacity());
  io_.read_self_contained(phys, plain);
  MapNode node = decode_map_node(plain, fanout_);
  if (cache_) cache_->put(phys, node);
  return node;
}

std::optional<MapReader::Hit> MapReader::lookup(u64 address) {
  u64 index = 0;
  for (u32 level = shape_.height(); level-- > 0;) {
    const MapNode node = read_node(level, index);
    if (level == 0) {
      if (node.type != MapNodeType::leaf) throw CorruptionError("expected map leaf");
      const auto& e = node.entries;
      const auto it = std::lower_bound(e.begin(), e.begin() + node.valid_count(), address);
      if (it == e.begin() + node.valid_count() || *it != address) return std::nullopt;
      return Hit{index, static_cast<u32>(it - e.begin())};
    }
    if (node.type != MapNodeType::internal) throw CorruptionError("expected internal map node");
    // First child whose subtree max covers the target; entries ascend and a
    // kFakeAddress separator (child with no real entries) matches anything.
    u32 child = 0;
    while (child < node.entries.size() && node.entries[child] != kFakeAddress &&
           node.entries[child] < address)
      ++child;
    if (child == node.entries.size()) return std::nullopt;
    index = index * fanout_ + child;
  }
  return std::nullopt;  // unreachable: height >= 1
}

}  // namespace seqoram
