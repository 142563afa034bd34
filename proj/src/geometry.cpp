#include "seqoram/geometry.hpp"

#include <algorithm>

#include "seqoram/errors.hpp"

namespace seqoram {

namespace {

u64 align_up(u64 v, u64 a) { return (v + a - 1) / a * a; }

// Bytes needed to persist the whole mutable session state at close():
// pending write queue, merge cursors, ATM spill records and root image.
u64 state_bytes(const OramParams& p) {
  u64 bytes = 256;                                          // fixed fields + marker
  bytes += u64{p.bucket_blocks} * (p.block_size + 32);      // queue records
  bytes += u64{p.level_count() + 2} * 128;                  // merge cursors per level
  if (p.atm_active()) {
    const auto shape = atm_shape(p.logical_blocks, p.bucket_blocks);
    // Spilled node records (at most one path's worth) plus the pinned root.
    bytes += (u64{shape.height()} + 1) * (p.block_size + 32);
    bytes += u64{p.bucket_blocks} * 8 + 64;
  }
  return bytes;
}

}  // namespace

DeviceGeometry DeviceGeometry::derive(const OramParams& params) {
  params.validate();
  DeviceGeometry g;
  g.params = params;

  const u32 B = params.block_size;
  const u32 beta = params.bucket_blocks;
  const u64 entries_per_iv_block = B / kIvEntryBytes;
  // Region starts land on multiples of `align` so every bucket's IV span
  // covers the same number of IV blocks regardless of its slot.
  const u64 align = std::max<u64>(beta, entries_per_iv_block);
  const u32 L = params.level_count();

  u64 next = 0;
  u64 iv_entries = 0;
  auto place = [&](RegionKind kind, u64 length, bool data, u32 level = 0, u8 buffer = 0,
                   u8 gen = 0) {
    Region r;
    r.kind = kind;
    r.level = level;
    r.buffer = buffer;
    r.gen = gen;
    r.start = align_up(next, align);
    r.length = length;
    if (data) {
      iv_entries = align_up(iv_entries, entries_per_iv_block);
      r.iv_entry_base = iv_entries;
      iv_entries += length;
    }
    next = r.start + r.length;
    return r;
  };

  g.state_blocks = ceil_div(state_bytes(params), B);
  g.superblock = place(RegionKind::superblock, 1, false);
  g.state = place(RegionKind::state, g.state_blocks, false);

  const bool dual = params.mode == OramMode::deamortized;
  const u8 buffers = dual ? 2 : 1;
  const u8 gens = dual ? 2 : 1;
  g.level_data.assign(L, {});
  g.level_map.assign(L, {});
  for (u32 i = 0; i < L; ++i) {
    g.level_data[i].assign(buffers, std::vector<Region>(gens));
    g.level_map[i].assign(buffers, std::vector<Region>(gens));
    // Amortized: one region holding one sorted run of up to k^i buckets.
    // Deamortized: each of the four (buffer, generation) slots holds one
    // sorted run of up to 2^i buckets.
    const u64 run = params.level_buckets(i);
    const u64 map_blocks = map_tree_blocks(run, beta);
    for (u8 b = 0; b < buffers; ++b) {
      for (u8 gsl = 0; gsl < gens; ++gsl) {
        g.level_data[i][b][gsl] = place(RegionKind::level_data, run * beta, true, i, b, gsl);
        g.level_map[i][b][gsl] = place(RegionKind::level_map, map_blocks, false, i, b, gsl);
      }
    }
  }
  g.last_level = place(RegionKind::last_level, params.last_level_buckets() * beta, true);

  const u64 iv_blocks = std::max<u64>(1, ceil_div(iv_entries, entries_per_iv_block));
  g.iv = place(RegionKind::iv, iv_blocks, false);
  g.physical_blocks = next;
  return g;
}

const Region& DeviceGeometry::data_region(u32 level, u8 buffer, u8 gen) const {
  return level_data.at(level).at(buffer).at(gen);
}

const Region& DeviceGeometry::map_region(u32 level, u8 buffer, u8 gen) const {
  return level_map.at(level).at(buffer).at(gen);
}

bool DeviceGeometry::data_capable(u64 phys) const {
  if (last_level.contains(phys)) return true;
  for (const auto& per_level : level_data)
    for (const auto& per_buffer : per_level)
      for (const auto& r : per_buffer)
        if (r.contains(phys)) return true;
  return false;
}

u64 DeviceGeometry::iv_entry_index(u64 phys) const {
  if (last_level.contains(phys)) return last_level.iv_entry_base + (phys - last_level.start);
  for (const auto& per_level : level_data)
    for (const auto& per_buffer : per_level)
      for (const auto& r : per_buffer)
        if (r.contains(phys)) return r.iv_entry_base + (phys - r.start);
  throw RangeError("physical block has no IV entry");
}

u64 DeviceGeometry::iv_block_of_entry(u64 entry) const {
  return iv.start + entry / (params.block_size / kIvEntryBytes);
}

u32 DeviceGeometry::iv_byte_offset_of_entry(u64 entry) const {
  return static_cast<u32>(entry % (params.block_size / kIvEntryBytes)) * kIvEntryBytes;
}

u64 DeviceGeometry::iv_span_blocks(u64 phys, u64 count) const {
  const u64 first = iv_block_of_entry(iv_entry_index(phys));
  const u64 last = iv_block_of_entry(iv_entry_index(phys + count - 1));
  return last - first + 1;
}

u64 DeviceGeometry::bucket_start(const Region& r, u64 bucket_index) const {
  const u64 phys = r.start + bucket_index * params.bucket_blocks;
  if (phys + params.bucket_blocks > r.start + r.length)
    throw RangeError("bucket index outside region");
  return phys;
}

}  // namespace seqoram
