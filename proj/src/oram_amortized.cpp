#include "seqoram/oram_amortized.hpp"

#include <algorithm>
#include <cstring>
#include <deque>

#include "seqoram/errors.hpp"
#include "seqoram/levelmap.hpp"
#include "seqoram/wire.hpp"

namespace seqoram {

namespace {

constexpr u32 kStateMagic = 0x314d5241;  // "ARM1"

SuperblockImage boot_superblock(BlockDevice& dev) {
  std::vector<std::byte> block(dev.block_size());
  dev.read_block(0, block);
  return BlockIo::parse_superblock(block);
}

RecordImage fresh_fake(u32 block_size) {
  RecordImage img;
  img.payload.assign(block_size, std::byte{0});
  return img;
}

// Accumulates the device-stat delta of a scope into a WorkCounters.
class StatsScope {
 public:
  StatsScope(BlockDevice& dev, WorkCounters& acc) : dev_(dev), acc_(acc), before_(dev.stats()) {}
  ~StatsScope() {
    const AccessStats& now = dev_.stats();
    acc_.reads += now.reads - before_.reads;
    acc_.writes += now.writes - before_.writes;
    acc_.seeks += now.seeks - before_.seeks;
  }
  StatsScope(const StatsScope&) = delete;
  StatsScope& operator=(const StatsScope&) = delete;

 private:
  BlockDevice& dev_;
  WorkCounters& acc_;
  AccessStats before_;
};

// Streaming reader over one sorted run. Records come back in tag order;
// device reads happen in read_ahead-bucket batches (one IV pass plus one
// payload pass each). force_through() buffers buckets that are about to be
// overwritten, regardless of the batch budget — saved content rides in
// memory while the on-disk pattern stays fixed.
class RunReader {
 public:
  RunReader(BlockIo& io, const Region& region, u64 run_buckets, u32 read_ahead)
      : io_(io),
        region_(region),
        beta_(io.geometry().params.bucket_blocks),
        end_block_(run_buckets * beta_),
        read_ahead_(read_ahead) {}

  const RecordHeader* peek() {
    refill();
    return buf_.empty() ? nullptr : &buf_.front().header;
  }

  RecordImage take() {
    refill();
    if (buf_.empty()) throw CorruptionError("sorted-run reader underflow");
    RecordImage img = std::move(buf_.front());
    buf_.pop_front();
    return img;
  }

  void skip() { (void)take(); }

  void force_through(u64 bucket) {
    const u64 target = std::min((bucket + 1) * u64{beta_}, end_block_);
    if (next_block_ < target) read_until(target);
  }

  u64 buffered_blocks() const { return buf_.size(); }

 private:
  void refill() {
    if (!buf_.empty() || next_block_ == end_block_) return;
    read_until(std::min(next_block_ + u64{read_ahead_} * beta_, end_block_));
  }

  void read_until(u64 target) {
    auto batch = io_.read_record_span(region_.start + next_block_, target - next_block_);
    for (auto& r : batch) buf_.push_back(std::move(r));
    next_block_ = target;
  }

  BlockIo& io_;
  const Region& region_;
  u32 beta_;
  u64 end_block_;
  u32 read_ahead_;
  u64 next_block_ = 0;
  std::deque<RecordImage> buf_;
};

u64 head_tag(RunReader& r) {
  const RecordHeader* h = r.peek();
  return h == nullptr ? kFakeAddress : h->tag;
}

}  // namespace

AmortizedOram::AmortizedOram(BlockDevice& dev, const Key& key, bool read_only)
    : params_([&] {
        SuperblockImage sb = boot_superblock(dev);
        if (sb.params.mode != OramMode::amortized)
          throw ParamError("device holds a deamortized store; open it in that mode");
        return sb.params;
      }()),
      geo_(DeviceGeometry::derive(params_)),
      cipher_(make_cipher(params_.cipher, key)),
      ivs_(key, params_.iv_seed, 0),
      io_(dev, geo_, *cipher_, key, ivs_),
      read_only_(read_only),
      queue_(params_.bucket_blocks, params_.block_size),
      occ_(params_.level_count(), 0) {
  const SuperblockImage sb = io_.read_superblock();
  if (dev.block_count() != geo_.physical_blocks)
    throw CorruptionError("device size does not match the recorded parameters");
  if (sb.clean != 1)
    throw CorruptionError("device was not closed cleanly; refusing to open");
  flush_count_ = sb.flush_count;
  atm_root_access_ = sb.atm_root_access;
  state_generation_ = sb.state_generation;
  ivs_.reset(sb.iv_counter);
  load_state(io_.read_state_blob(sb.state_generation));
  if (!read_only_) {
    BlockDevice::MutationGuard guard(dev);
    persist_superblock(0);
  }
}

void AmortizedOram::load_state(std::span<const std::byte> blob) {
  if (blob.empty()) return;  // freshly initialized device
  ByteReader r(blob);
  if (r.get_u32() != kStateMagic) throw CorruptionError("state blob has the wrong shape");
  const u32 levels = r.get_u32();
  if (levels != occ_.size()) throw CorruptionError("state blob level count mismatch");
  for (auto& o : occ_) o = r.get_u32();
  last_rebuilds_ = r.get_u64();
  logical_writes_ = r.get_u64();
  largest_flush_writes_ = r.get_u64();
  merge_high_water_ = r.get_u64();
  merge_work_.reads = r.get_u64();
  merge_work_.writes = r.get_u64();
  merge_work_.seeks = r.get_u64();
  const u32 queued = r.get_u32();
  for (u32 i = 0; i < queued; ++i) {
    const u64 tag = r.get_u64();
    const auto kind = static_cast<RecordKind>(r.get_u8());
    queue_.put(tag, kind, r.get_bytes());
  }
}

std::vector<std::byte> AmortizedOram::save_state() const {
  ByteWriter w;
  w.put_u32(kStateMagic);
  w.put_u32(static_cast<u32>(occ_.size()));
  for (u32 o : occ_) w.put_u32(o);
  w.put_u64(last_rebuilds_);
  w.put_u64(logical_writes_);
  w.put_u64(largest_flush_writes_);
  w.put_u64(merge_high_water_);
  w.put_u64(merge_work_.reads);
  w.put_u64(merge_work_.writes);
  w.put_u64(merge_work_.seeks);
  w.put_u32(queue_.size());
  for (const auto& [tag, rec] : queue_.entries()) {
    w.put_u64(tag);
    w.put_u8(static_cast<u8>(rec.header.kind));
    w.put_bytes(rec.payload);
  }
  return std::move(w.bytes);
}

void AmortizedOram::require_writable() const {
  if (!open_) throw StorageError("store is closed");
  if (read_only_) throw StorageError("store was opened read-only");
}

u64 AmortizedOram::run_buckets(u32 level) const {
  if (level >= occ_.size()) throw RangeError("no such level");
  if (level == 0) return occ_[0];
  return u64{occ_[level]} * params_.level_buckets(level - 1);
}

void AmortizedOram::persist_superblock(u8 clean) {
  SuperblockImage sb;
  sb.params = params_;
  sb.flush_count = flush_count_;
  sb.iv_counter = ivs_.counter();
  sb.atm_root_access = atm_root_access_;
  sb.state_generation = state_generation_;
  sb.clean = clean;
  io_.write_superblock(sb);
}

void AmortizedOram::write(u64 address, std::span<const std::byte> data) {
  require_writable();
  if (address >= params_.logical_blocks) throw RangeError("address beyond the store");
  if (data.size() != params_.block_size) throw SizeError("write payload must be one block");
  queue_.put(address, RecordKind::data, data);
  ++logical_writes_;
  if (queue_.full()) flush();
}

void AmortizedOram::sync() {
  require_writable();
  if (!queue_.empty()) flush();
}

void AmortizedOram::close() {
  if (!open_) return;
  open_ = false;
  if (read_only_) return;
  BlockDevice::MutationGuard guard(device());
  const auto blob = save_state();
  ++state_generation_;
  io_.write_state_blob(blob, state_generation_);
  persist_superblock(1);
}

void AmortizedOram::flush() {
  BlockDevice::MutationGuard guard(device());
  const u64 writes_before = device().stats().writes;

  cascade();

  // Staged bucket -> level 0, newest run in the store, plus its one-leaf map.
  const auto records = queue_.drain_sorted();
  const Region& l0 = geo_.data_region(0, 0, 0);
  std::vector<u64> addrs(params_.bucket_blocks);
  for (u32 s = 0; s < params_.bucket_blocks; ++s) {
    io_.write_record(l0.start + s, records[s].header, records[s].payload);
    addrs[s] = records[s].header.tag;
  }
  MapBuilder builder(io_, geo_.map_region(0, 0, 0), 1, MapBuilder::Mode::bulk);
  builder.append_leaf(addrs);
  builder.finish();
  occ_[0] = 1;

  io_.flush_iv_entries();
  ++flush_count_;
  persist_superblock(0);

  largest_flush_writes_ = std::max(largest_flush_writes_, device().stats().writes - writes_before);
}

void AmortizedOram::cascade() {
  if (occ_[0] == 0) return;
  const u32 levels = static_cast<u32>(occ_.size());
  u32 e = 1;
  while (e < levels && occ_[e] == params_.fanout) ++e;
  if (e == levels) {
    rebuild_last_level();
    e = levels - 1;
  }
  for (u32 i = e; i >= 1; --i) merge_into(i);
}

void AmortizedOram::merge_into(u32 target) {
  StatsScope scope(device(), merge_work_);
  const u32 beta = params_.bucket_blocks;
  const u64 inc_buckets = run_buckets(target - 1);
  const u64 old_buckets = run_buckets(target);
  const u64 out_buckets = inc_buckets + old_buckets;
  const Region& dst = geo_.data_region(target, 0, 0);

  RunReader incoming(io_, geo_.data_region(target - 1, 0, 0), inc_buckets,
                     params_.merge_memory_buckets());
  RunReader old(io_, dst, old_buckets, params_.merge_memory_buckets());

  std::vector<std::vector<u64>> leaves;
  leaves.reserve(out_buckets);
  for (u64 b = 0; b < out_buckets; ++b) {
    // Both buckets this step writes must be safe in memory first.
    if (old_buckets > 0) old.force_through(std::min(b + 1, old_buckets - 1));

    std::vector<u64> addrs(beta);
    for (u32 s = 0; s < beta; ++s) {
      const u64 inc_tag = head_tag(incoming);
      const u64 old_tag = head_tag(old);
      RecordImage rec;
      if (inc_tag == kFakeAddress && old_tag == kFakeAddress) {
        rec = fresh_fake(params_.block_size);
      } else if (inc_tag == old_tag) {
        // Same address in both runs: the shallower copy is newer.
        old.skip();
        rec = incoming.take();
      } else if (inc_tag < old_tag) {
        rec = incoming.take();
      } else {
        rec = old.take();
      }
      addrs[s] = rec.header.tag;
      io_.write_record(dst.start + b * beta + s, rec.header, rec.payload);
    }
    leaves.push_back(std::move(addrs));

    // Fixed two-bucket step: while the target still held run content at this
    // cursor, the bucket ahead of the output is rewritten as well (its saved
    // content is in memory). Padding regardless of how much needed saving
    // keeps the pattern independent of the data.
    if (b + 1 <= old_buckets) {
      for (u32 s = 0; s < beta; ++s) {
        const RecordImage pad = fresh_fake(params_.block_size);
        io_.write_record(dst.start + (b + 1) * beta + s, pad.header, pad.payload);
      }
    }
    merge_high_water_ =
        std::max({merge_high_water_, incoming.buffered_blocks(), old.buffered_blocks()});
  }

  // Map rebuild after the data pass so the data trace keeps its fixed shape.
  MapBuilder builder(io_, geo_.map_region(target, 0, 0), out_buckets, MapBuilder::Mode::bulk);
  for (const auto& leaf : leaves) builder.append_leaf(leaf);
  builder.finish();

  occ_[target] += 1;
  occ_[target - 1] = 0;
}

void AmortizedOram::rebuild_last_level() {
  StatsScope scope(device(), merge_work_);
  const u32 beta = params_.bucket_blocks;
  const u32 top = static_cast<u32>(occ_.size()) - 1;
  const Region& last = geo_.last_level;

  RunReader incoming(io_, geo_.data_region(top, 0, 0), run_buckets(top),
                     params_.merge_memory_buckets());
  for (u64 m = 0; m < params_.last_level_buckets(); ++m) {
    auto old = io_.read_record_span(last.start + m * beta, beta);
    for (u32 s = 0; s < beta; ++s) {
      const u64 want = m * beta + s;
      if (head_tag(incoming) < want)
        throw CorruptionError("bottom-level rebuild input out of order");
      RecordImage rec;
      if (head_tag(incoming) == want) {
        rec = incoming.take();
      } else if (old[s].header.real()) {
        if (old[s].header.tag != want)
          throw CorruptionError("bottom level holds a block at a foreign offset");
        rec = std::move(old[s]);
      } else {
        rec = fresh_fake(params_.block_size);
      }
      io_.write_record(last.start + want, rec.header, rec.payload);
    }
  }
  occ_[top] = 0;
  ++last_rebuilds_;
}

bool AmortizedOram::read(u64 address, std::span<std::byte> out) {
  if (!open_) throw StorageError("store is closed");
  if (address >= params_.logical_blocks) throw RangeError("address beyond the store");
  if (out.size() != params_.block_size) throw SizeError("read buffer must be one block");
  if (read_from_store(address, out)) return true;
  std::memset(out.data(), 0, out.size());
  return false;
}

bool AmortizedOram::read_from_store(u64 address, std::span<std::byte> out) {
  if (const QueueRecord* rec = queue_.find(address)) {
    std::memcpy(out.data(), rec->payload.data(), out.size());
    return true;
  }
  const u32 beta = params_.bucket_blocks;
  for (u32 i = 0; i < occ_.size(); ++i) {
    const u64 run = run_buckets(i);
    if (run == 0) continue;
    MapReader reader(io_, geo_.map_region(i, 0, 0), run);
    if (const auto hit = reader.lookup(address)) {
      const Region& data = geo_.data_region(i, 0, 0);
      const RecordHeader hdr = io_.read_record(data.start + hit->bucket * beta + hit->slot, out);
      if (hdr.tag != address) throw CorruptionError("level map points at the wrong record");
      return true;
    }
  }
  if (last_rebuilds_ > 0) {
    const RecordHeader hdr = io_.read_record(geo_.last_level.start + address, out);
    if (hdr.real() && hdr.tag == address) return true;
  }
  return false;
}

}  // namespace seqoram
