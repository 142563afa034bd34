#include "seqoram/oram_deamortized.hpp"

#include <algorithm>
#include <cstring>

#include "seqoram/errors.hpp"
#include "seqoram/schedule.hpp"
#include "seqoram/wire.hpp"

namespace seqoram {

namespace {

constexpr u32 kStateMagic = 0x314d5244;  // "DRM1"

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

// Streaming reader over one merge-buffer generation, resumable from a
// consumed-record count. Refills one bucket-aligned span at a time (one IV
// pass plus one payload pass); reconstructed each flush from the persisted
// count, so reopening mid-cycle lands on the identical stream.
class GenCursor {
 public:
  GenCursor(BlockIo& io, const Region& region, u64 consumed)
      : io_(io),
        region_(region),
        beta_(io.geometry().params.bucket_blocks),
        end_(region.length),
        consumed_(consumed) {}

  u64 head_tag() {
    const RecordHeader* h = peek();
    return h == nullptr ? kFakeAddress : h->tag;
  }

  const RecordHeader* peek() {
    refill();
    return buf_.empty() ? nullptr : &buf_.front().header;
  }

  RecordImage take() {
    refill();
    if (buf_.empty()) throw CorruptionError("merge source underflow");
    RecordImage img = std::move(buf_.front());
    buf_.pop_front();
    ++consumed_;
    return img;
  }

  void skip() { (void)take(); }
  u64 consumed() const { return consumed_; }

 private:
  void refill() {
    if (!buf_.empty()) return;
    const u64 next = consumed_;
    if (next >= end_) return;
    const u64 stop = std::min((next / beta_ + 1) * u64{beta_}, end_);
    auto batch = io_.read_record_span(region_.start + next, stop - next);
    for (auto& r : batch) buf_.push_back(std::move(r));
  }

  BlockIo& io_;
  const Region& region_;
  u32 beta_;
  u64 end_;
  u64 consumed_;
  std::deque<RecordImage> buf_;
};

}  // namespace

DeamortizedOram::DeamortizedOram(BlockDevice& dev, const Key& key, bool read_only)
    : params_([&] {
        SuperblockImage sb = boot_superblock(dev);
        if (sb.params.mode != OramMode::deamortized)
          throw ParamError("device holds an amortized store; open it in that mode");
        return sb.params;
      }()),
      geo_(DeviceGeometry::derive(params_)),
      cipher_(make_cipher(params_.cipher, key)),
      ivs_(key, params_.iv_seed, 0),
      io_(dev, geo_, *cipher_, key, ivs_),
      read_only_(read_only),
      queue_(params_.bucket_blocks, params_.block_size),
      merge_consumed_(params_.level_count(), {0, 0}),
      builders_(params_.level_count()) {
  const SuperblockImage sb = io_.read_superblock();
  if (dev.block_count() != geo_.physical_blocks)
    throw CorruptionError("device size does not match the recorded parameters");
  if (sb.clean != 1)
    throw CorruptionError("device was not closed cleanly; refusing to open");
  flush_count_ = sb.flush_count;
  state_generation_ = sb.state_generation;
  ivs_.reset(sb.iv_counter);

  if (params_.atm_active()) {
    atm_.emplace(params_.logical_blocks, params_.bucket_blocks);
    node_cache_capacity_ = atm_->height() + 1;
    root_counter_ = sb.atm_root_access;
    root_image_ = fresh_node_image(atm_->root_address());
  }

  load_state(io_.read_state_blob(sb.state_generation));

  // Re-arm the write-buffer map builders: the schedule fixes which
  // generation is mid-build and how many leaves it has, so the pending
  // ancestor chain is recovered straight from the on-disk leaves.
  for (u32 level = 1; level < params_.level_count(); ++level) {
    if (flush_count_ < sched_first_fill(level)) continue;
    const u64 gen_buckets = params_.level_buckets(level);
    const u64 phi = sched_fill_position(level, flush_count_);
    const u64 fed = phi & (gen_buckets - 1);
    if (fed == 0) continue;
    const u32 wb = sched_write_buffer(level, flush_count_);
    const u8 gen = static_cast<u8>(phi >> level);
    builders_[level].emplace(
        MapBuilder::resume(io_, geo_.map_region(level, wb, gen), gen_buckets, fed));
  }

  if (!read_only_) {
    BlockDevice::MutationGuard guard(dev);
    persist_superblock(0);
  }
}

void DeamortizedOram::load_state(const std::vector<std::byte>& blob) {
  if (blob.empty()) return;  // freshly initialized device
  ByteReader r(blob);
  if (r.get_u32() != kStateMagic) throw CorruptionError("state blob has the wrong shape");
  const u32 queued = r.get_u32();
  for (u32 i = 0; i < queued; ++i) {
    const u64 tag = r.get_u64();
    const auto kind = static_cast<RecordKind>(r.get_u8());
    queue_.put(tag, kind, r.get_bytes());
  }
  const u32 spilled = r.get_u32();
  for (u32 i = 0; i < spilled; ++i) {
    RecordImage rec;
    rec.header.tag = r.get_u64();
    rec.header.kind = static_cast<RecordKind>(r.get_u8());
    rec.payload = r.get_bytes();
    spill_.emplace(rec.header.tag, std::move(rec));
  }
  const u32 levels = r.get_u32();
  if (levels != merge_consumed_.size()) throw CorruptionError("state blob level count mismatch");
  for (auto& [a, b] : merge_consumed_) {
    a = r.get_u64();
    b = r.get_u64();
  }
  logical_writes_ = r.get_u64();
  atm_spills_ = r.get_u64();
  const u8 has_atm = r.get_u8();
  if (has_atm != (atm_on() ? 1 : 0)) throw CorruptionError("state blob ATM flag mismatch");
  if (has_atm) {
    const u32 n = r.get_u32();
    if (n != root_image_.size()) throw CorruptionError("state blob root image size mismatch");
    for (auto& c : root_image_) c = r.get_u64();
    // Dirty node images are exactly the node records still staged; their
    // payloads are the images, so the overlay rebuilds from them.
    for (const auto& [tag, rec] : queue_.entries())
      if (rec.header.kind == RecordKind::atm_node)
        overlay_[tag] = decode_map_node(rec.payload, params_.bucket_blocks).entries;
    for (const auto& [tag, rec] : spill_)
      overlay_[tag] = decode_map_node(rec.payload, params_.bucket_blocks).entries;
  }
}

std::vector<std::byte> DeamortizedOram::save_state() const {
  ByteWriter w;
  w.put_u32(kStateMagic);
  w.put_u32(queue_.size());
  for (const auto& [tag, rec] : queue_.entries()) {
    w.put_u64(tag);
    w.put_u8(static_cast<u8>(rec.header.kind));
    w.put_bytes(rec.payload);
  }
  w.put_u32(static_cast<u32>(spill_.size()));
  for (const auto& [tag, rec] : spill_) {
    w.put_u64(tag);
    w.put_u8(static_cast<u8>(rec.header.kind));
    w.put_bytes(rec.payload);
  }
  w.put_u32(static_cast<u32>(merge_consumed_.size()));
  for (const auto& [a, b] : merge_consumed_) {
    w.put_u64(a);
    w.put_u64(b);
  }
  w.put_u64(logical_writes_);
  w.put_u64(atm_spills_);
  w.put_u8(atm_on() ? 1 : 0);
  if (atm_on()) {
    w.put_u32(static_cast<u32>(root_image_.size()));
    for (u64 c : root_image_) w.put_u64(c);
  }
  return std::move(w.bytes);
}

void DeamortizedOram::require_writable() const {
  if (!open_) throw StorageError("store is closed");
  if (read_only_) throw StorageError("store was opened read-only");
}

void DeamortizedOram::persist_superblock(u8 clean) {
  SuperblockImage sb;
  sb.params = params_;
  sb.flush_count = flush_count_;
  sb.iv_counter = ivs_.counter();
  sb.atm_root_access = root_counter_;
  sb.state_generation = state_generation_;
  sb.clean = clean;
  io_.write_superblock(sb);
}

void DeamortizedOram::write(u64 address, std::span<const std::byte> data) {
  require_writable();
  if (address >= params_.logical_blocks) throw RangeError("address beyond the store");
  if (data.size() != params_.block_size) throw SizeError("write payload must be one block");
  // Re-staged spill records can leave a small queue full at tiny capacities.
  if (queue_.full()) flush_internal();
  queue_.put(address, RecordKind::data, data);
  ++logical_writes_;
  if (atm_on()) atm_note_write(address);
  if (queue_.full()) flush_internal();
}

void DeamortizedOram::sync() {
  require_writable();
  if (!queue_.empty()) flush_internal();
}

void DeamortizedOram::close() {
  if (!open_) return;
  open_ = false;
  if (read_only_) return;
  BlockDevice::MutationGuard guard(device());
  const auto blob = save_state();
  ++state_generation_;
  io_.write_state_blob(blob, state_generation_);
  persist_superblock(1);
}

DeamortizedOram::GenFill DeamortizedOram::level_fill(u32 level) const {
  GenFill f{};
  const u64 g = flush_count_;
  if (g < sched_first_fill(level)) return f;
  const u64 half = params_.level_buckets(level);
  const u32 wb = sched_write_buffer(level, g);
  const u64 fill = sched_fill_position(level, g);
  f.filled[wb][0] = std::min(fill, half);
  f.filled[wb][1] = fill > half ? fill - half : 0;
  if (g >= sched_first_fill(level + 1)) {
    f.filled[1 - wb][0] = half;
    f.filled[1 - wb][1] = half;
  }
  return f;
}

std::optional<u64> DeamortizedOram::map_probe(u32 level, u32 buffer, u32 gen, u64 tag) {
  const Region& map = geo_.map_region(level, static_cast<u8>(buffer), static_cast<u8>(gen));
  MapReader reader(io_, map, params_.level_buckets(level), &map_memo_);
  const auto hit = reader.lookup(tag);
  if (!hit) return std::nullopt;
  const Region& data = geo_.data_region(level, static_cast<u8>(buffer), static_cast<u8>(gen));
  return geo_.bucket_start(data, hit->bucket) + hit->slot;
}

std::optional<RecordImage> DeamortizedOram::find_in_levels(u64 tag, Location* where) {
  const u64 g = flush_count_;
  for (u32 level = 0; level < params_.level_count(); ++level) {
    const GenFill fill = level_fill(level);
    const u32 wb = sched_write_buffer(level, g);
    const u32 order[4][2] = {{wb, 1}, {wb, 0}, {1 - wb, 1}, {1 - wb, 0}};
    for (const auto& [buf, gen] : order) {
      if (fill.filled[buf][gen] == 0) continue;
      const auto phys = map_probe(level, buf, gen, tag);
      if (!phys) continue;
      RecordImage img;
      img.payload.resize(params_.block_size);
      img.header = io_.read_record(*phys, img.payload);
      if (!img.header.real() || img.header.tag != tag)
        throw CorruptionError("level map points at the wrong record");
      if (where != nullptr)
        *where = Location{true, ResidencyKind::level, level, buf, gen};
      return img;
    }
  }
  if (g > sched_first_fill(params_.level_count())) {
    const u64 phys = geo_.last_level.start + tag;
    RecordImage img;
    img.payload.resize(params_.block_size);
    img.header = io_.read_record(phys, img.payload);
    if (img.header.real() && img.header.tag == tag) {
      if (where != nullptr) *where = Location{true, ResidencyKind::last_level, 0, 0, 0};
      return img;
    }
  }
  return std::nullopt;
}

std::optional<RecordImage> DeamortizedOram::fetch_by_counter(u64 tag, u64 counter) {
  const PredictResult p = predict_location(counter, flush_count_, params_.level_count());
  if (p.kind == ResidencyKind::staging) return std::nullopt;
  if (p.kind == ResidencyKind::last_level) {
    const u64 phys = geo_.last_level.start + tag;
    RecordImage img;
    img.payload.resize(params_.block_size);
    img.header = io_.read_record(phys, img.payload);
    if (!img.header.real() || img.header.tag != tag) return std::nullopt;
    return img;
  }
  const u32 buffer = p.in_write_buffer ? sched_write_buffer(p.level, flush_count_)
                                       : sched_merge_buffer(p.level, flush_count_);
  const auto phys = map_probe(p.level, buffer, p.generation, tag);
  if (!phys) return std::nullopt;
  RecordImage img;
  img.payload.resize(params_.block_size);
  img.header = io_.read_record(*phys, img.payload);
  if (!img.header.real() || img.header.tag != tag)
    throw CorruptionError("level map points at the wrong record");
  return img;
}

bool DeamortizedOram::read(u64 address, std::span<std::byte> out) {
  if (!open_) throw StorageError("store is closed");
  if (address >= params_.logical_blocks) throw RangeError("address beyond the store");
  if (out.size() != params_.block_size) throw SizeError("read buffer must be one block");

  if (const QueueRecord* q = queue_.find(address)) {
    std::copy(q->payload.begin(), q->payload.end(), out.begin());
    return true;
  }
  if (atm_on()) {
    const u64 c = recorded_counter(address);
    if (c == kNeverWritten) {
      std::memset(out.data(), 0, out.size());
      return false;
    }
    if (c < flush_count_) {
      if (auto img = fetch_by_counter(address, c)) {
        std::copy(img->payload.begin(), img->payload.end(), out.begin());
        return true;
      }
      ++predict_misses_;  // fall through to the full scan
    }
  }
  if (auto img = find_in_levels(address, nullptr)) {
    std::copy(img->payload.begin(), img->payload.end(), out.begin());
    return true;
  }
  std::memset(out.data(), 0, out.size());
  return false;
}

DeamortizedOram::Location DeamortizedOram::locate(u64 address) {
  if (queue_.contains(address)) return Location{true, ResidencyKind::staging, 0, 0, 0};
  if (spill_.count(address) != 0) return Location{true, ResidencyKind::staging, 0, 0, 0};
  Location where;
  if (find_in_levels(address, &where)) return where;
  return Location{};
}

// --- Access-time map ------------------------------------------------------

std::vector<u64> DeamortizedOram::fresh_node_image(u64 node_addr) const {
  return std::vector<u64>(atm_->slots(atm_->level_of(node_addr), atm_->index_of(node_addr)),
                          kNeverWritten);
}

std::vector<u64> DeamortizedOram::node_image(u64 node_addr, u64 counter) {
  if (node_addr == atm_->root_address()) return root_image_;
  if (const auto it = overlay_.find(node_addr); it != overlay_.end()) return it->second;
  for (auto it = node_cache_.begin(); it != node_cache_.end(); ++it) {
    if (it->first != node_addr) continue;
    auto entry = std::move(*it);  // refresh LRU position
    node_cache_.erase(it);
    node_cache_.push_back(entry);
    return entry.second;
  }
  if (counter == kNeverWritten) return fresh_node_image(node_addr);

  auto rec = fetch_by_counter(node_addr, counter);
  if (!rec) {
    ++predict_misses_;
    rec = find_in_levels(node_addr, nullptr);
    if (!rec) throw CorruptionError("access-time node record is missing");
  }
  auto image = decode_map_node(rec->payload, params_.bucket_blocks).entries;
  if (image.size() != fresh_node_image(node_addr).size())
    throw CorruptionError("access-time node has the wrong slot count");
  if (node_cache_.size() >= node_cache_capacity_) node_cache_.pop_front();
  node_cache_.emplace_back(node_addr, image);
  return image;
}

std::vector<DeamortizedOram::PathStep> DeamortizedOram::walk_path(u64 data_addr) {
  const u32 h = atm_->height();
  std::vector<u64> index_at(h);
  index_at[0] = atm_->leaf_index(data_addr);
  for (u32 l = 1; l < h; ++l) index_at[l] = atm_->parent_index(index_at[l - 1]);

  std::vector<PathStep> path(h);
  u64 counter = root_counter_;
  for (u32 l = h; l-- > 0;) {
    PathStep& step = path[h - 1 - l];
    step.node_addr = atm_->node_address(l, index_at[l]);
    step.counter = counter;
    step.image = node_image(step.node_addr, counter);
    step.child_slot = l == 0 ? static_cast<u32>(data_addr % params_.bucket_blocks)
                             : atm_->slot_in_parent(index_at[l - 1]);
    counter = step.image[step.child_slot];
  }
  return path;
}

u64 DeamortizedOram::recorded_counter(u64 address) {
  if (!atm_on()) throw StorageError("store has no access-time map");
  const auto path = walk_path(address);
  const PathStep& leaf = path.back();
  return leaf.image[leaf.child_slot];
}

u64 DeamortizedOram::stage_node(u64 node_addr, const std::vector<u64>& image) {
  overlay_[node_addr] = image;
  MapNode node;
  node.type = atm_->level_of(node_addr) == 0 ? MapNodeType::leaf : MapNodeType::internal;
  node.entries = image;
  std::vector<std::byte> payload(params_.block_size);
  encode_map_node(node, payload);
  if (queue_.contains(node_addr) || !queue_.full()) {
    queue_.put(node_addr, RecordKind::atm_node, payload);
    return flush_count_;
  }
  RecordImage rec;
  rec.header = RecordHeader{node_addr, RecordKind::atm_node};
  rec.payload = std::move(payload);
  spill_[node_addr] = std::move(rec);
  ++atm_spills_;
  return flush_count_ + 1;  // rides the queue of the next epoch
}

void DeamortizedOram::atm_note_write(u64 data_addr) {
  auto path = walk_path(data_addr);
  // Update bottom-up: each node learns the flush counter its child will be
  // written under; a spilled child pushes its parent entry one flush ahead.
  u64 child_counter = flush_count_;  // the data record itself flushes next
  for (u32 i = static_cast<u32>(path.size()); i-- > 0;) {
    PathStep& step = path[i];
    step.image[step.child_slot] = child_counter;
    if (i == 0) break;
    child_counter = stage_node(step.node_addr, step.image);
  }
  root_image_ = path.front().image;
  root_counter_ = stage_node(atm_->root_address(), root_image_);
}

void DeamortizedOram::after_flush_atm(const std::vector<u64>& flushed_node_tags) {
  if (!atm_on()) return;
  for (u64 tag : flushed_node_tags) {
    overlay_.erase(tag);
    // Their on-disk position changed: a later walk must fetch fresh.
    for (auto it = node_cache_.begin(); it != node_cache_.end();) {
      if (it->first == tag)
        it = node_cache_.erase(it);
      else
        ++it;
    }
  }
  for (auto& [tag, rec] : spill_) queue_.put(tag, rec.header.kind, rec.payload);
  spill_.clear();
}

// --- Flush ----------------------------------------------------------------

void DeamortizedOram::flush_internal() {
  require_writable();
  BlockDevice::MutationGuard guard(device());
  const u64 t = flush_count_;
  const u64 beta = params_.bucket_blocks;
  const u32 levels = params_.level_count();
  const u64 writes_before = device().stats().writes;

  // 1. Staged bucket into level 0's write buffer at the scheduled position.
  const auto records = queue_.drain_sorted();
  std::vector<u64> flushed_nodes;
  {
    const u64 p = sched_fill_position(0, t);  // level-0 generations are one bucket
    const u32 wb = sched_write_buffer(0, t);
    const Region& dst = geo_.data_region(0, static_cast<u8>(wb), static_cast<u8>(p));
    std::vector<u64> addrs(beta);
    for (u64 s = 0; s < beta; ++s) {
      io_.write_record(dst.start + s, records[s].header, records[s].payload);
      addrs[s] = records[s].header.tag;
      if (records[s].header.kind == RecordKind::atm_node)
        flushed_nodes.push_back(records[s].header.tag);
    }
    MapBuilder builder(io_, geo_.map_region(0, static_cast<u8>(wb), static_cast<u8>(p)), 1,
                       MapBuilder::Mode::bulk);
    builder.append_leaf(addrs);
    builder.finish();
  }

  // 2. One merge-output bucket per active level, shallow to deep.
  for (u32 i = 0; i + 1 < levels; ++i)
    if (sched_merge_active(i, t)) emit_level_merge(i, t);

  // 3. The last-level bucket pair.
  if (sched_merge_active(levels - 1, t)) emit_last_level(t);

  // 4. Staged IV entries, counter, superblock (the commit point, always last).
  io_.flush_iv_entries();
  ++flush_count_;
  persist_superblock(0);

  // 5. Epoch bookkeeping: descent memo dies with the epoch; merge cursors
  // reset for every level whose fill cycle just closed (its old merge buffer
  // is fully consumed — anything left must be fake padding).
  map_memo_.clear();
  for (u32 i = 0; i < levels; ++i) {
    if (!sched_cycle_closes(i, t)) continue;
    const u32 source = sched_merge_buffer(i, t);  // the buffer that was merged out
    for (u32 gen = 0; gen < 2; ++gen) {
      const u64 consumed = merge_consumed_[i][gen];
      const Region& src = geo_.data_region(i, static_cast<u8>(source), static_cast<u8>(gen));
      if (t >= sched_first_fill(i + 1) && consumed < src.length &&
          io_.read_record_header(src.start + consumed).real())
        throw CorruptionError("merge left a real record behind");
      merge_consumed_[i][gen] = 0;
    }
  }
  after_flush_atm(flushed_nodes);

  flush_write_counts_.push_back(device().stats().writes - writes_before);
}

void DeamortizedOram::emit_level_merge(u32 level, u64 t) {
  const u64 beta = params_.bucket_blocks;
  const u64 p = sched_fill_position(level + 1, t);
  const u64 gen_buckets = params_.level_buckets(level + 1);
  const u8 gen = static_cast<u8>(p >> (level + 1));
  const u64 bucket = p & (gen_buckets - 1);
  const u32 dst_buf = sched_write_buffer(level + 1, t);
  const Region& dst = geo_.data_region(level + 1, static_cast<u8>(dst_buf), gen);

  const u32 src_buf = sched_merge_buffer(level, t);
  GenCursor g0(io_, geo_.data_region(level, static_cast<u8>(src_buf), 0),
               merge_consumed_[level][0]);
  GenCursor g1(io_, geo_.data_region(level, static_cast<u8>(src_buf), 1),
               merge_consumed_[level][1]);

  std::vector<u64> addrs(beta);
  for (u64 s = 0; s < beta; ++s) {
    const u64 t0 = g0.head_tag();
    const u64 t1 = g1.head_tag();
    RecordImage rec;
    if (t0 == kFakeAddress && t1 == kFakeAddress) {
      rec = fresh_fake(params_.block_size);
    } else if (t1 <= t0) {
      rec = g1.take();       // generation 1 is newer; wins ties
      if (t0 == t1) g0.skip();
    } else {
      rec = g0.take();
    }
    io_.write_record(dst.start + bucket * beta + s, rec.header, rec.payload);
    addrs[s] = rec.header.tag;
  }
  merge_consumed_[level][0] = g0.consumed();
  merge_consumed_[level][1] = g1.consumed();

  if (bucket == 0)
    builders_[level + 1].emplace(io_, geo_.map_region(level + 1, static_cast<u8>(dst_buf), gen),
                                 gen_buckets, MapBuilder::Mode::constant_rate);
  if (!builders_[level + 1]) throw CorruptionError("merge output has no map builder");
  builders_[level + 1]->append_leaf(addrs);
  if (bucket == gen_buckets - 1) {
    builders_[level + 1]->finish();
    builders_[level + 1].reset();
  }
}

void DeamortizedOram::emit_last_level(u64 t) {
  const u64 beta = params_.bucket_blocks;
  const u32 top = params_.level_count() - 1;
  const u64 u = sched_fill_position(top, t);
  const u64 nlast = params_.last_level_buckets();
  const u64 p0 = (2 * u) % nlast;  // even; its odd partner follows
  const Region& last = geo_.last_level;

  if (u < nlast / 2) {
    // Merge pass: everything addressed in [2u*beta, (2u+2)*beta) lands at its
    // static offset; the top level's merge buffer supplies newer copies.
    const u32 src_buf = sched_merge_buffer(top, t);
    GenCursor g0(io_, geo_.data_region(top, static_cast<u8>(src_buf), 0),
                 merge_consumed_[top][0]);
    GenCursor g1(io_, geo_.data_region(top, static_cast<u8>(src_buf), 1),
                 merge_consumed_[top][1]);
    auto old0 = io_.read_record_span(last.start + p0 * beta, beta);
    auto old1 = io_.read_record_span(last.start + (p0 + 1) * beta, beta);
    for (u64 s = 0; s < 2 * beta; ++s) {
      const u64 addr = 2 * u * beta + s;
      RecordImage& old = s < beta ? old0[s] : old1[s - beta];
      if (old.header.real() && old.header.tag != addr)
        throw CorruptionError("last level holds a record at the wrong offset");
      RecordImage rec;
      bool have = false;
      if (g0.head_tag() == addr) {
        rec = g0.take();
        have = true;
      }
      if (g1.head_tag() == addr) {
        rec = g1.take();  // newer generation overrides
        have = true;
      }
      if (!have && old.header.real()) {
        rec = std::move(old);
        have = true;
      }
      if (!have) rec = fresh_fake(params_.block_size);
      io_.write_record(last.start + addr, rec.header, rec.payload);
    }
    const u64 bound = (2 * u + 2) * beta;
    if (g0.head_tag() < bound || g1.head_tag() < bound)
      throw CorruptionError("merge source out of order");
    merge_consumed_[top][0] = g0.consumed();
    merge_consumed_[top][1] = g1.consumed();
  } else {
    // Refresh pass: the same two buckets per flush as the merge pass, only
    // re-encrypted, so every flush writes an identically shaped pair.
    for (u64 bucket : {p0, p0 + 1}) {
      auto span = io_.read_record_span(last.start + bucket * beta, beta);
      for (u64 s = 0; s < beta; ++s)
        io_.write_record(last.start + bucket * beta + s, span[s].header, span[s].payload);
    }
  }
}

}  // namespace seqoram
