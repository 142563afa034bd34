#pragma once

#include <array>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "seqoram/atm.hpp"
#include "seqoram/blockio.hpp"
#include "seqoram/crypto.hpp"
#include "seqoram/geometry.hpp"
#include "seqoram/levelmap.hpp"
#include "seqoram/oram.hpp"
#include "seqoram/write_queue.hpp"

namespace seqoram {

// Strictly deamortized client: every flush performs the same shaped work —
// the queue bucket into level 0, one merge-output bucket per active level,
// one last-level bucket pair, the staged IV batch, the superblock. Buffer
// roles, fill positions and merge sources are pure functions of the flush
// index (schedule.hpp), so the only mutable state besides counters is the
// pending queue, the merge-consumption cursors and the access-time map's
// dirty nodes.
class DeamortizedOram final : public OramClient {
 public:
  DeamortizedOram(BlockDevice& device, const Key& key, bool read_only = false);

  void write(u64 address, std::span<const std::byte> data) override;
  bool read(u64 address, std::span<std::byte> out) override;
  void sync() override;
  void close() override;
  u64 flush_count() const override { return flush_count_; }
  const OramParams& params() const override { return params_; }
  BlockDevice& device() override { return io_.device(); }

  // --- Introspection for tests, benchmarks and verification tools --------

  // Buckets holding readable content, per [buffer][generation].
  struct GenFill {
    std::array<std::array<u64, 2>, 2> filled{};
  };
  GenFill level_fill(u32 level) const;

  // Ground truth: where a scan in read order finds this address right now.
  struct Location {
    bool found = false;
    ResidencyKind kind = ResidencyKind::staging;
    u32 level = 0;
    u32 buffer = 0;
    u32 generation = 0;
  };
  Location locate(u64 address);

  // Newest-flush counter the access-time map records for an address
  // (kNeverWritten if none). Requires ATM mode.
  u64 recorded_counter(u64 address);

  u64 logical_writes() const { return logical_writes_; }
  u64 predict_misses() const { return predict_misses_; }
  u64 atm_spill_count() const { return atm_spills_; }
  // Physical writes of each flush completed by this client instance.
  const std::vector<u64>& flush_write_counts() const { return flush_write_counts_; }

 private:
  struct PathStep {
    u64 node_addr = 0;
    u64 counter = kNeverWritten;   // counter under which this node was flushed
    std::vector<u64> image;        // this node's counter slots
    u32 child_slot = 0;            // slot inside this node leading to the target
  };

  void require_writable() const;
  void flush_internal();
  void emit_level_merge(u32 level, u64 t);
  void emit_last_level(u64 t);
  void persist_superblock(u8 clean);
  void load_state(const std::vector<std::byte>& blob);
  std::vector<std::byte> save_state() const;

  // Map lookups against one (level, buffer, generation) run; shape_leaves is
  // the generation's bucket count. Returns the record's physical block.
  std::optional<u64> map_probe(u32 level, u32 buffer, u32 gen, u64 tag);
  std::optional<RecordImage> find_in_levels(u64 tag, Location* where);
  std::optional<RecordImage> fetch_by_counter(u64 tag, u64 counter);

  // Access-time map internals.
  bool atm_on() const { return atm_.has_value(); }
  std::vector<u64> fresh_node_image(u64 node_addr) const;
  std::vector<u64> node_image(u64 node_addr, u64 counter);
  std::vector<PathStep> walk_path(u64 data_addr);
  void atm_note_write(u64 data_addr);
  u64 stage_node(u64 node_addr, const std::vector<u64>& image);
  void after_flush_atm(const std::vector<u64>& flushed_node_tags);

  OramParams params_;
  DeviceGeometry geo_;
  std::unique_ptr<BlockCipher> cipher_;
  IvStream ivs_;
  BlockIo io_;
  bool read_only_;
  bool open_ = true;

  WriteQueue queue_;
  std::map<u64, RecordImage> spill_;  // node records displaced by a full queue
  u64 flush_count_ = 0;
  u64 state_generation_ = 0;
  u64 logical_writes_ = 0;

  // Records consumed so far from each merge source: [level][generation]
  // counts into level`s merge buffer. Reset when the level's cycle closes.
  std::vector<std::array<u64, 2>> merge_consumed_;
  // Active write-buffer map builder per level >= 1 (level 0 builds within
  // the flush). Rebuilt via MapBuilder::resume on open.
  std::vector<std::optional<MapBuilder>> builders_;

  // Access-time map state. The root image is pinned in memory; other dirty
  // node images live in overlay_ exactly while their record sits in the
  // queue or spill. Clean images pass through a path-sized cache.
  std::optional<AtmIndex> atm_;
  std::vector<u64> root_image_;
  u64 root_counter_ = kNeverWritten;
  std::map<u64, std::vector<u64>> overlay_;
  std::deque<std::pair<u64, std::vector<u64>>> node_cache_;
  u32 node_cache_capacity_ = 0;
  MapNodeCache map_memo_{32};

  std::vector<u64> flush_write_counts_;
  u64 predict_misses_ = 0;
  u64 atm_spills_ = 0;
};

}  // namespace seqoram
