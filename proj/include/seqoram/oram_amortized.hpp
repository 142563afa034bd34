#pragma once

#include <memory>
#include <vector>

#include "seqoram/blockio.hpp"
#include "seqoram/oram.hpp"
#include "seqoram/write_queue.hpp"

namespace seqoram {

// Device work accumulated inside a scoped activity (merges, rebuilds).
struct WorkCounters {
  u64 reads = 0;
  u64 writes = 0;
  u64 seeks = 0;
};

// Log-structured store with amortized reshuffling. Level i keeps one sorted
// run of up to fanout^i buckets; each flush appends the staged bucket to
// level 0, cascading full levels downward through streaming merges first.
// The bottom level keeps every block at the offset named by its address, so
// lookups there are pure arithmetic and need no map.
class AmortizedOram final : public OramClient {
 public:
  AmortizedOram(BlockDevice& dev, const Key& key, bool read_only = false);

  void write(u64 address, std::span<const std::byte> data) override;
  bool read(u64 address, std::span<std::byte> out) override;
  void sync() override;
  void close() override;

  u64 flush_count() const override { return flush_count_; }
  const OramParams& params() const override { return params_; }
  BlockDevice& device() override { return io_.device(); }

  // --- introspection for tests and benchmarks ---
  // Occupancy in arrival units: level 0 holds 0..1 buckets; level i >= 1
  // holds occupancy()[i] * fanout^{i-1} buckets, occupancy in 0..fanout.
  const std::vector<u32>& occupancy() const { return occ_; }
  u64 run_buckets(u32 level) const;
  u64 last_level_rebuilds() const { return last_rebuilds_; }
  u64 logical_writes() const { return logical_writes_; }
  u64 largest_flush_writes() const { return largest_flush_writes_; }
  // Work accumulated inside merge and rebuild bodies only.
  const WorkCounters& merge_work() const { return merge_work_; }
  // Transient merge memory beyond the read-ahead budget, in blocks.
  u64 merge_buffer_high_water() const { return merge_high_water_; }

 private:
  void require_writable() const;
  void flush();
  void cascade();
  void merge_into(u32 target);
  void rebuild_last_level();
  void persist_superblock(u8 clean);
  bool read_from_store(u64 address, std::span<std::byte> out);
  void load_state(std::span<const std::byte> blob);
  std::vector<std::byte> save_state() const;

  OramParams params_;
  DeviceGeometry geo_;
  std::unique_ptr<BlockCipher> cipher_;
  IvStream ivs_;
  BlockIo io_;
  bool read_only_;
  bool open_ = true;

  WriteQueue queue_;
  std::vector<u32> occ_;       // arrival units per level
  u64 last_rebuilds_ = 0;      // bottom-level rebuild count
  u64 flush_count_ = 0;
  u64 state_generation_ = 0;   // monotone clean-close counter
  u64 atm_root_access_ = kNeverWritten;  // carried through; unused here

  u64 logical_writes_ = 0;
  u64 largest_flush_writes_ = 0;
  u64 merge_high_water_ = 0;
  WorkCounters merge_work_;
};

}  // namespace seqoram
