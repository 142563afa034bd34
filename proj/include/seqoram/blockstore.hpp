#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "seqoram/params.hpp"

namespace seqoram {

// Head-movement model shared by reads and writes: accessing index p costs a
// seek unless p is exactly the successor of the previously accessed index.
// The first access after construction or reset counts as one seek.
struct AccessStats {
  u64 reads = 0;
  u64 writes = 0;
  u64 seeks = 0;
  u64 last_index = ~u64{0};
  bool touched = false;

  void record(u64 index) {
    if (!touched || index != last_index + 1) ++seeks;
    touched = true;
    last_index = index;
  }
};

// Ordered list of physical write positions. Replaying it through the seek
// rule above reproduces the write-side seek count.
struct WriteTrace {
  std::vector<u64> entries;

  u64 replay_seeks() const {
    AccessStats s;
    for (u64 e : entries) s.record(e);
    return s.seeks;
  }
};

void save_trace(const WriteTrace& t, const std::string& path, bool text);
WriteTrace load_trace(const std::string& path);

struct Snapshot {
  u64 sequence = 0;
  u32 block_size = 0;
  std::vector<std::byte> bytes;

  std::span<const std::byte> block(u64 index) const {
    return std::span<const std::byte>(bytes).subspan(index * block_size, block_size);
  }
};

// Sorted physical indexes whose contents differ between two snapshots.
std::vector<u64> diff_snapshots(const Snapshot& a, const Snapshot& b);

class BlockBackend {
 public:
  virtual ~BlockBackend() = default;
  virtual void read(u64 index, std::span<std::byte> out) = 0;
  virtual void write(u64 index, std::span<const std::byte> data) = 0;
  virtual u64 block_count() const = 0;
  virtual u32 block_size() const = 0;
  virtual void flush() {}
};

std::unique_ptr<BlockBackend> make_memory_backend(u64 blocks, u32 block_size);
// Creates (zero-filled) or opens `path`. When opening, the file size must
// equal blocks * block_size.
std::unique_ptr<BlockBackend> make_file_backend(const std::string& path, u64 blocks,
                                                u32 block_size, bool create);

// Instrumented block device: every access updates AccessStats, every write
// appends to the trace, and a state guard rejects interleaved mutators.
class BlockDevice {
 public:
  BlockDevice(std::unique_ptr<BlockBackend> backend);

  void read_block(u64 index, std::span<std::byte> out);
  void write_block(u64 index, std::span<const std::byte> data);

  u64 block_count() const { return backend_->block_count(); }
  u32 block_size() const { return backend_->block_size(); }

  const AccessStats& stats() const { return stats_; }
  void reset_stats() { stats_ = AccessStats{}; }

  const WriteTrace& trace() const { return trace_; }
  void clear_trace() { trace_.entries.clear(); }

  Snapshot snapshot();
  void sync() { backend_->flush(); }

  // State guard: at most one mutator may be active; snapshots are rejected
  // while a mutation is in flight.
  class MutationGuard {
   public:
    explicit MutationGuard(BlockDevice& dev);
    ~MutationGuard();
    MutationGuard(const MutationGuard&) = delete;
    MutationGuard& operator=(const MutationGuard&) = delete;

   private:
    BlockDevice& dev_;
  };

 private:
  friend class MutationGuard;
  std::unique_ptr<BlockBackend> backend_;
  AccessStats stats_;
  WriteTrace trace_;
  u64 snapshot_sequence_ = 0;
  bool mutating_ = false;
};

}  // namespace seqoram
