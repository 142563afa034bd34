#pragma once

#include <map>
#include <string>
#include <vector>

#include "seqoram/blockstore.hpp"
#include "seqoram/crypto.hpp"
#include "seqoram/params.hpp"

namespace seqoram {

// Benchmark/workload layer: personality-driven logical I/O against an open
// store, with every physical cost pulled from the device's instrumentation.

enum class WorkloadKind : u8 { seq_read, seq_write, rand_read, rand_write, mixed };

std::string to_string(WorkloadKind k);
WorkloadKind workload_from_string(const std::string& s);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::seq_write;
  u64 op_count = 0;        // logical ops; each op touches io_size_blocks addresses
  u32 io_size_blocks = 1;  // contiguous blocks per op (the I/O-size sweep axis)
  u64 addr_start = 0;      // address range [addr_start, addr_start + addr_count)
  u64 addr_count = 0;      // 0 = through the end of the logical space
  u64 seed = 1;
  u64 reopen_every = 0;    // close + reopen cadence in ops; 0 = never
  bool verify_reads = false;  // compare read payloads to the seeded generator

  // Address sequences depend only on (kind's access shape, seed, range,
  // io_size_blocks, op_count) — a read workload with the same spec fields
  // replays the address sequence of its write twin, which is what makes
  // verify_reads meaningful.
  void validate(u64 logical_blocks) const;
  u64 effective_addr_count(u64 logical_blocks) const;
};

// The seeded payload generator: one fixed block per (seed, address) pair.
std::vector<std::byte> workload_payload(u64 seed, u64 address, u32 block_size);

struct BenchReport {
  WorkloadKind kind = WorkloadKind::seq_write;
  u64 ops = 0;
  u64 logical_blocks_moved = 0;
  u64 logical_bytes = 0;
  double elapsed_seconds = 0.0;
  double throughput_bytes_per_sec = 0.0;

  // Physical counters over the run (device stats deltas).
  u64 physical_reads = 0;
  u64 physical_writes = 0;
  u64 modeled_seeks = 0;
  double reads_per_op = 0.0;
  double writes_per_op = 0.0;
  double seeks_per_op = 0.0;
  double reads_per_block = 0.0;  // per logical block touched
  double writes_per_block = 0.0;
  double seeks_per_block = 0.0;

  u64 flushes = 0;
  std::vector<u64> flush_write_counts;      // physical writes per flush, in order
  std::map<u64, u64> flush_write_histogram; // count -> occurrences

  u64 verified_reads = 0;
  u64 verify_failures = 0;
};

// Opens the device (which must be initialized and clean), runs the workload,
// closes cleanly. Reopen writes (state spill + reopen mark) are attributed
// to the flush interval they fall into.
BenchReport run_bench(BlockDevice& dev, const Key& key, const WorkloadSpec& spec);

// Offline consistency check: decrypts and validates everything reachable
// under the key without mutating the device, then (if the device is clean)
// opens it read-only and exercises logical reads.
struct FsckReport {
  bool ok = false;
  bool clean = false;
  std::vector<std::string> issues;

  u64 record_blocks_scanned = 0;
  u64 real_records = 0;
  u64 fake_records = 0;
  u64 map_nodes_decoded = 0;
  u64 last_level_placed = 0;   // real last-level records at their static offset
  u64 addresses_read = 0;      // logical reads exercised through a client
};

// `read_sample`: how many logical addresses to read through the client phase
// (0 = all of them; capped at the logical space).
FsckReport run_fsck(BlockDevice& dev, const Key& key, u64 read_sample = 0);

}  // namespace seqoram
