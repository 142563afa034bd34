#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seqoram/blockstore.hpp"
#include "seqoram/crypto.hpp"
#include "seqoram/params.hpp"

namespace seqoram {

// The write-pattern security game, in executable form. The observer model:
// an adversary who records every physical write position and may capture
// full device images at flush boundaries. Security means the position
// sequence of each flush is a function of (flush index, parameters) only —
// never of the addresses or payloads being written.

// One logical write; the payload is generated deterministically from the
// seed, so a pattern file fully determines a run.
struct PatternOp {
  u64 address = 0;
  u64 payload_seed = 0;
};

struct AccessPattern {
  std::vector<PatternOp> ops;

  // Text format: one "address payload_seed" pair per line; blank lines and
  // lines starting with '#' are skipped. Throws ParamError on malformed
  // input, StorageError if unreadable.
  static AccessPattern from_file(const std::string& path);
  static AccessPattern parse(const std::string& text);

  void validate(u64 logical_blocks) const;  // RangeError on any address >= N
  u64 size() const { return ops.size(); }
};

// Deterministic pattern generators used by tests and the fuzz corpus.
AccessPattern make_sequential_pattern(u64 length, u64 address_space, u64 seed);
AccessPattern make_random_pattern(u64 length, u64 address_space, u64 seed);
// Addresses are distinct within every epoch_size-long chunk, so two such
// patterns of equal length trigger identical flush cadences when staging
// coalesces duplicates (queue capacity = epoch_size, no access-map records).
AccessPattern make_epoch_distinct_pattern(u64 length, u64 address_space,
                                          u32 epoch_size, u64 seed);

// One pattern executed against a fresh in-memory device. The trace starts
// after open and ends after close; it is cut into flush-aligned segments at
// each superblock write (physical index 0, the per-flush commit mark). The
// final segment is the close itself (state spill + clean mark).
struct PatternRun {
  std::vector<u64> positions;              // full post-open write trace
  std::vector<std::vector<u64>> segments;  // split after each superblock write
  u64 flushes = 0;                         // client-reported flush count
  u64 logical_writes = 0;

  // Logical writes per flush: the documented side channel. Patterns that
  // stage more access-map records flush more often.
  double flush_rate() const;
};

PatternRun run_pattern(const OramParams& params, const Key& key,
                       const AccessPattern& pattern);

struct Divergence {
  u64 segment = 0;  // flush index (or the close segment, == compared flushes)
  u64 offset = 0;   // position index within the segment; ~0 = length mismatch
  u64 pos_a = 0;
  u64 pos_b = 0;
};

// Verdict of the two-pattern game. The pass criterion is flush-aligned:
// segment s of run a must equal segment s of run b for every s both runs
// reach. Unequal flush *counts* are reported, not failed — that is the
// flush-rate side channel, measured separately.
struct TraceComparison {
  bool positions_identical = false;
  bool diff_cardinalities_equal = false;  // per-segment unique-position counts
  bool flush_counts_equal = false;
  bool close_segments_identical = false;  // comparable only on equal cadence
  u64 flushes_a = 0;
  u64 flushes_b = 0;
  u64 compared_segments = 0;
  double flush_rate_a = 0.0;
  double flush_rate_b = 0.0;
  std::optional<Divergence> divergence;

  bool pass() const { return positions_identical && diff_cardinalities_equal; }
};

// Runs both patterns on fresh devices with the same parameters and key.
// Throws ParamError unless the patterns have equal length.
TraceComparison assert_indistinguishable(const OramParams& params, const Key& key,
                                         const AccessPattern& p0,
                                         const AccessPattern& p1);

struct MonobitResult {
  u64 bits = 0;
  u64 ones = 0;
  double fraction = 0.0;  // ones / bits
  bool pass = false;      // within 4 standard deviations of 1/2
};

// Multi-snapshot adversary: capture a device image at every flush boundary,
// diff consecutive images, and reconcile each diff against the write trace
// of that flush. Freshness demands every traced position change bytes and
// nothing else change; the monobit count is a randomness smoke test over the
// changed ciphertext-bearing blocks (record payloads, map nodes, state blobs
// — the cleartext superblock and the zero-padded IV entries are framing, not
// content, and are excluded from the sample).
struct SnapshotStudy {
  u64 flushes = 0;
  std::vector<u64> diff_sizes;   // changed blocks per flush interval
  std::vector<u64> trace_sizes;  // unique traced positions per flush
  u64 changed_outside_trace = 0;
  u64 traced_but_unchanged = 0;
  MonobitResult monobit;

  bool pass() const {
    return changed_outside_trace == 0 && traced_but_unchanged == 0 && monobit.pass;
  }
};

SnapshotStudy snapshot_study(const OramParams& params, const Key& key,
                             const AccessPattern& pattern);

}  // namespace seqoram
