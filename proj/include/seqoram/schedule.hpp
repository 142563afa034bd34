#pragma once

#include "seqoram/params.hpp"

namespace seqoram {

// Closed-form pacing of the deamortized variant (fanout fixed at 2). Every
// role assignment is a pure function of the flush index t, so nothing about
// the schedule needs to be stored or recovered.
//
//   - Level i receives exactly one bucket per flush into its write buffer,
//     starting at flush s_i = 2^{i+1} - 2. The fill position is
//       phi_i(t) = (t + 2) mod 2^{i+1},
//     split as (generation, bucket) = (phi >> i, phi mod 2^i); generation 0
//     fills first. A fill cycle spans 2^{i+1} flushes.
//   - The identity of the write buffer flips when phi_i wraps:
//       wb_i(t) = ((t + 2) >> (i + 1)) & 1,
//     and the merge (full) buffer is the other one. The very first cycle
//     therefore lands in buffer 1.
//   - While a level's write buffer fills, its merge buffer drains one bucket
//     per flush into the next level's write buffer (or, for the top level,
//     two last-level buckets per flush). That merge is active from flush
//     s_{i+1}, i.e. once the level has a full buffer behind it.
//
// phi is deliberately shared across levels: phi_{i+1}(t) mod 2^{i+1} equals
// phi_i(t), so the bucket a merge emits at level i+1 lines up with the
// position its sources have reached at level i.

inline u64 sched_first_fill(u32 level) { return (u64{2} << level) - 2; }

inline u64 sched_fill_position(u32 level, u64 t) {
  return (t + 2) & ((u64{2} << level) - 1);
}

inline u32 sched_write_buffer(u32 level, u64 t) {
  return static_cast<u32>(((t + 2) >> (level + 1)) & 1);
}

inline u32 sched_merge_buffer(u32 level, u64 t) { return 1 - sched_write_buffer(level, t); }

// True while flush t emits merge output from level `level` (into level+1, or
// into the last level when `level` is the top regular level).
inline bool sched_merge_active(u32 level, u64 t) { return t >= sched_first_fill(level + 1); }

// True when flush t closes level `level`'s fill cycle: its write buffer is
// full, the buffers swap roles, and the merge consuming its old merge buffer
// has finished.
inline bool sched_cycle_closes(u32 level, u64 t) {
  return sched_fill_position(level, t) == (u64{2} << level) - 1;
}

}  // namespace seqoram
