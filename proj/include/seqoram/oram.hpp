#pragma once

#include <memory>
#include <span>

#include "seqoram/blockstore.hpp"
#include "seqoram/crypto.hpp"
#include "seqoram/params.hpp"

namespace seqoram {

// Common client surface for both store variants. A client owns all volatile
// state (staging queue, merge cursors, caches); the device holds everything
// durable. read() fills `out` (block_size bytes) and reports whether the
// address has ever been written; never-written addresses come back zeroed.
class OramClient {
 public:
  virtual ~OramClient() = default;

  virtual void write(u64 address, std::span<const std::byte> data) = 0;
  virtual bool read(u64 address, std::span<std::byte> out) = 0;

  // Force the staging queue out as a full bucket, padding with fakes.
  // No-op when nothing is staged.
  virtual void sync() = 0;

  // Persist volatile state so a later open resumes bit-identically.
  // The client must not be used afterwards.
  virtual void close() = 0;

  virtual u64 flush_count() const = 0;
  virtual const OramParams& params() const = 0;
  virtual BlockDevice& device() = 0;
};

// Formats a device: every data-capable block becomes an encrypted fake
// record, map regions become walkable empty trees, and the superblock is
// written last as the commit mark. Deterministic for a fixed key and
// parameter set.
void init_device(BlockDevice& dev, const OramParams& params, const Key& key);

// Opens an initialized device, dispatching on the mode recorded in the
// superblock. Requires a cleanly closed (or freshly initialized) device.
// A read-only client never writes — no dirty mark at open, no state at close.
std::unique_ptr<OramClient> open_client(BlockDevice& dev, const Key& key,
                                        bool read_only = false);

}  // namespace seqoram
