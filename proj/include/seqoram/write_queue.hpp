#pragma once

#include <map>
#include <span>
#include <vector>

#include "seqoram/blockio.hpp"

namespace seqoram {

using QueueRecord = RecordImage;

// In-memory write staging. One slot per distinct tag: re-putting a queued tag
// replaces its payload in place (newest wins) without consuming a new slot.
// Contents leave only through drain_sorted, which always hands back a full
// bucket: real records ascending by tag, then fake padding up to capacity.
class WriteQueue {
 public:
  WriteQueue(u32 capacity, u32 payload_bytes);

  bool contains(u64 tag) const { return records_.count(tag) != 0; }
  void put(u64 tag, RecordKind kind, std::span<const std::byte> payload);
  const QueueRecord* find(u64 tag) const;

  u32 size() const { return static_cast<u32>(records_.size()); }
  u32 capacity() const { return capacity_; }
  u32 payload_bytes() const { return payload_bytes_; }
  bool full() const { return size() == capacity_; }
  bool empty() const { return records_.empty(); }

  std::vector<QueueRecord> drain_sorted();

  // For state persistence; keyed by tag, so iteration order is sorted.
  const std::map<u64, QueueRecord>& entries() const { return records_; }

 private:
  u32 capacity_;
  u32 payload_bytes_;
  std::map<u64, QueueRecord> records_;
};

}  // namespace seqoram
