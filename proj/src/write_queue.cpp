#include "seqoram/write_queue.hpp"

#include "seqoram/errors.hpp"

namespace seqoram {

WriteQueue::WriteQueue(u32 capacity, u32 payload_bytes)
    : capacity_(capacity), payload_bytes_(payload_bytes) {
  if (capacity_ == 0) throw ParamError("write queue capacity must be positive");
  if (payload_bytes_ == 0) throw ParamError("write queue payload size must be positive");
}

void WriteQueue::put(u64 tag, RecordKind kind, std::span<const std::byte> payload) {
  if (tag == kFakeAddress) throw ParamError("cannot queue a fake record");
  if (payload.size() != payload_bytes_)
    throw SizeError("queued payload does not match the configured record size");
  auto it = records_.find(tag);
  if (it == records_.end()) {
    if (full()) throw RangeError("write queue is full; flush before queueing a new tag");
    QueueRecord rec;
    rec.header.tag = tag;
    rec.header.kind = kind;
    rec.payload.assign(payload.begin(), payload.end());
    records_.emplace(tag, std::move(rec));
  } else {
    it->second.header.kind = kind;
    it->second.payload.assign(payload.begin(), payload.end());
  }
}

const QueueRecord* WriteQueue::find(u64 tag) const {
  auto it = records_.find(tag);
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<QueueRecord> WriteQueue::drain_sorted() {
  std::vector<QueueRecord> out;
  out.reserve(capacity_);
  for (auto& [tag, rec] : records_) out.push_back(std::move(rec));
  records_.clear();
  while (out.size() < capacity_) {
    QueueRecord fake;
    fake.header = RecordHeader{};  // tag = kFakeAddress, kind = fake
    fake.payload.assign(payload_bytes_, std::byte{0});
    out.push_back(std::move(fake));
  }
  return out;
}

}  // namespace seqoram
