#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "seqoram/errors.hpp"
#include "seqoram/write_queue.hpp"

using namespace seqoram;

namespace {

std::vector<std::byte> payload_of(u8 fill, size_t n = 64) {
  return std::vector<std::byte>(n, std::byte{fill});
}

}  // namespace

TEST_CASE("put and find round-trip; rewrite coalesces without a new slot") {
  WriteQueue q(4, 64);
  CHECK(q.empty());
  q.put(7, RecordKind::data, payload_of(0xAA));
  q.put(3, RecordKind::data, payload_of(0xBB));
  CHECK(q.size() == 2);
  CHECK(q.contains(7));
  CHECK_FALSE(q.contains(8));

  // Rewriting tag 7 replaces the payload in place.
  q.put(7, RecordKind::data, payload_of(0xCC));
  CHECK(q.size() == 2);
  const QueueRecord* rec = q.find(7);
  REQUIRE(rec != nullptr);
  CHECK(rec->payload == payload_of(0xCC));
  CHECK(rec->header.tag == 7);
  CHECK(rec->header.kind == RecordKind::data);

  CHECK(q.find(99) == nullptr);
}

TEST_CASE("coalescing still works when the queue is full") {
  WriteQueue q(2, 16);
  q.put(1, RecordKind::data, payload_of(1, 16));
  q.put(2, RecordKind::data, payload_of(2, 16));
  CHECK(q.full());
  // Existing tag: allowed.
  q.put(2, RecordKind::data, payload_of(9, 16));
  CHECK(q.find(2)->payload == payload_of(9, 16));
  // New tag: rejected until drained.
  CHECK_THROWS_AS(q.put(3, RecordKind::data, payload_of(3, 16)), RangeError);
}

TEST_CASE("drain_sorted returns ascending tags, fake padding last, and empties the queue") {
  WriteQueue q(5, 16);
  q.put(42, RecordKind::data, payload_of(1, 16));
  q.put(7, RecordKind::atm_node, payload_of(2, 16));
  q.put(1000, RecordKind::data, payload_of(3, 16));

  auto out = q.drain_sorted();
  REQUIRE(out.size() == 5);
  CHECK(out[0].header.tag == 7);
  CHECK(out[0].header.kind == RecordKind::atm_node);
  CHECK(out[1].header.tag == 42);
  CHECK(out[2].header.tag == 1000);
  CHECK_FALSE(out[3].header.real());
  CHECK_FALSE(out[4].header.real());
  CHECK(out[3].payload == std::vector<std::byte>(16, std::byte{0}));
  CHECK(q.empty());
  CHECK(q.find(42) == nullptr);

  // Drain of an empty queue is pure padding.
  auto pad = q.drain_sorted();
  REQUIRE(pad.size() == 5);
  CHECK(std::all_of(pad.begin(), pad.end(),
                    [](const QueueRecord& r) { return !r.header.real(); }));
}

TEST_CASE("payload size and tag validation") {
  WriteQueue q(2, 16);
  CHECK_THROWS_AS(q.put(1, RecordKind::data, payload_of(1, 15)), SizeError);
  CHECK_THROWS_AS(q.put(kFakeAddress, RecordKind::data, payload_of(1, 16)), ParamError);
  CHECK_THROWS_AS(WriteQueue(0, 16), ParamError);
  CHECK_THROWS_AS(WriteQueue(4, 0), ParamError);
}
