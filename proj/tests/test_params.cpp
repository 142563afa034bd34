#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seqoram/errors.hpp"
#include "seqoram/geometry.hpp"
#include "seqoram/params.hpp"

using namespace seqoram;

namespace {

OramParams tiny_deamortized() {
  OramParams p;
  p.logical_blocks = 64;
  p.block_size = 512;
  p.bucket_blocks = 4;
  p.mode = OramMode::deamortized;
  return p;
}

OramParams tiny_amortized() {
  OramParams p;
  p.logical_blocks = 64;
  p.block_size = 512;
  p.bucket_blocks = 4;
  p.fanout = 2;
  p.mode = OramMode::amortized;
  p.atm_enabled = false;
  return p;
}

}  // namespace

TEST_CASE("default parameters validate") {
  OramParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.logical_blocks == 4096);
  CHECK(p.bucket_blocks == 256);
}

TEST_CASE("validation rejects broken shapes") {
  OramParams p = tiny_deamortized();
  SUBCASE("non power-of-two block count") {
    p.logical_blocks = 100;
    CHECK_THROWS_AS(p.validate(), ParamError);
  }
  SUBCASE("bucket larger than a map node can index") {
    p.block_size = 512;
    p.bucket_blocks = 64;  // 8*64+32 > 512
    CHECK_THROWS_AS(p.validate(), ParamError);
  }
  SUBCASE("deamortized requires fanout 2") {
    p.fanout = 4;
    CHECK_THROWS_AS(p.validate(), ParamError);
  }
  SUBCASE("amortized requires N/beta to be a fanout power") {
    p = tiny_amortized();
    p.fanout = 4;  // 64/4 = 16 = 4^2, fine
    CHECK_NOTHROW(p.validate());
    p.logical_blocks = 128;  // 128/4 = 32, not a power of 4
    CHECK_THROWS_AS(p.validate(), ParamError);
  }
  SUBCASE("memory_buckets of 1 is rejected") {
    p.memory_buckets = 1;
    CHECK_THROWS_AS(p.validate(), ParamError);
  }
}

TEST_CASE("level arithmetic, amortized") {
  OramParams p = tiny_amortized();
  // N/beta = 16 = 2^4 -> levels 0..3 ahead of a 16-bucket last level.
  CHECK(p.level_count() == 4);
  CHECK(p.last_level_buckets() == 16);
  CHECK(p.level_buckets(0) == 1);
  CHECK(p.level_buckets(3) == 8);

  p.fanout = 4;
  CHECK(p.level_count() == 2);  // 16 = 4^2
  CHECK(p.level_buckets(1) == 4);
}

TEST_CASE("level arithmetic, deamortized with ATM inflation") {
  OramParams p = tiny_deamortized();
  // ATM shape over 64 addresses at beta=4: 16 leaves + 4 + 1 = 21 nodes.
  const auto shape = atm_shape(p.logical_blocks, p.bucket_blocks);
  CHECK(shape.level_counts == std::vector<u64>{16, 4, 1});
  CHECK(shape.node_count == 21);
  CHECK(p.atm_node_count() == 21);
  CHECK(p.total_addresses() == 85);
  // ceil(85/4) = 22 buckets -> next power of two is 32 -> 5 levels.
  CHECK(p.level_count() == 5);
  CHECK(p.last_level_buckets() == 32);

  p.atm_enabled = false;
  CHECK(p.total_addresses() == 64);
  CHECK(p.level_count() == 4);
  CHECK(p.last_level_buckets() == 16);
}

TEST_CASE("map tree node counts") {
  // 16 leaves at beta=4: 16 + 4 + 1 = 21 blocks, 2 internal levels.
  CHECK(map_tree_blocks(16, 4) == 21);
  CHECK(map_internal_levels(16, 4) == 2);
  CHECK(map_level_node_count(16, 4, 0) == 16);
  CHECK(map_level_node_count(16, 4, 1) == 4);
  CHECK(map_level_node_count(16, 4, 2) == 1);

  CHECK(map_tree_blocks(1, 4) == 1);
  CHECK(map_internal_levels(1, 4) == 0);

  // The build cost stays under twice the leaf count (fanout >= 2).
  for (u64 leaves : {1, 2, 3, 7, 16, 64, 100, 1024}) {
    CHECK(map_tree_blocks(leaves, 4) <= 2 * leaves);
    CHECK(map_tree_blocks(leaves, 256) <= 2 * leaves);
  }
}

TEST_CASE("geometry partitions the device without overlap") {
  for (bool dual : {false, true}) {
    OramParams p = dual ? tiny_deamortized() : tiny_amortized();
    const auto g = DeviceGeometry::derive(p);

    std::vector<Region> regions{g.superblock, g.state, g.iv, g.last_level};
    for (const auto& per_level : g.level_data)
      for (const auto& per_buffer : per_level)
        for (const auto& r : per_buffer) regions.push_back(r);
    for (const auto& per_level : g.level_map)
      for (const auto& per_buffer : per_level)
        for (const auto& r : per_buffer) regions.push_back(r);

    for (size_t a = 0; a < regions.size(); ++a) {
      CHECK(regions[a].length > 0);
      CHECK(regions[a].start + regions[a].length <= g.physical_blocks);
      for (size_t b = a + 1; b < regions.size(); ++b) {
        const bool disjoint =
            regions[a].start + regions[a].length <= regions[b].start ||
            regions[b].start + regions[b].length <= regions[a].start;
        CHECK(disjoint);
      }
    }
  }
}

TEST_CASE("geometry IV entries cover exactly the data-capable blocks") {
  const auto g = DeviceGeometry::derive(tiny_deamortized());
  CHECK(g.data_capable(g.last_level.start));
  CHECK(g.data_capable(g.data_region(0, 0, 0).start));
  CHECK_FALSE(g.data_capable(g.superblock.start));
  CHECK_FALSE(g.data_capable(g.map_region(0, 0, 0).start));
  CHECK_FALSE(g.data_capable(g.iv.start));

  // Entry indices are unique across all data-capable blocks.
  std::vector<u64> seen;
  for (u64 phys = 0; phys < g.physical_blocks; ++phys)
    if (g.data_capable(phys)) seen.push_back(g.iv_entry_index(phys));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  // And every entry's byte offset lies inside the IV region.
  for (u64 e : seen) {
    CHECK(g.iv_block_of_entry(e) >= g.iv.start);
    CHECK(g.iv_block_of_entry(e) < g.iv.start + g.iv.length);
  }
}

TEST_CASE("aligned buckets cover a constant IV span") {
  const auto g = DeviceGeometry::derive(tiny_deamortized());
  const u32 beta = g.params.bucket_blocks;
  // At beta=4 and 8 entries per 512-byte IV block, any aligned bucket's four
  // entries stay inside one IV block.
  for (u32 level = 0; level < g.params.level_count(); ++level) {
    const auto& r = g.data_region(level, 0, 0);
    for (u64 b = 0; b * beta < r.length; ++b)
      CHECK(g.iv_span_blocks(r.start + b * beta, beta) == 1);
  }
}
