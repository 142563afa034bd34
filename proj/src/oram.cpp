#include "seqoram/oram.hpp"

#include "seqoram/blockio.hpp"
#include "seqoram/errors.hpp"
#include "seqoram/geometry.hpp"
#include "seqoram/levelmap.hpp"
#include "seqoram/oram_amortized.hpp"
#include "seqoram/oram_deamortized.hpp"

namespace seqoram {

void init_device(BlockDevice& dev, const OramParams& params, const Key& key) {
  params.validate();
  const DeviceGeometry geo = DeviceGeometry::derive(params);
  if (dev.block_size() != params.block_size)
    throw SizeError("backend block size does not match the parameters");
  if (dev.block_count() != geo.physical_blocks)
    throw SizeError("backend must hold exactly the derived block count");

  const auto cipher = make_cipher(params.cipher, key);
  IvStream ivs(key, params.iv_seed, 0);
  BlockIo io(dev, geo, *cipher, key, ivs);
  BlockDevice::MutationGuard guard(dev);

  // Every data-capable block becomes an encrypted fake so that all reads are
  // well-defined and a later write changes nothing about the block's look.
  const std::vector<std::byte> zero(params.block_size, std::byte{0});
  const RecordHeader fake{};
  auto format_data = [&](const Region& r) {
    for (u64 b = 0; b < r.length; ++b) io.write_record(r.start + b, fake, zero);
  };
  for (const auto& per_level : geo.level_data)
    for (const auto& per_buffer : per_level)
      for (const Region& r : per_buffer) format_data(r);
  format_data(geo.last_level);

  // Map regions become decryptable placeholders (empty leaves).
  std::vector<std::byte> node_plain(io.self_contained_capacity());
  MapNode empty;
  empty.type = MapNodeType::leaf;
  encode_map_node(empty, node_plain);
  for (const auto& per_level : geo.level_map)
    for (const auto& per_buffer : per_level)
      for (const Region& r : per_buffer)
        for (u64 b = 0; b < r.length; ++b) io.write_self_contained(r.start + b, node_plain);

  io.flush_iv_entries();
  io.write_state_blob({}, 0);

  SuperblockImage sb;
  sb.params = params;
  sb.flush_count = 0;
  sb.iv_counter = ivs.counter();
  sb.atm_root_access = kNeverWritten;
  sb.state_generation = 0;
  sb.clean = 1;
  io.write_superblock(sb);
}

std::unique_ptr<OramClient> open_client(BlockDevice& dev, const Key& key, bool read_only) {
  std::vector<std::byte> block(dev.block_size());
  dev.read_block(0, block);
  const SuperblockImage sb = BlockIo::parse_superblock(block);
  if (sb.params.mode == OramMode::amortized)
    return std::make_unique<AmortizedOram>(dev, key, read_only);
  return std::make_unique<DeamortizedOram>(dev, key, read_only);
}

}  // namespace seqoram
