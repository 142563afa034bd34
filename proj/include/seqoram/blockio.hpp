#pragma once

#include <map>
#include <vector>

#include "seqoram/blockstore.hpp"
#include "seqoram/crypto.hpp"
#include "seqoram/geometry.hpp"

namespace seqoram {

// What a data-capable block currently holds. Stored encrypted out-of-band in
// the block's IV-region entry so record payloads can use the full block.
enum class RecordKind : u8 { fake = 0, data = 1, atm_node = 2 };

struct RecordHeader {
  u64 tag = kFakeAddress;  // logical address (data) or ATM-node address (≥ N)
  RecordKind kind = RecordKind::fake;

  bool real() const { return kind != RecordKind::fake; }
  bool operator==(const RecordHeader&) const = default;
};

inline constexpr u16 kFormatVersion = 1;
// Serialized record header: [tag u64][kind u8][zero pad], sealed together
// with the payload so one cipher pass covers both.
inline constexpr u32 kRecordHeaderPlainBytes = 16;

// One decrypted record held in memory.
struct RecordImage {
  RecordHeader header;
  std::vector<std::byte> payload;
};

// Cleartext block-0 image: everything needed to re-derive the geometry plus
// the mutable counters that drive the deterministic schedule.
struct SuperblockImage {
  OramParams params;
  u64 flush_count = 0;
  u64 iv_counter = 0;
  u64 atm_root_access = kNeverWritten;
  u64 state_generation = 0;  // flush_count at the last clean close
  u8 clean = 0;              // 1 iff the state blob matches state_generation
};

// Encryption-aware block I/O over an instrumented device. Three block
// families, three formats:
//   - records (level data / last level): full-block payload, header + IV +
//     tag in the block's 64-byte IV-region entry; entry writes are staged and
//     flushed in ascending order so each flush touches each IV block once.
//   - self-contained blocks (level maps): [iv | tag | ciphertext] in one
//     block, no IV-region entry.
//   - superblock and state region: cleartext-with-digest and derived-IV
//     encryption respectively, both reproducible byte-for-byte.
class BlockIo {
 public:
  BlockIo(BlockDevice& dev, const DeviceGeometry& geo, const BlockCipher& cipher, const Key& key,
          IvStream& ivs);

  void write_record(u64 phys, const RecordHeader& hdr, std::span<const std::byte> payload);
  RecordHeader read_record(u64 phys, std::span<std::byte> payload);
  RecordHeader read_record_header(u64 phys);

  // Bulk read of `count` consecutive records starting at `phys`: one ascending
  // pass over the covering IV blocks, then one over the payload blocks, so a
  // bucket span costs two head movements instead of two per record.
  std::vector<RecordImage> read_record_span(u64 phys, u64 count);

  // Writes every staged IV block (ascending index) and clears the stage.
  // Blocks not fully covered by staged entries are read-modify-written.
  void flush_iv_entries();
  bool has_staged_entries() const { return !staged_.empty(); }
  std::vector<u64> staged_iv_blocks() const;

  void write_self_contained(u64 phys, std::span<const std::byte> plain);
  void read_self_contained(u64 phys, std::span<std::byte> plain);
  u32 self_contained_capacity() const { return block_size_ - kIvBytes - kAuthBytes; }

  void write_superblock(const SuperblockImage& sb);
  SuperblockImage read_superblock();
  // Reads only the cleartext parameter prefix (no digest check of counters
  // beyond the whole-block digest); used to open a device before keys.
  static SuperblockImage parse_superblock(std::span<const std::byte> block);

  void write_state_blob(std::span<const std::byte> blob, u64 generation);
  std::vector<std::byte> read_state_blob(u64 generation);
  u64 state_capacity_bytes() const;

  BlockDevice& device() { return dev_; }
  const DeviceGeometry& geometry() const { return geo_; }
  IvStream& iv_stream() { return ivs_; }
  const BlockCipher& cipher() const { return cipher_; }

 private:
  struct StagedIvBlock {
    std::vector<std::byte> bytes;  // block-sized, staged entries placed
    u64 mask = 0;                  // bit per entry slot actually staged
  };

  void seal_into_entry(std::span<std::byte> entry, const RecordHeader& hdr,
                       std::span<const std::byte> payload, std::span<std::byte> payload_out);
  RecordHeader open_from_entry(std::span<const std::byte> entry,
                               std::span<const std::byte> payload_in,
                               std::span<std::byte> payload_out, u64 phys);
  std::vector<std::byte> fetch_iv_entry(u64 entry_index);

  BlockDevice& dev_;
  const DeviceGeometry& geo_;
  const BlockCipher& cipher_;
  Key key_;
  IvStream& ivs_;
  u32 block_size_;
  u32 entries_per_block_;
  std::map<u64, StagedIvBlock> staged_;          // iv block index -> staged image
  std::vector<std::byte> scratch_plain_, scratch_cipher_;
};

}  // namespace seqoram
