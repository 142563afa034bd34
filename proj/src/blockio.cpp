#include "seqoram/blockio.hpp"

#include <openssl/sha.h>

#include <cstring>

#include "seqoram/errors.hpp"

namespace seqoram {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'O', 'R'};
constexpr u32 kDigestBytes = 32;

void put_u16(std::byte* p, u16 v) {
  for (int i = 0; i < 2; ++i) p[i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
}
void put_u32(std::byte* p, u32 v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
}
void put_u64(std::byte* p, u64 v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
}
u16 get_u16(const std::byte* p) {
  u16 v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<u16>(static_cast<u8>(p[i])) << (8 * i);
  return v;
}
u32 get_u32(const std::byte* p) {
  u32 v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<u32>(static_cast<u8>(p[i])) << (8 * i);
  return v;
}
u64 get_u64(const std::byte* p) {
  u64 v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<u64>(static_cast<u8>(p[i])) << (8 * i);
  return v;
}

void digest_into(std::span<const std::byte> data, std::byte* out32) {
  SHA256(reinterpret_cast<const u8*>(data.data()), data.size(), reinterpret_cast<u8*>(out32));
}

}  // namespace

BlockIo::BlockIo(BlockDevice& dev, const DeviceGeometry& geo, const BlockCipher& cipher,
                 const Key& key, IvStream& ivs)
    : dev_(dev),
      geo_(geo),
      cipher_(cipher),
      key_(key),
      ivs_(ivs),
      block_size_(dev.block_size()),
      entries_per_block_(dev.block_size() / kIvEntryBytes) {
  if (entries_per_block_ > 64)
    throw ParamError("block_size too large: IV stage tracks at most 64 entries per block");
  scratch_plain_.resize(size_t{block_size_} + kRecordHeaderPlainBytes);
  scratch_cipher_.resize(size_t{block_size_} + kRecordHeaderPlainBytes);
}

void BlockIo::seal_into_entry(std::span<std::byte> entry, const RecordHeader& hdr,
                              std::span<const std::byte> payload,
                              std::span<std::byte> payload_out) {
  // Plaintext = 16-byte header ∥ payload, sealed in one pass so the AEAD tag
  // covers both. The header ciphertext lands in the IV entry, the payload
  // ciphertext in the data block.
  put_u64(scratch_plain_.data(), hdr.tag);
  scratch_plain_[8] = static_cast<std::byte>(hdr.kind);
  std::memset(scratch_plain_.data() + 9, 0, kRecordHeaderPlainBytes - 9);
  std::memcpy(scratch_plain_.data() + kRecordHeaderPlainBytes, payload.data(), block_size_);

  const Iv iv = ivs_.next();
  std::array<u8, kAuthBytes> auth{};
  cipher_.seal(iv, scratch_plain_, scratch_cipher_, auth);

  std::memcpy(entry.data() + kIvOffIv, iv.data(), kIvBytes);
  std::memcpy(entry.data() + kIvOffHeader, scratch_cipher_.data(), kRecordHeaderPlainBytes);
  std::memcpy(entry.data() + kIvOffAuth, auth.data(), kAuthBytes);
  std::memset(entry.data() + kIvOffAuth + kAuthBytes, 0, kIvEntryBytes - kIvOffAuth - kAuthBytes);
  std::memcpy(payload_out.data(), scratch_cipher_.data() + kRecordHeaderPlainBytes, block_size_);
}

RecordHeader BlockIo::open_from_entry(std::span<const std::byte> entry,
                                      std::span<const std::byte> payload_in,
                                      std::span<std::byte> payload_out, u64 phys) {
  Iv iv;
  std::memcpy(iv.data(), entry.data() + kIvOffIv, kIvBytes);
  std::array<u8, kAuthBytes> auth;
  std::memcpy(auth.data(), entry.data() + kIvOffAuth, kAuthBytes);

  std::memcpy(scratch_cipher_.data(), entry.data() + kIvOffHeader, kRecordHeaderPlainBytes);
  const bool header_only = payload_in.empty();
  std::span<std::byte> plain(scratch_plain_);
  std::span<const std::byte> cipher_text(scratch_cipher_);
  if (header_only) {
    if (cipher_.authenticated())
      throw ParamError("header-only reads are unavailable in the authenticated profile");
    plain = plain.first(kRecordHeaderPlainBytes);
    cipher_text = cipher_text.first(kRecordHeaderPlainBytes);
  } else {
    std::memcpy(scratch_cipher_.data() + kRecordHeaderPlainBytes, payload_in.data(), block_size_);
  }
  if (!cipher_.open(iv, cipher_text, plain, auth))
    throw IntegrityError("record authentication failed at physical block " +
                         std::to_string(phys));

  RecordHeader hdr;
  hdr.tag = get_u64(scratch_plain_.data());
  hdr.kind = static_cast<RecordKind>(scratch_plain_[8]);
  if (hdr.kind > RecordKind::atm_node)
    throw CorruptionError("bad record kind at physical block " + std::to_string(phys));
  if (!payload_out.empty())
    std::memcpy(payload_out.data(), scratch_plain_.data() + kRecordHeaderPlainBytes, block_size_);
  return hdr;
}

void BlockIo::write_record(u64 phys, const RecordHeader& hdr, std::span<const std::byte> payload) {
  if (payload.size() != block_size_) throw SizeError("record payload must be one block");
  const u64 entry_index = geo_.iv_entry_index(phys);
  const u64 iv_block = geo_.iv_block_of_entry(entry_index);
  const u32 slot = geo_.iv_byte_offset_of_entry(entry_index) / kIvEntryBytes;

  auto& staged = staged_[iv_block];
  if (staged.bytes.empty()) staged.bytes.assign(block_size_, std::byte{0});
  auto entry = std::span<std::byte>(staged.bytes).subspan(size_t{slot} * kIvEntryBytes,
                                                          kIvEntryBytes);
  std::vector<std::byte> sealed(block_size_);
  seal_into_entry(entry, hdr, payload, sealed);
  staged.mask |= u64{1} << slot;
  dev_.write_block(phys, sealed);
}

std::vector<std::byte> BlockIo::fetch_iv_entry(u64 entry_index) {
  const u64 iv_block = geo_.iv_block_of_entry(entry_index);
  const u32 off = geo_.iv_byte_offset_of_entry(entry_index);
  std::vector<std::byte> entry(kIvEntryBytes);
  if (auto it = staged_.find(iv_block); it != staged_.end()) {
    const u32 slot = off / kIvEntryBytes;
    if (it->second.mask & (u64{1} << slot)) {
      std::memcpy(entry.data(), it->second.bytes.data() + off, kIvEntryBytes);
      return entry;
    }
  }
  std::vector<std::byte> block(block_size_);
  dev_.read_block(iv_block, block);
  std::memcpy(entry.data(), block.data() + off, kIvEntryBytes);
  return entry;
}

RecordHeader BlockIo::read_record(u64 phys, std::span<std::byte> payload) {
  if (payload.size() != block_size_) throw SizeError("record payload must be one block");
  const auto entry = fetch_iv_entry(geo_.iv_entry_index(phys));
  std::vector<std::byte> sealed(block_size_);
  dev_.read_block(phys, sealed);
  return open_from_entry(entry, sealed, payload, phys);
}

RecordHeader BlockIo::read_record_header(u64 phys) {
  const auto entry = fetch_iv_entry(geo_.iv_entry_index(phys));
  return open_from_entry(entry, {}, {}, phys);
}

std::vector<RecordImage> BlockIo::read_record_span(u64 phys, u64 count) {
  std::vector<RecordImage> out;
  if (count == 0) return out;
  const u64 e0 = geo_.iv_entry_index(phys);
  if (geo_.iv_entry_index(phys + count - 1) != e0 + count - 1)
    throw RangeError("record span must be contiguous within one region");

  const u64 b0 = geo_.iv_block_of_entry(e0);
  const u64 b1 = geo_.iv_block_of_entry(e0 + count - 1);
  std::vector<std::vector<std::byte>> iv_blocks;
  iv_blocks.reserve(b1 - b0 + 1);
  for (u64 b = b0; b <= b1; ++b) {
    std::vector<std::byte> img(block_size_);
    dev_.read_block(b, img);
    if (auto it = staged_.find(b); it != staged_.end()) {
      for (u32 slot = 0; slot < entries_per_block_; ++slot) {
        if (it->second.mask & (u64{1} << slot))
          std::memcpy(img.data() + size_t{slot} * kIvEntryBytes,
                      it->second.bytes.data() + size_t{slot} * kIvEntryBytes, kIvEntryBytes);
      }
    }
    iv_blocks.push_back(std::move(img));
  }

  out.reserve(count);
  std::vector<std::byte> sealed(block_size_);
  for (u64 j = 0; j < count; ++j) {
    const u64 e = e0 + j;
    const auto& iv_img = iv_blocks[geo_.iv_block_of_entry(e) - b0];
    const auto entry =
        std::span<const std::byte>(iv_img).subspan(geo_.iv_byte_offset_of_entry(e), kIvEntryBytes);
    dev_.read_block(phys + j, sealed);
    RecordImage img;
    img.payload.resize(block_size_);
    img.header = open_from_entry(entry, sealed, img.payload, phys + j);
    out.push_back(std::move(img));
  }
  return out;
}

void BlockIo::flush_iv_entries() {
  const u64 full_mask =
      entries_per_block_ == 64 ? ~u64{0} : (u64{1} << entries_per_block_) - 1;
  for (auto& [iv_block, staged] : staged_) {
    if ((staged.mask & full_mask) != full_mask) {
      // Partially staged block: merge staged entries over the current image.
      std::vector<std::byte> current(block_size_);
      dev_.read_block(iv_block, current);
      for (u32 slot = 0; slot < entries_per_block_; ++slot) {
        if (staged.mask & (u64{1} << slot))
          std::memcpy(current.data() + size_t{slot} * kIvEntryBytes,
                      staged.bytes.data() + size_t{slot} * kIvEntryBytes, kIvEntryBytes);
      }
      staged.bytes = std::move(current);
    }
    dev_.write_block(iv_block, staged.bytes);
  }
  staged_.clear();
}

std::vector<u64> BlockIo::staged_iv_blocks() const {
  std::vector<u64> out;
  out.reserve(staged_.size());
  for (const auto& [iv_block, _] : staged_) out.push_back(iv_block);
  return out;
}

void BlockIo::write_self_contained(u64 phys, std::span<const std::byte> plain) {
  if (plain.size() != self_contained_capacity())
    throw SizeError("self-contained payload must fill the block");
  const Iv iv = ivs_.next();
  std::array<u8, kAuthBytes> auth{};
  std::vector<std::byte> block(block_size_);
  std::memcpy(block.data(), iv.data(), kIvBytes);
  cipher_.seal(iv, plain,
               std::span<std::byte>(block).subspan(kIvBytes + kAuthBytes), auth);
  std::memcpy(block.data() + kIvBytes, auth.data(), kAuthBytes);
  dev_.write_block(phys, block);
}

void BlockIo::read_self_contained(u64 phys, std::span<std::byte> plain) {
  if (plain.size() != self_contained_capacity())
    throw SizeError("self-contained payload must fill the block");
  std::vector<std::byte> block(block_size_);
  dev_.read_block(phys, block);
  Iv iv;
  std::memcpy(iv.data(), block.data(), kIvBytes);
  std::array<u8, kAuthBytes> auth;
  std::memcpy(auth.data(), block.data() + kIvBytes, kAuthBytes);
  if (!cipher_.open(iv, std::span<const std::byte>(block).subspan(kIvBytes + kAuthBytes), plain,
                    auth))
    throw IntegrityError("block authentication failed at physical block " + std::to_string(phys));
}

void BlockIo::write_superblock(const SuperblockImage& sb) {
  std::vector<std::byte> block(block_size_, std::byte{0});
  std::memcpy(block.data(), kMagic, 4);
  put_u16(block.data() + 4, kFormatVersion);
  put_u64(block.data() + 8, sb.params.logical_blocks);
  put_u32(block.data() + 16, sb.params.block_size);
  put_u32(block.data() + 20, sb.params.bucket_blocks);
  put_u32(block.data() + 24, sb.params.fanout);
  put_u32(block.data() + 28, sb.params.memory_buckets);
  block[32] = static_cast<std::byte>(sb.params.mode);
  block[33] = static_cast<std::byte>(sb.params.atm_enabled ? 1 : 0);
  block[34] = static_cast<std::byte>(sb.params.cipher);
  block[35] = static_cast<std::byte>(sb.clean);
  put_u64(block.data() + 40, sb.params.iv_seed);
  put_u64(block.data() + 48, sb.flush_count);
  put_u64(block.data() + 56, sb.iv_counter);
  put_u64(block.data() + 64, sb.atm_root_access);
  put_u64(block.data() + 72, sb.state_generation);
  digest_into(std::span<const std::byte>(block).first(block_size_ - kDigestBytes),
              block.data() + block_size_ - kDigestBytes);
  dev_.write_block(geo_.superblock.start, block);
}

SuperblockImage BlockIo::parse_superblock(std::span<const std::byte> block) {
  if (block.size() < 512) throw SizeError("superblock too small");
  if (std::memcmp(block.data(), kMagic, 4) != 0)
    throw CorruptionError("bad magic: not a formatted device");
  if (get_u16(block.data() + 4) != kFormatVersion)
    throw CorruptionError("unsupported format version");
  std::byte digest[kDigestBytes];
  digest_into(block.first(block.size() - kDigestBytes), digest);
  if (std::memcmp(digest, block.data() + block.size() - kDigestBytes, kDigestBytes) != 0)
    throw CorruptionError("superblock digest mismatch");

  SuperblockImage sb;
  sb.params.logical_blocks = get_u64(block.data() + 8);
  sb.params.block_size = get_u32(block.data() + 16);
  sb.params.bucket_blocks = get_u32(block.data() + 20);
  sb.params.fanout = get_u32(block.data() + 24);
  sb.params.memory_buckets = get_u32(block.data() + 28);
  sb.params.mode = static_cast<OramMode>(block[32]);
  sb.params.atm_enabled = block[33] != std::byte{0};
  sb.params.cipher = static_cast<CipherKind>(block[34]);
  sb.clean = static_cast<u8>(block[35]);
  sb.params.iv_seed = get_u64(block.data() + 40);
  sb.flush_count = get_u64(block.data() + 48);
  sb.iv_counter = get_u64(block.data() + 56);
  sb.atm_root_access = get_u64(block.data() + 64);
  sb.state_generation = get_u64(block.data() + 72);
  sb.params.validate();
  return sb;
}

SuperblockImage BlockIo::read_superblock() {
  std::vector<std::byte> block(block_size_);
  dev_.read_block(geo_.superblock.start, block);
  return parse_superblock(block);
}

u64 BlockIo::state_capacity_bytes() const {
  const u64 per_block = block_size_ - kAuthBytes;
  return geo_.state.length * per_block - 8 - kDigestBytes;
}

void BlockIo::write_state_blob(std::span<const std::byte> blob, u64 generation) {
  if (blob.size() > state_capacity_bytes()) throw SizeError("state blob exceeds state region");
  // Plain image: [length u64][sha256][blob][zero pad], split over the state
  // region with a per-block derived IV so identical state re-encrypts
  // identically at the same generation.
  const u64 per_block = block_size_ - kAuthBytes;
  std::vector<std::byte> plain(geo_.state.length * per_block, std::byte{0});
  put_u64(plain.data(), blob.size());
  digest_into(blob, plain.data() + 8);
  std::memcpy(plain.data() + 8 + kDigestBytes, blob.data(), blob.size());

  std::vector<std::byte> block(block_size_);
  for (u64 s = 0; s < geo_.state.length; ++s) {
    const Iv iv = derive_iv(key_, "state", generation, s);
    std::array<u8, kAuthBytes> auth{};
    cipher_.seal(iv, std::span<const std::byte>(plain).subspan(s * per_block, per_block),
                 std::span<std::byte>(block).subspan(kAuthBytes), auth);
    std::memcpy(block.data(), auth.data(), kAuthBytes);
    dev_.write_block(geo_.state.start + s, block);
  }
}

std::vector<std::byte> BlockIo::read_state_blob(u64 generation) {
  const u64 per_block = block_size_ - kAuthBytes;
  std::vector<std::byte> plain(geo_.state.length * per_block);
  std::vector<std::byte> block(block_size_);
  for (u64 s = 0; s < geo_.state.length; ++s) {
    dev_.read_block(geo_.state.start + s, block);
    const Iv iv = derive_iv(key_, "state", generation, s);
    std::array<u8, kAuthBytes> auth;
    std::memcpy(auth.data(), block.data(), kAuthBytes);
    if (!cipher_.open(iv, std::span<const std::byte>(block).subspan(kAuthBytes),
                      std::span<std::byte>(plain).subspan(s * per_block, per_block), auth))
      throw IntegrityError("state block authentication failed");
  }
  const u64 len = get_u64(plain.data());
  if (len > state_capacity_bytes()) throw CorruptionError("state blob length out of range");
  std::vector<std::byte> blob(plain.begin() + 8 + kDigestBytes,
                              plain.begin() + 8 + kDigestBytes + static_cast<size_t>(len));
  std::byte digest[kDigestBytes];
  digest_into(blob, digest);
  if (std::memcmp(digest, plain.data() + 8, kDigestBytes) != 0)
    throw CorruptionError("state blob digest mismatch (wrong key or generation)");
  return blob;
}

}  // namespace seqoram
