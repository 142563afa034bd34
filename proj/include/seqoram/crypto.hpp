#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "seqoram/params.hpp"

namespace seqoram {

inline constexpr size_t kKeyBytes = 32;
inline constexpr size_t kIvBytes = 16;
inline constexpr size_t kAuthBytes = 16;

struct Key {
  std::array<u8, kKeyBytes> bytes{};

  static Key from_hex(const std::string& hex);
  static Key from_file(const std::string& path);      // 32 raw bytes or one hex line
  static Key from_env_or_file(const std::string& env_var, const std::string& path);
  std::string to_hex() const;
};

using Iv = std::array<u8, kIvBytes>;

// Symmetric block sealer. seal() encrypts `plain` into `cipher` (same length)
// under a caller-supplied fresh IV; AEAD profiles also emit a 16-byte tag.
// open() returns false on tag mismatch (AEAD); stream profiles always succeed.
class BlockCipher {
 public:
  virtual ~BlockCipher() = default;
  virtual CipherKind kind() const = 0;
  virtual void seal(const Iv& iv, std::span<const std::byte> plain, std::span<std::byte> cipher,
                    std::span<u8, kAuthBytes> auth) const = 0;
  virtual bool open(const Iv& iv, std::span<const std::byte> cipher, std::span<std::byte> plain,
                    std::span<const u8, kAuthBytes> auth) const = 0;

  bool authenticated() const { return kind() == CipherKind::aead; }
};

std::unique_ptr<BlockCipher> make_cipher(CipherKind kind, const Key& key);

// Deterministic IV source: iv(n) = PRF(key, seed, n). Reproducible across
// reopen by persisting the counter; uniqueness holds as long as the counter
// never repeats. IVs are public on disk, so determinism costs nothing in the
// snapshot model.
class IvStream {
 public:
  IvStream(const Key& key, u64 seed, u64 counter = 0);
  Iv next();
  u64 counter() const { return counter_; }
  void reset(u64 counter) { counter_ = counter; }

 private:
  std::array<u8, kKeyBytes> prf_key_{};
  u64 seed_ = 0;
  u64 counter_ = 0;
};

// Derived single-use IV for superblock/state encryption: a pure function of
// (key, domain, tick, slot) so that rewriting identical state at the same
// tick produces identical bytes (reopen determinism).
Iv derive_iv(const Key& key, const std::string& domain, u64 tick, u64 slot);

std::string to_hex(std::span<const u8> bytes);
std::vector<u8> from_hex(const std::string& hex);

}  // namespace seqoram
