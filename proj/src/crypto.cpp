#include "seqoram/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cstdlib>
#include <cstring>
#include <fstream>

#include "seqoram/errors.hpp"

namespace seqoram {

namespace {

struct EvpCtx {
  EVP_CIPHER_CTX* ctx;
  EvpCtx() : ctx(EVP_CIPHER_CTX_new()) {
    if (!ctx) throw StorageError("EVP_CIPHER_CTX_new failed");
  }
  ~EvpCtx() { EVP_CIPHER_CTX_free(ctx); }
};

void sha256(std::span<const u8> in, u8 out[32]) {
  SHA256(in.data(), in.size(), out);
}

class CtrCipher : public BlockCipher {
 public:
  explicit CtrCipher(const Key& key) : key_(key) {}
  CipherKind kind() const override { return CipherKind::ctr; }

  void seal(const Iv& iv, std::span<const std::byte> plain, std::span<std::byte> cipher,
            std::span<u8, kAuthBytes> auth) const override {
    run(iv, plain, cipher);
    std::memset(auth.data(), 0, kAuthBytes);
  }
  bool open(const Iv& iv, std::span<const std::byte> cipher, std::span<std::byte> plain,
            std::span<const u8, kAuthBytes>) const override {
    run(iv, cipher, plain);
    return true;
  }

 private:
  void run(const Iv& iv, std::span<const std::byte> in, std::span<std::byte> out) const {
    if (in.size() != out.size()) throw SizeError("cipher buffer size mismatch");
    EvpCtx c;
    if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_ctr(), nullptr, key_.bytes.data(), iv.data()) != 1)
      throw StorageError("EVP CTR init failed");
    int len = 0;
    if (EVP_EncryptUpdate(c.ctx, reinterpret_cast<u8*>(out.data()), &len,
                          reinterpret_cast<const u8*>(in.data()),
                          static_cast<int>(in.size())) != 1)
      throw StorageError("EVP CTR update failed");
  }

  Key key_;
};

class GcmCipher : public BlockCipher {
 public:
  explicit GcmCipher(const Key& key) : key_(key) {}
  CipherKind kind() const override { return CipherKind::aead; }

  void seal(const Iv& iv, std::span<const std::byte> plain, std::span<std::byte> cipher,
            std::span<u8, kAuthBytes> auth) const override {
    if (plain.size() != cipher.size()) throw SizeError("cipher buffer size mismatch");
    EvpCtx c;
    if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_IVLEN, kIvBytes, nullptr) != 1 ||
        EVP_EncryptInit_ex(c.ctx, nullptr, nullptr, key_.bytes.data(), iv.data()) != 1)
      throw StorageError("EVP GCM init failed");
    int len = 0;
    if (EVP_EncryptUpdate(c.ctx, reinterpret_cast<u8*>(cipher.data()), &len,
                          reinterpret_cast<const u8*>(plain.data()),
                          static_cast<int>(plain.size())) != 1)
      throw StorageError("EVP GCM update failed");
    if (EVP_EncryptFinal_ex(c.ctx, reinterpret_cast<u8*>(cipher.data()) + len, &len) != 1)
      throw StorageError("EVP GCM final failed");
    if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, kAuthBytes, auth.data()) != 1)
      throw StorageError("EVP GCM tag failed");
  }

  bool open(const Iv& iv, std::span<const std::byte> cipher, std::span<std::byte> plain,
            std::span<const u8, kAuthBytes> auth) const override {
    if (plain.size() != cipher.size()) throw SizeError("cipher buffer size mismatch");
    EvpCtx c;
    if (EVP_DecryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_IVLEN, kIvBytes, nullptr) != 1 ||
        EVP_DecryptInit_ex(c.ctx, nullptr, nullptr, key_.bytes.data(), iv.data()) != 1)
      throw StorageError("EVP GCM init failed");
    int len = 0;
    if (EVP_DecryptUpdate(c.ctx, reinterpret_cast<u8*>(plain.data()), &len,
                          reinterpret_cast<const u8*>(cipher.data()),
                          static_cast<int>(cipher.size())) != 1)
      return false;
    u8 tag[kAuthBytes];
    std::memcpy(tag, auth.data(), kAuthBytes);
    if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, kAuthBytes, tag) != 1) return false;
    return EVP_DecryptFinal_ex(c.ctx, reinterpret_cast<u8*>(plain.data()) + len, &len) == 1;
  }

 private:
  Key key_;
};

inline u64 splitmix64(u64& state) {
  u64 z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic keystream cipher for trace-focused tests: fast, keyed, and
// obviously not for production use.
class TestStreamCipher : public BlockCipher {
 public:
  explicit TestStreamCipher(const Key& key) {
    u8 digest[32];
    sha256(std::span<const u8>(key.bytes.data(), key.bytes.size()), digest);
    std::memcpy(&key_word_, digest, sizeof key_word_);
  }
  CipherKind kind() const override { return CipherKind::test_stream; }

  void seal(const Iv& iv, std::span<const std::byte> plain, std::span<std::byte> cipher,
            std::span<u8, kAuthBytes> auth) const override {
    run(iv, plain, cipher);
    std::memset(auth.data(), 0, kAuthBytes);
  }
  bool open(const Iv& iv, std::span<const std::byte> cipher, std::span<std::byte> plain,
            std::span<const u8, kAuthBytes>) const override {
    run(iv, cipher, plain);
    return true;
  }

 private:
  void run(const Iv& iv, std::span<const std::byte> in, std::span<std::byte> out) const {
    if (in.size() != out.size()) throw SizeError("cipher buffer size mismatch");
    u64 a, b;
    std::memcpy(&a, iv.data(), 8);
    std::memcpy(&b, iv.data() + 8, 8);
    u64 state = key_word_ ^ a ^ (b * 0x9e3779b97f4a7c15ULL);
    size_t i = 0;
    while (i < in.size()) {
      u64 ks = splitmix64(state);
      const size_t n = std::min<size_t>(8, in.size() - i);
      for (size_t j = 0; j < n; ++j)
        out[i + j] = in[i + j] ^ static_cast<std::byte>((ks >> (8 * j)) & 0xff);
      i += n;
    }
  }

  u64 key_word_ = 0;
};

}  // namespace

Key Key::from_hex(const std::string& hex) {
  const auto raw = seqoram::from_hex(hex);
  if (raw.size() != kKeyBytes) throw ParamError("key must be 32 bytes (64 hex chars)");
  Key k;
  std::memcpy(k.bytes.data(), raw.data(), kKeyBytes);
  return k;
}

Key Key::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read key file " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() == kKeyBytes) {
    Key k;
    std::memcpy(k.bytes.data(), raw.data(), kKeyBytes);
    return k;
  }
  std::string text(raw.begin(), raw.end());
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
    text.pop_back();
  return from_hex(text);
}

Key Key::from_env_or_file(const std::string& env_var, const std::string& path) {
  if (!path.empty()) return from_file(path);
  if (const char* env = std::getenv(env_var.c_str()); env && *env) return from_hex(env);
  throw ParamError("no key: set " + env_var + " or pass a key file");
}

std::string Key::to_hex() const { return seqoram::to_hex(bytes); }

std::unique_ptr<BlockCipher> make_cipher(CipherKind kind, const Key& key) {
  switch (kind) {
    case CipherKind::ctr: return std::make_unique<CtrCipher>(key);
    case CipherKind::aead: return std::make_unique<GcmCipher>(key);
    case CipherKind::test_stream: return std::make_unique<TestStreamCipher>(key);
  }
  throw ParamError("unknown cipher kind");
}

IvStream::IvStream(const Key& key, u64 seed, u64 counter) : seed_(seed), counter_(counter) {
  std::vector<u8> material(key.bytes.begin(), key.bytes.end());
  const char* label = "iv-stream";
  material.insert(material.end(), label, label + std::strlen(label));
  for (int i = 0; i < 8; ++i) material.push_back(static_cast<u8>((seed >> (8 * i)) & 0xff));
  u8 digest[32];
  sha256(material, digest);
  std::memcpy(prf_key_.data(), digest, kKeyBytes);
}

Iv IvStream::next() {
  u8 blockin[16] = {};
  const u64 n = counter_++;
  std::memcpy(blockin, &n, 8);
  std::memcpy(blockin + 8, &seed_, 8);
  Iv iv{};
  EvpCtx c;
  if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_ecb(), nullptr, prf_key_.data(), nullptr) != 1)
    throw StorageError("EVP ECB init failed");
  EVP_CIPHER_CTX_set_padding(c.ctx, 0);
  int len = 0;
  if (EVP_EncryptUpdate(c.ctx, iv.data(), &len, blockin, 16) != 1)
    throw StorageError("EVP ECB update failed");
  return iv;
}

Iv derive_iv(const Key& key, const std::string& domain, u64 tick, u64 slot) {
  std::vector<u8> material(key.bytes.begin(), key.bytes.end());
  material.insert(material.end(), domain.begin(), domain.end());
  for (int i = 0; i < 8; ++i) material.push_back(static_cast<u8>((tick >> (8 * i)) & 0xff));
  for (int i = 0; i < 8; ++i) material.push_back(static_cast<u8>((slot >> (8 * i)) & 0xff));
  u8 digest[32];
  sha256(material, digest);
  Iv iv;
  std::memcpy(iv.data(), digest, kIvBytes);
  return iv;
}

std::string to_hex(std::span<const u8> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (u8 b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::vector<u8> from_hex(const std::string& hex) {
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw ParamError("hex string has odd length");
  std::vector<u8> out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = nib(hex[i]), lo = nib(hex[i + 1]);
    if (hi < 0 || lo < 0) throw ParamError("invalid hex string");
    out.push_back(static_cast<u8>(hi << 4 | lo));
  }
  return out;
}

}  // namespace seqoram
