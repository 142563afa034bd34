#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "seqoram/crypto.hpp"
#include "seqoram/errors.hpp"

using namespace seqoram;

namespace {

Key test_key(u8 fill = 0x11) {
  Key k;
  k.bytes.fill(fill);
  return k;
}

std::vector<std::byte> message(size_t n, u8 seed) {
  std::vector<std::byte> m(n);
  for (size_t i = 0; i < n; ++i) m[i] = static_cast<std::byte>((seed * 31 + i) & 0xff);
  return m;
}

}  // namespace

TEST_CASE("seal/open round-trips for every cipher profile") {
  for (CipherKind kind : {CipherKind::ctr, CipherKind::aead, CipherKind::test_stream}) {
    CAPTURE(to_string(kind));
    auto cipher = make_cipher(kind, test_key());
    const auto plain = message(4096, 7);
    std::vector<std::byte> sealed(plain.size()), opened(plain.size());
    Iv iv{};
    iv[0] = 1;
    std::array<u8, kAuthBytes> auth{};
    cipher->seal(iv, plain, sealed, auth);
    CHECK(sealed != plain);
    CHECK(cipher->open(iv, sealed, opened, auth));
    CHECK(opened == plain);
  }
}

TEST_CASE("distinct IVs give distinct ciphertexts for identical plaintext") {
  for (CipherKind kind : {CipherKind::ctr, CipherKind::aead, CipherKind::test_stream}) {
    auto cipher = make_cipher(kind, test_key());
    const auto plain = message(512, 3);
    std::vector<std::byte> a(plain.size()), b(plain.size());
    std::array<u8, kAuthBytes> auth{};
    Iv iv0{}, iv1{};
    iv1[15] = 1;
    cipher->seal(iv0, plain, a, auth);
    cipher->seal(iv1, plain, b, auth);
    CHECK(a != b);
  }
}

TEST_CASE("authenticated profile rejects tampering, stream profiles cannot") {
  const auto plain = message(512, 5);
  std::vector<std::byte> sealed(plain.size()), opened(plain.size());
  std::array<u8, kAuthBytes> auth{};
  Iv iv{};

  auto gcm = make_cipher(CipherKind::aead, test_key());
  CHECK(gcm->authenticated());
  gcm->seal(iv, plain, sealed, auth);
  sealed[100] ^= std::byte{0x01};
  CHECK_FALSE(gcm->open(iv, sealed, opened, auth));
  sealed[100] ^= std::byte{0x01};
  auto bad_auth = auth;
  bad_auth[0] ^= 1;
  CHECK_FALSE(gcm->open(iv, sealed, opened, bad_auth));

  auto ctr = make_cipher(CipherKind::ctr, test_key());
  CHECK_FALSE(ctr->authenticated());
  ctr->seal(iv, plain, sealed, auth);
  sealed[100] ^= std::byte{0x01};
  CHECK(ctr->open(iv, sealed, opened, auth));  // opens, silently corrupt
  CHECK(opened != plain);
}

TEST_CASE("different keys decrypt to different plaintext") {
  const auto plain = message(256, 9);
  std::vector<std::byte> sealed(plain.size()), opened(plain.size());
  std::array<u8, kAuthBytes> auth{};
  Iv iv{};
  make_cipher(CipherKind::ctr, test_key(0x11))->seal(iv, plain, sealed, auth);
  make_cipher(CipherKind::ctr, test_key(0x22))->open(iv, sealed, opened, auth);
  CHECK(opened != plain);
}

TEST_CASE("IV stream is deterministic and resumes from a persisted counter") {
  IvStream a(test_key(), 77);
  IvStream b(test_key(), 77);
  std::vector<Iv> first;
  for (int i = 0; i < 10; ++i) first.push_back(a.next());
  for (int i = 0; i < 10; ++i) CHECK(b.next() == first[i]);
  CHECK(a.counter() == 10);

  IvStream resumed(test_key(), 77, 5);
  CHECK(resumed.next() == first[5]);

  // Different seed or key: a different stream.
  IvStream other_seed(test_key(), 78);
  CHECK(other_seed.next() != first[0]);
  IvStream other_key(test_key(0x33), 77);
  CHECK(other_key.next() != first[0]);
}

TEST_CASE("IV stream values are pairwise distinct over a long horizon") {
  IvStream s(test_key(), 1);
  std::vector<Iv> seen;
  for (int i = 0; i < 4096; ++i) seen.push_back(s.next());
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("derived IVs are pure functions of (domain, tick, slot)") {
  const Key k = test_key();
  CHECK(derive_iv(k, "state", 4, 2) == derive_iv(k, "state", 4, 2));
  CHECK(derive_iv(k, "state", 4, 2) != derive_iv(k, "state", 4, 3));
  CHECK(derive_iv(k, "state", 4, 2) != derive_iv(k, "state", 5, 2));
  CHECK(derive_iv(k, "state", 4, 2) != derive_iv(k, "other", 4, 2));
  CHECK(derive_iv(k, "state", 4, 2) != derive_iv(test_key(0x44), "state", 4, 2));
}

TEST_CASE("hex helpers round-trip and reject junk") {
  const std::vector<u8> bytes{0x00, 0x7f, 0xab, 0xff};
  CHECK(to_hex(bytes) == "007fabff");
  CHECK(from_hex("007fabff") == bytes);
  CHECK(from_hex("007FABFF") == bytes);
  CHECK_THROWS_AS(from_hex("abc"), ParamError);
  CHECK_THROWS_AS(from_hex("zz"), ParamError);
}

TEST_CASE("keys load from hex, raw files, and the environment fallback") {
  const std::string hex(64, 'a');
  const Key k = Key::from_hex(hex);
  CHECK(k.to_hex() == hex);
  CHECK_THROWS_AS(Key::from_hex("deadbeef"), ParamError);

  const auto dir = std::filesystem::temp_directory_path();
  const auto raw_path = dir / "seqoram_key.raw";
  const auto hex_path = dir / "seqoram_key.hex";
  {
    std::ofstream raw(raw_path, std::ios::binary);
    raw.write(reinterpret_cast<const char*>(k.bytes.data()), k.bytes.size());
    std::ofstream hexf(hex_path);
    hexf << hex << "\n";
  }
  CHECK(Key::from_file(raw_path.string()).to_hex() == hex);
  CHECK(Key::from_file(hex_path.string()).to_hex() == hex);
  CHECK(Key::from_env_or_file("SEQORAM_UNSET_VAR", hex_path.string()).to_hex() == hex);
  std::filesystem::remove(raw_path);
  std::filesystem::remove(hex_path);
}
