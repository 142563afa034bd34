#pragma once

#include <stdexcept>
#include <string>

namespace seqoram {

// Invalid or inconsistent OramParams / CLI arguments.
struct ParamError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Logical address outside [0, N) or physical index outside the device.
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Buffer length does not match block size / serialized size.
struct SizeError : std::length_error {
  using std::length_error::length_error;
};

// Backing store I/O failure (open, read, write, truncate).
struct StorageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// On-device state fails validation: bad magic, wrong key, broken invariant.
struct CorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// AEAD tag mismatch on decryption.
struct IntegrityError : CorruptionError {
  using CorruptionError::CorruptionError;
};

// Interleaved mutation detected by the state guard.
struct ConcurrencyError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace seqoram
