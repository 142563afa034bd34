#include "seqoram/blockstore.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "seqoram/errors.hpp"

namespace seqoram {

namespace {

class MemoryBackend : public BlockBackend {
 public:
  MemoryBackend(u64 blocks, u32 block_size)
      : blocks_(blocks), block_size_(block_size), bytes_(blocks * block_size) {}

  void read(u64 index, std::span<std::byte> out) override {
    std::memcpy(out.data(), bytes_.data() + index * block_size_, block_size_);
  }
  void write(u64 index, std::span<const std::byte> data) override {
    std::memcpy(bytes_.data() + index * block_size_, data.data(), block_size_);
  }
  u64 block_count() const override { return blocks_; }
  u32 block_size() const override { return block_size_; }

 private:
  u64 blocks_;
  u32 block_size_;
  std::vector<std::byte> bytes_;
};

class FileBackend : public BlockBackend {
 public:
  FileBackend(const std::string& path, u64 blocks, u32 block_size, bool create)
      : blocks_(blocks), block_size_(block_size) {
    int flags = O_RDWR | (create ? O_CREAT : 0);
    fd_ = ::open(path.c_str(), flags, 0600);
    if (fd_ < 0) throw StorageError("open " + path + ": " + std::strerror(errno));
    const off_t want = static_cast<off_t>(blocks * block_size);
    if (create) {
      if (::ftruncate(fd_, want) != 0)
        throw StorageError("ftruncate " + path + ": " + std::strerror(errno));
    } else {
      struct stat st{};
      if (::fstat(fd_, &st) != 0) throw StorageError("fstat " + path);
      if (st.st_size != want)
        throw StorageError("backing file size mismatch for " + path);
    }
  }
  ~FileBackend() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void read(u64 index, std::span<std::byte> out) override {
    if (pread_all(out.data(), block_size_, static_cast<off_t>(index) * block_size_) != 0)
      throw StorageError("pread failed");
  }
  void write(u64 index, std::span<const std::byte> data) override {
    ssize_t n = ::pwrite(fd_, data.data(), block_size_, static_cast<off_t>(index) * block_size_);
    if (n != static_cast<ssize_t>(block_size_)) throw StorageError("pwrite failed");
  }
  u64 block_count() const override { return blocks_; }
  u32 block_size() const override { return block_size_; }
  void flush() override { ::fdatasync(fd_); }

 private:
  int pread_all(std::byte* dst, size_t len, off_t off) {
    size_t done = 0;
    while (done < len) {
      ssize_t n = ::pread(fd_, dst + done, len - done, off + static_cast<off_t>(done));
      if (n < 0) return -1;
      if (n == 0) {  // sparse tail reads as zeros
        std::memset(dst + done, 0, len - done);
        return 0;
      }
      done += static_cast<size_t>(n);
    }
    return 0;
  }

  int fd_ = -1;
  u64 blocks_;
  u32 block_size_;
};

}  // namespace

std::unique_ptr<BlockBackend> make_memory_backend(u64 blocks, u32 block_size) {
  return std::make_unique<MemoryBackend>(blocks, block_size);
}

std::unique_ptr<BlockBackend> make_file_backend(const std::string& path, u64 blocks,
                                                u32 block_size, bool create) {
  return std::make_unique<FileBackend>(path, blocks, block_size, create);
}

void save_trace(const WriteTrace& t, const std::string& path, bool text) {
  std::ofstream out(path, text ? std::ios::out : (std::ios::out | std::ios::binary));
  if (!out) throw StorageError("cannot write trace file " + path);
  if (text) {
    for (u64 e : t.entries) out << e << '\n';
  } else {
    for (u64 e : t.entries) {
      std::byte le[8];
      for (int i = 0; i < 8; ++i) le[i] = static_cast<std::byte>((e >> (8 * i)) & 0xff);
      out.write(reinterpret_cast<const char*>(le), 8);
    }
  }
  if (!out) throw StorageError("short write to trace file " + path);
}

WriteTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read trace file " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  WriteTrace t;
  // Heuristic: a text trace contains only digits and newlines.
  const bool text = std::all_of(raw.begin(), raw.end(), [](char c) {
    return (c >= '0' && c <= '9') || c == '\n' || c == '\r' || c == ' ';
  });
  if (text && !raw.empty()) {
    u64 v = 0;
    bool have = false;
    for (char c : raw) {
      if (c >= '0' && c <= '9') {
        v = v * 10 + static_cast<u64>(c - '0');
        have = true;
      } else if (have) {
        t.entries.push_back(v);
        v = 0;
        have = false;
      }
    }
    if (have) t.entries.push_back(v);
  } else {
    if (raw.size() % 8 != 0) throw CorruptionError("binary trace length not a multiple of 8");
    for (size_t i = 0; i < raw.size(); i += 8) {
      u64 v = 0;
      for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<u8>(raw[i + b]);
      t.entries.push_back(v);
    }
  }
  return t;
}

std::vector<u64> diff_snapshots(const Snapshot& a, const Snapshot& b) {
  if (a.block_size != b.block_size || a.bytes.size() != b.bytes.size())
    throw SizeError("snapshot geometry mismatch");
  std::vector<u64> out;
  const u64 blocks = a.bytes.size() / a.block_size;
  for (u64 i = 0; i < blocks; ++i) {
    if (std::memcmp(a.bytes.data() + i * a.block_size, b.bytes.data() + i * a.block_size,
                    a.block_size) != 0)
      out.push_back(i);
  }
  return out;
}

BlockDevice::BlockDevice(std::unique_ptr<BlockBackend> backend) : backend_(std::move(backend)) {}

void BlockDevice::read_block(u64 index, std::span<std::byte> out) {
  if (index >= block_count()) throw RangeError("read_block index out of range");
  if (out.size() != block_size()) throw SizeError("read_block buffer size mismatch");
  stats_.record(index);
  ++stats_.reads;
  backend_->read(index, out);
}

void BlockDevice::write_block(u64 index, std::span<const std::byte> data) {
  if (index >= block_count()) throw RangeError("write_block index out of range");
  if (data.size() != block_size()) throw SizeError("write_block buffer size mismatch");
  stats_.record(index);
  ++stats_.writes;
  trace_.entries.push_back(index);
  backend_->write(index, data);
}

Snapshot BlockDevice::snapshot() {
  if (mutating_) throw ConcurrencyError("snapshot during active mutation");
  Snapshot s;
  s.sequence = ++snapshot_sequence_;
  s.block_size = block_size();
  s.bytes.resize(block_count() * block_size());
  // Raw backend copy: snapshots model an adversary image, not device I/O,
  // so they do not perturb stats or the trace.
  for (u64 i = 0; i < block_count(); ++i)
    backend_->read(i, std::span<std::byte>(s.bytes.data() + i * block_size(), block_size()));
  return s;
}

BlockDevice::MutationGuard::MutationGuard(BlockDevice& dev) : dev_(dev) {
  if (dev_.mutating_) throw ConcurrencyError("interleaved mutation rejected");
  dev_.mutating_ = true;
}

BlockDevice::MutationGuard::~MutationGuard() { dev_.mutating_ = false; }

}  // namespace seqoram
