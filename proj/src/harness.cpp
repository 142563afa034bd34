#include "seqoram/harness.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <unordered_set>

#include "seqoram/blockio.hpp"
#include "seqoram/errors.hpp"
#include "seqoram/geometry.hpp"
#include "seqoram/levelmap.hpp"
#include "seqoram/oram.hpp"

namespace seqoram {

std::string to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::seq_read: return "seq_read";
    case WorkloadKind::seq_write: return "seq_write";
    case WorkloadKind::rand_read: return "rand_read";
    case WorkloadKind::rand_write: return "rand_write";
    case WorkloadKind::mixed: return "mixed";
  }
  throw ParamError("unknown workload kind");
}

WorkloadKind workload_from_string(const std::string& s) {
  if (s == "seq_read") return WorkloadKind::seq_read;
  if (s == "seq_write") return WorkloadKind::seq_write;
  if (s == "rand_read") return WorkloadKind::rand_read;
  if (s == "rand_write") return WorkloadKind::rand_write;
  if (s == "mixed") return WorkloadKind::mixed;
  throw ParamError("unknown workload kind: " + s);
}

u64 WorkloadSpec::effective_addr_count(u64 logical_blocks) const {
  return addr_count == 0 ? logical_blocks - addr_start : addr_count;
}

void WorkloadSpec::validate(u64 logical_blocks) const {
  if (op_count == 0) throw ParamError("op_count must be positive");
  if (io_size_blocks == 0) throw ParamError("io_size_blocks must be positive");
  if (addr_start >= logical_blocks) throw ParamError("addr_start outside the logical space");
  const u64 count = effective_addr_count(logical_blocks);
  if (count == 0 || addr_start + count > logical_blocks)
    throw ParamError("address range outside the logical space");
  if (io_size_blocks > count)
    throw ParamError("io_size_blocks exceeds the address range");
}

std::vector<std::byte> workload_payload(u64 seed, u64 address, u32 block_size) {
  std::vector<std::byte> data(block_size);
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull ^ (address + 1) * 1000003ull);
  for (auto& b : data) b = static_cast<std::byte>(rng() & 0xff);
  return data;
}

namespace {

bool is_read_kind(WorkloadKind k) {
  return k == WorkloadKind::seq_read || k == WorkloadKind::rand_read;
}

bool is_seq_kind(WorkloadKind k) {
  return k == WorkloadKind::seq_read || k == WorkloadKind::seq_write;
}

}  // namespace

BenchReport run_bench(BlockDevice& dev, const Key& key, const WorkloadSpec& spec) {
  auto client = open_client(dev, key);
  const OramParams params = client->params();  // by value: client is replaced on reopen
  spec.validate(params.logical_blocks);

  const u64 range = spec.effective_addr_count(params.logical_blocks);
  const u64 io = spec.io_size_blocks;
  const u64 seq_slots = range / io;
  std::mt19937_64 rng(spec.seed);

  BenchReport report;
  report.kind = spec.kind;
  report.ops = spec.op_count;

  dev.reset_stats();
  u64 seen_flushes = client->flush_count();
  const u64 flush_base = seen_flushes;
  u64 writes_mark = 0;
  std::vector<std::byte> buf(params.block_size);
  std::unordered_set<u64> written;  // mixed-workload verify bookkeeping

  const auto started = std::chrono::steady_clock::now();
  for (u64 op = 0; op < spec.op_count; ++op) {
    if (spec.reopen_every != 0 && op != 0 && op % spec.reopen_every == 0) {
      client->close();
      client = open_client(dev, key);
    }
    bool is_write = !is_read_kind(spec.kind);
    if (spec.kind == WorkloadKind::mixed) is_write = (rng() & 1) != 0;
    u64 base;
    if (is_seq_kind(spec.kind))
      base = spec.addr_start + (op % seq_slots) * io;
    else
      base = spec.addr_start + rng() % (range - io + 1);

    for (u64 a = base; a < base + io; ++a) {
      if (is_write) {
        client->write(a, workload_payload(spec.seed, a, params.block_size));
        if (spec.kind == WorkloadKind::mixed) written.insert(a);
        if (client->flush_count() != seen_flushes) {
          seen_flushes = client->flush_count();
          const u64 writes_now = dev.stats().writes;
          report.flush_write_counts.push_back(writes_now - writes_mark);
          writes_mark = writes_now;
        }
      } else {
        const bool found = client->read(a, buf);
        if (spec.verify_reads && (spec.kind != WorkloadKind::mixed || written.count(a) != 0)) {
          ++report.verified_reads;
          if (!found || buf != workload_payload(spec.seed, a, params.block_size))
            ++report.verify_failures;
        }
      }
    }
  }
  client->close();
  const auto ended = std::chrono::steady_clock::now();

  report.logical_blocks_moved = spec.op_count * io;
  report.logical_bytes = report.logical_blocks_moved * params.block_size;
  report.elapsed_seconds = std::chrono::duration<double>(ended - started).count();
  report.throughput_bytes_per_sec =
      report.elapsed_seconds > 0.0
          ? static_cast<double>(report.logical_bytes) / report.elapsed_seconds
          : 0.0;

  const AccessStats& stats = dev.stats();
  report.physical_reads = stats.reads;
  report.physical_writes = stats.writes;
  report.modeled_seeks = stats.seeks;
  const double ops = static_cast<double>(report.ops);
  const double blocks = static_cast<double>(report.logical_blocks_moved);
  report.reads_per_op = static_cast<double>(stats.reads) / ops;
  report.writes_per_op = static_cast<double>(stats.writes) / ops;
  report.seeks_per_op = static_cast<double>(stats.seeks) / ops;
  report.reads_per_block = static_cast<double>(stats.reads) / blocks;
  report.writes_per_block = static_cast<double>(stats.writes) / blocks;
  report.seeks_per_block = static_cast<double>(stats.seeks) / blocks;
  report.flushes = seen_flushes - flush_base;
  for (u64 c : report.flush_write_counts) ++report.flush_write_histogram[c];
  return report;
}

FsckReport run_fsck(BlockDevice& dev, const Key& key, u64 read_sample) {
  FsckReport report;
  auto complain = [&](const std::string& what) { report.issues.push_back(what); };

  SuperblockImage sb;
  try {
    std::vector<std::byte> block0(dev.block_size());
    dev.read_block(0, block0);
    sb = BlockIo::parse_superblock(block0);
    sb.params.validate();
  } catch (const std::exception& e) {
    complain(std::string("superblock: ") + e.what());
    return report;
  }
  report.clean = sb.clean == 1;
  if (!report.clean) complain("device was not closed cleanly");

  const DeviceGeometry geo = DeviceGeometry::derive(sb.params);
  if (geo.physical_blocks > dev.block_count()) {
    complain("device smaller than its declared geometry");
    return report;
  }

  auto cipher = make_cipher(sb.params.cipher, key);
  IvStream ivs(key, sb.params.iv_seed);
  BlockIo io(dev, geo, *cipher, key, ivs);

  // Every data-capable record decrypts to a header with a sane kind and tag.
  const u64 total = sb.params.total_addresses();
  auto scan_region = [&](const Region& r, bool static_offsets) {
    for (u64 j = 0; j < r.length; ++j) {
      const u64 phys = r.start + j;
      try {
        const RecordHeader hdr = io.read_record_header(phys);
        ++report.record_blocks_scanned;
        if (!hdr.real()) {
          ++report.fake_records;
          continue;
        }
        ++report.real_records;
        if (hdr.tag >= total) {
          complain("record at block " + std::to_string(phys) + " has tag " +
                   std::to_string(hdr.tag) + " outside the address space");
          continue;
        }
        if (static_offsets) {
          if (hdr.tag == j)
            ++report.last_level_placed;
          else
            complain("last-level record at offset " + std::to_string(j) +
                     " holds address " + std::to_string(hdr.tag));
        }
      } catch (const std::exception& e) {
        complain("record at block " + std::to_string(phys) + ": " + e.what());
      }
    }
  };
  for (u32 level = 0; level < geo.level_data.size(); ++level)
    for (const auto& per_buffer : geo.level_data[level])
      for (const Region& r : per_buffer) scan_region(r, false);
  scan_region(geo.last_level, true);

  // Every map block decodes as a node (formatting makes empty trees walkable).
  auto scan_map = [&](const Region& r) {
    std::vector<std::byte> plain(io.self_contained_capacity());
    for (u64 j = 0; j < r.length; ++j) {
      try {
        io.read_self_contained(r.start + j, plain);
        (void)decode_map_node(plain, sb.params.bucket_blocks);
        ++report.map_nodes_decoded;
      } catch (const std::exception& e) {
        complain("map block " + std::to_string(r.start + j) + ": " + e.what());
      }
    }
  };
  for (const auto& per_level : geo.level_map)
    for (const auto& per_buffer : per_level)
      for (const Region& r : per_buffer) scan_map(r);

  // State blob integrity, then logical reads through a read-only client.
  if (report.clean) {
    try {
      (void)io.read_state_blob(sb.state_generation);
    } catch (const std::exception& e) {
      complain(std::string("state blob: ") + e.what());
    }
    try {
      auto client = open_client(dev, key, /*read_only=*/true);
      std::vector<std::byte> buf(sb.params.block_size);
      u64 sample = read_sample == 0 ? sb.params.logical_blocks
                                    : std::min(read_sample, sb.params.logical_blocks);
      std::mt19937_64 rng(1);
      for (u64 i = 0; i < sample; ++i) {
        const u64 addr = read_sample == 0 ? i : rng() % sb.params.logical_blocks;
        (void)client->read(addr, buf);
        ++report.addresses_read;
      }
      client->close();
    } catch (const std::exception& e) {
      complain(std::string("client read phase: ") + e.what());
    }
  }

  report.ok = report.issues.empty();
  return report;
}

}  // namespace seqoram
