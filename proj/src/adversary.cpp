#include "seqoram/adversary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "seqoram/errors.hpp"
#include "seqoram/geometry.hpp"
#include "seqoram/oram.hpp"

namespace seqoram {

namespace {

std::vector<std::byte> payload_from_seed(u64 seed, u32 block_size) {
  std::vector<std::byte> data(block_size);
  std::mt19937_64 rng(seed);
  for (auto& b : data) b = static_cast<std::byte>(rng() & 0xff);
  return data;
}

std::vector<std::vector<u64>> split_at_superblock(const std::vector<u64>& positions) {
  std::vector<std::vector<u64>> segments;
  std::vector<u64> current;
  for (u64 pos : positions) {
    current.push_back(pos);
    if (pos == 0) {  // superblock write: the commit mark closing a flush
      segments.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) segments.push_back(std::move(current));
  return segments;
}

std::vector<u64> unique_sorted(std::vector<u64> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Byte range of a block that holds ciphertext, as [first, last). Framing the
// adversary knows by construction is excluded: the cleartext superblock, the
// IV region (random IVs interleaved with structural padding), the per-block
// IV/auth prefixes of self-contained map blocks, and the auth prefix of
// state blocks (both prefixes are zero-filled under the CTR profile).
std::pair<u32, u32> ciphertext_span(const DeviceGeometry& geo, u64 blk) {
  const u32 bs = geo.params.block_size;
  if (geo.superblock.contains(blk) || geo.iv.contains(blk)) return {0, 0};
  if (geo.state.contains(blk)) return {kAuthBytes, bs};
  if (geo.data_capable(blk)) return {0, bs};  // payload blocks: all ciphertext
  for (const auto& per_level : geo.level_map)
    for (const auto& per_buffer : per_level)
      for (const Region& r : per_buffer)
        if (r.contains(blk)) return {kIvBytes + kAuthBytes, bs};
  return {0, 0};  // alignment gap: never written
}

}  // namespace

AccessPattern AccessPattern::parse(const std::string& text) {
  AccessPattern p;
  std::istringstream in(text);
  std::string line;
  u64 line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    PatternOp op;
    if (!(fields >> op.address >> op.payload_seed))
      throw ParamError("pattern line " + std::to_string(line_no) +
                       ": expected \"address payload_seed\"");
    std::string extra;
    if (fields >> extra)
      throw ParamError("pattern line " + std::to_string(line_no) + ": trailing data");
    p.ops.push_back(op);
  }
  return p;
}

AccessPattern AccessPattern::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot read pattern file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

void AccessPattern::validate(u64 logical_blocks) const {
  for (const PatternOp& op : ops)
    if (op.address >= logical_blocks)
      throw RangeError("pattern address " + std::to_string(op.address) +
                       " outside the logical space");
}

AccessPattern make_sequential_pattern(u64 length, u64 address_space, u64 seed) {
  AccessPattern p;
  std::mt19937_64 rng(seed);
  for (u64 i = 0; i < length; ++i) p.ops.push_back({i % address_space, rng()});
  return p;
}

AccessPattern make_random_pattern(u64 length, u64 address_space, u64 seed) {
  AccessPattern p;
  std::mt19937_64 rng(seed);
  for (u64 i = 0; i < length; ++i) p.ops.push_back({rng() % address_space, rng()});
  return p;
}

AccessPattern make_epoch_distinct_pattern(u64 length, u64 address_space,
                                          u32 epoch_size, u64 seed) {
  if (epoch_size == 0 || epoch_size > address_space)
    throw ParamError("epoch size must be in [1, address_space]");
  AccessPattern p;
  std::mt19937_64 rng(seed);
  std::vector<u64> epoch;
  while (p.ops.size() < length) {
    epoch.clear();
    for (u32 i = 0; i < epoch_size; ++i) {
      u64 addr = rng() % address_space;
      while (std::find(epoch.begin(), epoch.end(), addr) != epoch.end())
        addr = (addr + 1) % address_space;
      epoch.push_back(addr);
    }
    for (u64 addr : epoch) {
      if (p.ops.size() == length) break;
      p.ops.push_back({addr, rng()});
    }
  }
  return p;
}

double PatternRun::flush_rate() const {
  return flushes == 0 ? 0.0 : static_cast<double>(logical_writes) / static_cast<double>(flushes);
}

PatternRun run_pattern(const OramParams& params, const Key& key,
                       const AccessPattern& pattern) {
  pattern.validate(params.logical_blocks);
  const DeviceGeometry geo = DeviceGeometry::derive(params);
  BlockDevice dev(make_memory_backend(geo.physical_blocks, params.block_size));
  init_device(dev, params, key);
  auto client = open_client(dev, key);
  dev.clear_trace();

  for (const PatternOp& op : pattern.ops)
    client->write(op.address, payload_from_seed(op.payload_seed, params.block_size));

  PatternRun run;
  run.flushes = client->flush_count();
  run.logical_writes = pattern.ops.size();
  client->close();
  run.positions = dev.trace().entries;
  run.segments = split_at_superblock(run.positions);
  return run;
}

TraceComparison assert_indistinguishable(const OramParams& params, const Key& key,
                                         const AccessPattern& p0,
                                         const AccessPattern& p1) {
  if (p0.size() != p1.size())
    throw ParamError("patterns must have equal length (" + std::to_string(p0.size()) +
                     " vs " + std::to_string(p1.size()) + ")");
  const PatternRun a = run_pattern(params, key, p0);
  const PatternRun b = run_pattern(params, key, p1);

  TraceComparison cmp;
  cmp.flushes_a = a.flushes;
  cmp.flushes_b = b.flushes;
  cmp.flush_counts_equal = a.flushes == b.flushes;
  cmp.flush_rate_a = a.flush_rate();
  cmp.flush_rate_b = b.flush_rate();
  cmp.compared_segments = std::min(a.flushes, b.flushes);

  cmp.positions_identical = true;
  cmp.diff_cardinalities_equal = true;
  for (u64 s = 0; s < cmp.compared_segments && cmp.positions_identical; ++s) {
    const auto& sa = a.segments[s];
    const auto& sb = b.segments[s];
    if (unique_sorted(sa).size() != unique_sorted(sb).size())
      cmp.diff_cardinalities_equal = false;
    if (sa == sb) continue;
    cmp.positions_identical = false;
    Divergence d;
    d.segment = s;
    d.offset = ~u64{0};
    for (u64 i = 0; i < std::min(sa.size(), sb.size()); ++i)
      if (sa[i] != sb[i]) {
        d.offset = i;
        d.pos_a = sa[i];
        d.pos_b = sb[i];
        break;
      }
    cmp.divergence = d;
  }

  // The close segment (state spill + clean mark) is only comparable when the
  // two runs closed with the same staging backlog, i.e. on equal cadence.
  if (cmp.flush_counts_equal && a.segments.size() == b.segments.size())
    cmp.close_segments_identical =
        a.segments.empty() || a.segments.back() == b.segments.back();
  return cmp;
}

SnapshotStudy snapshot_study(const OramParams& params, const Key& key,
                             const AccessPattern& pattern) {
  pattern.validate(params.logical_blocks);
  const DeviceGeometry geo = DeviceGeometry::derive(params);
  BlockDevice dev(make_memory_backend(geo.physical_blocks, params.block_size));
  init_device(dev, params, key);
  auto client = open_client(dev, key);
  dev.clear_trace();

  SnapshotStudy study;
  Snapshot prev = dev.snapshot();
  u64 seen_flushes = 0;
  u64 trace_mark = 0;
  u64 ones = 0;
  u64 bits = 0;

  auto settle_interval = [&](bool count_as_flush) {
    const Snapshot cur = dev.snapshot();
    const auto& entries = dev.trace().entries;
    std::vector<u64> traced(entries.begin() + static_cast<std::ptrdiff_t>(trace_mark),
                            entries.end());
    trace_mark = entries.size();
    traced = unique_sorted(traced);
    const std::vector<u64> changed = diff_snapshots(prev, cur);

    std::vector<u64> outside;
    std::set_difference(changed.begin(), changed.end(), traced.begin(), traced.end(),
                        std::back_inserter(outside));
    std::vector<u64> unchanged;
    std::set_difference(traced.begin(), traced.end(), changed.begin(), changed.end(),
                        std::back_inserter(unchanged));
    study.changed_outside_trace += outside.size();
    study.traced_but_unchanged += unchanged.size();
    if (count_as_flush) {
      study.diff_sizes.push_back(changed.size());
      study.trace_sizes.push_back(traced.size());
    }
    for (u64 blk : changed) {
      const auto [first, last] = ciphertext_span(geo, blk);
      const auto bytes = cur.block(blk);
      for (u32 off = first; off < last; ++off) {
        ones += static_cast<u64>(std::popcount(static_cast<unsigned>(bytes[off])));
        bits += 8;
      }
    }
    prev = cur;
  };

  for (const PatternOp& op : pattern.ops) {
    client->write(op.address, payload_from_seed(op.payload_seed, params.block_size));
    if (client->flush_count() != seen_flushes) {
      seen_flushes = client->flush_count();
      settle_interval(true);
    }
  }
  study.flushes = seen_flushes;
  client->close();
  settle_interval(false);  // the close itself, checked but not a flush

  study.monobit.bits = bits;
  study.monobit.ones = ones;
  study.monobit.fraction = bits == 0 ? 0.0
                                     : static_cast<double>(ones) / static_cast<double>(bits);
  // Binomial(n, 1/2) has standard deviation sqrt(n)/2; accept within 4 sigma.
  study.monobit.pass =
      bits > 0 && std::abs(static_cast<double>(ones) - static_cast<double>(bits) / 2.0) <=
                      2.0 * std::sqrt(static_cast<double>(bits));
  return study;
}

}  // namespace seqoram
