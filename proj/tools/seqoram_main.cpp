// seqoram: command-line front end for the write-only ORAM block store.
//
// Exit codes: 0 success (and PASS verdicts); 1 FAIL verdict from a check
// (adversary divergence, fsck issues); 2 usage errors (bad flags, addresses
// out of range, invalid parameters); 3 runtime errors (I/O, corruption,
// wrong key).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "seqoram/adversary.hpp"
#include "seqoram/blockio.hpp"
#include "seqoram/errors.hpp"
#include "seqoram/geometry.hpp"
#include "seqoram/harness.hpp"
#include "seqoram/oram.hpp"

using json = nlohmann::json;
using namespace seqoram;

namespace {

// ---------------------------------------------------------------------------
// Key material: --key-file wins, then the SEQORAM_KEY environment variable.
// Accepts 64 hex characters (with optional trailing whitespace) or a raw
// 32-byte file.

Key parse_key_hex(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
    text.pop_back();
  if (text.size() != 64) throw ParamError("key must be 64 hex characters or 32 raw bytes");
  Key key;
  for (size_t i = 0; i < 32; ++i) {
    const std::string byte = text.substr(2 * i, 2);
    size_t used = 0;
    const unsigned long v = std::stoul(byte, &used, 16);
    if (used != 2) throw ParamError("key contains a non-hex character");
    key.bytes[i] = static_cast<u8>(v);
  }
  return key;
}

Key load_key(const std::string& key_file) {
  if (!key_file.empty()) {
    std::ifstream in(key_file, std::ios::binary);
    if (!in) throw StorageError("cannot read key file: " + key_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();
    if (content.size() == 32) {
      Key key;
      for (size_t i = 0; i < 32; ++i) key.bytes[i] = static_cast<u8>(content[i]);
      return key;
    }
    return parse_key_hex(content);
  }
  const char* env = std::getenv("SEQORAM_KEY");
  if (env == nullptr)
    throw ParamError("no key: pass --key-file or set SEQORAM_KEY (64 hex characters)");
  return parse_key_hex(env);
}

// Deterministic throwaway key for self-contained in-memory runs.
Key derived_key(u64 seed) {
  Key key;
  std::mt19937_64 rng(seed ^ 0x5345514f52414dull);  // "SEQORAM" tweak
  for (auto& b : key.bytes) b = static_cast<u8>(rng() & 0xff);
  return key;
}

// ---------------------------------------------------------------------------
// Device bootstrap for file backends: the superblock tells us the geometry,
// but the superblock digest covers a whole block, so read the fixed prefix
// first to learn the block size, then re-read the full block.

SuperblockImage peek_superblock(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open device: " + path);
  std::vector<char> head(512);
  in.read(head.data(), 512);
  if (in.gcount() < 512) throw CorruptionError("device too small for a superblock");
  if (std::string_view(head.data(), 4) != "SQOR")
    throw CorruptionError("not a formatted device (bad magic): " + path);
  u32 block_size = 0;
  std::memcpy(&block_size, head.data() + 16, 4);
  if (block_size < 512 || block_size > (u32{1} << 20))
    throw CorruptionError("implausible block size in superblock");
  std::vector<std::byte> block(block_size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(block.data()), block_size);
  if (static_cast<u32>(in.gcount()) < block_size)
    throw CorruptionError("device too small for a superblock");
  return BlockIo::parse_superblock(block);
}

BlockDevice open_file_device(const std::string& path) {
  const SuperblockImage sb = peek_superblock(path);
  const DeviceGeometry geo = DeviceGeometry::derive(sb.params);
  return BlockDevice(
      make_file_backend(path, geo.physical_blocks, sb.params.block_size, false));
}

// ---------------------------------------------------------------------------
// Configuration file: flat `key = value` lines (also accepts `key value`),
// '#' comments. Flags beat the file, the file beats defaults — implemented
// by applying the file to the bound variables before CLI11 overrides them.

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot read config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string key, eq, value;
    std::istringstream fields(line);
    if (!(fields >> key)) continue;
    if (!(fields >> eq)) throw ParamError("config line needs a value: " + line);
    if (eq == "=") {
      if (!(fields >> value)) throw ParamError("config line needs a value: " + line);
    } else {
      value = eq;
    }
    kv[key] = value;
  }
  return kv;
}

std::string find_config_flag(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i)
    if (std::string_view(argv[i]) == "--config") return argv[i + 1];
  return {};
}

// ---------------------------------------------------------------------------
// Shared parameter flags (init, and the self-contained in-memory runs).

struct ParamFlags {
  OramParams params;  // defaults come from OramParams itself
  std::string mode = to_string(OramParams{}.mode);
  std::string atm = OramParams{}.atm_enabled ? "on" : "off";
  std::string cipher = to_string(OramParams{}.cipher);

  void add_to(CLI::App& cmd) {
    cmd.add_option("--blocks", params.logical_blocks, "logical blocks (N)")
        ->capture_default_str();
    cmd.add_option("--block-size", params.block_size, "bytes per block (B)")
        ->capture_default_str();
    cmd.add_option("--bucket-blocks", params.bucket_blocks, "blocks per bucket (beta)")
        ->capture_default_str();
    cmd.add_option("--fanout", params.fanout, "level growth factor (amortized mode)")
        ->capture_default_str();
    cmd.add_option("--memory-buckets", params.memory_buckets,
                   "merge read-ahead buckets (amortized; 0 = auto)")
        ->capture_default_str();
    cmd.add_option("--mode", mode, "amortized | deamortized")->capture_default_str();
    cmd.add_option("--atm", atm, "access-time map: on | off")->capture_default_str();
    cmd.add_option("--cipher", cipher, "ctr | aead | test_stream")->capture_default_str();
    cmd.add_option("--iv-seed", params.iv_seed, "IV stream seed")->capture_default_str();
  }

  void apply_config(const std::map<std::string, std::string>& kv, const CLI::App& cmd) {
    auto get = [&](const char* flag, const char* key, auto& out) {
      if (cmd.count(flag) != 0) return;  // explicit flag wins
      const auto it = kv.find(key);
      if (it == kv.end()) return;
      std::istringstream(it->second) >> out;
    };
    get("--blocks", "blocks", params.logical_blocks);
    get("--block-size", "block-size", params.block_size);
    get("--bucket-blocks", "bucket-blocks", params.bucket_blocks);
    get("--fanout", "fanout", params.fanout);
    get("--memory-buckets", "memory-buckets", params.memory_buckets);
    get("--mode", "mode", mode);
    get("--atm", "atm", atm);
    get("--cipher", "cipher", cipher);
    get("--iv-seed", "iv-seed", params.iv_seed);
  }

  OramParams resolve() {
    params.mode = mode_from_string(mode);
    if (atm != "on" && atm != "off") throw ParamError("--atm must be on or off");
    params.atm_enabled = atm == "on";
    params.cipher = cipher_from_string(cipher);
    params.validate();
    return params;
  }
};

json params_json(const OramParams& p, const DeviceGeometry& geo) {
  return json{{"logical_blocks", p.logical_blocks},
              {"block_size", p.block_size},
              {"bucket_blocks", p.bucket_blocks},
              {"fanout", p.fanout},
              {"memory_buckets", p.merge_memory_buckets()},
              {"mode", to_string(p.mode)},
              {"atm", p.atm_active()},
              {"cipher", to_string(p.cipher)},
              {"level_count", p.level_count()},
              {"last_level_buckets", p.last_level_buckets()},
              {"physical_blocks", geo.physical_blocks},
              {"device_bytes", geo.physical_blocks * u64{p.block_size}}};
}

json bench_json(const BenchReport& r) {
  return json{{"workload", to_string(r.kind)},
              {"ops", r.ops},
              {"logical_blocks_moved", r.logical_blocks_moved},
              {"logical_bytes", r.logical_bytes},
              {"elapsed_seconds", r.elapsed_seconds},
              {"throughput_bytes_per_sec", r.throughput_bytes_per_sec},
              {"physical_reads", r.physical_reads},
              {"physical_writes", r.physical_writes},
              {"modeled_seeks", r.modeled_seeks},
              {"reads_per_op", r.reads_per_op},
              {"writes_per_op", r.writes_per_op},
              {"seeks_per_op", r.seeks_per_op},
              {"reads_per_block", r.reads_per_block},
              {"writes_per_block", r.writes_per_block},
              {"seeks_per_block", r.seeks_per_block},
              {"flushes", r.flushes},
              {"flush_write_histogram", r.flush_write_histogram},
              {"verified_reads", r.verified_reads},
              {"verify_failures", r.verify_failures}};
}

void print_bench_text(const BenchReport& r) {
  std::cout << "workload " << to_string(r.kind) << ": " << r.ops << " ops, "
            << r.logical_bytes << " logical bytes in " << r.elapsed_seconds << " s ("
            << r.throughput_bytes_per_sec / (1024.0 * 1024.0) << " MiB/s)\n"
            << "  physical: " << r.physical_reads << " reads, " << r.physical_writes
            << " writes, " << r.modeled_seeks << " modeled seeks\n"
            << "  per logical block: " << r.reads_per_block << " reads, "
            << r.writes_per_block << " writes, " << r.seeks_per_block << " seeks\n"
            << "  flushes: " << r.flushes;
  if (!r.flush_write_histogram.empty()) {
    std::cout << "; per-flush write counts:";
    for (const auto& [count, times] : r.flush_write_histogram)
      std::cout << " " << count << "x" << times;
  }
  std::cout << "\n";
  if (r.verified_reads != 0)
    std::cout << "  verified " << r.verified_reads << " reads, " << r.verify_failures
              << " failures\n";
}

std::string hex_preview(std::span<const std::byte> bytes, size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (size_t i = 0; i < std::min(n, bytes.size()); ++i) {
    const u8 b = static_cast<u8>(bytes[i]);
    out += digits[b >> 4];
    out += digits[b & 15];
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqoram: sequential write-only ORAM block store"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "flat key=value config file (flags override it)");

  std::map<std::string, std::string> config;
  try {
    const std::string pre = find_config_flag(argc, argv);
    if (!pre.empty()) config = read_config(pre);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::string device;
  std::string key_file;
  std::string backend = "file";
  bool as_json = false;

  auto add_common = [&](CLI::App* cmd, bool needs_device) {
    auto* dev_opt = cmd->add_option("--device", device, "device file path");
    if (needs_device) {
      if (config.count("device") != 0)
        device = config["device"];
      else
        dev_opt->required();
    }
    cmd->add_option("--key-file", key_file, "key file (64 hex chars or 32 raw bytes)");
    cmd->add_flag("--json", as_json, "machine-readable output");
    return cmd;
  };
  auto config_key_file = [&] {
    if (key_file.empty() && config.count("key-file") != 0) key_file = config.at("key-file");
  };

  // ---- init ----
  auto* init_cmd = add_common(app.add_subcommand("init", "format a new device"), true);
  ParamFlags init_params;
  init_params.add_to(*init_cmd);
  bool force = false;
  init_cmd->add_flag("--force", force, "overwrite an existing file");

  // ---- write ----
  auto* write_cmd =
      add_common(app.add_subcommand("write", "write one logical block"), true);
  u64 rw_addr = 0;
  std::string data_file;
  u64 payload_seed = 0;
  bool do_sync = false;
  write_cmd->add_option("addr", rw_addr, "logical block address")->required();
  write_cmd->add_option("--data", data_file, "payload file (exactly one block)");
  write_cmd->add_option("--payload-seed", payload_seed, "generate the payload from a seed");
  write_cmd->add_flag("--sync", do_sync, "force the staging queue out (fake padding)");

  // ---- read ----
  auto* read_cmd = add_common(app.add_subcommand("read", "read one logical block"), true);
  std::string out_file;
  read_cmd->add_option("addr", rw_addr, "logical block address")->required();
  read_cmd->add_option("--out", out_file, "write the block to this file");

  // ---- bench ----
  auto* bench_cmd = add_common(
      app.add_subcommand("bench", "run a workload and report physical costs"), false);
  ParamFlags bench_params;
  bench_params.add_to(*bench_cmd);
  bench_cmd->add_option("--backend", backend, "file | mem (mem: fresh in-memory device)")
      ->capture_default_str();
  WorkloadSpec spec;
  std::string workload = "seq_write";
  std::string io_sweep;
  bool csv = false;
  bench_cmd->add_option("--workload", workload,
                        "seq_read | seq_write | rand_read | rand_write | mixed")
      ->capture_default_str();
  bench_cmd->add_option("--ops", spec.op_count, "logical operations")->required();
  bench_cmd->add_option("--io-size", spec.io_size_blocks, "blocks per operation")
      ->capture_default_str();
  bench_cmd->add_option("--addr-start", spec.addr_start, "range start");
  bench_cmd->add_option("--addr-count", spec.addr_count, "range length (0 = to end)");
  bench_cmd->add_option("--seed", spec.seed, "workload seed")->capture_default_str();
  bench_cmd->add_option("--reopen-every", spec.reopen_every,
                        "close and reopen every this many ops (0 = never)");
  bench_cmd->add_flag("--verify", spec.verify_reads, "verify read payloads");
  bench_cmd->add_option("--io-sweep", io_sweep,
                        "comma-separated io sizes; one run per size");
  bench_cmd->add_flag("--csv", csv, "one CSV row per run");

  // ---- adversary ----
  auto* adv_cmd = add_common(
      app.add_subcommand("adversary",
                         "compare the write traces of two access patterns"),
      false);
  ParamFlags adv_params;
  adv_params.add_to(*adv_cmd);
  std::string pattern_a, pattern_b;
  u64 adv_seed = 1;
  u64 fuzz_pairs = 0;
  u64 pattern_length = 4096;
  bool study = false;
  adv_cmd->add_option("--pattern-a", pattern_a, "pattern file: one `addr seed` per line");
  adv_cmd->add_option("--pattern-b", pattern_b, "pattern file to compare against");
  adv_cmd->add_option("--seed", adv_seed, "seed for generated patterns")
      ->capture_default_str();
  adv_cmd->add_option("--fuzz-pairs", fuzz_pairs,
                      "generate and compare this many fuzzed pattern pairs");
  adv_cmd->add_option("--length", pattern_length, "length of generated patterns")
      ->capture_default_str();
  adv_cmd->add_flag("--study", study,
                    "also run the snapshot-diff freshness study on pattern A");

  // ---- stats ----
  auto* stats_cmd =
      add_common(app.add_subcommand("stats", "show device parameters and counters"), true);

  // ---- fsck ----
  auto* fsck_cmd = add_common(
      app.add_subcommand("fsck", "decrypt and verify the whole device"), true);
  u64 fsck_sample = 0;
  fsck_cmd->add_option("--sample", fsck_sample,
                       "random logical reads to exercise (0 = read every address)");

  CLI11_PARSE(app, argc, argv);

  try {
    // ---- init ----
    if (init_cmd->parsed()) {
      init_params.apply_config(config, *init_cmd);
      config_key_file();
      if (backend == "mem")
        throw ParamError("an in-memory device dies with the process; init formats files");
      const OramParams params = init_params.resolve();
      if (std::filesystem::exists(device)) {
        std::string what = "a formatted device";
        try {
          (void)peek_superblock(device);
        } catch (const std::exception&) {
          what = "an existing file that is not a formatted device";
        }
        if (!force)
          throw StorageError(device + " is " + what + "; pass --force to overwrite");
        std::filesystem::remove(device);
      }
      const Key key = load_key(key_file);
      const DeviceGeometry geo = DeviceGeometry::derive(params);
      BlockDevice dev(
          make_file_backend(device, geo.physical_blocks, params.block_size, true));
      init_device(dev, params, key);
      dev.sync();
      if (as_json)
        std::cout << params_json(params, geo).dump(2) << "\n";
      else
        std::cout << "formatted " << device << ": " << params.logical_blocks
                  << " logical blocks of " << params.block_size << " bytes, "
                  << to_string(params.mode) << " mode, access map "
                  << (params.atm_active() ? "on" : "off") << ", "
                  << geo.physical_blocks << " physical blocks\n";
      return 0;
    }

    // ---- write ----
    if (write_cmd->parsed()) {
      config_key_file();
      const Key key = load_key(key_file);
      // Range-check against the superblock before opening a client: opening
      // marks the session dirty, and a refused argument must not do that.
      const SuperblockImage sb = peek_superblock(device);
      if (rw_addr >= sb.params.logical_blocks)
        throw RangeError("address beyond the store");
      BlockDevice dev = open_file_device(device);
      auto client = open_client(dev, key);
      std::vector<std::byte> payload;
      if (!data_file.empty()) {
        std::ifstream in(data_file, std::ios::binary);
        if (!in) throw StorageError("cannot read payload file: " + data_file);
        payload.resize(client->params().block_size);
        in.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(payload.size()));
        if (static_cast<u32>(in.gcount()) != client->params().block_size)
          throw SizeError("payload file must hold exactly one block");
      } else {
        payload = workload_payload(payload_seed, rw_addr, client->params().block_size);
      }
      const u64 flushes_before = client->flush_count();
      client->write(rw_addr, payload);
      if (do_sync) client->sync();
      const bool flushed = client->flush_count() != flushes_before;
      client->close();
      dev.sync();
      if (as_json)
        std::cout << json{{"address", rw_addr}, {"flushed", flushed}}.dump(2) << "\n";
      else
        std::cout << "wrote block " << rw_addr
                  << (flushed ? " (flushed to a level)"
                              : " (staged; durable via session state, lands in a level at a"
                                " later flush)")
                  << "\n";
      return 0;
    }

    // ---- read ----
    if (read_cmd->parsed()) {
      config_key_file();
      const Key key = load_key(key_file);
      BlockDevice dev = open_file_device(device);
      auto client = open_client(dev, key, /*read_only=*/true);
      std::vector<std::byte> buf(client->params().block_size);
      const bool found = client->read(rw_addr, buf);
      client->close();
      if (!out_file.empty()) {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw StorageError("cannot write output file: " + out_file);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
      }
      if (as_json) {
        std::cout << json{{"address", rw_addr},
                          {"written", found},
                          {"first_bytes", hex_preview(buf, 32)}}
                         .dump(2)
                  << "\n";
      } else if (found) {
        std::cout << "block " << rw_addr << ": " << hex_preview(buf, 32) << "...\n";
      } else {
        std::cout << "block " << rw_addr << ": unwritten (zero block)\n";
      }
      return 0;
    }

    // ---- bench ----
    if (bench_cmd->parsed()) {
      bench_params.apply_config(config, *bench_cmd);
      config_key_file();
      spec.kind = workload_from_string(workload);
      std::vector<u32> io_sizes;
      if (io_sweep.empty()) {
        io_sizes.push_back(spec.io_size_blocks);
      } else {
        std::istringstream list(io_sweep);
        std::string item;
        while (std::getline(list, item, ','))
          io_sizes.push_back(static_cast<u32>(std::stoul(item)));
        if (io_sizes.empty()) throw ParamError("--io-sweep lists no sizes");
      }

      json all = json::array();
      if (csv)
        std::cout << "io_size,throughput_bytes_per_sec,reads_per_block,writes_per_block,"
                     "seeks_per_block,flushes\n";
      for (u32 io : io_sizes) {
        WorkloadSpec one = spec;
        one.io_size_blocks = io;
        BenchReport rep;
        if (backend == "mem") {
          const OramParams params = bench_params.resolve();
          const Key key = derived_key(one.seed);
          const DeviceGeometry geo = DeviceGeometry::derive(params);
          BlockDevice dev(make_memory_backend(geo.physical_blocks, params.block_size));
          init_device(dev, params, key);
          rep = run_bench(dev, key, one);
        } else {
          const Key key = load_key(key_file);
          BlockDevice dev = open_file_device(device);
          rep = run_bench(dev, key, one);
          dev.sync();
        }
        if (csv)
          std::cout << io << "," << rep.throughput_bytes_per_sec << ","
                    << rep.reads_per_block << "," << rep.writes_per_block << ","
                    << rep.seeks_per_block << "," << rep.flushes << "\n";
        else if (as_json)
          all.push_back(bench_json(rep));
        else
          print_bench_text(rep);
        if (rep.verify_failures != 0) return 1;
      }
      if (as_json && !csv)
        std::cout << (all.size() == 1 ? all[0] : all).dump(2) << "\n";
      return 0;
    }

    // ---- adversary ----
    if (adv_cmd->parsed()) {
      adv_params.apply_config(config, *adv_cmd);
      const OramParams params = adv_params.resolve();
      const Key key = derived_key(adv_seed);

      std::vector<std::pair<AccessPattern, AccessPattern>> pairs;
      if (!pattern_a.empty() && !pattern_b.empty()) {
        pairs.emplace_back(AccessPattern::from_file(pattern_a),
                           AccessPattern::from_file(pattern_b));
      } else if (fuzz_pairs != 0) {
        std::mt19937_64 rng(adv_seed);
        for (u64 i = 0; i < fuzz_pairs; ++i)
          pairs.emplace_back(
              make_epoch_distinct_pattern(pattern_length, params.logical_blocks,
                                          params.bucket_blocks, rng()),
              make_epoch_distinct_pattern(pattern_length, params.logical_blocks,
                                          params.bucket_blocks, rng()));
      } else {
        throw ParamError("pass --pattern-a and --pattern-b, or --fuzz-pairs");
      }

      bool all_pass = true;
      json reports = json::array();
      for (u64 i = 0; i < pairs.size(); ++i) {
        const TraceComparison cmp =
            assert_indistinguishable(params, key, pairs[i].first, pairs[i].second);
        all_pass = all_pass && cmp.pass();
        json rep{{"pair", i},
                 {"pass", cmp.pass()},
                 {"flushes_a", cmp.flushes_a},
                 {"flushes_b", cmp.flushes_b},
                 {"flush_counts_equal", cmp.flush_counts_equal},
                 {"flush_rate_a", cmp.flush_rate_a},
                 {"flush_rate_b", cmp.flush_rate_b},
                 {"compared_segments", cmp.compared_segments}};
        if (cmp.divergence.has_value())
          rep["first_divergence"] = {{"flush", cmp.divergence->segment},
                                     {"offset", cmp.divergence->offset},
                                     {"position_a", cmp.divergence->pos_a},
                                     {"position_b", cmp.divergence->pos_b}};
        reports.push_back(std::move(rep));
        if (!as_json) {
          std::cout << "pair " << i << ": " << (cmp.pass() ? "PASS" : "FAIL") << " ("
                    << cmp.compared_segments << " flush-aligned segments";
          if (!cmp.flush_counts_equal)
            std::cout << "; flush cadence differs: " << cmp.flushes_a << " vs "
                      << cmp.flushes_b << " — the documented side channel";
          std::cout << ")\n";
          if (cmp.divergence.has_value())
            std::cout << "  first divergence at flush " << cmp.divergence->segment
                      << " offset " << cmp.divergence->offset << ": position "
                      << cmp.divergence->pos_a << " vs " << cmp.divergence->pos_b << "\n";
        }
      }

      json out{{"pass", all_pass}, {"pairs", reports}};
      if (study && !pairs.empty()) {
        const SnapshotStudy s = snapshot_study(params, key, pairs.front().first);
        out["snapshot_study"] = {{"flushes", s.flushes},
                                 {"changed_outside_trace", s.changed_outside_trace},
                                 {"traced_but_unchanged", s.traced_but_unchanged},
                                 {"monobit_fraction", s.monobit.fraction},
                                 {"pass", s.pass()}};
        all_pass = all_pass && s.pass();
        if (!as_json)
          std::cout << "snapshot study: " << (s.pass() ? "PASS" : "FAIL") << " ("
                    << s.flushes << " flushes, monobit " << s.monobit.fraction << ")\n";
      }
      if (as_json) std::cout << out.dump(2) << "\n";
      if (!as_json) std::cout << (all_pass ? "PASS" : "FAIL") << "\n";
      return all_pass ? 0 : 1;
    }

    // ---- stats ----
    if (stats_cmd->parsed()) {
      const SuperblockImage sb = peek_superblock(device);
      const DeviceGeometry geo = DeviceGeometry::derive(sb.params);
      if (as_json) {
        json out = params_json(sb.params, geo);
        out["flush_count"] = sb.flush_count;
        out["clean"] = sb.clean == 1;
        out["state_generation"] = sb.state_generation;
        std::cout << out.dump(2) << "\n";
      } else {
        std::cout << device << ": " << to_string(sb.params.mode) << ", "
                  << sb.params.logical_blocks << " logical blocks x "
                  << sb.params.block_size << " B, bucket " << sb.params.bucket_blocks
                  << ", levels " << sb.params.level_count() << ", access map "
                  << (sb.params.atm_active() ? "on" : "off") << "\n"
                  << "  flushes: " << sb.flush_count << ", clean: "
                  << (sb.clean == 1 ? "yes" : "NO (crashed session)") << "\n"
                  << "  physical blocks: " << geo.physical_blocks << " ("
                  << geo.physical_blocks * u64{sb.params.block_size} << " bytes)\n";
      }
      return 0;
    }

    // ---- fsck ----
    if (fsck_cmd->parsed()) {
      config_key_file();
      const Key key = load_key(key_file);
      BlockDevice dev = open_file_device(device);
      const FsckReport rep = run_fsck(dev, key, fsck_sample);
      if (as_json) {
        std::cout << json{{"ok", rep.ok},
                          {"clean", rep.clean},
                          {"issues", rep.issues},
                          {"record_blocks_scanned", rep.record_blocks_scanned},
                          {"real_records", rep.real_records},
                          {"fake_records", rep.fake_records},
                          {"map_nodes_decoded", rep.map_nodes_decoded},
                          {"last_level_placed", rep.last_level_placed},
                          {"addresses_read", rep.addresses_read}}
                         .dump(2)
                  << "\n";
      } else {
        std::cout << device << ": " << (rep.ok ? "OK" : "ISSUES FOUND") << "\n"
                  << "  scanned " << rep.record_blocks_scanned << " record blocks ("
                  << rep.real_records << " real, " << rep.fake_records << " fake), "
                  << rep.map_nodes_decoded << " map nodes, " << rep.addresses_read
                  << " logical reads\n";
        for (const std::string& issue : rep.issues) std::cout << "  issue: " << issue << "\n";
      }
      return rep.ok ? 0 : 1;
    }
  } catch (const ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
