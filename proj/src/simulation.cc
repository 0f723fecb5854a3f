// Copyright 2026 The tiermem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tiermem/simulation.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tiermem {
namespace {

constexpr uint64_t kMiB = uint64_t{1} << 20;
constexpr uint64_t kKiB = uint64_t{1} << 10;

bool ParseU64(std::string_view s, uint64_t& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::optional<uint64_t> Schedule::At(SimTime t) const {
  std::optional<uint64_t> v;
  for (const auto& [time, bytes] : points) {
    if (time > t) break;
    v = bytes;
  }
  return v;
}

Schedule Schedule::ParseCsv(std::string_view text, const std::string& origin) {
  Schedule s;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    uint64_t t = 0, bytes = 0;
    if (comma == std::string::npos ||
        !ParseU64(std::string_view(line).substr(0, comma), t) ||
        !ParseU64(std::string_view(line).substr(comma + 1), bytes)) {
      if (line_no == 1 && s.points.empty()) continue;  // header
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected time,bytes");
    }
    if (!s.points.empty() && t < s.points.back().first) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": schedule times must not decrease");
    }
    s.points.emplace_back(t, bytes);
  }
  return s;
}

Schedule Schedule::LoadCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schedule " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseCsv(ss.str(), path.string());
}

void ScenarioConfig::Validate() const {
  latency.Validate();
  device.Validate();
  workload.Validate();
  if (placement.slab_pages == 0) {
    throw ConfigError("placement: slab must hold at least one page");
  }
  if (peer_count == 0) throw ConfigError("peer: count must be > 0");
  if (placement.replication > peer_count) {
    throw ConfigError("fault: replication exceeds the number of peers");
  }
  if (placement.replication != device.fault.replication_factor) {
    throw ConfigError("fault: placement and device replication disagree");
  }
  if (fit_percent && (*fit_percent == 0 || *fit_percent > 100)) {
    throw ConfigError("workload: fit_percent must lie in (0, 100]");
  }
  for (const auto& [peer, schedule] : pressure) {
    if (peer >= peer_count) {
      throw ConfigError("schedule: pressure for unknown peer " +
                        std::to_string(peer));
    }
  }
  if (working_set_pages() > device.space_bytes / device.pool.page_size) {
    throw ConfigError("workload: records do not fit the device space");
  }
}

ScenarioConfig ScenarioFromConfig(const Config& c) {
  c.CheckKnown({
      "scenario.name", "scenario.warmup_queries",
      "latency.copy", "latency.index_insert", "latency.enqueue",
      "latency.net_write", "latency.net_read", "latency.connect",
      "latency.map_block", "latency.disk_write", "latency.disk_read",
      "mempool.min_pages", "mempool.max_pages", "mempool.grow_trigger",
      "mempool.host_free_cap", "mempool.grow_step", "mempool.mode",
      "mempool.page_size",
      "device.space_bytes", "device.space_mb", "device.block_io_kb",
      "device.message_kb", "device.queue_entries", "device.write_mode",
      "device.lazy_send", "device.host_free_mb", "device.disk_path",
      "fault.replication", "fault.disk_backup",
      "placement.policy", "placement.slab_mb", "placement.slab_kb",
      "placement.seed",
      "peer.count", "peer.total_mb", "peer.eviction_watermark_slabs",
      "peer.policy",
      "workload.records", "workload.queries", "workload.value_bytes",
      "workload.theta", "workload.mix", "workload.clients", "workload.seed",
      "workload.window_ops", "workload.fit_percent",
      "schedule.host_free", "schedule.pressure.",
  });
  ScenarioConfig s;
  s.name = c.GetString("scenario.name", s.name);
  s.warmup_queries = c.GetUint("scenario.warmup_queries", 0);

  LatencyModel& l = s.latency;
  l.copy_per_page = c.GetUint("latency.copy", l.copy_per_page);
  l.index_insert = c.GetUint("latency.index_insert", l.index_insert);
  l.enqueue = c.GetUint("latency.enqueue", l.enqueue);
  l.net_write = c.GetUint("latency.net_write", l.net_write);
  l.net_read = c.GetUint("latency.net_read", l.net_read);
  l.connect = c.GetUint("latency.connect", l.connect);
  l.map_block = c.GetUint("latency.map_block", l.map_block);
  l.disk_write = c.GetUint("latency.disk_write", l.disk_write);
  l.disk_read = c.GetUint("latency.disk_read", l.disk_read);

  PoolConfig& p = s.device.pool;
  p.page_size = static_cast<uint32_t>(c.GetUint("mempool.page_size", p.page_size));
  p.min_pool_pages = c.GetUint("mempool.min_pages", p.min_pool_pages);
  p.max_pool_pages = c.GetUint("mempool.max_pages", p.max_pool_pages);
  p.grow_trigger_ratio = c.GetDouble("mempool.grow_trigger", p.grow_trigger_ratio);
  p.host_free_cap_ratio = c.GetDouble("mempool.host_free_cap", p.host_free_cap_ratio);
  p.grow_step_ratio = c.GetDouble("mempool.grow_step", p.grow_step_ratio);
  const std::string mode = c.GetString("mempool.mode", "dynamic");
  if (mode == "fixed") {
    s.dynamic_mempool = false;
  } else if (mode != "dynamic") {
    c.Fail("mempool.mode", "expected dynamic or fixed");
  }

  WorkloadSpec& w = s.workload;
  w.record_count = c.GetUint("workload.records", w.record_count);
  w.query_count = c.GetUint("workload.queries", w.query_count);
  w.value_bytes = c.GetUint("workload.value_bytes", w.value_bytes);
  w.theta = c.GetDouble("workload.theta", w.theta);
  if (auto mix = c.Find("workload.mix")) {
    try {
      w.mix = OpMix::Parse(*mix);
    } catch (const ConfigError& e) {
      c.Fail("workload.mix", e.what());
    }
  }
  w.clients = static_cast<uint32_t>(c.GetUint("workload.clients", w.clients));
  w.seed = c.GetUint("workload.seed", w.seed);
  w.window_ops = c.GetUint("workload.window_ops", w.window_ops);
  if (c.Has("workload.fit_percent")) {
    s.fit_percent = static_cast<uint32_t>(c.GetUint("workload.fit_percent", 100));
  }

  if (c.Has("placement.slab_kb")) {
    s.placement.slab_pages = c.GetUint("placement.slab_kb", 0) * kKiB / p.page_size;
  } else {
    s.placement.slab_pages =
        c.GetUint("placement.slab_mb", 1024) * kMiB / p.page_size;
  }
  if (s.placement.slab_pages == 0) {
    c.Fail(c.Has("placement.slab_kb") ? "placement.slab_kb" : "placement.slab_mb",
           "slab smaller than a page");
  }
  const std::string policy = c.GetString("placement.policy", "p2c");
  if (policy == "p2c") {
    s.placement.policy = PlacementPolicy::kPowerOfTwoChoices;
  } else if (policy == "round_robin") {
    s.placement.policy = PlacementPolicy::kRoundRobin;
  } else {
    c.Fail("placement.policy", "expected p2c or round_robin");
  }
  s.placement.seed = c.GetUint("placement.seed", w.seed);

  DeviceConfig& d = s.device;
  const uint64_t slab_bytes = s.placement.slab_pages * p.page_size;
  if (c.Has("device.space_bytes")) {
    d.space_bytes = c.GetUint("device.space_bytes", 0);
  } else if (c.Has("device.space_mb")) {
    d.space_bytes = c.GetUint("device.space_mb", 0) * kMiB;
  } else {
    const uint64_t ws = s.working_set_pages() * p.page_size;
    d.space_bytes = std::max<uint64_t>(1, CeilDiv(ws, slab_bytes)) * slab_bytes;
  }
  d.block_io_bytes = c.GetUint("device.block_io_kb", 64) * kKiB;
  d.message_bytes = c.GetUint("device.message_kb", 512) * kKiB;
  d.queue_entries = c.GetUint("device.queue_entries", d.queue_entries);
  const std::string wm = c.GetString("device.write_mode", "async");
  if (wm == "async") {
    d.write_mode = WriteMode::kAsync;
  } else if (wm == "sync") {
    d.write_mode = WriteMode::kSync;
  } else {
    c.Fail("device.write_mode", "expected async or sync");
  }
  d.lazy_send = c.GetBool("device.lazy_send", false);
  if (c.Has("device.host_free_mb")) {
    d.host_free_bytes = c.GetUint("device.host_free_mb", 0) * kMiB;
  }
  if (auto path = c.Find("device.disk_path")) s.disk_path = c.base_dir() / *path;

  const uint64_t repl = c.GetUint("fault.replication", 1);
  if (repl == 0) c.Fail("fault.replication", "must be >= 1");
  d.fault.replication_factor = static_cast<uint32_t>(repl);
  s.placement.replication = static_cast<uint32_t>(repl);
  const std::string disk = c.GetString("fault.disk_backup", "off");
  if (disk == "off") {
    d.fault.disk_backup = DiskBackup::kOff;
  } else if (disk == "always") {
    d.fault.disk_backup = DiskBackup::kAlways;
  } else if (disk == "on_remote_failure") {
    d.fault.disk_backup = DiskBackup::kOnRemoteFailure;
  } else {
    c.Fail("fault.disk_backup", "expected off, always or on_remote_failure");
  }

  s.peer_count = static_cast<uint32_t>(c.GetUint("peer.count", s.peer_count));
  s.peer_total_bytes = c.GetUint("peer.total_mb", s.peer_total_bytes / kMiB) * kMiB;
  s.eviction_watermark_slabs =
      c.GetUint("peer.eviction_watermark_slabs", s.eviction_watermark_slabs);
  const std::string pp = c.GetString("peer.policy", "migrate");
  if (pp == "migrate") {
    s.peer_policy = EvictionPolicy::kMigrate;
  } else if (pp == "delete") {
    s.peer_policy = EvictionPolicy::kDelete;
  } else {
    c.Fail("peer.policy", "expected migrate or delete");
  }

  if (auto path = c.Find("schedule.host_free")) {
    const auto full = c.base_dir() / *path;
    if (!std::filesystem::exists(full)) c.Fail("schedule.host_free", "file not found");
    s.host_free = Schedule::LoadCsv(full);
  }
  const std::string prefix = "schedule.pressure.";
  for (const auto& [key, value] : c.values()) {
    if (key.rfind(prefix, 0) != 0) continue;
    uint64_t peer = 0;
    if (!ParseU64(std::string_view(key).substr(prefix.size()), peer)) {
      c.Fail(key, "expected schedule.pressure.<peer id>");
    }
    const auto full = c.base_dir() / value;
    if (!std::filesystem::exists(full)) c.Fail(key, "file not found");
    s.pressure[static_cast<uint32_t>(peer)] = Schedule::LoadCsv(full);
  }

  try {
    s.Validate();
  } catch (const ConfigError& e) {
    throw ConfigError(c.origin() + ": " + e.what());
  }
  return s;
}

Simulation::Simulation(ScenarioConfig config)
    : config_(std::move(config)),
      cluster_(config_.placement.slab_pages * config_.device.pool.page_size,
               config_.device.pool.page_size),
      backend_(cluster_) {
  const uint32_t ps = config_.device.pool.page_size;
  const uint64_t ws = config_.working_set_pages();
  PoolConfig& pool = config_.device.pool;
  const uint64_t floor_pages = 2 * config_.device.block_io_bytes / ps;
  if (config_.fit_percent) {
    const uint64_t pages = std::max<uint64_t>(
        floor_pages, CeilDiv(ws * *config_.fit_percent, 100));
    pool.min_pool_pages = pool.max_pool_pages = pages;
  } else if (!config_.dynamic_mempool) {
    pool.min_pool_pages = pool.max_pool_pages;
  }
  if (auto v = config_.host_free.At(0)) config_.device.host_free_bytes = *v;
  config_.Validate();

  const uint64_t slab_bytes = cluster_.slab_bytes();
  for (uint32_t i = 0; i < config_.peer_count; ++i) {
    cluster_.AddPeer(config_.peer_total_bytes, config_.peer_policy,
                     config_.eviction_watermark_slabs * slab_bytes);
  }
  transport_ = std::make_unique<Transport>(SenderId{0}, backend_,
                                           config_.latency, ledger_,
                                           config_.device.message_bytes);
  placement_ = std::make_unique<Placement>(config_.placement, *transport_,
                                           config_.peer_count);
  std::unique_ptr<DiskSink> disk;
  if (config_.device.fault.disk_backup != DiskBackup::kOff) {
    if (config_.disk_path.empty()) {
      disk = std::make_unique<MemoryDiskSink>(ps);
    } else {
      disk = std::make_unique<FileDiskSink>(config_.disk_path, ps);
    }
  }
  device_ = std::make_unique<Device>(config_.device, ledger_, *transport_,
                                     *placement_, std::move(disk));
  migration_ =
      std::make_unique<MigrationCoordinator>(*device_, *transport_, *placement_);
  last_host_free_ = config_.device.host_free_bytes;
}

void Simulation::SetPressure(PeerId peer, uint64_t native_bytes) {
  cluster_.peer(peer);  // validates the id
  manual_pressure_[peer.value()] = native_bytes;
}

void Simulation::ClearPressure(PeerId peer) {
  manual_pressure_.erase(peer.value());
}

void Simulation::Route(const Peer& peer, const PressureAction& action) {
  switch (action.kind) {
    case PressureAction::Kind::kNone:
      return;
    case PressureAction::Kind::kEvictRequest:
      ++evict_requests_;
      migration_->OnEvictRequest(peer.id(), action.block);
      return;
    case PressureAction::Kind::kDeleted:
      ++deletions_;
      if (auto where = placement_->Reverse(peer.id(), action.block)) {
        device_->OnLocationLost(where->first, where->second);
      }
      return;
  }
}

void Simulation::Tick() {
  const SimTime t = now();
  device_->Pump();
  migration_->Pump(t);
  if (auto v = config_.host_free.At(t); v && v != last_host_free_) {
    last_host_free_ = v;
    device_->SetHostFree(*v);
  }
  for (uint32_t i = 0; i < config_.peer_count; ++i) {
    Peer& peer = cluster_.peer(PeerId{i});
    if (peer.failed()) continue;
    uint64_t usage = 0;
    if (auto it = manual_pressure_.find(i); it != manual_pressure_.end()) {
      usage = it->second;
    } else if (auto it = config_.pressure.find(i);
               it != config_.pressure.end()) {
      usage = it->second.At(t).value_or(0);
    } else if (peer.requested_native_usage() == 0) {
      continue;
    }
    Route(peer, peer.PressureTick(usage, t));
  }
}

void Simulation::Quiesce() {
  for (int round = 0; round < 1000; ++round) {
    migration_->Finish();
    device_->Flush();
    const uint64_t before = evict_requests_ + deletions_;
    Tick();
    if (evict_requests_ + deletions_ == before &&
        migration_->active_count() == 0 && device_->staging().empty()) {
      return;
    }
  }
}

ScenarioResult RunScenario(const ScenarioConfig& config) {
  const auto wall_start = std::chrono::steady_clock::now();
  Simulation sim(config);
  Workload workload(config.workload, sim.device());
  auto tick = [&sim](uint64_t) { sim.Tick(); };
  workload.Populate(tick);
  sim.Quiesce();
  if (config.warmup_queries > 0) {
    workload.Run(config.warmup_queries, config.workload.seed + 1, tick);
  }
  ScenarioResult result;
  result.report = workload.Run(config.workload.query_count,
                               config.workload.seed, tick);
  sim.Quiesce();
  result.report.migrations = sim.migration().stats().completed;
  result.report.evictions = sim.evict_requests() + sim.deletions();
  result.report.bytes_moved = sim.migration().stats().bytes_moved;
  result.census = sim.device().Census();
  result.critical_path_violations =
      config.device.write_mode == WriteMode::kAsync
          ? sim.ledger().critical_path_violations()
          : 0;
  result.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - wall_start)
                       .count();
  if (!config.disk_path.empty()) {
    std::error_code ec;
    std::filesystem::remove(config.disk_path, ec);
  }
  return result;
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string WindowCsvHeader() {
  return "window,ops,sim_start,sim_end,throughput,mean_latency,p99_latency,"
         "mean_write_latency,mean_read_latency,local_hits,remote_hits,"
         "disk_hits";
}

std::string WindowCsvRow(const WindowMetrics& w) {
  return std::to_string(w.index) + "," + std::to_string(w.ops) + "," +
         std::to_string(w.start) + "," + std::to_string(w.end) + "," +
         FormatDouble(w.throughput) + "," + FormatDouble(w.mean_latency) +
         "," + std::to_string(w.p99_latency) + "," +
         FormatDouble(w.mean_write_latency) + "," +
         FormatDouble(w.mean_read_latency) + "," +
         std::to_string(w.local_hits) + "," + std::to_string(w.remote_hits) +
         "," + std::to_string(w.disk_hits);
}

void WriteScenarioOutputs(const ScenarioConfig& config,
                          const ScenarioResult& result,
                          const std::string& canonical_config,
                          const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
    csv << "schema=1\n" << WindowCsvHeader() << "\n";
    for (const WindowMetrics& w : result.report.windows) {
      csv << WindowCsvRow(w) << "\n";
    }
  }
  const MetricsReport& r = result.report;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(Fnv1a64(canonical_config)));
  std::ofstream out(out_dir / "summary.txt", std::ios::binary);
  out << "scenario: " << config.name << "\n"
      << "config_hash: " << hash << "\n"
      << "ops: " << r.ops << " (gets " << r.gets << ", sets " << r.sets << ")\n"
      << "completion_time: " << r.completion_time << "\n"
      << "throughput_ops_per_s: " << FormatDouble(r.throughput) << "\n"
      << "mean_latency: " << FormatDouble(r.mean_latency) << "\n"
      << "p99_latency: " << r.p99_latency << "\n"
      << "mean_write_latency: " << FormatDouble(r.mean_write_latency) << "\n"
      << "mean_read_latency: " << FormatDouble(r.mean_read_latency) << "\n"
      << "local_hits: " << r.local_hits << "\n"
      << "remote_hits: " << r.remote_hits << "\n"
      << "disk_hits: " << r.disk_hits << "\n"
      << "local_hit_ratio: " << FormatDouble(r.local_hit_ratio()) << "\n"
      << "migrations: " << r.migrations << "\n"
      << "evictions: " << r.evictions << "\n"
      << "bytes_moved: " << r.bytes_moved << "\n"
      << "oracle_mismatches: " << r.mismatches << "\n"
      << "critical_path_violations: " << result.critical_path_violations << "\n"
      << "lost_pages: " << result.census.lost << "\n"
      << "status: " << (result.ok() ? "ok" : "INVARIANT VIOLATED") << "\n"
      << "wall_clock_ms: " << FormatDouble(result.wall_ms) << "\n";
}

}  // namespace tiermem
