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

#include "tiermem/experiments.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace tiermem {
namespace {

constexpr uint64_t kSlabPages = 1024;
constexpr uint64_t kWarmup = 20000;
constexpr uint64_t kMeasure = 40000;

uint64_t Scaled(uint64_t n, const ExperimentOptions& o) {
  return std::max<uint64_t>(
      1000, static_cast<uint64_t>(std::llround(static_cast<double>(n) * o.scale)));
}

// One simulation plus its workload, populated and settled.
class Harness {
 public:
  explicit Harness(const ScenarioConfig& config)
      : sim_(config), workload_(config.workload, sim_.device()) {
    workload_.Populate(Tick());
    sim_.Quiesce();
  }

  Simulation& sim() { return sim_; }

  Workload::Hook Tick() {
    return [this](uint64_t) { sim_.Tick(); };
  }

  MetricsReport Run(uint64_t queries, uint64_t seed) {
    return workload_.Run(queries, seed, Tick());
  }

  void Settle(ExperimentResult& out, uint64_t mismatches) {
    sim_.Quiesce();
    out.mismatches += mismatches;
    out.lost_pages += sim_.device().Census().lost;
    if (sim_.config().device.write_mode == WriteMode::kAsync) {
      out.critical_path_violations += sim_.ledger().critical_path_violations();
    }
  }

 private:
  Simulation sim_;
  Workload workload_;
};

void AddRows(ExperimentResult& out, const std::string& variant,
             const std::string& param, const std::string& phase,
             const MetricsReport& r) {
  for (const WindowMetrics& w : r.windows) {
    out.rows.push_back({variant, param, phase, w});
  }
}

void AddReport(ExperimentResult& out, const std::string& variant,
               const std::string& param, const MetricsReport& r) {
  auto add = [&](const char* metric, double v) {
    out.trend.push_back({variant, param, metric, v});
  };
  add("throughput", r.throughput);
  add("mean_latency", r.mean_latency);
  add("p99_latency", static_cast<double>(r.p99_latency));
  add("mean_write_latency", r.mean_write_latency);
  add("mean_read_latency", r.mean_read_latency);
  add("local_hit_ratio", r.local_hit_ratio());
  add("local_hits", static_cast<double>(r.local_hits));
  add("remote_hits", static_cast<double>(r.remote_hits));
  add("disk_hits", static_cast<double>(r.disk_hits));
}

ExperimentResult FitSweep(const ExperimentOptions& o) {
  ExperimentResult out;
  out.name = "fit_sweep";
  out.parameters = "fit=100,75,50,25;mix=sys;records=8192;warmup=" +
                   std::to_string(Scaled(kWarmup, o)) +
                   ";measure=" + std::to_string(Scaled(kMeasure, o));
  for (uint32_t fit : {100u, 75u, 50u, 25u}) {
    ScenarioConfig cfg = ExperimentBaseConfig(o.seed);
    cfg.fit_percent = fit;
    Harness h(cfg);
    h.Run(Scaled(kWarmup, o), o.seed + 1);
    const MetricsReport r = h.Run(Scaled(kMeasure, o), o.seed);
    const std::string param = std::to_string(fit);
    AddRows(out, "fit", param, "measure", r);
    AddReport(out, "fit", param, r);
    h.Settle(out, r.mismatches);
  }
  return out;
}

ExperimentResult MempoolSweep(const ExperimentOptions& o) {
  ExperimentResult out;
  out.name = "mempool_sweep";
  out.parameters = "pool_pages=1024,2048,4096,8192;mix=etc;records=8192";
  for (uint64_t pages : {1024u, 2048u, 4096u, 8192u}) {
    ScenarioConfig cfg = ExperimentBaseConfig(o.seed);
    cfg.workload.mix = OpMix::Etc();
    cfg.device.pool.min_pool_pages = cfg.device.pool.max_pool_pages = pages;
    cfg.dynamic_mempool = false;
    Harness h(cfg);
    h.Run(Scaled(kWarmup, o), o.seed + 1);
    const MetricsReport r = h.Run(Scaled(kMeasure, o), o.seed);
    const std::string param = std::to_string(pages);
    AddRows(out, "pool", param, "measure", r);
    AddReport(out, "pool", param, r);
    h.Settle(out, r.mismatches);
  }
  return out;
}

ExperimentResult BlocksizeSweep(const ExperimentOptions& o) {
  ExperimentResult out;
  out.name = "blocksize_sweep";
  out.parameters = "block_io_kb=128,64,32;value_bytes=131072;records=256";
  for (uint64_t kb : {128u, 64u, 32u}) {
    ScenarioConfig cfg = ExperimentBaseConfig(o.seed);
    cfg.workload.value_bytes = 128 * 1024;
    cfg.workload.record_count = 256;
    cfg.device.block_io_bytes = kb * 1024;
    cfg.fit_percent = 50;
    Harness h(cfg);
    h.Run(Scaled(kWarmup, o) / 4, o.seed + 1);
    const DeviceStats before = h.sim().device().stats();
    const MetricsReport r = h.Run(Scaled(kMeasure, o) / 4, o.seed);
    const DeviceStats& after = h.sim().device().stats();
    const std::string param = std::to_string(kb);
    AddRows(out, "block_io_kb", param, "measure", r);
    AddReport(out, "block_io_kb", param, r);
    const uint64_t requests = after.writes - before.writes;
    out.trend.push_back(
        {"block_io_kb", param, "write_latency_per_request",
         requests == 0 ? 0.0
                       : static_cast<double>(after.write_time - before.write_time) /
                             static_cast<double>(requests)});
    h.Settle(out, r.mismatches);
  }
  return out;
}

ExperimentResult LocalRemoteRatio(const ExperimentOptions& o) {
  ExperimentResult out;
  out.name = "local_remote_ratio";
  out.parameters = "local_percent=100,75,50,25;mode=async,sync;mix=sys";
  for (const char* mode : {"async", "sync"}) {
    for (uint32_t local : {100u, 75u, 50u, 25u}) {
      ScenarioConfig cfg = ExperimentBaseConfig(o.seed);
      cfg.fit_percent = local;
      cfg.device.write_mode =
          std::string_view(mode) == "sync" ? WriteMode::kSync : WriteMode::kAsync;
      Harness h(cfg);
      h.Run(Scaled(kWarmup, o), o.seed + 1);
      const MetricsReport r = h.Run(Scaled(kMeasure, o), o.seed);
      const std::string param = std::to_string(local);
      AddRows(out, mode, param, "measure", r);
      AddReport(out, mode, param, r);
      h.Settle(out, r.mismatches);
    }
  }
  return out;
}

ExperimentResult EvictionVsMigration(const ExperimentOptions& o) {
  ExperimentResult out;
  out.name = "eviction_vs_migration";
  out.parameters =
      "peers=6;replication=1;disk_backup=always;mix=sys;fit=25;steps=5";
  const uint64_t window = Scaled(kMeasure, o) / 2;
  for (const char* policy : {"delete", "migrate"}) {
    ScenarioConfig cfg = ExperimentBaseConfig(o.seed);
    cfg.peer_policy = std::string_view(policy) == "delete"
                          ? EvictionPolicy::kDelete
                          : EvictionPolicy::kMigrate;
    cfg.device.fault.disk_backup = DiskBackup::kAlways;
    cfg.fit_percent = 25;
    Harness h(cfg);
    Simulation& sim = h.sim();
    h.Run(Scaled(kWarmup, o), o.seed + 1);
    const MetricsReport base = h.Run(window, o.seed + 2);
    AddRows(out, policy, "0", "baseline", base);
    AddReport(out, policy, "0", base);
    uint64_t mismatches = base.mismatches;

    std::vector<bool> pressured(cfg.peer_count, false);
    const uint64_t slab = sim.cluster().slab_bytes();
    for (int step = 1; step <= 5; ++step) {
      // Next unpressured peer (ascending id) that holds a block: push its
      // native usage up so that exactly one block has to go.
      for (uint32_t p = 0; p < cfg.peer_count; ++p) {
        const Peer& peer = sim.cluster().peer(PeerId{p});
        if (pressured[p] || peer.block_count() == 0) continue;
        const uint64_t w = peer.config().eviction_watermark_bytes;
        sim.SetPressure(PeerId{p},
                        peer.config().total_bytes - peer.block_bytes() - w + slab);
        pressured[p] = true;
        break;
      }
      sim.Tick();
      const MetricsReport r = h.Run(window, o.seed + 2);
      mismatches += r.mismatches;
      const std::string param = std::to_string(step);
      AddRows(out, policy, param, "step", r);
      AddReport(out, policy, param, r);
      out.trend.push_back({policy, param, "throughput_ratio",
                           base.throughput == 0 ? 0.0
                                                : r.throughput / base.throughput});
    }
    h.Settle(out, mismatches);

    const auto& sessions = sim.migration().sessions();
    uint64_t connects = 0, messages_min = UINT64_MAX, messages_max = 0;
    for (const auto& [id, s] : sessions) {
      connects += s.connects;
      if (s.state != MigrationState::kDone) continue;
      messages_min = std::min(messages_min, s.protocol_messages());
      messages_max = std::max(messages_max, s.protocol_messages());
    }
    if (messages_min == UINT64_MAX) messages_min = 0;
    out.trend.push_back({policy, "all", "sessions",
                         static_cast<double>(sessions.size())});
    out.trend.push_back({policy, "all", "session_connects",
                         static_cast<double>(connects)});
    out.trend.push_back({policy, "all", "protocol_messages_min",
                         static_cast<double>(messages_min)});
    out.trend.push_back({policy, "all", "protocol_messages_max",
                         static_cast<double>(messages_max)});
    out.trend.push_back({policy, "all", "evictions",
                         static_cast<double>(sim.evict_requests() + sim.deletions())});
    out.trend.push_back({policy, "all", "bytes_moved",
                         static_cast<double>(sim.migration().stats().bytes_moved)});
  }
  return out;
}

using Runner = std::function<ExperimentResult(const ExperimentOptions&)>;

const std::map<std::string, Runner, std::less<>>& Registry() {
  static const std::map<std::string, Runner, std::less<>> registry = {
      {"fit_sweep", FitSweep},
      {"mempool_sweep", MempoolSweep},
      {"eviction_vs_migration", EvictionVsMigration},
      {"blocksize_sweep", BlocksizeSweep},
      {"local_remote_ratio", LocalRemoteRatio},
  };
  return registry;
}

}  // namespace

ScenarioConfig ExperimentBaseConfig(uint64_t seed) {
  ScenarioConfig cfg;
  cfg.placement.slab_pages = kSlabPages;
  cfg.placement.seed = seed;
  cfg.peer_count = 6;
  cfg.peer_total_bytes = 8 * kSlabPages * kDefaultPageSize;
  cfg.workload.record_count = 8192;
  cfg.workload.value_bytes = kDefaultPageSize;
  cfg.workload.mix = OpMix::Sys();
  cfg.workload.theta = 0.99;
  cfg.workload.seed = seed;
  cfg.workload.window_ops = 10000;
  cfg.device.space_bytes = 8 * kSlabPages * kDefaultPageSize;
  return cfg;
}

const std::vector<std::string>& ExperimentNames() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, runner] : Registry()) v.push_back(name);
    return v;
  }();
  return names;
}

ExperimentResult RunExperiment(std::string_view name,
                               const ExperimentOptions& options) {
  const auto& registry = Registry();
  auto it = registry.find(name);
  if (it == registry.end()) {
    throw ConfigError("unknown experiment '" + std::string(name) + "'");
  }
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult r = it->second(options);
  r.parameters += ";seed=" + std::to_string(options.seed) +
                  ";scale=" + FormatDouble(options.scale);
  r.wall_ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - start)
                  .count();
  return r;
}

std::optional<double> ExperimentResult::Get(std::string_view variant,
                                            std::string_view param,
                                            std::string_view metric) const {
  for (const TrendPoint& t : trend) {
    if (t.variant == variant && t.param == param && t.metric == metric) {
      return t.value;
    }
  }
  return std::nullopt;
}

std::string ExperimentResult::MetricsCsv() const {
  std::string s = "schema=1\nexperiment,variant,param,phase," +
                  WindowCsvHeader() + "\n";
  for (const ExperimentRow& r : rows) {
    s += name + "," + r.variant + "," + r.param + "," + r.phase + "," +
         WindowCsvRow(r.window) + "\n";
  }
  return s;
}

std::string ExperimentResult::TrendCsv() const {
  std::string s = "schema=1\nexperiment,variant,param,metric,value\n";
  for (const TrendPoint& t : trend) {
    s += name + "," + t.variant + "," + t.param + "," + t.metric + "," +
         FormatDouble(t.value) + "\n";
  }
  return s;
}

std::string ExperimentResult::Summary() const {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(Fnv1a64(parameters)));
  std::string s = "experiment: " + name + "\nparameters: " + parameters +
                  "\nconfig_hash: " + hash + "\n\n";
  // Trend table: one line per (variant, param) with its metrics.
  std::string last;
  for (const TrendPoint& t : trend) {
    const std::string key = t.variant + " " + t.param;
    if (key != last) {
      s += (last.empty() ? "" : "\n") + key + ":";
      last = key;
    }
    s += " " + t.metric + "=" + FormatDouble(t.value);
  }
  s += "\n\noracle_mismatches: " + std::to_string(mismatches) +
       "\ncritical_path_violations: " +
       std::to_string(critical_path_violations) +
       "\nlost_pages: " + std::to_string(lost_pages) +
       "\nstatus: " + (ok() ? "ok" : "INVARIANT VIOLATED") +
       "\nwall_clock_ms: " + FormatDouble(wall_ms) + "\n";
  return s;
}

void WriteExperimentOutputs(const ExperimentResult& result,
                            const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "metrics.csv", std::ios::binary) << result.MetricsCsv();
  std::ofstream(out_dir / "trend.csv", std::ios::binary) << result.TrendCsv();
  std::ofstream(out_dir / "summary.txt", std::ios::binary) << result.Summary();
}

}  // namespace tiermem
