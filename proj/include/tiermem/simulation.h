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

#ifndef TIERMEM_SIMULATION_H_
#define TIERMEM_SIMULATION_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tiermem/config.h"
#include "tiermem/latency.h"
#include "tiermem/migration.h"
#include "tiermem/placement.h"
#include "tiermem/remote_store.h"
#include "tiermem/sender_engine.h"
#include "tiermem/transport.h"
#include "tiermem/workload.h"

namespace tiermem {

// Step function of (time, bytes) points; the value at t is that of the last
// point with time <= t.
struct Schedule {
  std::vector<std::pair<SimTime, uint64_t>> points;

  std::optional<uint64_t> At(SimTime t) const;
  bool empty() const { return points.empty(); }
  // "time,bytes" per line; a non-numeric first line is taken as a header.
  static Schedule ParseCsv(std::string_view text, const std::string& origin);
  static Schedule LoadCsv(const std::filesystem::path& path);
};

struct ScenarioConfig {
  std::string name = "scenario";
  LatencyModel latency;
  DeviceConfig device;
  PlacementConfig placement;
  uint32_t peer_count = 6;
  uint64_t peer_total_bytes = uint64_t{64} << 20;
  uint64_t eviction_watermark_slabs = 1;
  EvictionPolicy peer_policy = EvictionPolicy::kMigrate;
  WorkloadSpec workload;
  // Pool fixed at this share of the working set when set.
  std::optional<uint32_t> fit_percent;
  bool dynamic_mempool = true;
  Schedule host_free;
  std::map<uint32_t, Schedule> pressure;
  // Backing file of the disk sink; empty keeps it in memory.
  std::filesystem::path disk_path;
  uint64_t warmup_queries = 0;

  void Validate() const;
  uint64_t working_set_pages() const {
    return workload.record_count *
           workload.pages_per_value(device.pool.page_size);
  }
};

// Reads every scenario key; see README for the list.
ScenarioConfig ScenarioFromConfig(const Config& config);

// One sender with its device, N peers, and the glue between them: pressure
// schedules, eviction routing and background progress.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig config);
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const ScenarioConfig& config() const { return config_; }
  Cluster& cluster() { return cluster_; }
  LatencyLedger& ledger() { return ledger_; }
  Transport& transport() { return *transport_; }
  Placement& placement() { return *placement_; }
  Device& device() { return *device_; }
  MigrationCoordinator& migration() { return *migration_; }

  SimTime now() const { return ledger_.now(Channel::kForeground); }

  // Overrides the schedule for one peer's native memory usage.
  void SetPressure(PeerId peer, uint64_t native_bytes);
  void ClearPressure(PeerId peer);

  // Lets background work catch up with the foreground clock and applies
  // the schedules once.
  void Tick();
  // Drains, finishes migrations and ticks until nothing is pending.
  void Quiesce();

  uint64_t evict_requests() const { return evict_requests_; }
  uint64_t deletions() const { return deletions_; }

 private:
  void Route(const Peer& peer, const PressureAction& action);

  ScenarioConfig config_;
  Cluster cluster_;
  InProcessBackend backend_;
  LatencyLedger ledger_;
  std::unique_ptr<Transport> transport_;
  std::unique_ptr<Placement> placement_;
  std::unique_ptr<Device> device_;
  std::unique_ptr<MigrationCoordinator> migration_;
  std::map<uint32_t, uint64_t> manual_pressure_;
  std::optional<uint64_t> last_host_free_;
  uint64_t evict_requests_ = 0;
  uint64_t deletions_ = 0;
};

struct ScenarioResult {
  MetricsReport report;
  ResidencyCensus census;
  uint64_t critical_path_violations = 0;
  uint64_t config_hash = 0;
  double wall_ms = 0;

  // Invariants the runner enforces; false makes `bench run` exit nonzero.
  bool ok() const {
    return critical_path_violations == 0 && report.mismatches == 0 &&
           census.lost == 0;
  }
};

// Populates, warms up, runs the workload and quiesces.
ScenarioResult RunScenario(const ScenarioConfig& config);

std::string WindowCsvHeader();
std::string WindowCsvRow(const WindowMetrics& w);
std::string FormatDouble(double v);

// metrics.csv and summary.txt under `out_dir`.
void WriteScenarioOutputs(const ScenarioConfig& config,
                          const ScenarioResult& result,
                          const std::string& canonical_config,
                          const std::filesystem::path& out_dir);

}  // namespace tiermem

#endif  // TIERMEM_SIMULATION_H_
