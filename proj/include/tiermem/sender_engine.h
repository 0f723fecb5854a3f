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

#ifndef TIERMEM_SENDER_ENGINE_H_
#define TIERMEM_SENDER_ENGINE_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <vector>

#include "tiermem/disk_sink.h"
#include "tiermem/latency.h"
#include "tiermem/mempool.h"
#include "tiermem/page_table.h"
#include "tiermem/placement.h"
#include "tiermem/transport.h"
#include "tiermem/types.h"

namespace tiermem {

enum class DiskBackup { kOff, kAlways, kOnRemoteFailure };

struct FaultPolicy {
  uint32_t replication_factor = 1;
  DiskBackup disk_backup = DiskBackup::kOff;
};

// kSync keeps the remote send on the write's critical path: the baseline the
// asynchronous design is compared against.
enum class WriteMode { kAsync, kSync };

struct DeviceConfig {
  uint64_t space_bytes = uint64_t{1} << 30;
  PoolConfig pool;
  FaultPolicy fault;
  uint64_t block_io_bytes = 64 * 1024;
  uint64_t message_bytes = 512 * 1024;
  size_t queue_entries = 1024;
  // Drain only under memory pressure instead of as soon as possible.
  bool lazy_send = false;
  WriteMode write_mode = WriteMode::kAsync;
  uint64_t host_free_bytes = uint64_t{1} << 40;

  void Validate() const;
};

// One block-I/O write transaction: `pages` hold consecutive addresses
// starting at `base`.
struct TreeEntry {
  uint64_t sequence_no = 0;
  PageAddress base;
  std::vector<PageId> pages;
  SimTime enqueued_at = 0;
};

struct DeviceStats {
  uint64_t writes = 0;
  uint64_t reads = 0;
  uint64_t pages_written = 0;
  SimTime write_time = 0;  // foreground time spent inside Write()
  uint64_t local_hits = 0;   // pages served from the mempool
  uint64_t remote_hits = 0;  // pages read from a peer
  uint64_t disk_hits = 0;    // pages read from the disk sink
  uint64_t zero_fills = 0;   // never-written pages
  uint64_t drained_entries = 0;
  uint64_t drain_batches = 0;
  uint64_t stalls = 0;
  SimTime stall_time = 0;
  uint64_t reclaimed_pages = 0;
  uint64_t lost_locations = 0;
  uint64_t restaged_pages = 0;
};

struct ResidencyCensus {
  uint64_t written = 0;
  uint64_t local = 0;
  uint64_t remote = 0;  // not local, readable from a live peer
  uint64_t disk = 0;    // only on disk
  uint64_t lost = 0;
};

// Block-device front end of a sender node. Writes end at the mempool; a
// drainer (DrainStep) ships staged write sets to their peers afterwards.
// Reads try the mempool, then peers, then the disk sink.
class Device {
 public:
  // `disk` may be null when disk_backup is kOff.
  Device(DeviceConfig config, LatencyLedger& ledger, Transport& transport,
         Placement& placement, std::unique_ptr<DiskSink> disk);

  const DeviceConfig& config() const { return config_; }
  uint32_t page_size() const { return config_.pool.page_size; }
  uint64_t space_pages() const { return config_.space_bytes / page_size(); }

  // `data` is a whole number of pages, at most block_io_bytes long.
  void Write(PageAddress addr, std::span<const std::byte> data);
  void Read(PageAddress addr, uint64_t count, std::span<std::byte> out);

  // Ships the oldest drainable write set (coalesced with contiguous
  // successors up to message_bytes). Returns the number of entries drained.
  size_t DrainStep();
  // Drains everything that is not held by a migration.
  void Flush();
  // Runs the drainer until it catches up with the foreground clock.
  void Pump();

  void SetHostFree(uint64_t host_free_bytes);

  // Invoked when the write path is blocked and draining cannot help, e.g.
  // because every staged entry belongs to a migrating slab. Returns true if
  // it made progress.
  void set_background_hook(std::function<bool()> hook) {
    background_hook_ = std::move(hook);
  }

  // Migration support.
  void HoldSlab(SlabId slab);
  bool IsHeld(SlabId slab) const { return held_.contains(slab); }
  size_t HeldEntries(SlabId slab) const;
  // Un-holds `slab` and drains its staged entries in sequence order.
  size_t ReleaseSlab(SlabId slab);
  // A remote copy of `slab` at `index` is gone (deleted or migration
  // aborted). Unreplicated local pages are re-staged.
  void OnLocationLost(SlabId slab, size_t index);

  bool IsLocal(PageAddress addr) const { return gpt_.Find(addr).has_value(); }
  bool RemoteReady(PageAddress addr) const;
  bool OnDisk(PageAddress addr) const;

  const MemPool& pool() const { return pool_; }
  MemPool& pool() { return pool_; }
  const GlobalPageTable& page_table() const { return gpt_; }
  const std::deque<TreeEntry>& staging() const { return staging_; }
  const std::deque<TreeEntry>& reclaimable() const { return reclaimable_; }
  const DeviceStats& stats() const { return stats_; }
  LatencyLedger& ledger() { return ledger_; }
  Placement& placement() { return placement_; }

  // Sequence numbers in drain order, when enabled.
  void set_record_drain_order(bool on) { record_drain_order_ = on; }
  const std::vector<uint64_t>& drain_order() const { return drain_order_; }

  ResidencyCensus Census() const;

 private:
  enum PageBits : uint8_t { kRemote = 1, kDisk = 2, kWritten = 4 };

  void CheckRange(PageAddress addr, uint64_t count) const;
  bool EntryHeld(const TreeEntry& e) const;
  bool DrainWanted() const;
  size_t DrainAt(size_t index, Channel channel);
  void SendSegment(SlabId slab, PageAddress first,
                   std::span<const std::byte> bytes, bool& remote_ok);
  void ReplaceFailedLocation(SlabId slab, PeerId failed);
  void ForgetRemote(SlabId slab);
  PageId AllocForWrite(PageAddress addr);
  void WaitForProgress();
  void ApplyEvictions(const std::vector<Reclaimed>& evicted);
  void ShrinkIfOwed();

  DeviceConfig config_;
  LatencyLedger& ledger_;
  Transport& transport_;
  Placement& placement_;
  std::unique_ptr<DiskSink> disk_;
  MemPool pool_;
  GlobalPageTable gpt_;
  std::deque<TreeEntry> staging_;
  std::deque<TreeEntry> reclaimable_;
  std::vector<uint8_t> bits_;
  std::set<SlabId> held_;
  uint64_t next_sequence_ = 1;
  std::function<bool()> background_hook_;
  DeviceStats stats_;
  bool record_drain_order_ = false;
  std::vector<uint64_t> drain_order_;
};

}  // namespace tiermem

#endif  // TIERMEM_SENDER_ENGINE_H_
