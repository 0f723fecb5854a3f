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

#include "tiermem/sender_engine.h"

#include <algorithm>
#include <cstring>
#include <string>

namespace tiermem {

void DeviceConfig::Validate() const {
  pool.Validate();
  const uint64_t ps = pool.page_size;
  if (space_bytes == 0 || space_bytes % ps != 0) {
    throw ConfigError("device: space size must be a positive page multiple");
  }
  if (block_io_bytes == 0 || block_io_bytes % ps != 0) {
    throw ConfigError("device: block_io_size must be a positive page multiple");
  }
  if (message_bytes < block_io_bytes || message_bytes % ps != 0) {
    throw ConfigError(
        "device: message_size must be a page multiple >= block_io_size");
  }
  if (queue_entries == 0) {
    throw ConfigError("device: staging queue needs at least one entry");
  }
  if (fault.replication_factor == 0) {
    throw ConfigError("device: replication_factor must be >= 1");
  }
}

Device::Device(DeviceConfig config, LatencyLedger& ledger,
               Transport& transport, Placement& placement,
               std::unique_ptr<DiskSink> disk)
    : config_(config),
      ledger_(ledger),
      transport_(transport),
      placement_(placement),
      disk_(std::move(disk)),
      pool_(config.pool, config.host_free_bytes) {
  config_.Validate();
  if (config_.fault.disk_backup != DiskBackup::kOff && disk_ == nullptr) {
    throw ConfigError("device: disk backup enabled without a disk sink");
  }
  if (disk_ && disk_->page_size() != page_size()) {
    throw ConfigError("device: disk sink page size mismatch");
  }
  if (transport_.backend().page_size() != page_size()) {
    throw ConfigError("device: peer page size mismatch");
  }
  bits_.assign(space_pages(), 0);
}

void Device::CheckRange(PageAddress addr, uint64_t count) const {
  if (count == 0) throw RangeError("device: empty request");
  if (addr.value() >= space_pages() || count > space_pages() - addr.value()) {
    throw RangeError("device: pages [" + std::to_string(addr.value()) + ", " +
                     std::to_string(addr.value() + count) +
                     ") exceed the address space");
  }
}

bool Device::RemoteReady(PageAddress addr) const {
  return (bits_.at(addr.value()) & kRemote) != 0;
}

bool Device::OnDisk(PageAddress addr) const {
  return (bits_.at(addr.value()) & kDisk) != 0;
}

bool Device::EntryHeld(const TreeEntry& e) const {
  if (held_.empty()) return false;
  const SlabId first = placement_.SlabOf(e.base);
  const SlabId last =
      placement_.SlabOf(PageAddress{e.base.value() + e.pages.size() - 1});
  for (uint64_t s = first.value(); s <= last.value(); ++s) {
    if (held_.contains(SlabId{s})) return true;
  }
  return false;
}

void Device::ApplyEvictions(const std::vector<Reclaimed>& evicted) {
  for (const Reclaimed& r : evicted) {
    auto mapped = gpt_.Find(r.addr);
    if (mapped && *mapped == r.page) gpt_.Erase(r.addr);
    ++stats_.reclaimed_pages;
  }
}

void Device::ShrinkIfOwed() {
  if (pool_.deficit() == 0) return;
  ApplyEvictions(pool_.MaybeShrink(pool_.host_free_bytes()).evicted);
}

void Device::SetHostFree(uint64_t host_free_bytes) {
  auto result = pool_.MaybeShrink(host_free_bytes);
  ApplyEvictions(result.evicted);
  // Room may have appeared; growth itself happens lazily on allocation.
  pool_.MaybeGrow(host_free_bytes);
}

void Device::WaitForProgress() {
  const SimTime before = ledger_.now(Channel::kForeground);
  SimTime ready = 0;
  if (DrainStep() > 0) {
    ready = ledger_.now(Channel::kDrainer);
  } else if (background_hook_ && background_hook_()) {
    ready = std::max(ledger_.now(Channel::kDrainer),
                     ledger_.now(Channel::kMigration));
  } else {
    throw PoolExhaustedError(
        "device: write blocked and nothing can be drained");
  }
  ++stats_.stalls;
  if (ready > before) {
    ledger_.Charge(ChargeKind::kStall, ready - before);
    stats_.stall_time += ready - before;
  }
}

PageId Device::AllocForWrite(PageAddress addr) {
  for (;;) {
    if (auto a = pool_.TryAlloc(addr)) {
      if (a->evicted) ApplyEvictions({{a->page, *a->evicted}});
      return a->page;
    }
    WaitForProgress();
  }
}

void Device::Write(PageAddress addr, std::span<const std::byte> data) {
  const uint64_t ps = page_size();
  if (data.size() % ps != 0) {
    throw RangeError("device: write length is not a page multiple");
  }
  if (data.size() > config_.block_io_bytes) {
    throw RangeError("device: write exceeds block_io_size");
  }
  const uint64_t count = data.size() / ps;
  CheckRange(addr, count);

  LatencyLedger::ChannelScope fg(ledger_, Channel::kForeground);
  ledger_.BeginOp(OpKind::kWrite);
  const SimTime started = ledger_.now();
  try {
    while (staging_.size() >= config_.queue_entries) WaitForProgress();

    TreeEntry entry;
    entry.base = addr;
    entry.pages.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
      const PageAddress a{addr.value() + i};
      PageId id;
      if (auto hit = gpt_.Find(a)) {
        id = *hit;
      } else {
        id = AllocForWrite(a);
        gpt_.Insert(a, id);
      }
      pool_.Stage(id);
      std::memcpy(pool_.data(id).data(), data.data() + i * ps, ps);
      entry.pages.push_back(id);
      bits_[a.value()] |= kWritten;
    }
    const LatencyModel& m = transport_.model();
    ledger_.Charge(ChargeKind::kCopy, count * m.copy_per_page);
    ledger_.Charge(ChargeKind::kIndexInsert, m.index_insert);
    ledger_.Charge(ChargeKind::kEnqueue, m.enqueue);
    entry.sequence_no = next_sequence_++;
    entry.enqueued_at = ledger_.now(Channel::kForeground);
    const uint64_t seq = entry.sequence_no;
    staging_.push_back(std::move(entry));
    ++stats_.writes;
    stats_.pages_written += count;

    if (config_.write_mode == WriteMode::kSync) {
      // The baseline pays the whole remote path before acknowledging.
      for (;;) {
        size_t i = 0;
        while (i < staging_.size() && EntryHeld(staging_[i])) ++i;
        if (i == staging_.size() || staging_[i].sequence_no > seq) break;
        DrainAt(i, Channel::kForeground);
      }
    }
  } catch (...) {
    ledger_.EndOp();
    throw;
  }
  stats_.write_time += ledger_.now() - started;
  ledger_.EndOp();
}

void Device::Read(PageAddress addr, uint64_t count, std::span<std::byte> out) {
  CheckRange(addr, count);
  const uint64_t ps = page_size();
  if (out.size() < count * ps) {
    throw RangeError("device: read buffer too small");
  }
  LatencyLedger::ChannelScope fg(ledger_, Channel::kForeground);
  ledger_.BeginOp(OpKind::kRead);
  try {
    uint64_t local = 0;
    SimTime slowest_remote = 0;
    uint64_t disk_pages = 0;
    uint64_t i = 0;
    while (i < count) {
      const PageAddress a{addr.value() + i};
      std::byte* dst = out.data() + i * ps;
      if (auto hit = gpt_.Find(a)) {
        std::memcpy(dst, pool_.data(*hit).data(), ps);
        pool_.Touch(*hit);
        ++local;
        ++stats_.local_hits;
        ++i;
        continue;
      }
      const uint8_t bits = bits_[a.value()];
      if (bits & kRemote) {
        // Extend over following pages that are also remote-only in the
        // same slab; they form one request.
        const SlabId slab = placement_.SlabOf(a);
        uint64_t n = 1;
        while (i + n < count) {
          const PageAddress b{a.value() + n};
          if (placement_.SlabOf(b) != slab || gpt_.Find(b) ||
              !(bits_[b.value()] & kRemote)) {
            break;
          }
          ++n;
        }
        bool served = false;
        for (const PageLocation& loc : placement_.LookupAll(a)) {
          if (!transport_.alive(loc.peer)) continue;
          try {
            const SimTime cost = transport_.ReadPages(
                loc.peer, loc.block, loc.offset, n,
                out.subspan(i * ps, n * ps), /*charge=*/false);
            slowest_remote = std::max(slowest_remote, cost);
            served = true;
            break;
          } catch (const TransportError&) {
          }
        }
        if (served) {
          stats_.remote_hits += n;
          i += n;
          continue;
        }
      }
      if (bits & kDisk) {
        disk_->Read(a, 1, out.subspan(i * ps, ps));
        ++disk_pages;
        ++stats_.disk_hits;
        ++i;
        continue;
      }
      if (bits & kWritten) {
        throw DataLossError("device: page " + std::to_string(a.value()) +
                            " has no surviving copy");
      }
      std::memset(dst, 0, ps);
      ++stats_.zero_fills;
      ++local;
      ++i;
    }
    const LatencyModel& m = transport_.model();
    if (local > 0) ledger_.Charge(ChargeKind::kCopy, local * m.copy_per_page);
    if (slowest_remote > 0) ledger_.Charge(ChargeKind::kNetRead, slowest_remote);
    if (disk_pages > 0) {
      ledger_.Charge(ChargeKind::kDiskRead, disk_pages * m.disk_read);
    }
    ++stats_.reads;
  } catch (...) {
    ledger_.EndOp();
    throw;
  }
  ledger_.EndOp();
}

bool Device::DrainWanted() const {
  if (!config_.lazy_send) return true;
  if (staging_.size() >= config_.queue_entries) return true;
  if (pool_.deficit() > 0) return true;
  const uint64_t limit = std::min(config_.pool.max_pool_pages,
                                  pool_.HostCap(pool_.host_free_bytes()));
  return static_cast<double>(pool_.used()) >=
             config_.pool.grow_trigger_ratio *
                 static_cast<double>(pool_.size()) &&
         pool_.size() >= limit;
}

size_t Device::DrainStep() {
  for (size_t i = 0; i < staging_.size(); ++i) {
    if (!EntryHeld(staging_[i])) return DrainAt(i, Channel::kDrainer);
  }
  return 0;
}

void Device::ForgetRemote(SlabId slab) {
  const uint64_t lo = slab.value() * placement_.slab_pages();
  const uint64_t hi = std::min<uint64_t>(lo + placement_.slab_pages(),
                                         space_pages());
  for (uint64_t a = lo; a < hi; ++a) bits_[a] &= ~kRemote;
  if (hi <= lo) return;
  // Local copies that were only protected by the lost remote copy must go
  // out again before their slots may be reclaimed.
  std::vector<std::pair<PageAddress, PageId>> exposed;
  gpt_.ForEachInRange(lo, hi - 1, [&](PageAddress a, PageId id) {
    const PoolPage& p = pool_.page(id);
    if (p.reclaimable_flag && !(bits_[a.value()] & kDisk)) {
      exposed.emplace_back(a, id);
    }
  });
  for (const auto& [a, id] : exposed) {
    pool_.Stage(id);
    TreeEntry e;
    e.sequence_no = next_sequence_++;
    e.base = a;
    e.pages = {id};
    e.enqueued_at = ledger_.now();
    staging_.push_back(std::move(e));
    ++stats_.restaged_pages;
  }
}

void Device::OnLocationLost(SlabId slab, size_t index) {
  ++stats_.lost_locations;
  if (placement_.DropLocation(slab, index)) ForgetRemote(slab);
}

void Device::ReplaceFailedLocation(SlabId slab, PeerId failed) {
  const SlabMapping* m = placement_.Find(slab);
  if (m == nullptr) return;
  size_t index = m->locations.size();
  for (size_t i = 0; i < m->locations.size(); ++i) {
    if (m->locations[i].peer == failed) index = i;
  }
  if (index == m->locations.size()) return;
  const bool unmapped = placement_.DropLocation(slab, index);
  ++stats_.lost_locations;
  if (config_.fault.disk_backup != DiskBackup::kOff) {
    if (unmapped) ForgetRemote(slab);
    return;
  }
  if (unmapped) {
    // Nothing survives to re-seed from; the next send maps the slab anew.
    ForgetRemote(slab);
    return;
  }
  std::set<PeerId> exclude{failed};
  std::optional<Location> survivor;
  for (const Location& loc : placement_.Find(slab)->locations) {
    exclude.insert(loc.peer);
    if (!survivor && transport_.alive(loc.peer)) survivor = loc;
  }
  Location fresh;
  try {
    fresh = placement_.AllocateBlock(exclude);
  } catch (const CapacityError&) {
    return;
  }
  if (survivor) {
    transport_.CopyPages(survivor->peer, survivor->block, fresh.peer,
                         fresh.block, 0, placement_.slab_pages());
  }
  placement_.AddLocation(slab, fresh);
}

void Device::SendSegment(SlabId slab, PageAddress first,
                         std::span<const std::byte> bytes, bool& remote_ok) {
  remote_ok = false;
  const SlabMapping* m = nullptr;
  try {
    m = &placement_.MapSlab(slab);
  } catch (const CapacityError&) {
    if (config_.fault.disk_backup == DiskBackup::kOff) throw;
    return;
  } catch (const TransportError&) {
    if (config_.fault.disk_backup == DiskBackup::kOff) throw;
    return;
  }
  const uint64_t offset = placement_.OffsetInSlab(first);
  std::vector<PeerId> failed;
  size_t ok = 0;
  for (const Location& loc : m->locations) {
    try {
      transport_.Connect(loc.peer);
      transport_.WritePages(loc.peer, loc.block, offset, bytes);
      ++ok;
    } catch (const TransportError&) {
      failed.push_back(loc.peer);
    }
  }
  for (PeerId p : failed) ReplaceFailedLocation(slab, p);
  if (!failed.empty() && config_.fault.disk_backup == DiskBackup::kOff) {
    // Replacement locations were re-seeded from survivors; they still need
    // this write.
    ok = 0;
    try {
      m = &placement_.MapSlab(slab);
    } catch (const CapacityError&) {
      m = nullptr;
    }
    if (m != nullptr) {
      for (const Location& loc : m->locations) {
        try {
          transport_.Connect(loc.peer);
          transport_.WritePages(loc.peer, loc.block, offset, bytes);
          ++ok;
        } catch (const TransportError&) {
        }
      }
    }
  }
  remote_ok = ok > 0;
}

size_t Device::DrainAt(size_t index, Channel channel) {
  if (index >= staging_.size()) return 0;
  LatencyLedger::ChannelScope scope(ledger_, channel);
  const uint64_t ps = page_size();

  // Coalesce contiguous, unheld successors into one message.
  size_t end = index + 1;
  uint64_t bytes = staging_[index].pages.size() * ps;
  while (end < staging_.size()) {
    const TreeEntry& prev = staging_[end - 1];
    const TreeEntry& next = staging_[end];
    if (next.base.value() != prev.base.value() + prev.pages.size()) break;
    if (bytes + next.pages.size() * ps > config_.message_bytes) break;
    if (EntryHeld(next)) break;
    bytes += next.pages.size() * ps;
    ++end;
  }
  ledger_.AdvanceTo(channel, staging_[end - 1].enqueued_at);

  // Gather the current slot contents; in-place updates mean the latest
  // write of each address is what goes out.
  std::vector<PageId> pages;
  for (size_t i = index; i < end; ++i) {
    pages.insert(pages.end(), staging_[i].pages.begin(),
                 staging_[i].pages.end());
  }
  const PageAddress base = staging_[index].base;
  std::vector<std::byte> buffer(pages.size() * ps);
  for (size_t k = 0; k < pages.size(); ++k) {
    std::memcpy(buffer.data() + k * ps, pool_.data(pages[k]).data(), ps);
  }

  bool all_remote = true;
  uint64_t k = 0;
  while (k < pages.size()) {
    const PageAddress a{base.value() + k};
    const SlabId slab = placement_.SlabOf(a);
    const uint64_t room = placement_.slab_pages() - placement_.OffsetInSlab(a);
    const uint64_t n = std::min<uint64_t>(room, pages.size() - k);
    bool ok = false;
    SendSegment(slab, a, std::span(buffer).subspan(k * ps, n * ps), ok);
    if (ok) {
      for (uint64_t j = 0; j < n; ++j) bits_[a.value() + j] |= kRemote;
    } else {
      all_remote = false;
    }
    k += n;
  }

  const DiskBackup policy = config_.fault.disk_backup;
  if (policy == DiskBackup::kAlways ||
      (policy == DiskBackup::kOnRemoteFailure && !all_remote)) {
    const SimTime start = ledger_.now(channel);
    LatencyLedger::ChannelScope disk(ledger_, Channel::kDisk);
    ledger_.AdvanceTo(Channel::kDisk, start);
    disk_->Write(base, buffer);
    ledger_.Charge(ChargeKind::kDiskWrite,
                   (end - index) * transport_.model().disk_write);
    for (uint64_t j = 0; j < pages.size(); ++j) {
      bits_[base.value() + j] |= kDisk;
    }
  } else if (!all_remote) {
    throw TransportError("device: no sink accepted write set " +
                         std::to_string(staging_[index].sequence_no));
  }

  for (PageId id : pages) pool_.Acknowledge(id);
  for (size_t i = index; i < end; ++i) {
    if (record_drain_order_) drain_order_.push_back(staging_[i].sequence_no);
    if (reclaimable_.size() >= config_.queue_entries) {
      reclaimable_.pop_front();
    }
    reclaimable_.push_back(std::move(staging_[i]));
  }
  staging_.erase(staging_.begin() + static_cast<ptrdiff_t>(index),
                 staging_.begin() + static_cast<ptrdiff_t>(end));
  const size_t drained = end - index;
  stats_.drained_entries += drained;
  ++stats_.drain_batches;
  ShrinkIfOwed();
  return drained;
}

void Device::Flush() {
  while (DrainStep() > 0) {
  }
}

void Device::Pump() {
  const SimTime horizon = ledger_.now(Channel::kForeground);
  while (DrainWanted()) {
    size_t i = 0;
    while (i < staging_.size() && EntryHeld(staging_[i])) ++i;
    if (i == staging_.size()) break;
    const SimTime start =
        std::max(ledger_.now(Channel::kDrainer), staging_[i].enqueued_at);
    if (start > horizon) break;
    DrainAt(i, Channel::kDrainer);
  }
}

void Device::HoldSlab(SlabId slab) { held_.insert(slab); }

size_t Device::HeldEntries(SlabId slab) const {
  size_t n = 0;
  for (const TreeEntry& e : staging_) {
    const SlabId first = placement_.SlabOf(e.base);
    const SlabId last =
        placement_.SlabOf(PageAddress{e.base.value() + e.pages.size() - 1});
    if (first <= slab && slab <= last) ++n;
  }
  return n;
}

size_t Device::ReleaseSlab(SlabId slab) {
  held_.erase(slab);
  size_t drained = 0;
  for (;;) {
    size_t i = 0;
    for (; i < staging_.size(); ++i) {
      const TreeEntry& e = staging_[i];
      const SlabId first = placement_.SlabOf(e.base);
      const SlabId last =
          placement_.SlabOf(PageAddress{e.base.value() + e.pages.size() - 1});
      if (first <= slab && slab <= last && !EntryHeld(e)) break;
    }
    if (i == staging_.size()) break;
    drained += DrainAt(i, Channel::kMigration);
  }
  return drained;
}

ResidencyCensus Device::Census() const {
  ResidencyCensus c;
  for (uint64_t a = 0; a < bits_.size(); ++a) {
    const uint8_t b = bits_[a];
    if (!(b & kWritten)) continue;
    ++c.written;
    const PageAddress addr{a};
    if (gpt_.Find(addr)) {
      ++c.local;
      continue;
    }
    bool remote = false;
    if (b & kRemote) {
      for (const PageLocation& loc : placement_.LookupAll(addr)) {
        if (transport_.alive(loc.peer)) remote = true;
      }
    }
    if (remote) {
      ++c.remote;
    } else if (b & kDisk) {
      ++c.disk;
    } else {
      ++c.lost;
    }
  }
  return c;
}

}  // namespace tiermem
