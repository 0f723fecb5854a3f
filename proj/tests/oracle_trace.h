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

#ifndef TIERMEM_TESTS_ORACLE_TRACE_H_
#define TIERMEM_TESTS_ORACLE_TRACE_H_

#include <cstring>
#include <map>
#include <vector>

#include "test_util.h"
#include "tiermem/migration.h"
#include "tiermem/random.h"

namespace tiermem::testing {

// Page content for (address, version): a repeated 64-bit stamp.
inline void FillStamp(std::byte* page, uint64_t addr, uint64_t version) {
  const uint64_t stamp = (addr << 24) ^ version ^ 0x5bd1e995ULL;
  for (size_t off = 0; off < kPage; off += sizeof stamp) {
    std::memcpy(page + off, &stamp, sizeof stamp);
  }
}

struct TraceOptions {
  uint64_t ops = 10000;
  uint64_t seed = 1;
  uint64_t address_pages = 512;
  uint64_t max_request_pages = 4;
  // One migration is injected roughly every this many ops.
  uint64_t migration_every = 2000;
  RigOptions rig = [] {
    RigOptions o;
    o.peers = 4;
    o.peer_slabs = 8;
    o.slab_pages = 64;
    o.pool_pages = 96;
    o.space_pages = 512;
    o.queue_entries = 64;
    o.block_io_pages = 4;
    o.message_pages = 16;
    return o;
  }();
};

struct TraceResult {
  uint64_t reads = 0;
  uint64_t writes = 0;
  uint64_t mismatched_pages = 0;
  uint64_t migrations_completed = 0;
  uint64_t reads_during_copy = 0;
  uint64_t critical_path_violations = 0;
  uint64_t reclaimed_pages = 0;
};

// Random reads and writes against a device, checked page by page against a
// flat shadow map. Drains, reclaim pressure and migrations interleave with
// the foreground operations.
inline TraceResult RunOracleTrace(const TraceOptions& opt) {
  Rig rig(opt.rig);
  MigrationCoordinator migration(*rig.device, *rig.transport, *rig.placement);
  Rng rng(opt.seed);
  std::map<uint64_t, uint64_t> shadow;  // address -> version
  uint64_t version = 0;
  TraceResult r;
  std::vector<std::byte> expect(kPage);

  auto inject_pressure = [&] {
    // Pick a live peer that holds one of our blocks and squeeze it.
    const uint32_t first = static_cast<uint32_t>(UniformBelow(rng, opt.rig.peers));
    for (uint32_t k = 0; k < opt.rig.peers; ++k) {
      const PeerId id{(first + k) % opt.rig.peers};
      Peer& peer = rig.cluster.peer(id);
      if (peer.block_count() == 0 || peer.eviction_in_flight()) continue;
      const uint64_t native = peer.config().total_bytes - peer.block_bytes() -
                              peer.config().eviction_watermark_bytes + kPage;
      const PressureAction act =
          peer.PressureTick(native, rig.ledger.now(Channel::kForeground));
      // Relax so the peer does not keep asking once the block has moved.
      peer.PressureTick(0, rig.ledger.now(Channel::kForeground));
      if (act.kind == PressureAction::Kind::kEvictRequest) {
        migration.OnEvictRequest(id, act.block);
        return;
      }
    }
  };

  for (uint64_t op = 0; op < opt.ops; ++op) {
    const uint64_t n = 1 + UniformBelow(rng, opt.max_request_pages);
    const uint64_t addr = UniformBelow(rng, opt.address_pages - n + 1);
    if (UniformBelow(rng, 2) == 0) {
      std::vector<std::byte> data(n * kPage);
      for (uint64_t i = 0; i < n; ++i) {
        ++version;
        FillStamp(data.data() + i * kPage, addr + i, version);
        shadow[addr + i] = version;
      }
      rig.device->Write(PageAddress{addr}, data);
      ++r.writes;
    } else {
      const bool copying = migration.active_count() > 0;
      std::vector<std::byte> got = rig.Read(addr, n);
      ++r.reads;
      if (copying) ++r.reads_during_copy;
      for (uint64_t i = 0; i < n; ++i) {
        auto it = shadow.find(addr + i);
        if (it == shadow.end()) {
          std::fill(expect.begin(), expect.end(), std::byte{0});
        } else {
          FillStamp(expect.data(), addr + i, it->second);
        }
        if (std::memcmp(expect.data(), got.data() + i * kPage, kPage) != 0) {
          ++r.mismatched_pages;
        }
      }
    }
    switch (UniformBelow(rng, 8)) {
      case 0:
        rig.device->DrainStep();
        break;
      case 1:
        rig.device->Pump();
        break;
      case 2:
        migration.Step();
        break;
      default:
        break;
    }
    if (opt.migration_every > 0 && op % opt.migration_every ==
                                       opt.migration_every / 2) {
      inject_pressure();
    }
  }
  migration.Finish();
  rig.device->Flush();
  // Every address once more after everything settled.
  for (const auto& [addr, ver] : shadow) {
    std::vector<std::byte> got = rig.Read(addr);
    FillStamp(expect.data(), addr, ver);
    if (std::memcmp(expect.data(), got.data(), kPage) != 0) ++r.mismatched_pages;
  }
  r.migrations_completed = migration.stats().completed;
  r.critical_path_violations = rig.ledger.critical_path_violations();
  r.reclaimed_pages = rig.device->stats().reclaimed_pages;
  return r;
}

}  // namespace tiermem::testing

#endif  // TIERMEM_TESTS_ORACLE_TRACE_H_
