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

#ifndef TIERMEM_MEMPOOL_H_
#define TIERMEM_MEMPOOL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "tiermem/types.h"

namespace tiermem {

struct PoolConfig {
  uint64_t min_pool_pages = 1024;
  uint64_t max_pool_pages = 1024;
  double grow_trigger_ratio = 0.80;
  double host_free_cap_ratio = 0.50;
  uint32_t page_size = kDefaultPageSize;
  // Growth per trigger as a fraction of the current size.
  double grow_step_ratio = 0.25;

  void Validate() const;
};

using PageId = uint32_t;

// One mempool slot. A slot moves between three states:
//   staged       pending > 0, not reclaimable
//   updated      pending > 0 after a rewrite of a page already in the pool
//   reclaimable  every write set referencing it has been acknowledged
struct PoolPage {
  PageId id = 0;
  PageAddress addr;
  std::vector<std::byte> data;
  bool in_use = false;
  bool update_flag = false;
  bool reclaimable_flag = false;
  uint32_t pending = 0;  // write sets referencing the page not yet drained
  uint64_t lru_stamp = 0;
};

// A page taken back from its previous owner address.
struct Reclaimed {
  PageId page;
  PageAddress addr;
};

// Host-coordinated local memory pool. Pre-allocated slots are handed out
// first; the pool grows once usage reaches the trigger ratio (bounded by
// max_pool_pages and a share of host free memory) and shrinks towards
// min_pool_pages when host free memory drops. Only reclaimable slots are
// ever reclaimed, least recently used first.
class MemPool {
 public:
  MemPool(PoolConfig config, uint64_t host_free_bytes);

  const PoolConfig& config() const { return config_; }

  struct Allocation {
    PageId page;
    std::optional<PageAddress> evicted;  // previous owner, when reclaimed
  };

  // Free slot if any (after a growth attempt at the trigger ratio), else
  // the LRU reclaimable slot. nullopt when neither exists.
  std::optional<Allocation> TryAlloc(PageAddress owner);
  // As TryAlloc, but throws PoolExhaustedError.
  Allocation AllocPage(PageAddress owner);

  // Grows by one step if usage is at the trigger ratio. Returns new size.
  uint64_t MaybeGrow(uint64_t host_free_bytes);

  struct ShrinkResult {
    uint64_t new_size = 0;
    uint64_t deficit = 0;  // pages still above target, all pinned
    std::vector<Reclaimed> evicted;
  };
  // Releases free then reclaimable slots down to the host-free target,
  // never below min_pool_pages.
  ShrinkResult MaybeShrink(uint64_t host_free_bytes);

  // Up to `n` reclaimable slots in ascending LRU order, each returned to the
  // free list. Contents are left untouched until reuse.
  std::vector<Reclaimed> ReclaimLru(size_t n);

  // Write-set bookkeeping. Stage() marks the slot as referenced by one more
  // write set; Acknowledge() is called once per drained write set.
  void Stage(PageId page);
  void Acknowledge(PageId page);
  // Returns a staged slot to the free list without it ever being drained.
  void Release(PageId page);
  void Touch(PageId page);

  PoolPage& page(PageId id);
  const PoolPage& page(PageId id) const;
  std::span<std::byte> data(PageId id) { return page(id).data; }

  uint64_t size() const { return size_; }
  uint64_t used() const { return used_; }
  uint64_t free_count() const { return free_.size(); }
  uint64_t reclaimable_count() const { return lru_.size(); }
  uint64_t deficit() const { return deficit_; }
  uint64_t host_free_bytes() const { return host_free_; }
  // floor(host_free_cap_ratio * host_free / page_size)
  uint64_t HostCap(uint64_t host_free_bytes) const;
  uint64_t grow_events() const { return grow_events_; }

  // Recomputes size == used + free and flag exclusivity; for tests.
  bool CheckInvariants() const;

 private:
  void AddSlots(uint64_t n);
  void DestroySlot(PageId id);
  void Unlink(PoolPage& p);

  PoolConfig config_;
  uint64_t host_free_;
  uint64_t size_ = 0;
  uint64_t used_ = 0;
  uint64_t deficit_ = 0;
  uint64_t stamp_ = 0;
  uint64_t grow_events_ = 0;
  std::vector<std::optional<PoolPage>> slots_;
  std::vector<PageId> free_;       // LIFO of pre-allocated free slots
  std::vector<PageId> holes_;      // destroyed slot ids for reuse
  std::set<std::pair<uint64_t, PageId>> lru_;  // reclaimable slots by stamp
};

}  // namespace tiermem

#endif  // TIERMEM_MEMPOOL_H_
