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

#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "tiermem/mempool.h"
#include "tiermem/random.h"

namespace tiermem {
namespace {

PoolConfig Config(uint64_t min, uint64_t max) {
  PoolConfig c;
  c.min_pool_pages = min;
  c.max_pool_pages = max;
  return c;
}

constexpr uint64_t kHuge = uint64_t{1} << 40;

// Allocates and immediately drains `n` pages, leaving them reclaimable.
std::vector<PageId> FillReclaimable(MemPool& pool, uint64_t n, uint64_t base = 0) {
  std::vector<PageId> ids;
  for (uint64_t i = 0; i < n; ++i) {
    const PageId id = pool.AllocPage(PageAddress{base + i}).page;
    pool.Stage(id);
    pool.Acknowledge(id);
    ids.push_back(id);
  }
  return ids;
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(Config(1, 1).Validate());
  CHECK_THROWS_AS(Config(0, 1).Validate(), ConfigError);
  CHECK_THROWS_AS(Config(5, 4).Validate(), ConfigError);
  PoolConfig c = Config(1, 2);
  c.grow_trigger_ratio = 1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = Config(1, 2);
  c.host_free_cap_ratio = 0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

TEST_CASE("below the trigger an allocation never grows") {
  MemPool pool(Config(1000, 4000), kHuge);
  for (int i = 0; i < 799; ++i) pool.AllocPage(PageAddress{uint64_t(i)});
  pool.AllocPage(PageAddress{799});
  CHECK(pool.size() == 1000);
  CHECK(pool.grow_events() == 0);
}

TEST_CASE("at the trigger an allocation grows by one step") {
  MemPool pool(Config(1000, 4000), kHuge);
  for (int i = 0; i < 800; ++i) pool.AllocPage(PageAddress{uint64_t(i)});
  pool.AllocPage(PageAddress{800});
  CHECK(pool.grow_events() == 1);
  CHECK(pool.size() == 1250);
}

TEST_CASE("growth is capped by half of host free memory") {
  MemPool pool(Config(1000, 4000), 16 << 20);
  CHECK(pool.HostCap(16 << 20) == 2048);
  for (int i = 0; i < 800; ++i) pool.AllocPage(PageAddress{uint64_t(i)});
  for (int round = 0; round < 10; ++round) pool.MaybeGrow(16 << 20);
  // Grows only while usage is at the trigger; push usage up and retry.
  while (pool.used() < pool.size()) pool.AllocPage(PageAddress{pool.used() + 10000});
  for (int round = 0; round < 10; ++round) {
    pool.MaybeGrow(16 << 20);
    while (pool.used() < pool.size()) pool.AllocPage(PageAddress{pool.used() + 10000});
  }
  CHECK(pool.size() == 2048);
}

TEST_CASE("a pool at max stays put and zero host free never grows") {
  MemPool pool(Config(8, 8), kHuge);
  for (int i = 0; i < 8; ++i) pool.AllocPage(PageAddress{uint64_t(i)});
  CHECK(pool.MaybeGrow(kHuge) == 8);
  MemPool other(Config(8, 64), 0);
  for (int i = 0; i < 8; ++i) other.AllocPage(PageAddress{uint64_t(i)});
  CHECK(other.MaybeGrow(0) == 8);
}

TEST_CASE("exhausted when every page is staged") {
  MemPool pool(Config(4, 4), kHuge);
  for (int i = 0; i < 4; ++i) {
    pool.Stage(pool.AllocPage(PageAddress{uint64_t(i)}).page);
  }
  CHECK_FALSE(pool.TryAlloc(PageAddress{9}));
  CHECK_THROWS_AS(pool.AllocPage(PageAddress{9}), PoolExhaustedError);
}

TEST_CASE("free pages are used before reclaiming") {
  MemPool pool(Config(4, 4), kHuge);
  FillReclaimable(pool, 2);
  const auto a = pool.AllocPage(PageAddress{50});
  CHECK_FALSE(a.evicted);
  const auto b = pool.AllocPage(PageAddress{51});
  CHECK_FALSE(b.evicted);
  const auto c = pool.AllocPage(PageAddress{52});
  REQUIRE(c.evicted);
  CHECK(c.evicted->value() == 0);  // oldest reclaimable
}

TEST_CASE("reclaim returns LRU order and skips staged pages") {
  MemPool pool(Config(3, 3), kHuge);
  const auto ids = FillReclaimable(pool, 3);
  // Third page staged again: update in flight, not reclaimable.
  pool.Stage(ids[2]);
  CHECK(pool.page(ids[2]).update_flag);
  const auto got = pool.ReclaimLru(3);
  REQUIRE(got.size() == 2);
  CHECK(got[0].page == ids[0]);
  CHECK(got[1].page == ids[1]);
  CHECK(pool.ReclaimLru(1).empty());
}

TEST_CASE("touch moves a page to the back of the LRU") {
  MemPool pool(Config(3, 3), kHuge);
  const auto ids = FillReclaimable(pool, 3);
  pool.Touch(ids[0]);
  const auto got = pool.ReclaimLru(1);
  REQUIRE(got.size() == 1);
  CHECK(got[0].page == ids[1]);
}

TEST_CASE("update flag clears only when the last write set drains") {
  MemPool pool(Config(2, 2), kHuge);
  const PageId id = pool.AllocPage(PageAddress{1}).page;
  pool.Stage(id);
  CHECK_FALSE(pool.page(id).update_flag);
  pool.Stage(id);
  CHECK(pool.page(id).update_flag);
  pool.Acknowledge(id);
  CHECK(pool.page(id).update_flag);
  CHECK_FALSE(pool.page(id).reclaimable_flag);
  pool.Acknowledge(id);
  CHECK_FALSE(pool.page(id).update_flag);
  CHECK(pool.page(id).reclaimable_flag);
}

TEST_CASE("shrink never goes below min and stops at pinned pages") {
  MemPool pool(Config(100, 400), kHuge);
  // Grow to 400 with 250 pinned (staged) and 100 reclaimable pages.
  std::vector<PageId> pinned;
  for (int i = 0; i < 250; ++i) {
    const PageId id = pool.AllocPage(PageAddress{uint64_t(i)}).page;
    pool.Stage(id);
    pinned.push_back(id);
  }
  FillReclaimable(pool, 100, 1000);
  while (pool.size() < 400) {
    pool.AllocPage(PageAddress{5000 + pool.used()});
    pool.MaybeGrow(kHuge);
  }
  // Free slots beyond the ones just taken are released first.
  const uint64_t before_reclaimable = pool.reclaimable_count();
  CHECK(before_reclaimable == 100);
  auto r = pool.MaybeShrink(0);  // target = min = 100
  CHECK(r.new_size >= 100);
  CHECK(r.evicted.size() == 100);
  CHECK(r.deficit == r.new_size - 100);
  CHECK(pool.CheckInvariants());
  // Draining pinned pages lets the next shrink finish the job.
  for (PageId id : pinned) pool.Acknowledge(id);
  r = pool.MaybeShrink(0);
  CHECK(r.deficit <= pool.used() - pool.reclaimable_count());
  CHECK(pool.CheckInvariants());
}

TEST_CASE("shrink demand beyond reclaimable pages leaves a deficit") {
  MemPool pool(Config(100, 250), kHuge);
  std::vector<PageId> ids;
  while (auto a = pool.TryAlloc(PageAddress{pool.used()})) {
    pool.Stage(a->page);
    ids.push_back(a->page);
  }
  REQUIRE(pool.size() == 250);
  REQUIRE(pool.free_count() == 0);
  // 100 reclaimable, 150 staged; a host cap of 100 asks to shed 150.
  for (int i = 0; i < 100; ++i) pool.Acknowledge(ids[i]);
  const uint64_t host_free = 2 * 100 * kDefaultPageSize;
  auto r = pool.MaybeShrink(host_free);
  CHECK(r.evicted.size() == 100);
  CHECK(r.new_size == 150);
  CHECK(r.deficit == 50);
  CHECK(pool.deficit() == 50);
  CHECK(pool.CheckInvariants());
}

TEST_CASE("shrink at min is a no-op and host free above threshold too") {
  MemPool pool(Config(16, 64), kHuge);
  auto r = pool.MaybeShrink(0);
  CHECK(r.new_size == 16);
  CHECK(r.evicted.empty());
  r = pool.MaybeShrink(kHuge);
  CHECK(r.new_size == 16);
}

TEST_CASE("randomized grow/shrink keeps bounds and accounting") {
  Rng rng(11);
  const PoolConfig cfg = Config(32, 512);
  MemPool pool(cfg, kHuge);
  std::set<PageId> staged, live;
  uint64_t next_addr = 0;
  for (int step = 0; step < 20000; ++step) {
    switch (UniformBelow(rng, 5)) {
      case 0:
      case 1: {
        if (auto a = pool.TryAlloc(PageAddress{next_addr++})) {
          if (a->evicted) live.erase(a->page);
          pool.Stage(a->page);
          staged.insert(a->page);
          live.insert(a->page);
        }
        break;
      }
      case 2:
        if (!staged.empty()) {
          auto it = staged.begin();
          std::advance(it, UniformBelow(rng, staged.size()));
          pool.Acknowledge(*it);
          staged.erase(it);
        }
        break;
      case 3: {
        const uint64_t host_free = UniformBelow(rng, 2 * 512 * kDefaultPageSize * 2);
        auto r = pool.MaybeShrink(host_free);
        for (const auto& e : r.evicted) live.erase(e.page);
        pool.MaybeGrow(host_free);
        break;
      }
      default:
        pool.ReclaimLru(UniformBelow(rng, 4));
        break;
    }
    REQUIRE(pool.CheckInvariants());
    REQUIRE(pool.size() >= cfg.min_pool_pages);
    REQUIRE(pool.size() <= cfg.max_pool_pages);
    REQUIRE(pool.free_count() + pool.used() == pool.size());
  }
}

}  // namespace
}  // namespace tiermem
