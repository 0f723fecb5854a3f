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

#include "tiermem/mempool.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace tiermem {

void PoolConfig::Validate() const {
  if (min_pool_pages == 0 || min_pool_pages > max_pool_pages) {
    throw ConfigError("mempool: need 0 < min_pool_pages <= max_pool_pages");
  }
  if (!(grow_trigger_ratio > 0.0 && grow_trigger_ratio < 1.0)) {
    throw ConfigError("mempool: grow_trigger_ratio must lie in (0, 1)");
  }
  if (!(host_free_cap_ratio > 0.0 && host_free_cap_ratio <= 1.0)) {
    throw ConfigError("mempool: host_free_cap_ratio must lie in (0, 1]");
  }
  if (!(grow_step_ratio > 0.0)) {
    throw ConfigError("mempool: grow_step_ratio must be positive");
  }
  if (page_size == 0) throw ConfigError("mempool: page_size must be positive");
}

MemPool::MemPool(PoolConfig config, uint64_t host_free_bytes)
    : config_(config), host_free_(host_free_bytes) {
  config_.Validate();
  AddSlots(config_.min_pool_pages);
}

void MemPool::AddSlots(uint64_t n) {
  for (uint64_t i = 0; i < n; ++i) {
    PageId id;
    if (!holes_.empty()) {
      id = holes_.back();
      holes_.pop_back();
    } else {
      id = static_cast<PageId>(slots_.size());
      slots_.emplace_back();
    }
    PoolPage p;
    p.id = id;
    p.data.assign(config_.page_size, std::byte{0});
    slots_[id] = std::move(p);
    free_.push_back(id);
    ++size_;
  }
}

void MemPool::DestroySlot(PageId id) {
  slots_[id].reset();
  holes_.push_back(id);
  --size_;
}

PoolPage& MemPool::page(PageId id) {
  if (id >= slots_.size() || !slots_[id]) {
    throw std::out_of_range("mempool: no slot " + std::to_string(id));
  }
  return *slots_[id];
}

const PoolPage& MemPool::page(PageId id) const {
  return const_cast<MemPool*>(this)->page(id);
}

uint64_t MemPool::HostCap(uint64_t host_free_bytes) const {
  return static_cast<uint64_t>(std::floor(
      config_.host_free_cap_ratio * static_cast<double>(host_free_bytes) /
      config_.page_size));
}

uint64_t MemPool::MaybeGrow(uint64_t host_free_bytes) {
  host_free_ = host_free_bytes;
  if (static_cast<double>(used_) <
      config_.grow_trigger_ratio * static_cast<double>(size_)) {
    return size_;
  }
  const uint64_t limit =
      std::min(config_.max_pool_pages, HostCap(host_free_bytes));
  if (size_ >= limit) return size_;
  const auto step = std::max<uint64_t>(
      1, static_cast<uint64_t>(
             std::ceil(config_.grow_step_ratio * static_cast<double>(size_))));
  AddSlots(std::min(limit, size_ + step) - size_);
  ++grow_events_;
  return size_;
}

MemPool::ShrinkResult MemPool::MaybeShrink(uint64_t host_free_bytes) {
  host_free_ = host_free_bytes;
  ShrinkResult result;
  const uint64_t target =
      std::max(config_.min_pool_pages,
               std::min(config_.max_pool_pages, HostCap(host_free_bytes)));
  uint64_t excess = size_ > target ? size_ - target : 0;
  while (excess > 0 && !free_.empty()) {
    DestroySlot(free_.back());
    free_.pop_back();
    --excess;
  }
  while (excess > 0 && !lru_.empty()) {
    const PageId id = lru_.begin()->second;
    lru_.erase(lru_.begin());
    result.evicted.push_back({id, slots_[id]->addr});
    --used_;
    DestroySlot(id);
    --excess;
  }
  deficit_ = excess;
  result.deficit = excess;
  result.new_size = size_;
  return result;
}

std::vector<Reclaimed> MemPool::ReclaimLru(size_t n) {
  std::vector<Reclaimed> out;
  while (out.size() < n && !lru_.empty()) {
    const PageId id = lru_.begin()->second;
    lru_.erase(lru_.begin());
    PoolPage& p = *slots_[id];
    out.push_back({id, p.addr});
    p.in_use = false;
    p.reclaimable_flag = false;
    p.update_flag = false;
    --used_;
    free_.push_back(id);
  }
  return out;
}

std::optional<MemPool::Allocation> MemPool::TryAlloc(PageAddress owner) {
  if (static_cast<double>(used_) >=
      config_.grow_trigger_ratio * static_cast<double>(size_)) {
    MaybeGrow(host_free_);
  }
  std::optional<PageAddress> evicted;
  if (free_.empty()) {
    auto r = ReclaimLru(1);
    if (r.empty()) return std::nullopt;
    evicted = r.front().addr;
  }
  const PageId id = free_.back();
  free_.pop_back();
  PoolPage& p = *slots_[id];
  p.addr = owner;
  p.in_use = true;
  p.update_flag = false;
  p.reclaimable_flag = false;
  p.pending = 0;
  p.lru_stamp = ++stamp_;
  ++used_;
  return Allocation{id, evicted};
}

MemPool::Allocation MemPool::AllocPage(PageAddress owner) {
  auto a = TryAlloc(owner);
  if (!a) {
    throw PoolExhaustedError("mempool: no free or reclaimable page (size " +
                             std::to_string(size_) + ")");
  }
  return *a;
}

void MemPool::Unlink(PoolPage& p) {
  if (p.reclaimable_flag) {
    lru_.erase({p.lru_stamp, p.id});
    p.reclaimable_flag = false;
  }
}

void MemPool::Stage(PageId id) {
  PoolPage& p = page(id);
  const bool rewrite = p.reclaimable_flag || p.pending > 0;
  Unlink(p);
  ++p.pending;
  if (rewrite) p.update_flag = true;
  p.lru_stamp = ++stamp_;
}

void MemPool::Acknowledge(PageId id) {
  PoolPage& p = page(id);
  if (p.pending == 0) {
    throw std::logic_error("mempool: acknowledge without pending write set");
  }
  if (--p.pending > 0) return;
  p.update_flag = false;
  p.reclaimable_flag = true;
  lru_.insert({p.lru_stamp, p.id});
}

void MemPool::Release(PageId id) {
  PoolPage& p = page(id);
  Unlink(p);
  p.in_use = false;
  p.pending = 0;
  p.update_flag = false;
  --used_;
  free_.push_back(id);
}

void MemPool::Touch(PageId id) {
  PoolPage& p = page(id);
  if (p.reclaimable_flag) {
    lru_.erase({p.lru_stamp, p.id});
    p.lru_stamp = ++stamp_;
    lru_.insert({p.lru_stamp, p.id});
  } else {
    p.lru_stamp = ++stamp_;
  }
}

bool MemPool::CheckInvariants() const {
  uint64_t existing = 0, in_use = 0, reclaimable = 0;
  for (const auto& slot : slots_) {
    if (!slot) continue;
    ++existing;
    if (slot->in_use) ++in_use;
    if (slot->update_flag && slot->reclaimable_flag) return false;
    if (slot->reclaimable_flag) {
      if (!slot->in_use || slot->pending != 0) return false;
      if (!lru_.contains({slot->lru_stamp, slot->id})) return false;
      ++reclaimable;
    }
  }
  return existing == size_ && in_use == used_ &&
         free_.size() == size_ - used_ && reclaimable == lru_.size() &&
         size_ >= config_.min_pool_pages && size_ <= config_.max_pool_pages;
}

}  // namespace tiermem
