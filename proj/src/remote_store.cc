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

#include "tiermem/remote_store.h"

#include <algorithm>
#include <cstring>
#include <string>

namespace tiermem {

MRBlock::MRBlock(BlockId id, SenderId owner, uint64_t pages,
                 uint32_t page_size, SimTime now)
    : id_(id), owner_(owner), pages_(pages), page_size_(page_size) {
  tag_.last_write_time = now;
}

void MRBlock::CheckRange(uint64_t offset, uint64_t count) const {
  if (offset > pages_ || count > pages_ - offset) {
    throw MappingError("block " + std::to_string(id_.value()) +
                       ": page range out of bounds");
  }
}

void MRBlock::Write(uint64_t offset, std::span<const std::byte> data,
                    SimTime now) {
  const uint64_t count = data.size() / page_size_;
  CheckRange(offset, count);
  for (uint64_t i = 0; i < count; ++i) {
    auto& page = data_[offset + i];
    page.assign(data.begin() + i * page_size_,
                data.begin() + (i + 1) * page_size_);
  }
  tag_.last_write_time = std::max(tag_.last_write_time, now);
}

void MRBlock::Read(uint64_t offset, uint64_t count,
                   std::span<std::byte> out) const {
  CheckRange(offset, count);
  for (uint64_t i = 0; i < count; ++i) {
    auto dst = out.subspan(i * page_size_, page_size_);
    auto it = data_.find(offset + i);
    if (it == data_.end()) {
      std::fill(dst.begin(), dst.end(), std::byte{0});
    } else {
      std::memcpy(dst.data(), it->second.data(), page_size_);
    }
  }
}

void MRBlock::CopyFrom(const MRBlock& source, uint64_t first, uint64_t count) {
  CheckRange(first, count);
  for (uint64_t p = first; p < first + count; ++p) {
    auto it = source.data_.find(p);
    if (it == source.data_.end()) {
      data_.erase(p);
    } else {
      data_[p] = it->second;
    }
  }
}

Peer::Peer(PeerId id, PeerConfig config) : id_(id), config_(config) {
  if (config_.slab_bytes == 0 || config_.page_size == 0 ||
      config_.slab_bytes % config_.page_size != 0) {
    throw ConfigError("peer: slab size must be a positive page multiple");
  }
  if (config_.eviction_watermark_bytes == 0) {
    config_.eviction_watermark_bytes = config_.slab_bytes;
  }
}

uint64_t Peer::native_usage() const {
  const uint64_t room = config_.total_bytes - block_bytes();
  return std::min(native_requested_, room);
}

uint64_t Peer::free_bytes() const {
  return config_.total_bytes - block_bytes() - native_usage();
}

BlockId Peer::AllocateBlock(SenderId sender, SimTime now) {
  // A block that would itself push the peer under its watermark is refused;
  // otherwise allocation alone could trigger an eviction.
  if (free_bytes() < config_.slab_bytes + config_.eviction_watermark_bytes) {
    throw CapacityError("peer " + std::to_string(id_.value()) +
                        ": insufficient free memory for a block");
  }
  const BlockId id{next_block_++};
  blocks_.emplace(id, std::make_unique<MRBlock>(id, sender, slab_pages(),
                                                config_.page_size, now));
  return id;
}

void Peer::ReleaseBlock(BlockId block) {
  if (blocks_.erase(block) == 0) {
    throw MappingError("peer " + std::to_string(id_.value()) +
                       ": release of unknown block " +
                       std::to_string(block.value()));
  }
  if (in_flight_ == block) in_flight_.reset();
}

MRBlock& Peer::block(BlockId block) {
  auto it = blocks_.find(block);
  if (it == blocks_.end()) {
    throw MappingError("peer " + std::to_string(id_.value()) +
                       ": unknown block " + std::to_string(block.value()));
  }
  return *it->second;
}

const MRBlock& Peer::block(BlockId block) const {
  return const_cast<Peer*>(this)->block(block);
}

std::vector<BlockId> Peer::block_ids() const {
  std::vector<BlockId> ids;
  ids.reserve(blocks_.size());
  for (const auto& [id, b] : blocks_) ids.push_back(id);
  return ids;
}

SimTime Peer::NonActivityDuration(BlockId id, SimTime now) const {
  const SimTime last = block(id).tag().last_write_time;
  return now >= last ? now - last : 0;
}

BlockId Peer::SelectVictim(SimTime now) const {
  std::optional<BlockId> best;
  SimTime best_duration = 0;
  // blocks_ is ordered by id, so strict '>' keeps the lowest id on ties.
  for (const auto& [id, b] : blocks_) {
    if (b->receiving_migration()) continue;
    const SimTime d = NonActivityDuration(id, now);
    if (!best || d > best_duration) {
      best = id;
      best_duration = d;
    }
  }
  if (!best) {
    throw CapacityError("peer " + std::to_string(id_.value()) +
                        ": no victim block available");
  }
  return *best;
}

bool Peer::EvictionNeeded() const {
  const auto total = static_cast<int64_t>(config_.total_bytes);
  const auto used = static_cast<int64_t>(native_requested_ + block_bytes());
  return total - used < static_cast<int64_t>(config_.eviction_watermark_bytes);
}

PressureAction Peer::PressureTick(uint64_t native_usage, SimTime now) {
  native_requested_ = native_usage;
  if (failed_ || in_flight_ || !EvictionNeeded()) return {};
  const bool any = std::any_of(blocks_.begin(), blocks_.end(), [](auto& kv) {
    return !kv.second->receiving_migration();
  });
  if (!any) return {};
  const BlockId victim = SelectVictim(now);
  const SenderId owner = block(victim).owner();
  if (config_.policy == EvictionPolicy::kDelete) {
    blocks_.erase(victim);
    return {PressureAction::Kind::kDeleted, victim, owner};
  }
  in_flight_ = victim;
  return {PressureAction::Kind::kEvictRequest, victim, owner};
}

void Peer::EvictionFinished() { in_flight_.reset(); }

Cluster::Cluster(uint64_t slab_bytes, uint32_t page_size)
    : slab_bytes_(slab_bytes), page_size_(page_size) {
  if (page_size == 0 || slab_bytes == 0 || slab_bytes % page_size != 0) {
    throw ConfigError("cluster: slab size must be a positive page multiple");
  }
}

PeerId Cluster::AddPeer(uint64_t total_bytes, EvictionPolicy policy,
                        uint64_t eviction_watermark_bytes) {
  const PeerId id{static_cast<uint32_t>(peers_.size())};
  peers_.push_back(std::make_unique<Peer>(
      id, PeerConfig{total_bytes, slab_bytes_, page_size_,
                     eviction_watermark_bytes, policy}));
  return id;
}

Peer& Cluster::peer(PeerId id) {
  if (!contains(id)) {
    throw TopologyError("unknown peer " + std::to_string(id.value()));
  }
  return *peers_[id.value()];
}

const Peer& Cluster::peer(PeerId id) const {
  return const_cast<Cluster*>(this)->peer(id);
}

}  // namespace tiermem
