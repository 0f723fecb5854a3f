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

#include "tiermem/placement.h"

#include <string>

namespace tiermem {

Placement::Placement(PlacementConfig config, Transport& transport,
                     size_t peer_count)
    : config_(config),
      transport_(transport),
      peer_count_(peer_count),
      rng_(config.seed) {
  if (config_.slab_pages == 0) {
    throw ConfigError("placement: slab must hold at least one page");
  }
  if (config_.replication == 0) {
    throw ConfigError("placement: replication factor must be >= 1");
  }
}

uint64_t Placement::slab_bytes() const {
  return config_.slab_pages * transport_.backend().page_size();
}

const SlabMapping* Placement::Find(SlabId slab) const {
  auto it = slabs_.find(slab);
  return it == slabs_.end() ? nullptr : &it->second;
}

std::optional<PeerId> Placement::Choose(const std::set<PeerId>& candidates) {
  if (candidates.empty()) return std::nullopt;
  std::vector<PeerId> pool(candidates.begin(), candidates.end());
  if (config_.policy == PlacementPolicy::kRoundRobin) {
    for (size_t step = 0; step < peer_count_; ++step) {
      const PeerId p{static_cast<uint32_t>((round_robin_next_ + step) %
                                           peer_count_)};
      if (candidates.contains(p)) {
        round_robin_next_ = (p.value() + 1) % peer_count_;
        return p;
      }
    }
    return std::nullopt;
  }
  if (pool.size() == 1) return pool[0];
  const uint64_t i = UniformBelow(rng_, pool.size());
  uint64_t j = UniformBelow(rng_, pool.size() - 1);
  if (j >= i) ++j;
  PeerId a = pool[i];
  PeerId b = pool[j];
  if (b < a) std::swap(a, b);
  // Querying a candidate requires a connection; both are contacted.
  transport_.Connect(a);
  transport_.Connect(b);
  const uint64_t free_a =
      transport_.SendControl(a, {.op = wire::ControlOp::kQueryFree})
          .free_bytes;
  const uint64_t free_b =
      transport_.SendControl(b, {.op = wire::ControlOp::kQueryFree})
          .free_bytes;
  return free_b > free_a ? b : a;
}

Location Placement::AllocateBlock(const std::set<PeerId>& exclude,
                                  uint64_t session) {
  std::set<PeerId> candidates;
  for (uint32_t p = 0; p < peer_count_; ++p) {
    const PeerId id{p};
    if (!exclude.contains(id) && transport_.alive(id)) candidates.insert(id);
  }
  while (auto chosen = Choose(candidates)) {
    transport_.Connect(*chosen);
    const auto reply = transport_.SendControl(
        *chosen, {.op = wire::ControlOp::kAllocBlk, .session_id = session});
    if (reply.status == wire::ReplyStatus::kOk) {
      transport_.ledger().Charge(ChargeKind::kMapBlock,
                                 transport_.model().map_block);
      return Location{*chosen, BlockId{reply.block_id}};
    }
    candidates.erase(*chosen);
  }
  throw CapacityError("placement: no peer can host another block");
}

const SlabMapping& Placement::MapSlab(SlabId slab) {
  if (auto it = slabs_.find(slab); it != slabs_.end()) return it->second;
  SlabMapping mapping;
  std::set<PeerId> used;
  try {
    for (uint32_t r = 0; r < config_.replication; ++r) {
      const Location loc = AllocateBlock(used);
      used.insert(loc.peer);
      mapping.locations.push_back(loc);
    }
  } catch (const CapacityError&) {
    // Hand back the blocks of a partial mapping.
    for (const Location& loc : mapping.locations) {
      transport_.SendControl(loc.peer, {.op = wire::ControlOp::kReleaseBlk,
                                        .block_id = loc.block.value()});
    }
    throw CapacityError("placement: fewer than " +
                        std::to_string(config_.replication) +
                        " peers can host slab " +
                        std::to_string(slab.value()));
  }
  for (const Location& loc : mapping.locations) {
    reverse_[{loc.peer, loc.block}] = slab;
  }
  return slabs_.emplace(slab, std::move(mapping)).first->second;
}

PageLocation Placement::Lookup(PageAddress addr) const {
  const SlabMapping* m = Find(SlabOf(addr));
  if (m == nullptr || m->locations.empty()) {
    throw MappingError("page " + std::to_string(addr.value()) +
                       " lies in an unmapped slab");
  }
  const Location& loc = m->locations.front();
  return PageLocation{loc.peer, loc.block, OffsetInSlab(addr)};
}

std::vector<PageLocation> Placement::LookupAll(PageAddress addr) const {
  std::vector<PageLocation> out;
  if (const SlabMapping* m = Find(SlabOf(addr))) {
    for (const Location& loc : m->locations) {
      out.push_back(PageLocation{loc.peer, loc.block, OffsetInSlab(addr)});
    }
  }
  return out;
}

void Placement::RemapSlab(SlabId slab, size_t index, Location location) {
  auto it = slabs_.find(slab);
  if (it == slabs_.end() || index >= it->second.locations.size()) {
    throw MappingError("remap of unmapped slab " +
                       std::to_string(slab.value()));
  }
  Location& slot = it->second.locations[index];
  reverse_.erase({slot.peer, slot.block});
  slot = location;
  reverse_[{location.peer, location.block}] = slab;
}

void Placement::AddLocation(SlabId slab, Location location) {
  auto it = slabs_.find(slab);
  if (it == slabs_.end()) {
    throw MappingError("add location to unmapped slab " +
                       std::to_string(slab.value()));
  }
  it->second.locations.push_back(location);
  reverse_[{location.peer, location.block}] = slab;
}

bool Placement::DropLocation(SlabId slab, size_t index) {
  auto it = slabs_.find(slab);
  if (it == slabs_.end() || index >= it->second.locations.size()) {
    throw MappingError("drop on unmapped slab " +
                       std::to_string(slab.value()));
  }
  auto& locs = it->second.locations;
  reverse_.erase({locs[index].peer, locs[index].block});
  locs.erase(locs.begin() + static_cast<ptrdiff_t>(index));
  if (locs.empty()) {
    slabs_.erase(it);
    return true;
  }
  return false;
}

std::optional<std::pair<SlabId, size_t>> Placement::Reverse(
    PeerId peer, BlockId block) const {
  auto it = reverse_.find({peer, block});
  if (it == reverse_.end()) return std::nullopt;
  const auto& locs = slabs_.at(it->second).locations;
  for (size_t i = 0; i < locs.size(); ++i) {
    if (locs[i] == Location{peer, block}) return std::make_pair(it->second, i);
  }
  return std::nullopt;
}

std::map<PeerId, size_t> Placement::BlockCounts() const {
  std::map<PeerId, size_t> counts;
  for (uint32_t p = 0; p < peer_count_; ++p) counts[PeerId{p}] = 0;
  for (const auto& [slab, m] : slabs_) {
    for (const Location& loc : m.locations) ++counts[loc.peer];
  }
  return counts;
}

}  // namespace tiermem
