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

#ifndef TIERMEM_PLACEMENT_H_
#define TIERMEM_PLACEMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "tiermem/random.h"
#include "tiermem/transport.h"
#include "tiermem/types.h"

namespace tiermem {

enum class PlacementPolicy { kPowerOfTwoChoices, kRoundRobin };

struct Location {
  PeerId peer;
  BlockId block;
  friend bool operator==(const Location&, const Location&) = default;
};

// locations[0] is the primary; the rest are replicas on distinct peers.
struct SlabMapping {
  std::vector<Location> locations;
};

struct PageLocation {
  PeerId peer;
  BlockId block;
  uint64_t offset;  // page offset inside the block
  friend bool operator==(const PageLocation&, const PageLocation&) = default;
};

struct PlacementConfig {
  PlacementPolicy policy = PlacementPolicy::kPowerOfTwoChoices;
  uint64_t slab_pages = 262144;  // 1 GiB of 4 KiB pages
  uint32_t replication = 1;
  uint64_t seed = 1;
};

// Maps slabs of the address space onto remote blocks on demand.
class Placement {
 public:
  Placement(PlacementConfig config, Transport& transport, size_t peer_count);

  const PlacementConfig& config() const { return config_; }
  uint64_t slab_pages() const { return config_.slab_pages; }
  uint64_t slab_bytes() const;

  SlabId SlabOf(PageAddress addr) const {
    return SlabId{addr.value() / config_.slab_pages};
  }
  uint64_t OffsetInSlab(PageAddress addr) const {
    return addr.value() % config_.slab_pages;
  }

  const SlabMapping* Find(SlabId slab) const;

  // Maps an unmapped slab onto `replication` distinct peers, charging
  // connect on first contact and map_block per block. A mapped slab is
  // returned unchanged. Throws CapacityError when too few peers can host it.
  const SlabMapping& MapSlab(SlabId slab);

  // Primary location of `addr`; MappingError if its slab is unmapped.
  PageLocation Lookup(PageAddress addr) const;
  std::vector<PageLocation> LookupAll(PageAddress addr) const;

  void RemapSlab(SlabId slab, size_t index, Location location);
  // Appends a replica location to a mapped slab.
  void AddLocation(SlabId slab, Location location);

  // Removes one location; returns true when the slab has none left and is
  // therefore unmapped.
  bool DropLocation(SlabId slab, size_t index);

  std::optional<std::pair<SlabId, size_t>> Reverse(PeerId peer,
                                                   BlockId block) const;

  // Picks a peer outside `exclude` with the configured policy and allocates
  // a block there. `session` marks the block as a migration destination.
  Location AllocateBlock(const std::set<PeerId>& exclude, uint64_t session = 0);

  std::map<PeerId, size_t> BlockCounts() const;
  size_t mapped_slabs() const { return slabs_.size(); }
  const std::map<SlabId, SlabMapping>& slabs() const { return slabs_; }

 private:
  std::optional<PeerId> Choose(const std::set<PeerId>& candidates);

  PlacementConfig config_;
  Transport& transport_;
  size_t peer_count_;
  Rng rng_;
  uint32_t round_robin_next_ = 0;
  std::map<SlabId, SlabMapping> slabs_;
  std::map<std::pair<PeerId, BlockId>, SlabId> reverse_;
};

}  // namespace tiermem

#endif  // TIERMEM_PLACEMENT_H_
