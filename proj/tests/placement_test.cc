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
#include <set>

#include "doctest.h"
#include "test_util.h"
#include "tiermem/placement.h"

namespace tiermem {
namespace {

using testing::kPage;
using testing::Rig;
using testing::RigOptions;

TEST_CASE("power of two choices picks the freer peer") {
  RigOptions o;
  o.peers = 2;
  o.peer_slabs = 32;
  Rig rig(o);
  // Load peer 0 with foreign blocks so peer 1 is always freer.
  for (int i = 0; i < 10; ++i) rig.cluster.peer(PeerId{0}).AllocateBlock(SenderId{9}, 0);
  for (uint64_t s = 0; s < 5; ++s) {
    CHECK(rig.placement->MapSlab(SlabId{s}).locations[0].peer == PeerId{1});
  }
}

TEST_CASE("equal free memory goes to the lower peer id") {
  RigOptions o;
  o.peers = 2;
  Rig rig(o);
  CHECK(rig.placement->MapSlab(SlabId{0}).locations[0].peer == PeerId{0});
}

TEST_CASE("mapping is idempotent and charges connect once per peer") {
  Rig rig;
  const SlabMapping first = rig.placement->MapSlab(SlabId{3});
  const uint64_t connects = rig.ledger.count(ChargeKind::kConnect);
  const uint64_t maps = rig.ledger.count(ChargeKind::kMapBlock);
  CHECK(connects >= 1);
  CHECK(maps == 1);
  CHECK(rig.placement->MapSlab(SlabId{3}).locations == first.locations);
  CHECK(rig.ledger.count(ChargeKind::kMapBlock) == 1);
  for (uint64_t s = 4; s < 20; ++s) rig.placement->MapSlab(SlabId{s});
  CHECK(rig.ledger.count(ChargeKind::kConnect) <= 4);
}

TEST_CASE("capacity error once every peer is full") {
  RigOptions o;
  o.peers = 2;
  o.peer_slabs = 4;  // three blocks each under the default watermark
  Rig rig(o);
  for (uint64_t s = 0; s < 6; ++s) rig.placement->MapSlab(SlabId{s});
  CHECK_THROWS_AS(rig.placement->MapSlab(SlabId{6}), CapacityError);
  CHECK(rig.placement->Find(SlabId{6}) == nullptr);
}

TEST_CASE("lookup resolves slab boundaries") {
  Rig rig;
  const uint64_t sp = rig.options.slab_pages;
  CHECK_THROWS_AS(rig.placement->Lookup(PageAddress{0}), MappingError);
  rig.placement->MapSlab(SlabId{0});
  rig.placement->MapSlab(SlabId{1});
  const Location s0 = rig.placement->Find(SlabId{0})->locations[0];
  const Location s1 = rig.placement->Find(SlabId{1})->locations[0];
  CHECK(rig.placement->Lookup(PageAddress{0}) == PageLocation{s0.peer, s0.block, 0});
  CHECK(rig.placement->Lookup(PageAddress{sp - 1}) ==
        PageLocation{s0.peer, s0.block, sp - 1});
  CHECK(rig.placement->Lookup(PageAddress{sp}) == PageLocation{s1.peer, s1.block, 0});
  CHECK_THROWS_AS(rig.placement->Lookup(PageAddress{2 * sp}), MappingError);
  CHECK(rig.placement->Reverse(s1.peer, s1.block)->first == SlabId{1});
}

TEST_CASE("load stays within a factor of two of the mean") {
  RigOptions o;
  o.peers = 8;
  o.peer_slabs = 64;
  Rig rig(o);
  for (uint64_t s = 0; s < 200; ++s) rig.placement->MapSlab(SlabId{s});
  const auto counts = rig.placement->BlockCounts();
  size_t max = 0;
  for (const auto& [peer, n] : counts) max = std::max(max, n);
  CHECK(static_cast<double>(max) <= 2.0 * 200.0 / 8.0);
}

TEST_CASE("replicas land on distinct peers") {
  RigOptions o;
  o.peers = 5;
  o.replication = 3;
  Rig rig(o);
  for (uint64_t s = 0; s < 8; ++s) {
    const auto& m = rig.placement->MapSlab(SlabId{s});
    REQUIRE(m.locations.size() == 3);
    std::set<PeerId> peers;
    for (const auto& l : m.locations) peers.insert(l.peer);
    CHECK(peers.size() == 3);
    CHECK(rig.placement->LookupAll(PageAddress{s * o.slab_pages}).size() == 3);
  }
}

TEST_CASE("replication above the peer count cannot be placed") {
  RigOptions o;
  o.peers = 2;
  o.replication = 3;
  Rig rig(o);
  CHECK_THROWS_AS(rig.placement->MapSlab(SlabId{0}), CapacityError);
  // A failed mapping hands back its partial blocks.
  CHECK(rig.cluster.peer(PeerId{0}).block_count() +
            rig.cluster.peer(PeerId{1}).block_count() == 0);
}

TEST_CASE("round robin cycles peers and skips failed ones") {
  RigOptions o;
  o.peers = 3;
  o.policy = PlacementPolicy::kRoundRobin;
  Rig rig(o);
  std::vector<uint32_t> got;
  for (uint64_t s = 0; s < 4; ++s) {
    got.push_back(rig.placement->MapSlab(SlabId{s}).locations[0].peer.value());
  }
  CHECK(got == std::vector<uint32_t>{0, 1, 2, 0});
  rig.cluster.FailPeer(PeerId{1});
  CHECK(rig.placement->MapSlab(SlabId{4}).locations[0].peer == PeerId{2});
  CHECK(rig.placement->MapSlab(SlabId{5}).locations[0].peer == PeerId{0});
}

TEST_CASE("remap and drop update the forward and reverse maps") {
  RigOptions o;
  o.replication = 2;
  Rig rig(o);
  const auto m = rig.placement->MapSlab(SlabId{0});
  std::set<PeerId> exclude{m.locations[0].peer, m.locations[1].peer};
  const Location fresh = rig.placement->AllocateBlock(exclude);
  rig.placement->RemapSlab(SlabId{0}, 1, fresh);
  CHECK(rig.placement->Find(SlabId{0})->locations[1] == fresh);
  CHECK_FALSE(rig.placement->Reverse(m.locations[1].peer, m.locations[1].block));
  CHECK(rig.placement->Reverse(fresh.peer, fresh.block)->second == 1u);
  CHECK_FALSE(rig.placement->DropLocation(SlabId{0}, 0));
  CHECK(rig.placement->Find(SlabId{0})->locations.size() == 1);
  CHECK(rig.placement->DropLocation(SlabId{0}, 0));
  CHECK(rig.placement->Find(SlabId{0}) == nullptr);
}

}  // namespace
}  // namespace tiermem
