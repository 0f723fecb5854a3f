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
#include <vector>

#include "doctest.h"
#include "test_util.h"
#include "tiermem/random.h"
#include "tiermem/remote_store.h"

namespace tiermem {
namespace {

using testing::kPage;

constexpr uint64_t kSlabPages = 16;
constexpr uint64_t kSlab = kSlabPages * kPage;

Peer MakePeer(uint64_t slabs, EvictionPolicy policy = EvictionPolicy::kMigrate,
              uint64_t watermark = 0) {
  return Peer(PeerId{0}, PeerConfig{slabs * kSlab, kSlab, kPage, watermark, policy});
}

void Touch(Peer& peer, BlockId b, SimTime now) {
  peer.block(b).Write(0, testing::Pages(1, 1), now);
}

TEST_CASE("block write and read round trip with sparse storage") {
  MRBlock b(BlockId{1}, SenderId{0}, kSlabPages, kPage, 0);
  const auto data = testing::Pages(3, 40);
  b.Write(5, data, 12);
  CHECK(b.tag().last_write_time == 12);
  CHECK(b.resident_pages() == 3);
  std::vector<std::byte> out(4 * kPage, std::byte{0xff});
  b.Read(4, 4, out);
  CHECK(std::all_of(out.begin(), out.begin() + kPage,
                    [](std::byte x) { return x == std::byte{0}; }));
  CHECK(std::equal(data.begin(), data.end(), out.begin() + kPage));
  CHECK_THROWS_AS(b.Read(kSlabPages - 1, 2, out), MappingError);
  CHECK_THROWS_AS(b.Write(kSlabPages, testing::Pages(1, 0), 13), MappingError);
}

TEST_CASE("copying pages leaves the activity tag alone") {
  MRBlock src(BlockId{1}, SenderId{0}, kSlabPages, kPage, 0);
  MRBlock dst(BlockId{2}, SenderId{0}, kSlabPages, kPage, 3);
  src.Write(0, testing::Pages(kSlabPages, 9), 50);
  dst.CopyFrom(src, 0, kSlabPages);
  CHECK(dst.tag().last_write_time == 3);
  std::vector<std::byte> a(kSlabPages * kPage), b(kSlabPages * kPage);
  src.Read(0, kSlabPages, a);
  dst.Read(0, kSlabPages, b);
  CHECK(a == b);
}

TEST_CASE("allocation needs a block plus the watermark of free memory") {
  Peer peer = MakePeer(8);
  // Watermark defaults to one slab: seven blocks fit, the eighth does not.
  for (int i = 0; i < 7; ++i) CHECK_NOTHROW(peer.AllocateBlock(SenderId{0}, 0));
  CHECK(peer.free_bytes() == kSlab);
  CHECK_THROWS_AS(peer.AllocateBlock(SenderId{0}, 0), CapacityError);
  CHECK(peer.block_count() == 7);
}

TEST_CASE("free memory accounts for native usage without going negative") {
  Peer peer = MakePeer(8);
  peer.AllocateBlock(SenderId{0}, 0);
  peer.PressureTick(3 * kSlab, 0);
  CHECK(peer.free_bytes() == 4 * kSlab);
  peer.PressureTick(100 * kSlab, 0);
  CHECK(peer.free_bytes() == 0);
  CHECK(peer.native_usage() == 7 * kSlab);
  CHECK(peer.requested_native_usage() == 100 * kSlab);
}

TEST_CASE("release of an unknown block is a mapping error") {
  Peer peer = MakePeer(4);
  CHECK_THROWS_AS(peer.ReleaseBlock(BlockId{42}), MappingError);
}

TEST_CASE("non-activity duration is measured from the last write") {
  Peer peer = MakePeer(8);
  const BlockId b = peer.AllocateBlock(SenderId{0}, 10);
  CHECK(peer.NonActivityDuration(b, 10) == 0);
  CHECK(peer.NonActivityDuration(b, 25) == 15);
  Touch(peer, b, 20);
  CHECK(peer.NonActivityDuration(b, 25) == 5);
  // A clock behind the tag clamps to zero.
  CHECK(peer.NonActivityDuration(b, 15) == 0);
}

TEST_CASE("victim is the block idle the longest") {
  Peer peer = MakePeer(8);
  const BlockId a = peer.AllocateBlock(SenderId{0}, 0);
  const BlockId b = peer.AllocateBlock(SenderId{0}, 0);
  const BlockId c = peer.AllocateBlock(SenderId{0}, 0);
  Touch(peer, a, 9);
  Touch(peer, b, 3);
  Touch(peer, c, 15);
  CHECK(peer.SelectVictim(20) == b);
}

TEST_CASE("victim ties go to the lowest block id") {
  Peer peer = MakePeer(8);
  const BlockId a = peer.AllocateBlock(SenderId{0}, 0);
  const BlockId b = peer.AllocateBlock(SenderId{0}, 0);
  Touch(peer, b, 4);
  Touch(peer, a, 4);
  CHECK(peer.SelectVictim(10) == a);
}

TEST_CASE("blocks receiving a migration are never victims") {
  Peer peer = MakePeer(8);
  const BlockId a = peer.AllocateBlock(SenderId{0}, 0);
  const BlockId b = peer.AllocateBlock(SenderId{0}, 0);
  Touch(peer, b, 5);
  peer.block(a).set_receiving_migration(true);
  CHECK(peer.SelectVictim(10) == b);
  peer.block(b).set_receiving_migration(true);
  CHECK_THROWS_AS(peer.SelectVictim(10), CapacityError);
}

TEST_CASE("victim selection matches brute force on random pools") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    Peer peer = MakePeer(40);
    const uint64_t n = 1 + UniformBelow(rng, 30);
    std::vector<std::pair<BlockId, SimTime>> written;
    for (uint64_t i = 0; i < n; ++i) {
      const BlockId id = peer.AllocateBlock(SenderId{0}, 0);
      const SimTime t = UniformBelow(rng, 50);
      Touch(peer, id, t);
      written.push_back({id, t});
    }
    const SimTime now = 100;
    BlockId want = written[0].first;
    SimTime best = now - written[0].second;
    for (const auto& [id, t] : written) {
      if (now - t > best || (now - t == best && id < want)) {
        want = id;
        best = now - t;
      }
    }
    REQUIRE(peer.SelectVictim(now) == want);
  }
}

TEST_CASE("pressure emits at most one eviction request at a time") {
  Peer peer = MakePeer(8);
  for (int i = 0; i < 4; ++i) peer.AllocateBlock(SenderId{3}, 0);
  CHECK(peer.PressureTick(2 * kSlab, 1).kind == PressureAction::Kind::kNone);
  CHECK_FALSE(peer.EvictionNeeded());
  const auto first = peer.PressureTick(4 * kSlab, 2);
  CHECK(first.kind == PressureAction::Kind::kEvictRequest);
  CHECK(first.owner == SenderId{3});
  CHECK(peer.eviction_in_flight() == first.block);
  CHECK(peer.PressureTick(4 * kSlab, 3).kind == PressureAction::Kind::kNone);
  // Migration done: the source gives up the block and the next tick may
  // ask again if pressure remains.
  peer.ReleaseBlock(first.block);
  CHECK_FALSE(peer.eviction_in_flight());
  CHECK(peer.PressureTick(4 * kSlab, 4).kind == PressureAction::Kind::kNone);
  CHECK(peer.PressureTick(5 * kSlab, 5).kind ==
        PressureAction::Kind::kEvictRequest);
}

TEST_CASE("delete policy drops the victim outright") {
  Peer peer = MakePeer(8, EvictionPolicy::kDelete);
  const BlockId a = peer.AllocateBlock(SenderId{1}, 0);
  const BlockId b = peer.AllocateBlock(SenderId{2}, 0);
  Touch(peer, a, 7);
  const auto act = peer.PressureTick(6 * kSlab + 1, 8);
  CHECK(act.kind == PressureAction::Kind::kDeleted);
  CHECK(act.block == b);
  CHECK(act.owner == SenderId{2});
  CHECK_FALSE(peer.HasBlock(b));
  CHECK_FALSE(peer.eviction_in_flight());
}

TEST_CASE("failed peers do not react to pressure") {
  Peer peer = MakePeer(4);
  peer.AllocateBlock(SenderId{0}, 0);
  peer.set_failed(true);
  CHECK(peer.PressureTick(4 * kSlab, 1).kind == PressureAction::Kind::kNone);
}

TEST_CASE("blocks from several senders share one peer") {
  Peer peer = MakePeer(8);
  const BlockId a = peer.AllocateBlock(SenderId{1}, 0);
  const BlockId b = peer.AllocateBlock(SenderId{2}, 0);
  peer.block(a).Write(0, testing::Pages(1, 10), 1);
  peer.block(b).Write(0, testing::Pages(1, 20), 2);
  std::vector<std::byte> out(kPage);
  peer.block(a).Read(0, 1, out);
  CHECK(out[0] == std::byte{10});
  peer.block(b).Read(0, 1, out);
  CHECK(out[0] == std::byte{20});
  CHECK(peer.block(a).owner() == SenderId{1});
  CHECK(peer.block(b).owner() == SenderId{2});
}

TEST_CASE("cluster validates slab geometry") {
  CHECK_THROWS_AS(Cluster(1000, kPage), ConfigError);
  Cluster c(kSlab, kPage);
  const PeerId p = c.AddPeer(4 * kSlab);
  CHECK(c.alive(p));
  c.FailPeer(p);
  CHECK_FALSE(c.alive(p));
  CHECK_FALSE(c.contains(PeerId{7}));
}

}  // namespace
}  // namespace tiermem
