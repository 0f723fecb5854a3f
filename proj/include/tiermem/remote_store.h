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

#ifndef TIERMEM_REMOTE_STORE_H_
#define TIERMEM_REMOTE_STORE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tiermem/types.h"

namespace tiermem {

// Last sender write to a block. Reads never touch it.
struct ActivityTag {
  SimTime last_write_time = 0;
};

// A unit-sized remote memory block. Storage is sparse: pages never written
// read back as zeros.
class MRBlock {
 public:
  MRBlock(BlockId id, SenderId owner, uint64_t pages, uint32_t page_size,
          SimTime now);

  BlockId id() const { return id_; }
  SenderId owner() const { return owner_; }
  uint64_t pages() const { return pages_; }
  const ActivityTag& tag() const { return tag_; }

  // `data` holds a whole number of pages starting at page `offset`.
  void Write(uint64_t offset, std::span<const std::byte> data, SimTime now);
  void Read(uint64_t offset, uint64_t count, std::span<std::byte> out) const;

  // Copies pages [first, first+count) of `source` without touching the tag.
  void CopyFrom(const MRBlock& source, uint64_t first, uint64_t count);

  // Set on a migration destination until its copy completes.
  bool receiving_migration() const { return receiving_; }
  void set_receiving_migration(bool on) { receiving_ = on; }

  size_t resident_pages() const { return data_.size(); }

 private:
  void CheckRange(uint64_t offset, uint64_t count) const;

  BlockId id_;
  SenderId owner_;
  uint64_t pages_;
  uint32_t page_size_;
  ActivityTag tag_;
  bool receiving_ = false;
  std::unordered_map<uint64_t, std::vector<std::byte>> data_;
};

enum class EvictionPolicy { kMigrate, kDelete };

struct PeerConfig {
  uint64_t total_bytes = 0;
  uint64_t slab_bytes = 0;
  uint32_t page_size = kDefaultPageSize;
  // Eviction starts when free memory would drop below this many bytes.
  uint64_t eviction_watermark_bytes = 0;
  EvictionPolicy policy = EvictionPolicy::kMigrate;
};

// What the activity monitor decided on a pressure tick.
struct PressureAction {
  enum class Kind { kNone, kEvictRequest, kDeleted };
  Kind kind = Kind::kNone;
  BlockId block;
  SenderId owner;
};

// Memory donor node: a pool of MR blocks plus native-application pressure.
class Peer {
 public:
  Peer(PeerId id, PeerConfig config);

  PeerId id() const { return id_; }
  const PeerConfig& config() const { return config_; }
  uint64_t slab_pages() const { return config_.slab_bytes / config_.page_size; }

  // free = total - native - blocks, where native usage is capped by what is
  // left after blocks; a shortfall is pressure, not negative free memory.
  uint64_t free_bytes() const;
  uint64_t native_usage() const;
  uint64_t requested_native_usage() const { return native_requested_; }
  uint64_t block_bytes() const {
    return static_cast<uint64_t>(blocks_.size()) * config_.slab_bytes;
  }
  size_t block_count() const { return blocks_.size(); }

  BlockId AllocateBlock(SenderId sender, SimTime now);
  void ReleaseBlock(BlockId block);
  bool HasBlock(BlockId block) const { return blocks_.contains(block); }
  MRBlock& block(BlockId block);
  const MRBlock& block(BlockId block) const;
  std::vector<BlockId> block_ids() const;

  SimTime NonActivityDuration(BlockId block, SimTime now) const;

  // Block with the longest non-activity duration; ties go to the lowest id.
  // Blocks still receiving a migration are not candidates.
  BlockId SelectVictim(SimTime now) const;

  // Recomputes free memory under `native_usage` and emits at most one
  // eviction per call.
  PressureAction PressureTick(uint64_t native_usage, SimTime now);
  bool EvictionNeeded() const;

  // Clears the in-flight eviction once its migration has finished.
  void EvictionFinished();
  std::optional<BlockId> eviction_in_flight() const { return in_flight_; }

  bool failed() const { return failed_; }
  void set_failed(bool failed) { failed_ = failed; }

 private:
  PeerId id_;
  PeerConfig config_;
  uint64_t native_requested_ = 0;
  uint64_t next_block_ = 1;
  std::map<BlockId, std::unique_ptr<MRBlock>> blocks_;
  std::optional<BlockId> in_flight_;
  bool failed_ = false;
};

// All peers known to the simulation, indexed by PeerId.
class Cluster {
 public:
  Cluster(uint64_t slab_bytes, uint32_t page_size);

  PeerId AddPeer(uint64_t total_bytes,
                 EvictionPolicy policy = EvictionPolicy::kMigrate,
                 uint64_t eviction_watermark_bytes = 0);

  bool contains(PeerId id) const { return id.value() < peers_.size(); }
  Peer& peer(PeerId id);
  const Peer& peer(PeerId id) const;
  size_t size() const { return peers_.size(); }
  uint64_t slab_bytes() const { return slab_bytes_; }
  uint32_t page_size() const { return page_size_; }
  uint64_t slab_pages() const { return slab_bytes_ / page_size_; }

  void FailPeer(PeerId id) { peer(id).set_failed(true); }
  bool alive(PeerId id) const { return contains(id) && !peer(id).failed(); }

 private:
  uint64_t slab_bytes_;
  uint32_t page_size_;
  std::vector<std::unique_ptr<Peer>> peers_;
};

}  // namespace tiermem

#endif  // TIERMEM_REMOTE_STORE_H_
