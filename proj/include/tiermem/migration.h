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

#ifndef TIERMEM_MIGRATION_H_
#define TIERMEM_MIGRATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "tiermem/placement.h"
#include "tiermem/sender_engine.h"
#include "tiermem/transport.h"
#include "tiermem/types.h"
#include "tiermem/wire.h"

namespace tiermem {

enum class MigrationState {
  kRequested,
  kDestinationChosen,
  kCopying,
  kRemapped,
  kFlushed,
  kDone,
  kAborted,
};

std::string_view ToString(MigrationState state);

struct MigrationSession {
  uint64_t id = 0;
  SlabId slab;
  size_t location_index = 0;
  Location source;
  std::optional<Location> destination;
  MigrationState state = MigrationState::kRequested;
  uint64_t held_write_count = 0;
  uint64_t chunks_total = 0;
  uint64_t chunks_copied = 0;
  uint64_t restarts = 0;
  // Protocol messages by opcode, EVICT_REQ included. Capacity probes
  // (QUERY_FREE) belong to placement and are not part of the protocol.
  std::map<wire::ControlOp, uint64_t> messages;
  uint64_t connects = 0;  // connect charges incurred by this session
  SimTime started_at = 0;
  SimTime finished_at = 0;

  uint64_t protocol_messages() const;
};

struct MigrationStats {
  uint64_t requests = 0;
  uint64_t rejected = 0;  // duplicate request for a slab already migrating
  uint64_t completed = 0;
  uint64_t aborted = 0;
  uint64_t bytes_moved = 0;
};

// Sender-side driver of the migration protocol. The sender decides every
// step; source and destination peers only answer control messages and
// perform the block copy.
class MigrationCoordinator {
 public:
  MigrationCoordinator(Device& device, Transport& transport,
                       Placement& placement);

  // EVICT_REQ from `source` for one of its blocks. Returns the session id,
  // or nullopt when the request was ignored (slab already migrating, or
  // the block is not ours, in which case the source gets an ABORT).
  std::optional<uint64_t> OnEvictRequest(PeerId source, BlockId block);

  // Copies one chunk of the oldest active session, finishing it when the
  // copy completes. Returns false when no session is active.
  bool Step();
  // Steps sessions while the migration clock is behind `horizon`.
  void Pump(SimTime horizon);
  // Runs every active session to completion.
  void Finish();

  bool active(SlabId slab) const { return by_slab_.contains(slab); }
  size_t active_count() const { return by_slab_.size(); }
  const MigrationSession& session(uint64_t id) const;
  const std::map<uint64_t, MigrationSession>& sessions() const {
    return sessions_;
  }
  const MigrationStats& stats() const { return stats_; }

 private:
  wire::ControlReply Send(MigrationSession& s, PeerId peer,
                          wire::ControlMessage msg);
  bool ChooseDestination(MigrationSession& s);
  void Complete(MigrationSession& s);
  void Abort(MigrationSession& s);
  void Close(MigrationSession& s);

  Device& device_;
  Transport& transport_;
  Placement& placement_;
  uint64_t next_id_ = 1;
  std::map<uint64_t, MigrationSession> sessions_;
  std::map<SlabId, uint64_t> by_slab_;
  MigrationStats stats_;
};

}  // namespace tiermem

#endif  // TIERMEM_MIGRATION_H_
