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

#include "tiermem/migration.h"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace tiermem {

std::string_view ToString(MigrationState state) {
  switch (state) {
    case MigrationState::kRequested: return "requested";
    case MigrationState::kDestinationChosen: return "destination_chosen";
    case MigrationState::kCopying: return "copying";
    case MigrationState::kRemapped: return "remapped";
    case MigrationState::kFlushed: return "flushed";
    case MigrationState::kDone: return "done";
    case MigrationState::kAborted: return "aborted";
  }
  return "?";
}

uint64_t MigrationSession::protocol_messages() const {
  uint64_t n = 0;
  for (const auto& [op, count] : messages) n += count;
  return n;
}

MigrationCoordinator::MigrationCoordinator(Device& device,
                                           Transport& transport,
                                           Placement& placement)
    : device_(device), transport_(transport), placement_(placement) {
  device_.set_background_hook([this] { return Step(); });
}

const MigrationSession& MigrationCoordinator::session(uint64_t id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw std::out_of_range("migration: no session " + std::to_string(id));
  }
  return it->second;
}

wire::ControlReply MigrationCoordinator::Send(MigrationSession& s, PeerId peer,
                                              wire::ControlMessage msg) {
  msg.slab_id = s.slab.value();
  msg.session_id = s.id;
  ++s.messages[msg.op];
  return transport_.SendControl(peer, msg);
}

std::optional<uint64_t> MigrationCoordinator::OnEvictRequest(PeerId source,
                                                             BlockId block) {
  LatencyLedger& ledger = device_.ledger();
  LatencyLedger::ChannelScope scope(ledger, Channel::kMigration);
  ledger.AdvanceTo(Channel::kMigration, ledger.now(Channel::kForeground));
  ++stats_.requests;

  const auto owner = placement_.Reverse(source, block);
  if (!owner) {
    // Not a block of ours (already released or remapped); let the peer
    // pick another victim.
    if (transport_.alive(source)) {
      transport_.SendControl(source, {.op = wire::ControlOp::kAbort,
                                      .block_id = block.value()});
    }
    ++stats_.rejected;
    return std::nullopt;
  }
  const auto [slab, index] = *owner;
  if (by_slab_.contains(slab)) {
    if (transport_.alive(source)) {
      transport_.SendControl(source, {.op = wire::ControlOp::kAbort,
                                      .block_id = block.value()});
    }
    ++stats_.rejected;
    return std::nullopt;
  }

  const uint64_t connects_before = ledger.count(ChargeKind::kConnect);
  MigrationSession s;
  s.id = next_id_++;
  s.slab = slab;
  s.location_index = index;
  s.source = Location{source, block};
  s.started_at = ledger.now();
  s.messages[wire::ControlOp::kEvictReq] = 1;
  device_.HoldSlab(slab);

  auto& stored = sessions_.emplace(s.id, std::move(s)).first->second;
  by_slab_[slab] = stored.id;
  if (ChooseDestination(stored)) {
    stored.chunks_total =
        CeilDiv(placement_.slab_bytes(), transport_.message_bytes());
  } else {
    Abort(stored);
  }
  stored.connects += ledger.count(ChargeKind::kConnect) - connects_before;
  return stored.id;
}

bool MigrationCoordinator::ChooseDestination(MigrationSession& s) {
  std::set<PeerId> exclude{s.source.peer};
  if (s.destination) exclude.insert(s.destination->peer);
  if (const SlabMapping* m = placement_.Find(s.slab)) {
    for (const Location& loc : m->locations) exclude.insert(loc.peer);
  }
  Location dst;
  try {
    dst = placement_.AllocateBlock(exclude, s.id);
  } catch (const CapacityError&) {
    return false;
  }
  ++s.messages[wire::ControlOp::kAllocBlk];
  s.destination = dst;
  s.state = MigrationState::kDestinationChosen;
  try {
    Send(s, s.source.peer,
         {.op = wire::ControlOp::kCopyBegin,
          .block_id = s.source.block.value(),
          .dst_peer = dst.peer.value(),
          .dst_block = dst.block.value()});
  } catch (const TransportError&) {
    return false;  // source gone
  }
  s.state = MigrationState::kCopying;
  s.chunks_copied = 0;
  return true;
}

bool MigrationCoordinator::Step() {
  if (by_slab_.empty()) return false;
  LatencyLedger& ledger = device_.ledger();
  LatencyLedger::ChannelScope scope(ledger, Channel::kMigration);
  MigrationSession& s = sessions_.at(by_slab_.begin()->second);
  const uint64_t connects_before = ledger.count(ChargeKind::kConnect);

  const uint64_t chunk_pages = transport_.message_bytes() / device_.page_size();
  const uint64_t slab_pages = placement_.slab_pages();
  const uint64_t first = s.chunks_copied * chunk_pages;
  const uint64_t count = std::min(chunk_pages, slab_pages - first);
  try {
    transport_.CopyPages(s.source.peer, s.source.block, s.destination->peer,
                         s.destination->block, first, count);
    ++s.chunks_copied;
    stats_.bytes_moved += count * device_.page_size();
  } catch (const TransportError&) {
    if (!transport_.alive(s.source.peer)) {
      Abort(s);
    } else {
      // Destination lost mid-copy: the source is intact, start over.
      ++s.restarts;
      if (!ChooseDestination(s)) Abort(s);
    }
    s.connects += ledger.count(ChargeKind::kConnect) - connects_before;
    return true;
  }
  if (s.chunks_copied == s.chunks_total) Complete(s);
  s.connects += ledger.count(ChargeKind::kConnect) - connects_before;
  return true;
}

void MigrationCoordinator::Complete(MigrationSession& s) {
  const Location dst = *s.destination;
  try {
    Send(s, dst.peer,
         {.op = wire::ControlOp::kCopyDone, .block_id = dst.block.value()});
  } catch (const TransportError&) {
    ++s.restarts;
    if (!ChooseDestination(s)) Abort(s);
    return;
  }
  // The location index may have shifted if another replica was dropped.
  const auto where = placement_.Reverse(s.source.peer, s.source.block);
  if (!where) {
    Abort(s);
    return;
  }
  placement_.RemapSlab(s.slab, where->second, dst);
  s.state = MigrationState::kRemapped;
  s.held_write_count = device_.HeldEntries(s.slab);
  device_.ReleaseSlab(s.slab);
  s.state = MigrationState::kFlushed;
  if (transport_.alive(s.source.peer)) {
    Send(s, s.source.peer, {.op = wire::ControlOp::kReleaseBlk,
                            .block_id = s.source.block.value()});
  }
  s.state = MigrationState::kDone;
  ++stats_.completed;
  Close(s);
}

void MigrationCoordinator::Abort(MigrationSession& s) {
  s.state = MigrationState::kAborted;
  ++stats_.aborted;
  if (s.destination && transport_.alive(s.destination->peer)) {
    transport_.SendControl(s.destination->peer,
                           {.op = wire::ControlOp::kReleaseBlk,
                            .block_id = s.destination->block.value()});
  }
  // Fall back to deletion: the source gives the block up and the sender
  // recovers from replicas, disk or its own mempool.
  if (transport_.alive(s.source.peer)) {
    Send(s, s.source.peer,
         {.op = wire::ControlOp::kAbort, .block_id = s.source.block.value()});
    transport_.SendControl(s.source.peer,
                           {.op = wire::ControlOp::kReleaseBlk,
                            .block_id = s.source.block.value()});
  }
  s.held_write_count = device_.HeldEntries(s.slab);
  if (const auto where = placement_.Reverse(s.source.peer, s.source.block)) {
    device_.OnLocationLost(s.slab, where->second);
  }
  Close(s);
  device_.ReleaseSlab(s.slab);
}

void MigrationCoordinator::Close(MigrationSession& s) {
  s.finished_at = device_.ledger().now(Channel::kMigration);
  by_slab_.erase(s.slab);
}

void MigrationCoordinator::Pump(SimTime horizon) {
  while (!by_slab_.empty() &&
         device_.ledger().now(Channel::kMigration) < horizon) {
    Step();
  }
}

void MigrationCoordinator::Finish() {
  while (Step()) {
  }
}

}  // namespace tiermem
