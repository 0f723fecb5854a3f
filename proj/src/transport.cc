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

#include "tiermem/transport.h"

#include <string>

namespace tiermem {

wire::ControlReply ServeControl(Peer& peer, const wire::ControlMessage& msg) {
  using wire::ControlOp;
  using wire::ReplyStatus;
  wire::ControlReply reply;
  switch (msg.op) {
    case ControlOp::kQueryFree:
      break;
    case ControlOp::kAllocBlk:
      try {
        const BlockId id =
            peer.AllocateBlock(SenderId{msg.sender_id}, msg.value);
        if (msg.session_id != 0) peer.block(id).set_receiving_migration(true);
        reply.block_id = id.value();
      } catch (const CapacityError&) {
        reply.status = ReplyStatus::kRefused;
      }
      break;
    case ControlOp::kCopyBegin:
      if (!peer.HasBlock(BlockId{msg.block_id})) {
        reply.status = ReplyStatus::kError;
      }
      break;
    case ControlOp::kCopyDone:
      if (peer.HasBlock(BlockId{msg.block_id})) {
        peer.block(BlockId{msg.block_id}).set_receiving_migration(false);
      } else {
        reply.status = ReplyStatus::kError;
      }
      break;
    case ControlOp::kReleaseBlk:
      if (peer.HasBlock(BlockId{msg.block_id})) {
        peer.ReleaseBlock(BlockId{msg.block_id});
      } else {
        reply.status = ReplyStatus::kError;
      }
      break;
    case ControlOp::kAbort:
      peer.EvictionFinished();
      break;
    case ControlOp::kEvictReq:
      // Only peers send these; a peer receiving one is a protocol error.
      reply.status = ReplyStatus::kError;
      break;
  }
  reply.free_bytes = peer.free_bytes();
  return reply;
}

void InProcessBackend::Write(PeerId peer, BlockId block, uint64_t offset,
                             std::span<const std::byte> pages, SimTime now) {
  cluster_.peer(peer).block(block).Write(offset, pages, now);
}

void InProcessBackend::Read(PeerId peer, BlockId block, uint64_t offset,
                            uint64_t count, std::span<std::byte> out) {
  const MRBlock& b = cluster_.peer(peer).block(block);
  if (b.receiving_migration()) {
    throw ProtocolError("read served from a partially copied block");
  }
  b.Read(offset, count, out);
}

wire::ControlReply InProcessBackend::Control(PeerId peer,
                                             const wire::ControlMessage& msg) {
  return ServeControl(cluster_.peer(peer), msg);
}

void InProcessBackend::Copy(PeerId src, BlockId src_block, PeerId dst,
                            BlockId dst_block, uint64_t first,
                            uint64_t count) {
  const MRBlock& from = cluster_.peer(src).block(src_block);
  cluster_.peer(dst).block(dst_block).CopyFrom(from, first, count);
}

Transport::Transport(SenderId sender, PeerBackend& backend,
                     const LatencyModel& model, LatencyLedger& ledger,
                     uint64_t message_bytes)
    : sender_(sender),
      backend_(backend),
      model_(model),
      ledger_(ledger),
      message_bytes_(message_bytes) {
  model_.Validate();
  if (message_bytes_ == 0 || message_bytes_ % backend_.page_size() != 0) {
    throw ConfigError("transport: message size must be a page multiple");
  }
}

void Transport::Connect(PeerId peer) {
  if (!backend_.Exists(peer)) {
    throw TopologyError("unknown peer " + std::to_string(peer.value()));
  }
  if (!backend_.Alive(peer)) {
    throw TransportError("peer " + std::to_string(peer.value()) +
                         " has failed");
  }
  if (connected_.insert(peer).second) {
    ledger_.Charge(ChargeKind::kConnect, model_.connect);
  }
}

void Transport::CheckUsable(PeerId peer) const {
  if (!backend_.Exists(peer)) {
    throw TopologyError("unknown peer " + std::to_string(peer.value()));
  }
  if (!connected(peer)) {
    throw TransportError("peer " + std::to_string(peer.value()) +
                         " is not connected");
  }
  if (!backend_.Alive(peer)) {
    throw TransportError("peer " + std::to_string(peer.value()) +
                         " has failed");
  }
}

uint64_t Transport::MessagesFor(uint64_t bytes) const {
  return CeilDiv(bytes, message_bytes_);
}

void Transport::WritePages(PeerId peer, BlockId block, uint64_t offset,
                           std::span<const std::byte> pages) {
  if (pages.empty()) return;
  CheckUsable(peer);
  backend_.Write(peer, block, offset, pages, ledger_.now());
  const uint64_t messages = MessagesFor(pages.size());
  ledger_.Charge(ChargeKind::kNetWrite, messages * model_.net_write);
  data_messages_ += messages;
  bytes_written_ += pages.size();
}

SimTime Transport::ReadPages(PeerId peer, BlockId block, uint64_t offset,
                             uint64_t count, std::span<std::byte> out,
                             bool charge) {
  if (count == 0) return 0;
  CheckUsable(peer);
  backend_.Read(peer, block, offset, count, out);
  const SimTime cost = count * model_.net_read;
  if (charge) ledger_.Charge(ChargeKind::kNetRead, cost);
  return cost;
}

wire::ControlReply Transport::SendControl(PeerId peer,
                                          wire::ControlMessage msg) {
  CheckUsable(peer);
  msg.sender_id = sender_.value();
  msg.peer_id = peer.value();
  msg.value = ledger_.now();
  const wire::ControlReply reply = backend_.Control(peer, msg);
  ledger_.Charge(ChargeKind::kNetWrite, model_.net_write);
  ledger_.Charge(ChargeKind::kNetRead, model_.net_read);
  advertised_[peer] = reply.free_bytes;
  ++control_messages_;
  return reply;
}

void Transport::CopyPages(PeerId src, BlockId src_block, PeerId dst,
                          BlockId dst_block, uint64_t first, uint64_t count) {
  if (!backend_.Alive(src)) {
    throw TransportError("copy source peer " + std::to_string(src.value()) +
                         " has failed");
  }
  if (!backend_.Alive(dst)) {
    throw TransportError("copy destination peer " +
                         std::to_string(dst.value()) + " has failed");
  }
  backend_.Copy(src, src_block, dst, dst_block, first, count);
  const uint64_t messages = MessagesFor(count * backend_.page_size());
  ledger_.Charge(ChargeKind::kNetWrite, messages * model_.net_write);
  data_messages_ += messages;
}

std::optional<uint64_t> Transport::advertised_free(PeerId peer) const {
  auto it = advertised_.find(peer);
  if (it == advertised_.end()) return std::nullopt;
  return it->second;
}

}  // namespace tiermem
