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

#ifndef TIERMEM_TRANSPORT_H_
#define TIERMEM_TRANSPORT_H_

#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>

#include "tiermem/latency.h"
#include "tiermem/remote_store.h"
#include "tiermem/types.h"
#include "tiermem/wire.h"

namespace tiermem {

// Moves bytes between a sender and its peers. Backends do no latency
// accounting; that lives in Transport so every backend charges identically.
class PeerBackend {
 public:
  virtual ~PeerBackend() = default;

  virtual bool Exists(PeerId peer) const = 0;
  virtual bool Alive(PeerId peer) const = 0;
  virtual uint32_t page_size() const = 0;

  virtual void Write(PeerId peer, BlockId block, uint64_t offset,
                     std::span<const std::byte> pages, SimTime now) = 0;
  virtual void Read(PeerId peer, BlockId block, uint64_t offset,
                    uint64_t count, std::span<std::byte> out) = 0;
  virtual wire::ControlReply Control(PeerId peer,
                                     const wire::ControlMessage& msg) = 0;
  // Copies pages [first, first+count) of one block into another.
  virtual void Copy(PeerId src, BlockId src_block, PeerId dst,
                    BlockId dst_block, uint64_t first, uint64_t count) = 0;
};

// Executes a control message against a peer; shared by the in-process
// backend and the socket server.
wire::ControlReply ServeControl(Peer& peer, const wire::ControlMessage& msg);

// Direct calls into the peers of an in-process Cluster.
class InProcessBackend : public PeerBackend {
 public:
  explicit InProcessBackend(Cluster& cluster) : cluster_(cluster) {}

  bool Exists(PeerId peer) const override { return cluster_.contains(peer); }
  bool Alive(PeerId peer) const override { return cluster_.alive(peer); }
  uint32_t page_size() const override { return cluster_.page_size(); }

  void Write(PeerId peer, BlockId block, uint64_t offset,
             std::span<const std::byte> pages, SimTime now) override;
  void Read(PeerId peer, BlockId block, uint64_t offset, uint64_t count,
            std::span<std::byte> out) override;
  wire::ControlReply Control(PeerId peer,
                             const wire::ControlMessage& msg) override;
  void Copy(PeerId src, BlockId src_block, PeerId dst, BlockId dst_block,
            uint64_t first, uint64_t count) override;

 private:
  Cluster& cluster_;
};

// One sender's endpoint towards all peers. Charges the LatencyModel to the
// ledger's current channel.
class Transport {
 public:
  Transport(SenderId sender, PeerBackend& backend, const LatencyModel& model,
            LatencyLedger& ledger, uint64_t message_bytes);

  SenderId sender() const { return sender_; }
  PeerBackend& backend() { return backend_; }
  const LatencyModel& model() const { return model_; }
  LatencyLedger& ledger() { return ledger_; }
  uint64_t message_bytes() const { return message_bytes_; }

  // Charges `connect` on first contact only.
  void Connect(PeerId peer);
  bool connected(PeerId peer) const { return connected_.contains(peer); }
  bool alive(PeerId peer) const { return backend_.Alive(peer); }

  // Charges ceil(bytes / message_bytes) * net_write.
  void WritePages(PeerId peer, BlockId block, uint64_t offset,
                  std::span<const std::byte> pages);

  // Returns the cost, count * net_read. When `charge` is false the caller
  // accounts for it (parallel reads charge the slowest request only).
  SimTime ReadPages(PeerId peer, BlockId block, uint64_t offset,
                    uint64_t count, std::span<std::byte> out,
                    bool charge = true);

  // Synchronous round trip: one net_write plus one net_read.
  wire::ControlReply SendControl(PeerId peer, wire::ControlMessage msg);

  // Peer-to-peer copy of `count` pages; charged like a write of that size.
  void CopyPages(PeerId src, BlockId src_block, PeerId dst, BlockId dst_block,
                 uint64_t first, uint64_t count);

  // Last free-memory advertisement received from `peer`, if any.
  std::optional<uint64_t> advertised_free(PeerId peer) const;

  uint64_t control_messages() const { return control_messages_; }
  uint64_t data_messages() const { return data_messages_; }
  uint64_t bytes_written() const { return bytes_written_; }

 private:
  void CheckUsable(PeerId peer) const;
  uint64_t MessagesFor(uint64_t bytes) const;

  SenderId sender_;
  PeerBackend& backend_;
  LatencyModel model_;
  LatencyLedger& ledger_;
  uint64_t message_bytes_;
  std::unordered_set<PeerId> connected_;
  std::unordered_map<PeerId, uint64_t> advertised_;
  uint64_t control_messages_ = 0;
  uint64_t data_messages_ = 0;
  uint64_t bytes_written_ = 0;
};

}  // namespace tiermem

#endif  // TIERMEM_TRANSPORT_H_
