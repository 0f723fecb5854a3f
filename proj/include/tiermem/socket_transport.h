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

#ifndef TIERMEM_SOCKET_TRANSPORT_H_
#define TIERMEM_SOCKET_TRANSPORT_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tiermem/remote_store.h"
#include "tiermem/transport.h"
#include "tiermem/wire.h"

namespace tiermem {

// ACK status codes carried in the frame's offset field.
enum class AckStatus : uint32_t {
  kOk = 0,
  kMappingError = 1,
  kProtocolError = 2,
  kError = 3,
};

// Serves one Peer over TCP using the framed wire format. Writes carry no
// timestamp, so the server keeps the latest virtual time seen in CTRL frames
// and tags writes with it.
class PeerServer {
 public:
  // Binds 127.0.0.1:`port`; port 0 picks an ephemeral port.
  explicit PeerServer(Peer& peer, uint16_t port = 0);
  ~PeerServer();
  PeerServer(const PeerServer&) = delete;
  PeerServer& operator=(const PeerServer&) = delete;

  uint16_t port() const { return port_; }

  void Start();
  void Stop();

  // Handles one decoded request; exposed for tests.
  wire::Frame Handle(const wire::Frame& request);

 private:
  void AcceptLoop();
  void ServeConnection(int fd);

  Peer& peer_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;  // guards peer_ and clock_
  SimTime clock_ = 0;
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::vector<std::thread> connections_;
  std::vector<int> connection_fds_;
};

// PeerBackend talking to PeerServers. One socket per peer; a failed send or
// receive marks the peer failed.
class SocketBackend : public PeerBackend {
 public:
  explicit SocketBackend(uint32_t page_size) : page_size_(page_size) {}
  ~SocketBackend() override;

  void AddPeer(PeerId peer, const std::string& host, uint16_t port);
  void MarkFailed(PeerId peer);

  bool Exists(PeerId peer) const override;
  bool Alive(PeerId peer) const override;
  uint32_t page_size() const override { return page_size_; }

  void Write(PeerId peer, BlockId block, uint64_t offset,
             std::span<const std::byte> pages, SimTime now) override;
  void Read(PeerId peer, BlockId block, uint64_t offset, uint64_t count,
            std::span<std::byte> out) override;
  wire::ControlReply Control(PeerId peer,
                             const wire::ControlMessage& msg) override;
  // Relayed through this process: read from the source, write to the
  // destination.
  void Copy(PeerId src, BlockId src_block, PeerId dst, BlockId dst_block,
            uint64_t first, uint64_t count) override;

 private:
  struct Connection {
    int fd = -1;
    bool failed = false;
    std::mutex mu;
  };

  wire::Frame RoundTrip(PeerId peer, const wire::Frame& request);

  uint32_t page_size_;
  mutable std::mutex mu_;
  std::map<PeerId, std::unique_ptr<Connection>> peers_;
};

}  // namespace tiermem

#endif  // TIERMEM_SOCKET_TRANSPORT_H_
