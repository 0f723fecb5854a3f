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

#include "tiermem/socket_transport.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace tiermem {
namespace {

bool SendAll(int fd, std::span<const std::byte> data) {
  size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n =
        ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<size_t>(n);
  }
  return true;
}

bool RecvAll(int fd, std::byte* out, size_t len) {
  size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, out + got, len - got, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    got += static_cast<size_t>(n);
  }
  return true;
}

// Reads one whole frame; nullopt on EOF or socket error.
std::optional<wire::Frame> RecvFrame(int fd) {
  std::vector<std::byte> buf(wire::kLengthBytes);
  if (!RecvAll(fd, buf.data(), buf.size())) return std::nullopt;
  uint32_t body = 0;
  for (size_t i = 0; i < 4; ++i) {
    body |= static_cast<uint32_t>(buf[i]) << (8 * i);
  }
  if (body < wire::kHeaderBytes || body > wire::kMaxFrameBytes) {
    throw ProtocolError("wire: bad frame length");
  }
  buf.resize(wire::kLengthBytes + body);
  if (!RecvAll(fd, buf.data() + wire::kLengthBytes, body)) return std::nullopt;
  size_t consumed = 0;
  return wire::DecodeFrame(buf, &consumed);
}

wire::Frame Ack(AckStatus status, std::vector<std::byte> payload = {}) {
  wire::Frame f;
  f.opcode = wire::Opcode::kAck;
  f.offset = static_cast<uint32_t>(status);
  f.payload = std::move(payload);
  return f;
}

}  // namespace

PeerServer::PeerServer(Peer& peer, uint16_t port) : peer_(peer) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
          0 ||
      ::listen(listen_fd_, 16) < 0) {
    ::close(listen_fd_);
    throw TransportError("bind/listen failed: " +
                         std::string(std::strerror(errno)));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

PeerServer::~PeerServer() { Stop(); }

void PeerServer::Start() {
  acceptor_ = std::thread([this] { AcceptLoop(); });
}

void PeerServer::Stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(conn_mu_);
    for (int fd : connection_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : connections_) {
    if (t.joinable()) t.join();
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void PeerServer::AcceptLoop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(conn_mu_);
    connection_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { ServeConnection(fd); });
  }
}

void PeerServer::ServeConnection(int fd) {
  try {
    while (!stopping_) {
      auto request = RecvFrame(fd);
      if (!request) break;
      const wire::Frame reply = Handle(*request);
      if (!SendAll(fd, wire::EncodeFrame(reply))) break;
    }
  } catch (const ProtocolError&) {
    // Malformed stream: drop the connection.
  }
  ::close(fd);
}

wire::Frame PeerServer::Handle(const wire::Frame& request) {
  std::lock_guard lock(mu_);
  try {
    switch (request.opcode) {
      case wire::Opcode::kWrite: {
        const uint32_t ps = peer_.config().page_size;
        if (request.payload.size() != uint64_t{request.count} * ps) {
          return Ack(AckStatus::kProtocolError);
        }
        peer_.block(BlockId{request.block_id})
            .Write(request.offset, request.payload, clock_);
        return Ack(AckStatus::kOk);
      }
      case wire::Opcode::kRead: {
        const MRBlock& b = peer_.block(BlockId{request.block_id});
        if (b.receiving_migration()) return Ack(AckStatus::kProtocolError);
        std::vector<std::byte> out(uint64_t{request.count} *
                                   peer_.config().page_size);
        b.Read(request.offset, request.count, out);
        auto ack = Ack(AckStatus::kOk, std::move(out));
        ack.count = request.count;
        return ack;
      }
      case wire::Opcode::kCtrl: {
        const wire::ControlMessage msg = wire::DecodeControl(request.payload);
        clock_ = std::max(clock_, msg.value);
        return Ack(AckStatus::kOk, wire::EncodeReply(ServeControl(peer_, msg)));
      }
      case wire::Opcode::kAck:
        return Ack(AckStatus::kProtocolError);
    }
  } catch (const MappingError&) {
    return Ack(AckStatus::kMappingError);
  } catch (const ProtocolError&) {
    return Ack(AckStatus::kProtocolError);
  } catch (const Error&) {
    return Ack(AckStatus::kError);
  }
  return Ack(AckStatus::kProtocolError);
}

SocketBackend::~SocketBackend() {
  for (auto& [id, conn] : peers_) {
    if (conn->fd >= 0) ::close(conn->fd);
  }
}

void SocketBackend::AddPeer(PeerId peer, const std::string& host,
                            uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw ConfigError("bad peer address " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw TransportError("connect to " + host + ":" + std::to_string(port) +
                         " failed");
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  auto conn = std::make_unique<Connection>();
  conn->fd = fd;
  std::lock_guard lock(mu_);
  peers_[peer] = std::move(conn);
}

void SocketBackend::MarkFailed(PeerId peer) {
  std::lock_guard lock(mu_);
  auto it = peers_.find(peer);
  if (it != peers_.end()) it->second->failed = true;
}

bool SocketBackend::Exists(PeerId peer) const {
  std::lock_guard lock(mu_);
  return peers_.contains(peer);
}

bool SocketBackend::Alive(PeerId peer) const {
  std::lock_guard lock(mu_);
  auto it = peers_.find(peer);
  return it != peers_.end() && !it->second->failed;
}

wire::Frame SocketBackend::RoundTrip(PeerId peer, const wire::Frame& request) {
  Connection* conn = nullptr;
  {
    std::lock_guard lock(mu_);
    auto it = peers_.find(peer);
    if (it == peers_.end()) {
      throw TopologyError("unknown peer " + std::to_string(peer.value()));
    }
    conn = it->second.get();
  }
  std::lock_guard lock(conn->mu);
  if (conn->failed) {
    throw TransportError("peer " + std::to_string(peer.value()) +
                         " has failed");
  }
  std::optional<wire::Frame> reply;
  if (SendAll(conn->fd, wire::EncodeFrame(request))) reply = RecvFrame(conn->fd);
  if (!reply) {
    conn->failed = true;
    throw TransportError("peer " + std::to_string(peer.value()) +
                         " connection lost");
  }
  if (reply->opcode != wire::Opcode::kAck) {
    throw ProtocolError("expected ACK frame");
  }
  switch (static_cast<AckStatus>(reply->offset)) {
    case AckStatus::kOk:
      return std::move(*reply);
    case AckStatus::kMappingError:
      throw MappingError("peer " + std::to_string(peer.value()) +
                         ": unmapped block");
    case AckStatus::kProtocolError:
      throw ProtocolError("peer " + std::to_string(peer.value()) +
                          " rejected request");
    default:
      throw TransportError("peer " + std::to_string(peer.value()) +
                           " request failed");
  }
}

void SocketBackend::Write(PeerId peer, BlockId block, uint64_t offset,
                          std::span<const std::byte> pages, SimTime) {
  wire::Frame f;
  f.opcode = wire::Opcode::kWrite;
  f.block_id = block.value();
  f.offset = static_cast<uint32_t>(offset);
  f.count = static_cast<uint32_t>(pages.size() / page_size_);
  f.payload.assign(pages.begin(), pages.end());
  RoundTrip(peer, f);
}

void SocketBackend::Read(PeerId peer, BlockId block, uint64_t offset,
                         uint64_t count, std::span<std::byte> out) {
  wire::Frame f;
  f.opcode = wire::Opcode::kRead;
  f.block_id = block.value();
  f.offset = static_cast<uint32_t>(offset);
  f.count = static_cast<uint32_t>(count);
  const wire::Frame reply = RoundTrip(peer, f);
  if (reply.payload.size() != count * page_size_) {
    throw ProtocolError("short read payload");
  }
  std::memcpy(out.data(), reply.payload.data(), reply.payload.size());
}

wire::ControlReply SocketBackend::Control(PeerId peer,
                                          const wire::ControlMessage& msg) {
  wire::Frame f;
  f.opcode = wire::Opcode::kCtrl;
  f.block_id = msg.block_id;
  f.payload = wire::EncodeControl(msg);
  return wire::DecodeReply(RoundTrip(peer, f).payload);
}

void SocketBackend::Copy(PeerId src, BlockId src_block, PeerId dst,
                         BlockId dst_block, uint64_t first, uint64_t count) {
  std::vector<std::byte> buf(count * page_size_);
  Read(src, src_block, first, count, buf);
  Write(dst, dst_block, first, buf, 0);
}

}  // namespace tiermem
