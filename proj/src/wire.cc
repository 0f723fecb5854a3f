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

#include "tiermem/wire.h"

#include <string>

namespace tiermem::wire {
namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::byte>& out) : out_(out) {}

  template <typename T>
  void Put(T value) {
    for (size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::byte>(
          (static_cast<uint64_t>(value) >> (8 * i)) & 0xff));
    }
  }

 private:
  std::vector<std::byte>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}

  template <typename T>
  T Get() {
    if (pos_ + sizeof(T) > in_.size()) {
      throw ProtocolError("wire: truncated field");
    }
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<uint64_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  size_t pos() const { return pos_; }

 private:
  std::span<const std::byte> in_;
  size_t pos_ = 0;
};

bool ValidOpcode(uint8_t op) { return op >= 1 && op <= 4; }

}  // namespace

std::vector<std::byte> EncodeFrame(const Frame& frame) {
  const size_t body = kHeaderBytes + frame.payload.size();
  if (body > kMaxFrameBytes) throw ProtocolError("wire: frame too large");
  std::vector<std::byte> out;
  out.reserve(kLengthBytes + body);
  Writer w(out);
  w.Put(static_cast<uint32_t>(body));
  w.Put(static_cast<uint8_t>(frame.opcode));
  w.Put(frame.block_id);
  w.Put(frame.offset);
  w.Put(frame.count);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

std::optional<Frame> DecodeFrame(std::span<const std::byte> buf,
                                 size_t* consumed) {
  if (buf.size() < kLengthBytes) return std::nullopt;
  Reader len_reader(buf);
  const auto body = len_reader.Get<uint32_t>();
  if (body < kHeaderBytes || body > kMaxFrameBytes) {
    throw ProtocolError("wire: bad frame length " + std::to_string(body));
  }
  if (buf.size() < kLengthBytes + body) return std::nullopt;
  Reader r(buf.subspan(kLengthBytes, body));
  Frame f;
  const auto op = r.Get<uint8_t>();
  if (!ValidOpcode(op)) {
    throw ProtocolError("wire: bad opcode " + std::to_string(op));
  }
  f.opcode = static_cast<Opcode>(op);
  f.block_id = r.Get<uint64_t>();
  f.offset = r.Get<uint32_t>();
  f.count = r.Get<uint32_t>();
  auto payload = buf.subspan(kLengthBytes + kHeaderBytes, body - kHeaderBytes);
  f.payload.assign(payload.begin(), payload.end());
  if (consumed != nullptr) *consumed = kLengthBytes + body;
  return f;
}

std::vector<std::byte> EncodeControl(const ControlMessage& msg) {
  std::vector<std::byte> out;
  out.reserve(kControlMessageBytes);
  Writer w(out);
  w.Put(static_cast<uint8_t>(msg.op));
  w.Put(msg.slab_id);
  w.Put(msg.session_id);
  w.Put(msg.sender_id);
  w.Put(msg.peer_id);
  w.Put(msg.block_id);
  w.Put(msg.dst_peer);
  w.Put(msg.dst_block);
  w.Put(msg.value);
  return out;
}

ControlMessage DecodeControl(std::span<const std::byte> buf) {
  if (buf.size() != kControlMessageBytes) {
    throw ProtocolError("wire: control message has wrong size");
  }
  Reader r(buf);
  ControlMessage msg;
  const auto op = r.Get<uint8_t>();
  if (op < 1 || op > 7) {
    throw ProtocolError("wire: bad control op " + std::to_string(op));
  }
  msg.op = static_cast<ControlOp>(op);
  msg.slab_id = r.Get<uint64_t>();
  msg.session_id = r.Get<uint64_t>();
  msg.sender_id = r.Get<uint32_t>();
  msg.peer_id = r.Get<uint32_t>();
  msg.block_id = r.Get<uint64_t>();
  msg.dst_peer = r.Get<uint32_t>();
  msg.dst_block = r.Get<uint64_t>();
  msg.value = r.Get<uint64_t>();
  return msg;
}

std::vector<std::byte> EncodeReply(const ControlReply& reply) {
  std::vector<std::byte> out;
  out.reserve(kControlReplyBytes);
  Writer w(out);
  w.Put(static_cast<uint8_t>(reply.status));
  w.Put(reply.block_id);
  w.Put(reply.free_bytes);
  return out;
}

ControlReply DecodeReply(std::span<const std::byte> buf) {
  if (buf.size() != kControlReplyBytes) {
    throw ProtocolError("wire: control reply has wrong size");
  }
  Reader r(buf);
  ControlReply reply;
  const auto status = r.Get<uint8_t>();
  if (status > 2) throw ProtocolError("wire: bad reply status");
  reply.status = static_cast<ReplyStatus>(status);
  reply.block_id = r.Get<uint64_t>();
  reply.free_bytes = r.Get<uint64_t>();
  return reply;
}

}  // namespace tiermem::wire
