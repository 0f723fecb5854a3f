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

#ifndef TIERMEM_WIRE_H_
#define TIERMEM_WIRE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tiermem/types.h"

namespace tiermem::wire {

// Frame layout, little-endian throughout:
//   u32 length   bytes following this field
//   u8  opcode
//   u64 block_id
//   u32 offset   page offset in block; status code in ACK frames
//   u32 count    page count
//   payload
enum class Opcode : uint8_t { kWrite = 1, kRead = 2, kCtrl = 3, kAck = 4 };

inline constexpr size_t kLengthBytes = 4;
inline constexpr size_t kHeaderBytes = 1 + 8 + 4 + 4;
inline constexpr uint32_t kMaxFrameBytes = 1u << 30;

struct Frame {
  Opcode opcode = Opcode::kAck;
  uint64_t block_id = 0;
  uint32_t offset = 0;
  uint32_t count = 0;
  std::vector<std::byte> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

std::vector<std::byte> EncodeFrame(const Frame& frame);

// Decodes the frame at the front of `buf`. Returns nullopt when `buf` does not
// yet hold a whole frame; throws ProtocolError on a malformed one.
std::optional<Frame> DecodeFrame(std::span<const std::byte> buf,
                                 size_t* consumed);

// Migration / placement control messages carried in CTRL payloads.
enum class ControlOp : uint8_t {
  kEvictReq = 1,
  kAllocBlk = 2,
  kCopyBegin = 3,
  kCopyDone = 4,
  kReleaseBlk = 5,
  kAbort = 6,
  kQueryFree = 7,
};

struct ControlMessage {
  ControlOp op = ControlOp::kQueryFree;
  uint64_t slab_id = 0;
  uint64_t session_id = 0;
  uint32_t sender_id = 0;
  uint32_t peer_id = 0;
  uint64_t block_id = 0;
  uint32_t dst_peer = 0;
  uint64_t dst_block = 0;
  uint64_t value = 0;  // virtual time at the sender

  friend bool operator==(const ControlMessage&, const ControlMessage&) =
      default;
};

enum class ReplyStatus : uint8_t { kOk = 0, kRefused = 1, kError = 2 };

struct ControlReply {
  ReplyStatus status = ReplyStatus::kOk;
  uint64_t block_id = 0;
  uint64_t free_bytes = 0;  // advertisement refreshed on every round trip

  friend bool operator==(const ControlReply&, const ControlReply&) = default;
};

inline constexpr size_t kControlMessageBytes = 1 + 8 + 8 + 4 + 4 + 8 + 4 + 8 + 8;
inline constexpr size_t kControlReplyBytes = 1 + 8 + 8;

std::vector<std::byte> EncodeControl(const ControlMessage& msg);
ControlMessage DecodeControl(std::span<const std::byte> buf);
std::vector<std::byte> EncodeReply(const ControlReply& reply);
ControlReply DecodeReply(std::span<const std::byte> buf);

}  // namespace tiermem::wire

#endif  // TIERMEM_WIRE_H_
