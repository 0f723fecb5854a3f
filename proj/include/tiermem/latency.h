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

#ifndef TIERMEM_LATENCY_H_
#define TIERMEM_LATENCY_H_

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "tiermem/types.h"

namespace tiermem {

// Cost of each primitive in virtual time units. Values are configuration;
// the engine only relies on the orderings enforced by Validate().
struct LatencyModel {
  SimTime copy_per_page = 1;  // memcpy of one page
  SimTime index_insert = 1;   // page-table insert, per request
  SimTime enqueue = 1;        // staging-queue enqueue, per request
  SimTime net_write = 5;      // one message of up to message_size bytes
  SimTime net_read = 5;       // per page
  SimTime connect = 200;      // first contact with a peer
  SimTime map_block = 50;     // slab -> remote block mapping
  SimTime disk_write = 1000;  // per block-I/O
  SimTime disk_read = 500;    // per page

  // Throws ConfigError if a field is zero or disk is not slower than net.
  void Validate() const;
};

// Independent timelines advanced by charges. The foreground timeline is the
// client-visible critical path; the others run in parallel with it.
enum class Channel : uint8_t { kForeground, kDrainer, kDisk, kMigration };
inline constexpr size_t kChannelCount = 4;

enum class ChargeKind : uint8_t {
  kCopy,
  kIndexInsert,
  kEnqueue,
  kStall,
  kNetWrite,
  kNetRead,
  kConnect,
  kMapBlock,
  kDiskWrite,
  kDiskRead,
};
inline constexpr size_t kChargeKindCount = 10;

std::string_view ToString(Channel channel);
std::string_view ToString(ChargeKind kind);

// Network, disk, connection and mapping work: never allowed on the critical
// path of an asynchronous write.
constexpr bool IsIoCharge(ChargeKind kind) {
  return kind == ChargeKind::kNetWrite || kind == ChargeKind::kNetRead ||
         kind == ChargeKind::kConnect || kind == ChargeKind::kMapBlock ||
         kind == ChargeKind::kDiskWrite || kind == ChargeKind::kDiskRead;
}

enum class OpKind : uint8_t { kNone, kWrite, kRead };

struct ChargeRecord {
  uint64_t op_id;  // 0 outside any client operation
  OpKind op;
  Channel channel;
  ChargeKind kind;
  SimTime start;
  SimTime amount;
};

// Virtual clock of one sender node: a time counter per channel plus an
// optional trace of every charge. Charges go to the channel selected by the
// innermost ChannelScope (foreground by default).
class LatencyLedger {
 public:
  class ChannelScope {
   public:
    ChannelScope(LatencyLedger& ledger, Channel channel)
        : ledger_(ledger), saved_(ledger.current_) {
      ledger_.current_ = channel;
    }
    ~ChannelScope() { ledger_.current_ = saved_; }
    ChannelScope(const ChannelScope&) = delete;
    ChannelScope& operator=(const ChannelScope&) = delete;

   private:
    LatencyLedger& ledger_;
    Channel saved_;
  };

  LatencyLedger() { clocks_.fill(0); }

  Channel channel() const { return current_; }
  SimTime now() const { return now(current_); }
  SimTime now(Channel channel) const {
    return clocks_[static_cast<size_t>(channel)];
  }

  // Advances the current channel by `amount` and records the charge.
  void Charge(ChargeKind kind, SimTime amount);

  // Moves `channel` forward to `t` without recording a charge; an idle
  // timeline catching up with work that arrived later.
  void AdvanceTo(Channel channel, SimTime t);

  uint64_t BeginOp(OpKind kind);
  void EndOp();
  uint64_t current_op() const { return op_id_; }

  SimTime total(ChargeKind kind) const {
    return totals_[static_cast<size_t>(kind)];
  }
  uint64_t count(ChargeKind kind) const {
    return counts_[static_cast<size_t>(kind)];
  }
  SimTime total(Channel channel, ChargeKind kind) const {
    return channel_totals_[static_cast<size_t>(channel)]
                          [static_cast<size_t>(kind)];
  }

  // I/O charges observed on the foreground channel while a write was open.
  uint64_t critical_path_violations() const { return violations_; }

  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<ChargeRecord>& trace() const { return trace_; }
  void ClearTrace() { trace_.clear(); }

 private:
  std::array<SimTime, kChannelCount> clocks_;
  std::array<SimTime, kChargeKindCount> totals_{};
  std::array<uint64_t, kChargeKindCount> counts_{};
  std::array<std::array<SimTime, kChargeKindCount>, kChannelCount>
      channel_totals_{};
  Channel current_ = Channel::kForeground;
  uint64_t next_op_id_ = 1;
  uint64_t op_id_ = 0;
  OpKind op_kind_ = OpKind::kNone;
  uint64_t violations_ = 0;
  bool tracing_ = false;
  std::vector<ChargeRecord> trace_;
};

}  // namespace tiermem

#endif  // TIERMEM_LATENCY_H_
